/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include "lara/value.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lara {

/// An aggregate operator: a family of partial functions from finite multisets
/// of values to a value, with an optional neutral element used for padding.
///
/// Multisets are passed as spans. Commutative operators ignore the order;
/// `div` is the one order-sensitive operator and reads its two arguments as
/// (dividend, divisor).
struct AggOp {
    std::string name;
    std::optional<Value> neutral;
    bool binaryOnly = false;
    std::function<Value(std::span<const Value>)> fn;

    /// Throws Error(Eval) when the multiset size is outside the operator's domain.
    Value apply(std::span<const Value> elems) const;
    Value apply(std::initializer_list<Value> elems) const {
        return apply(std::span<const Value>(elems.begin(), elems.size()));
    }
};

class AggRegistry {
public:
    void add(AggOp op);
    const AggOp* find(const std::string& name) const;
    const AggOp& get(const std::string& name) const;  // throws Error(Sort) for unknown names
    std::vector<std::string> names() const;

private:
    std::map<std::string, AggOp> ops_;
};

/// sum, prod, min, max, count, avg, func, the lifted binary add and mul, and div.
const AggRegistry& builtinAggregates();

struct NeutralLawReport {
    bool passed = true;
    std::size_t checked = 0;
    std::vector<std::string> failures;
};

/// Checks apply(M) == apply(M plus any number of neutrals) on every sample and
/// on `randomSamples` random multisets of size 0..6 drawn with `seed`.
/// Binary-only operators are checked as a two-sided identity instead.
NeutralLawReport checkNeutralLaw(const AggOp& op,
                                 const std::vector<std::vector<Value>>& samples,
                                 std::size_t randomSamples = 1000,
                                 std::uint64_t seed = 1);

}  // namespace lara

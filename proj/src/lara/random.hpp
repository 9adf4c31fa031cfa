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

#include "lara/algebra.hpp"
#include "lara/table.hpp"

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace lara::rnd {

/// Seeded generator with platform-independent draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t below(std::uint64_t n) { return n ? engine_() % n : 0; }
    long range(long lo, long hi) { return lo + static_cast<long>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
    bool chance(unsigned percent) { return below(100) < percent; }

    template <typename T>
    const T& pick(const std::vector<T>& xs) {
        return xs[below(xs.size())];
    }

private:
    std::mt19937_64 engine_;
};

/// Schema and key-equality-only functions shared by the randomized suites:
/// R[(a,b),(x,y)], S[(b,c),(y,z)], T[(a),(x)], U[(c),()].
Environment tameEnvironment();

/// A database over the relations of `env.schema` whose keys are drawn from at
/// most `maxKeys` distinct integer and text keys.
Database randomDatabase(Rng& rng, const Environment& env, std::size_t maxKeys = 6);

/// A well-sorted expression of depth at most `maxDepth` using only tame
/// functions, builtins and aggregates from `env`.
ExprPtr randomExpr(Rng& rng, const Environment& env, int maxDepth = 4);

/// Injective renaming of `keys`, possibly onto keys of the other kind.
KeyPermutation randomPermutation(Rng& rng, const std::set<Key>& keys);

/// A random matrix as a table of sort ((i,j),(v)) with integer keys from 1.
AssocTable randomMatrix(Rng& rng, std::size_t rows, std::size_t cols, const std::string& rowAttr = "i",
                        const std::string& colAttr = "j", const std::string& valAttr = "v");

/// Source text of a random DSL function that is safe and functional by
/// construction, with signature (keys x1,x2 ; vals i1,i2) -> (keys y1 ; vals j1).
std::string randomSafeFunction(Rng& rng, const std::string& name);

}  // namespace lara::rnd

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

#include "lara/aggregates.hpp"

#include "lara/error.hpp"

#include <algorithm>
#include <random>

namespace lara {

Value AggOp::apply(std::span<const Value> elems) const {
    if (binaryOnly && elems.size() != 2) {
        fail(ErrorKind::Eval, "aggregate '" + name + "' is binary and undefined on a multiset of size " +
                                  std::to_string(elems.size()));
    }
    return fn(elems);
}

void AggRegistry::add(AggOp op) {
    std::string key = op.name;
    ops_.insert_or_assign(std::move(key), std::move(op));
}

const AggOp* AggRegistry::find(const std::string& name) const {
    auto it = ops_.find(name);
    return it == ops_.end() ? nullptr : &it->second;
}

const AggOp& AggRegistry::get(const std::string& name) const {
    if (const AggOp* op = find(name)) return *op;
    fail(ErrorKind::Sort, "unknown aggregate operator '" + name + "'");
}

std::vector<std::string> AggRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : ops_) out.push_back(name);
    return out;
}

namespace {

Value sumOf(std::span<const Value> xs) {
    Value acc(0);
    for (const Value& x : xs) acc = acc + x;
    return acc;
}

Value prodOf(std::span<const Value> xs) {
    Value acc(1);
    for (const Value& x : xs) acc = acc * x;
    return acc;
}

AggRegistry makeBuiltins() {
    AggRegistry reg;
    reg.add({"sum", Value(0), false, sumOf});
    reg.add({"prod", Value(1), false, prodOf});
    reg.add({"min", Value::posInf(), false, [](std::span<const Value> xs) {
                 Value best = Value::posInf();
                 for (const Value& x : xs) {
                     if (x.isNonValue()) return Value::nonValue();
                     if (x < best) best = x;
                 }
                 return best;
             }});
    reg.add({"max", Value::negInf(), false, [](std::span<const Value> xs) {
                 Value best = Value::negInf();
                 for (const Value& x : xs) {
                     if (x.isNonValue()) return Value::nonValue();
                     if (x > best) best = x;
                 }
                 return best;
             }});
    // Counts rows; has no neutral element.
    reg.add({"count", std::nullopt, false, [](std::span<const Value> xs) {
                 return Value(mpq_class(static_cast<unsigned long>(xs.size())));
             }});
    reg.add({"avg", std::nullopt, false, [](std::span<const Value> xs) {
                 if (xs.empty()) fail(ErrorKind::Eval, "avg is undefined on the empty multiset");
                 return sumOf(xs) / Value(mpq_class(static_cast<unsigned long>(xs.size())));
             }});
    reg.add({"func", std::nullopt, false, [](std::span<const Value> xs) {
                 return xs.size() == 1 ? xs[0] : Value::nonValue();
             }});
    reg.add({"add", Value(0), true, sumOf});
    reg.add({"mul", Value(1), true, prodOf});
    reg.add({"div", std::nullopt, true, [](std::span<const Value> xs) { return xs[0] / xs[1]; }});
    return reg;
}

std::string render(const std::vector<Value>& m) {
    std::string out = "{{";
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i) out += ",";
        out += m[i].toString();
    }
    return out + "}}";
}

}  // namespace

const AggRegistry& builtinAggregates() {
    static const AggRegistry reg = makeBuiltins();
    return reg;
}

NeutralLawReport checkNeutralLaw(const AggOp& op,
                                 const std::vector<std::vector<Value>>& samples,
                                 std::size_t randomSamples,
                                 std::uint64_t seed) {
    NeutralLawReport report;
    if (!op.neutral) {
        report.passed = false;
        report.failures.push_back("aggregate '" + op.name + "' has no neutral element");
        return report;
    }
    const Value& zero = *op.neutral;
    std::mt19937_64 rng(seed);

    auto checkOne = [&](const std::vector<Value>& m, std::size_t injected) {
        if (op.binaryOnly) {
            for (const Value& a : m) {
                ++report.checked;
                Value left = op.apply({zero, a});
                Value right = op.apply({a, zero});
                if (left != a || right != a) {
                    report.passed = false;
                    report.failures.push_back(op.name + ": " + a.toString() + " is changed by the neutral " +
                                              zero.toString());
                }
            }
            return;
        }
        Value base;
        try {
            base = op.apply(std::span<const Value>(m));
        } catch (const Error&) {
            return;  // outside the operator's domain
        }
        std::vector<Value> extended = m;
        for (std::size_t k = 0; k < injected; ++k) {
            std::uniform_int_distribution<std::size_t> pos(0, extended.size());
            extended.insert(extended.begin() + static_cast<std::ptrdiff_t>(pos(rng)), zero);
        }
        ++report.checked;
        Value after = op.apply(std::span<const Value>(extended));
        if (after != base) {
            report.passed = false;
            report.failures.push_back(op.name + render(m) + " = " + base.toString() + " but with " +
                                      std::to_string(injected) + " neutral(s) = " + after.toString());
        }
    };

    std::uniform_int_distribution<int> count(1, 3);
    for (const auto& m : samples) checkOne(m, static_cast<std::size_t>(count(rng)));

    std::uniform_int_distribution<int> size(0, 6);
    std::uniform_int_distribution<int> num(-20, 20);
    std::uniform_int_distribution<int> den(1, 4);
    for (std::size_t s = 0; s < randomSamples; ++s) {
        std::vector<Value> m(static_cast<std::size_t>(size(rng)));
        for (auto& v : m) v = Value::rational(num(rng), den(rng));
        checkOne(m, static_cast<std::size_t>(count(rng)));
    }
    return report;
}

}  // namespace lara

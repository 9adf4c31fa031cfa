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

#include "lara/table.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lara::dsl {

/// A key or a value; the two sorts of the logic.
using Datum = std::variant<Key, Value>;

std::string datumToString(const Datum& d);

inline constexpr std::size_t kMaxVars = 256;

/// A set of variable ids.
struct VarSet {
    std::array<std::uint64_t, kMaxVars / 64> words{};

    void set(std::size_t i) { words[i / 64] |= std::uint64_t{1} << (i % 64); }
    void reset(std::size_t i) { words[i / 64] &= ~(std::uint64_t{1} << (i % 64)); }
    bool test(std::size_t i) const { return (words[i / 64] >> (i % 64)) & 1U; }
    bool empty() const;
    bool subsetOf(const VarSet& o) const;
    VarSet operator|(const VarSet& o) const;
    VarSet operator&(const VarSet& o) const;
    VarSet minus(const VarSet& o) const;
    std::optional<std::size_t> first() const;

    friend auto operator<=>(const VarSet&, const VarSet&) = default;
};

enum class VarSort : std::uint8_t { Key, Val };

struct Variable {
    std::string name;
    VarSort sort;
};

/// A numeric predicate over rationals. Each mode lists a set of argument
/// positions (bitmask) from which the remaining arguments can be computed.
struct Predicate {
    std::string name;
    std::size_t arity = 0;
    std::vector<unsigned> modes;
    /// Called with the bound arguments of one satisfied mode (others empty);
    /// returns every full argument tuple satisfying the predicate that agrees
    /// with the bound ones. Throws Error(Eval) when that set is infinite.
    std::function<std::vector<std::vector<Value>>(const std::vector<std::optional<Value>>&)> solve;

    bool canSolve(unsigned boundMask) const;
    bool holds(const std::vector<Value>& args) const;
};

class PredicateRegistry {
public:
    void add(Predicate p);
    const Predicate* find(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, Predicate> preds_;
};

/// add, sub, mul, div, eq, neq, lt, leq, isint, floor, expApprox.
const PredicateRegistry& builtinPredicates();

struct Term {
    bool isVar = true;
    std::size_t var = 0;
    Datum constant;
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    enum class Kind : std::uint8_t { True, False, KeyEq, KeyLt, Pred, And, Or, Not, Exists };
    Kind kind = Kind::True;
    std::vector<Term> terms;          // KeyEq, KeyLt, Pred
    const Predicate* pred = nullptr;  // Pred
    std::vector<NodePtr> kids;        // And, Or (n-ary), Not, Exists (one)
    std::size_t var = 0;              // Exists
    VarSet free;
};

/// A parsed and sort-resolved formula together with its variable table.
/// Variable ids 0..numFree-1 are the free variables of the enclosing
/// function signature; bound variables get fresh ids.
struct Formula {
    NodePtr root;
    std::vector<Variable> vars;
    bool usesOrder = false;      // contains a key `<` atom
    bool usesKeyConst = false;   // mentions a key constant

    std::string toString() const;
};

/// `fn name (keys x,y ; vals i) -> (keys y2 ; vals j) := formula`
struct Function {
    std::string name;
    Sort in;
    Sort out;
    Formula body;

    std::string toString() const;
    bool ordered() const { return body.usesOrder; }
};

using FunctionPtr = std::shared_ptr<const Function>;

/// Parses one function definition. `line` offsets diagnostics.
FunctionPtr parseFunction(std::string_view text, std::size_t line = 1);

/// Parses a formula whose free variables are the given attributes.
Formula parseFormula(std::string_view text, const Sort& freeVars, std::size_t line = 1);

/// Static safety check: every output and quantified variable must be computable
/// along every path from the inputs. Throws Error(Safety) naming the offending
/// variable.
void checkSafety(const Function& f);

/// Evaluates `f` on one input tuple (keys in f.in.keys order, values in f.in.vals
/// order). Key quantifiers range over the keys of that tuple.
AssocTable evaluate(const Function& f, const KeyTuple& keys, const ValueTuple& vals);

/// Naive model check of `f` on one tuple: enumerates key variables over the
/// input keys and value variables over `valueGrid`. Test oracle only.
AssocTable bruteForce(const Function& f,
                      const KeyTuple& keys,
                      const ValueTuple& vals,
                      const std::vector<Value>& valueGrid);

}  // namespace lara::dsl

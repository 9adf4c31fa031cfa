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
#include "lara/dsl.hpp"
#include "lara/extfn.hpp"
#include "lara/table.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lara::fo {

enum class VarSort : std::uint8_t { Key, Val };

struct Var {
    std::string name;
    VarSort sort = VarSort::Key;

    friend bool operator==(const Var&, const Var&) = default;
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;
struct Term;
using TermPtr = std::shared_ptr<const Term>;

/// Value term: constant, variable, aggregate Agg_op ȳ (τ, φ), or the
/// placeholder for a padding neutral that does not exist (fails if evaluated).
struct Term {
    enum class Kind : std::uint8_t { Const, Var, Agg, MissingNeutral };

    Kind kind = Kind::Const;
    Value constant;
    std::string var;
    std::string op;            // Agg, MissingNeutral
    std::vector<Var> bound;    // Agg: ȳ in enumeration order
    TermPtr inner;             // Agg: τ
    FormulaPtr body;           // Agg: φ
    bool pairwise = false;     // Agg: exactly one tuple per flag value 0, 1
    std::vector<Var> free;
};

struct Formula {
    enum class Kind : std::uint8_t {
        Bottom,    // ⊥ over `vars`
        Rel,       // R(x̄, ī)
        KeyEq,     // x = y
        KeyConst,  // x = constant key
        ValEq,     // j = τ
        FnAtom,    // R_f(x̄_in, x̄_out, ī_in, ī_out)
        And,
        Or,
        AndNot,    // φ ∧ ¬ψ
        Exists,
    };

    Kind kind = Kind::Bottom;
    std::string rel;
    std::vector<Var> vars;  // Rel: x̄ then ī; KeyEq: x, y; KeyConst/ValEq: the variable; Exists: bound
    Key key;                // KeyConst
    TermPtr term;           // ValEq
    std::shared_ptr<const ExtFn> fn;
    std::vector<Var> inKeys, outKeys, inVals, outVals;  // FnAtom
    std::vector<FormulaPtr> kids;
    std::string label;      // printed as a separate definition when set
    std::vector<Var> free;
};

namespace build {

FormulaPtr bottom(std::vector<Var> vars);
FormulaPtr rel(std::string name, std::vector<Var> keys, std::vector<Var> vals);
FormulaPtr keyEq(Var a, Var b);
FormulaPtr keyConst(Var a, Key k);
FormulaPtr valEq(Var a, TermPtr t);
FormulaPtr fnAtom(std::shared_ptr<const ExtFn> fn,
                  std::vector<Var> inKeys,
                  std::vector<Var> outKeys,
                  std::vector<Var> inVals,
                  std::vector<Var> outVals);
FormulaPtr conj(std::vector<FormulaPtr> kids);
FormulaPtr disj(std::vector<FormulaPtr> kids);
FormulaPtr andNot(FormulaPtr phi, FormulaPtr psi);
FormulaPtr exists(std::vector<Var> vars, FormulaPtr body);
FormulaPtr labelled(FormulaPtr f, std::string label);

TermPtr constant(Value v);
TermPtr var(Var v);
TermPtr agg(std::string op, std::vector<Var> bound, TermPtr inner, FormulaPtr body, bool pairwise = false);
TermPtr missingNeutral(std::string op);

}  // namespace build

/// A query (φ, ⊕): φ's free key variables in `keys`, free value variables in
/// `vals`, combined by the resolver ⊕. `sort` names the attribute carried by
/// each free variable, in the same order.
struct Query {
    FormulaPtr formula;
    std::string resolver = "func";
    std::vector<Var> keys;
    std::vector<Var> vals;
    Sort sort;

    /// Formula text with shared subformulas as labelled definitions.
    std::string toString() const;
};

/// Query equivalent to `e` on every database over `env.schema`.
Query translate(const ExprPtr& e, const Environment& env);

/// Throws Error(Safety) unless every subformula is in the safe fragment:
/// conjunctions extend a generator by equalities and function atoms whose
/// inputs are bound, disjuncts share free variables, negation only as φ ∧ ¬ψ.
void validate(const Query& q);

/// Q^D under the active-domain semantics, as a table of sort `q.sort`.
AssocTable evaluate(const Query& q, const Environment& env, const Database& db);

struct DiffResult {
    bool equal = false;
    AssocTable algebra;
    AssocTable logic;
    std::string algebraText;
    std::string logicText;
    std::string firstDifference;  // first differing line of the two serializations
};

/// Evaluates `e` directly and through its translation and compares the
/// canonical serializations byte for byte.
DiffResult diffTest(const ExprPtr& e, const Environment& env, const Database& db);

}  // namespace lara::fo

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

#include "lara/foagg.hpp"

#include "lara/error.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace lara::fo {

using dsl::Datum;

namespace {

void addVars(std::vector<Var>& out, const std::vector<Var>& in) {
    for (const auto& v : in) {
        bool seen = std::any_of(out.begin(), out.end(), [&](const Var& o) { return o.name == v.name; });
        if (!seen) out.push_back(v);
    }
}

std::vector<Var> withoutVars(const std::vector<Var>& in, const std::vector<Var>& drop) {
    std::vector<Var> out;
    for (const auto& v : in) {
        bool dropped = std::any_of(drop.begin(), drop.end(), [&](const Var& d) { return d.name == v.name; });
        if (!dropped) out.push_back(v);
    }
    return out;
}

std::set<std::string> names(const std::vector<Var>& vs) {
    std::set<std::string> out;
    for (const auto& v : vs) out.insert(v.name);
    return out;
}

bool subset(const std::vector<Var>& a, const std::set<std::string>& b) {
    return std::all_of(a.begin(), a.end(), [&](const Var& v) { return b.count(v.name) > 0; });
}

std::string joinNames(const std::vector<Var>& vs) {
    std::string out;
    for (std::size_t i = 0; i < vs.size(); ++i) out += (i ? "," : "") + vs[i].name;
    return out;
}

bool isExtender(Formula::Kind k) {
    return k == Formula::Kind::KeyEq || k == Formula::Kind::KeyConst || k == Formula::Kind::ValEq ||
           k == Formula::Kind::FnAtom;
}

std::shared_ptr<Formula> node(Formula::Kind k) {
    auto f = std::make_shared<Formula>();
    f->kind = k;
    return f;
}

}  // namespace

namespace build {

FormulaPtr bottom(std::vector<Var> vars) {
    auto f = node(Formula::Kind::Bottom);
    f->free = vars;
    f->vars = std::move(vars);
    return f;
}

FormulaPtr rel(std::string name, std::vector<Var> keys, std::vector<Var> vals) {
    auto f = node(Formula::Kind::Rel);
    f->rel = std::move(name);
    f->vars = std::move(keys);
    f->vars.insert(f->vars.end(), vals.begin(), vals.end());
    addVars(f->free, f->vars);
    return f;
}

FormulaPtr keyEq(Var a, Var b) {
    auto f = node(Formula::Kind::KeyEq);
    f->vars = {std::move(a), std::move(b)};
    addVars(f->free, f->vars);
    return f;
}

FormulaPtr keyConst(Var a, Key k) {
    auto f = node(Formula::Kind::KeyConst);
    f->vars = {std::move(a)};
    f->key = std::move(k);
    f->free = f->vars;
    return f;
}

FormulaPtr valEq(Var a, TermPtr t) {
    auto f = node(Formula::Kind::ValEq);
    f->vars = {std::move(a)};
    f->free = f->vars;
    addVars(f->free, t->free);
    f->term = std::move(t);
    return f;
}

FormulaPtr fnAtom(std::shared_ptr<const ExtFn> fn,
                  std::vector<Var> inKeys,
                  std::vector<Var> outKeys,
                  std::vector<Var> inVals,
                  std::vector<Var> outVals) {
    auto f = node(Formula::Kind::FnAtom);
    f->fn = std::move(fn);
    for (const auto* l : {&inKeys, &outKeys, &inVals, &outVals}) addVars(f->free, *l);
    f->inKeys = std::move(inKeys);
    f->outKeys = std::move(outKeys);
    f->inVals = std::move(inVals);
    f->outVals = std::move(outVals);
    return f;
}

FormulaPtr conj(std::vector<FormulaPtr> kids) {
    if (kids.size() == 1) return kids.front();
    auto f = node(Formula::Kind::And);
    for (const auto& k : kids) addVars(f->free, k->free);
    f->kids = std::move(kids);
    return f;
}

FormulaPtr disj(std::vector<FormulaPtr> kids) {
    if (kids.size() == 1) return kids.front();
    auto f = node(Formula::Kind::Or);
    for (const auto& k : kids) addVars(f->free, k->free);
    f->kids = std::move(kids);
    return f;
}

FormulaPtr andNot(FormulaPtr phi, FormulaPtr psi) {
    auto f = node(Formula::Kind::AndNot);
    addVars(f->free, phi->free);
    addVars(f->free, psi->free);
    f->kids = {std::move(phi), std::move(psi)};
    return f;
}

FormulaPtr exists(std::vector<Var> vars, FormulaPtr body) {
    if (vars.empty()) return body;
    auto f = node(Formula::Kind::Exists);
    f->free = withoutVars(body->free, vars);
    f->vars = std::move(vars);
    f->kids = {std::move(body)};
    return f;
}

FormulaPtr labelled(FormulaPtr f, std::string label) {
    auto copy = std::make_shared<Formula>(*f);
    copy->label = std::move(label);
    return copy;
}

TermPtr constant(Value v) {
    auto t = std::make_shared<Term>();
    t->kind = Term::Kind::Const;
    t->constant = std::move(v);
    return t;
}

TermPtr var(Var v) {
    auto t = std::make_shared<Term>();
    t->kind = Term::Kind::Var;
    t->var = v.name;
    t->free = {std::move(v)};
    return t;
}

TermPtr agg(std::string op, std::vector<Var> bound, TermPtr inner, FormulaPtr body, bool pairwise) {
    auto t = std::make_shared<Term>();
    t->kind = Term::Kind::Agg;
    t->op = std::move(op);
    std::vector<Var> all = body->free;
    addVars(all, inner->free);
    t->free = withoutVars(all, bound);
    t->bound = std::move(bound);
    t->inner = std::move(inner);
    t->body = std::move(body);
    t->pairwise = pairwise;
    return t;
}

TermPtr missingNeutral(std::string op) {
    auto t = std::make_shared<Term>();
    t->kind = Term::Kind::MissingNeutral;
    t->op = std::move(op);
    return t;
}

}  // namespace build

// ---------------------------------------------------------------------------
// Translation
// ---------------------------------------------------------------------------

namespace {

struct Translated {
    FormulaPtr phi;
    std::vector<Var> keys;  // aligned with the sort's keys
    std::vector<Var> vals;  // aligned with the sort's values
};

class Translator {
public:
    explicit Translator(const Environment& env) : env_(env), typer_(env) {}

    Typer& typer() { return typer_; }

    Translated translate(const ExprPtr& e) {
        const Sort& s = typer_.sortOf(e);
        switch (e->kind) {
            case Expr::Kind::Empty: {
                Translated t{nullptr, freshAll(s.keys, VarSort::Key), freshAll(s.vals, VarSort::Val)};
                std::vector<Var> all = t.keys;
                all.insert(all.end(), t.vals.begin(), t.vals.end());
                t.phi = build::bottom(std::move(all));
                return t;
            }
            case Expr::Kind::Atom: {
                Translated t{nullptr, freshAll(s.keys, VarSort::Key), freshAll(s.vals, VarSort::Val)};
                t.phi = build::rel(e->rel, t.keys, t.vals);
                return t;
            }
            case Expr::Kind::Join: return translateJoin(e);
            case Expr::Kind::Union: return translateUnion(e);
            case Expr::Kind::Ext: return translateExt(e);
            default: fail(ErrorKind::Structural, "translation expects a core expression, got " + toString(e));
        }
    }

private:
    Var fresh(const std::string& attr, VarSort sort) {
        for (;;) {
            std::string name = attr + "_" + std::to_string(++counters_[attr]);
            if (used_.insert(name).second) return Var{name, sort};
        }
    }

    std::vector<Var> freshAll(const std::vector<std::string>& attrs, VarSort sort) {
        std::vector<Var> out;
        for (const auto& a : attrs) out.push_back(fresh(a, sort));
        return out;
    }

    std::string label() { return "α" + std::to_string(++labels_); }

    static const Var& lookup(const std::vector<Var>& vars, const std::vector<std::string>& attrs, const std::string& a) {
        auto it = std::find(attrs.begin(), attrs.end(), a);
        return vars.at(static_cast<std::size_t>(it - attrs.begin()));
    }

    /// j̄ = pad(ī): one equality per output value attribute.
    std::vector<FormulaPtr> pad(const std::vector<Var>& j,
                                const std::vector<std::string>& outVals,
                                const Translated& side,
                                const Sort& sideSort,
                                const AggOp& op) {
        std::vector<FormulaPtr> out;
        for (std::size_t l = 0; l < outVals.size(); ++l) {
            TermPtr t;
            if (auto idx = sideSort.valIndex(outVals[l])) {
                t = build::var(side.vals[*idx]);
            } else if (op.neutral) {
                t = build::constant(*op.neutral);
            } else {
                t = build::missingNeutral(op.name);
            }
            out.push_back(build::valEq(j[l], std::move(t)));
        }
        return out;
    }

    // α(x̄1, x̄2, j̄, f) := ∃ī1,ī2((φ1 ∧ φ2 ∧ χ ∧ j̄ = pad(ī1) ∧ f = 0) ∨ (φ1 ∧ φ2 ∧ χ ∧ j̄ = pad(ī2) ∧ f = 1))
    // φ(x̄, ī) := ∃x̄2'(∃j̄,f α ∧ ⋀ i[ℓ] = Agg_⊗ f,j̄ (j̄[ℓ], α))
    Translated translateJoin(const ExprPtr& e) {
        const Sort& s = typer_.sortOf(e);
        const Sort& s1 = typer_.sortOf(e->kids[0]);
        const Sort& s2 = typer_.sortOf(e->kids[1]);
        const AggOp& op = typer_.aggOf(e);
        Translated t1 = translate(e->kids[0]);
        Translated t2 = translate(e->kids[1]);

        std::vector<FormulaPtr> chi;
        std::vector<Var> shared2;
        for (std::size_t k = 0; k < s2.keys.size(); ++k) {
            if (auto idx = s1.keyIndex(s2.keys[k])) {
                chi.push_back(build::keyEq(t1.keys[*idx], t2.keys[k]));
                shared2.push_back(t2.keys[k]);
            }
        }
        std::vector<Var> j = freshAll(s.vals, VarSort::Val);
        Var f = fresh("f", VarSort::Val);

        auto side = [&](const Translated& tk, const Sort& sk, long flag) {
            std::vector<FormulaPtr> parts{t1.phi, t2.phi};
            parts.insert(parts.end(), chi.begin(), chi.end());
            auto p = pad(j, s.vals, tk, sk, op);
            parts.insert(parts.end(), p.begin(), p.end());
            parts.push_back(build::valEq(f, build::constant(Value(flag))));
            return build::conj(std::move(parts));
        };
        std::vector<Var> inner = t1.vals;
        inner.insert(inner.end(), t2.vals.begin(), t2.vals.end());
        FormulaPtr alpha = build::labelled(build::exists(inner, build::disj({side(t1, s1, 0), side(t2, s2, 1)})), label());

        std::vector<Var> bound{f};
        bound.insert(bound.end(), j.begin(), j.end());
        Translated out;
        out.vals = freshAll(s.vals, VarSort::Val);
        std::vector<FormulaPtr> parts{build::exists(bound, alpha)};
        for (std::size_t l = 0; l < j.size(); ++l) {
            parts.push_back(build::valEq(out.vals[l], build::agg(op.name, bound, build::var(j[l]), alpha, true)));
        }
        out.phi = build::exists(shared2, build::conj(std::move(parts)));
        out.keys = t1.keys;
        for (std::size_t k = 0; k < s2.keys.size(); ++k)
            if (!s1.hasKey(s2.keys[k])) out.keys.push_back(t2.keys[k]);
        return out;
    }

    // α_m(x̄, j̄, f) := ∃x̄m,īm(φm ∧ η_m(x̄, x̄m) ∧ j̄ = pad(īm) ∧ f = m-1), α := α_1 ∨ α_2
    // φ(x̄', ī) := ∃x̄'',j̄,f(α ∧ ⋀ i[ℓ] = Agg_⊕ x̄'',j̄,f (j̄[ℓ], α))
    Translated translateUnion(const ExprPtr& e) {
        const Sort& s = typer_.sortOf(e);
        const Sort& s1 = typer_.sortOf(e->kids[0]);
        const Sort& s2 = typer_.sortOf(e->kids[1]);
        const AggOp& op = typer_.aggOf(e);
        Translated t1 = translate(e->kids[0]);
        Translated t2 = translate(e->kids[1]);

        std::vector<std::string> allKeys = s1.keys;
        for (const auto& k : s2.keys)
            if (!s1.hasKey(k)) allKeys.push_back(k);
        std::vector<Var> x = freshAll(allKeys, VarSort::Key);
        std::vector<Var> j = freshAll(s.vals, VarSort::Val);
        Var f = fresh("f", VarSort::Val);

        auto side = [&](const Translated& tk, const Sort& sk, long flag) {
            std::vector<FormulaPtr> parts{tk.phi};
            for (std::size_t a = 0; a < allKeys.size(); ++a) {
                if (auto idx = sk.keyIndex(allKeys[a])) {
                    parts.push_back(build::keyEq(x[a], tk.keys[*idx]));
                } else {
                    parts.push_back(build::keyConst(x[a], Key::reserved()));
                }
            }
            auto p = pad(j, s.vals, tk, sk, op);
            parts.insert(parts.end(), p.begin(), p.end());
            parts.push_back(build::valEq(f, build::constant(Value(flag))));
            std::vector<Var> local = tk.keys;
            local.insert(local.end(), tk.vals.begin(), tk.vals.end());
            return build::labelled(build::exists(local, build::conj(std::move(parts))), label());
        };
        FormulaPtr a1 = side(t1, s1, 0);
        FormulaPtr a2 = side(t2, s2, 1);
        FormulaPtr alpha = build::labelled(build::disj({a1, a2}), label());

        Translated out;
        std::vector<Var> bound;
        for (std::size_t a = 0; a < allKeys.size(); ++a) {
            if (s.hasKey(allKeys[a])) {
                out.keys.push_back(x[a]);
            } else {
                bound.push_back(x[a]);
            }
        }
        bound.insert(bound.end(), j.begin(), j.end());
        bound.push_back(f);
        out.vals = freshAll(s.vals, VarSort::Val);
        std::vector<FormulaPtr> parts{alpha};
        for (std::size_t l = 0; l < j.size(); ++l) {
            parts.push_back(build::valEq(out.vals[l], build::agg(op.name, bound, build::var(j[l]), alpha)));
        }
        out.phi = build::exists(bound, build::conj(std::move(parts)));
        return out;
    }

    // φ(x̄1, x̄', ī') := ∃ī1(φ1(x̄1, ī1) ∧ R_f(x̄1, x̄', ī1, ī'))
    Translated translateExt(const ExprPtr& e) {
        const Sort& s1 = typer_.sortOf(e->kids[0]);
        auto fn = std::make_shared<const ExtFn>(typer_.fnOf(e));
        Translated t1 = translate(e->kids[0]);
        std::vector<Var> inKeys, inVals;
        for (const auto& k : fn->in.keys) inKeys.push_back(lookup(t1.keys, s1.keys, k));
        for (const auto& v : fn->in.vals) inVals.push_back(lookup(t1.vals, s1.vals, v));
        Translated out;
        std::vector<Var> outKeys = freshAll(fn->out.keys, VarSort::Key);
        out.vals = freshAll(fn->out.vals, VarSort::Val);
        out.keys = t1.keys;
        out.keys.insert(out.keys.end(), outKeys.begin(), outKeys.end());
        FormulaPtr atom = build::fnAtom(fn, std::move(inKeys), std::move(outKeys), std::move(inVals), out.vals);
        out.phi = build::exists(t1.vals, build::conj({t1.phi, atom}));
        return out;
    }

    const Environment& env_;
    Typer typer_;
    std::map<std::string, int> counters_;
    std::set<std::string> used_;
    int labels_ = 0;
};

}  // namespace

Query translate(const ExprPtr& e, const Environment& env) {
    Sort target = inferSort(e, env);
    ExprPtr core = desugar(e, env);
    Translator tr(env);
    Translated t = tr.translate(core);
    const Sort& coreSort = tr.typer().sortOf(core);

    Query q;
    q.formula = t.phi;
    q.resolver = "func";
    q.sort = target;
    for (const auto& k : target.keys) q.keys.push_back(t.keys.at(*coreSort.keyIndex(k)));
    for (const auto& v : target.vals) q.vals.push_back(t.vals.at(*coreSort.valIndex(v)));
    return q;
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

class Printer {
public:
    std::string run(const Query& q) {
        std::string root = formula(q.formula, true);
        std::ostringstream out;
        for (const auto& d : defs_) out << d << "\n";
        std::vector<Var> all = q.keys;
        all.insert(all.end(), q.vals.begin(), q.vals.end());
        out << "φ(" << joinNames(q.keys) << " ; " << joinNames(q.vals) << ") := " << root << "\n";
        out << "resolver: " << q.resolver << "\n";
        out << "attributes:";
        for (std::size_t i = 0; i < q.keys.size(); ++i) out << " " << q.keys[i].name << "=" << q.sort.keys[i];
        for (std::size_t i = 0; i < q.vals.size(); ++i) out << " " << q.vals[i].name << "=" << q.sort.vals[i];
        out << "\n";
        return out.str();
    }

private:
    std::string formula(const FormulaPtr& f, bool top = false) {
        if (!f->label.empty() && !top) {
            if (done_.insert(f.get()).second) {
                std::string body = formula(f, true);
                defs_.push_back(f->label + "(" + joinNames(f->free) + ") := " + body);
            }
            return f->label + "(" + joinNames(f->free) + ")";
        }
        switch (f->kind) {
            case Formula::Kind::Bottom: return "⊥";
            case Formula::Kind::Rel: return f->rel + "(" + joinNames(f->vars) + ")";
            case Formula::Kind::KeyEq: return f->vars[0].name + " = " + f->vars[1].name;
            case Formula::Kind::KeyConst:
                return f->vars[0].name + " = " + (f->key.isReserved() ? std::string("η") : f->key.toString());
            case Formula::Kind::ValEq: return f->vars[0].name + " = " + term(f->term);
            case Formula::Kind::FnAtom:
                return "R_" + f->fn->name + "((" + joinNames(f->inKeys) + "), (" + joinNames(f->outKeys) + "), (" +
                       joinNames(f->inVals) + "), (" + joinNames(f->outVals) + "))";
            case Formula::Kind::And:
            case Formula::Kind::Or: {
                std::string sep = f->kind == Formula::Kind::And ? " ∧ " : " ∨ ";
                std::string out = "(";
                for (std::size_t i = 0; i < f->kids.size(); ++i) out += (i ? sep : "") + formula(f->kids[i]);
                return out + ")";
            }
            case Formula::Kind::AndNot: return "(" + formula(f->kids[0]) + " ∧ ¬" + formula(f->kids[1]) + ")";
            case Formula::Kind::Exists: return "∃" + joinNames(f->vars) + " " + formula(f->kids[0]);
        }
        return {};
    }

    std::string term(const TermPtr& t) {
        switch (t->kind) {
            case Term::Kind::Const: return t->constant.toString();
            case Term::Kind::Var: return t->var;
            case Term::Kind::Agg:
                return "Agg_" + t->op + " " + joinNames(t->bound) + " (" + term(t->inner) + ", " + formula(t->body) + ")";
            case Term::Kind::MissingNeutral: return "neutral(" + t->op + ")";
        }
        return {};
    }

    std::vector<std::string> defs_;
    std::set<const Formula*> done_;
};

}  // namespace

std::string Query::toString() const {
    Printer p;
    return p.run(*this);
}

// ---------------------------------------------------------------------------
// Safe-fragment validation
// ---------------------------------------------------------------------------

namespace {

class Validator {
public:
    void generator(const FormulaPtr& f) {
        if (!seen_.insert(f.get()).second) return;
        switch (f->kind) {
            case Formula::Kind::Bottom:
            case Formula::Kind::Rel: return;
            case Formula::Kind::KeyEq:
            case Formula::Kind::KeyConst:
            case Formula::Kind::ValEq:
            case Formula::Kind::FnAtom:
                fail(ErrorKind::Safety, "unguarded atom over " + joinNames(f->free) + " outside a conjunction");
            case Formula::Kind::And: conjunction(f); return;
            case Formula::Kind::Or: {
                auto first = names(f->kids[0]->free);
                for (const auto& k : f->kids) {
                    generator(k);
                    if (names(k->free) != first) {
                        fail(ErrorKind::Safety,
                             "disjuncts with different free variables: (" + joinNames(f->kids[0]->free) + ") vs (" +
                                 joinNames(k->free) + ")");
                    }
                }
                return;
            }
            case Formula::Kind::AndNot:
                generator(f->kids[0]);
                generator(f->kids[1]);
                if (!subset(f->kids[1]->free, names(f->kids[0]->free))) {
                    fail(ErrorKind::Safety, "negated formula has variables not bound by its guard");
                }
                return;
            case Formula::Kind::Exists: generator(f->kids[0]); return;
        }
    }

private:
    void conjunction(const FormulaPtr& f) {
        std::set<std::string> bound;
        std::vector<FormulaPtr> pending;
        bool hasGenerator = false;
        for (const auto& k : f->kids) {
            if (isExtender(k->kind)) {
                pending.push_back(k);
            } else {
                generator(k);
                hasGenerator = true;
                for (const auto& v : k->free) bound.insert(v.name);
            }
        }
        if (!hasGenerator) fail(ErrorKind::Safety, "conjunction without a generating conjunct");
        while (!pending.empty()) {
            auto it = std::find_if(pending.begin(), pending.end(), [&](const FormulaPtr& k) { return ready(k, bound); });
            if (it == pending.end()) {
                std::string what;
                for (const auto& k : pending) what += (what.empty() ? "" : ", ") + joinNames(k->free);
                fail(ErrorKind::Safety, "conjunct(s) over " + what + " are not determined by the rest of the conjunction");
            }
            if ((*it)->kind == Formula::Kind::ValEq) term((*it)->term);
            for (const auto& v : (*it)->free) bound.insert(v.name);
            pending.erase(it);
        }
    }

    static bool ready(const FormulaPtr& k, const std::set<std::string>& bound) {
        switch (k->kind) {
            case Formula::Kind::KeyEq: return bound.count(k->vars[0].name) || bound.count(k->vars[1].name);
            case Formula::Kind::KeyConst: return true;
            case Formula::Kind::ValEq: return subset(k->term->free, bound);
            case Formula::Kind::FnAtom: return subset(k->inKeys, bound) && subset(k->inVals, bound);
            default: return false;
        }
    }

    void term(const TermPtr& t) {
        if (t->kind != Term::Kind::Agg) return;
        generator(t->body);
        term(t->inner);
        if (!subset(t->inner->free, names(t->body->free))) {
            fail(ErrorKind::Safety, "aggregate term uses variables not bound by its formula");
        }
    }

    std::set<const Formula*> seen_;
};

}  // namespace

void validate(const Query& q) {
    Validator v;
    v.generator(q.formula);
    std::vector<Var> all = q.keys;
    all.insert(all.end(), q.vals.begin(), q.vals.end());
    if (names(all) != names(q.formula->free)) {
        fail(ErrorKind::Safety,
             "free variables (" + joinNames(q.formula->free) + ") differ from the query variables (" + joinNames(all) +
                 ")");
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

using Tuple = std::vector<Datum>;

struct Relation {
    std::vector<std::string> cols;
    std::vector<Tuple> rows;

    std::optional<std::size_t> col(const std::string& name) const {
        auto it = std::find(cols.begin(), cols.end(), name);
        if (it == cols.end()) return std::nullopt;
        return static_cast<std::size_t>(it - cols.begin());
    }

    void normalize() {
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    }
};

Tuple project(const Tuple& row, const std::vector<std::size_t>& idx) {
    Tuple out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(row[i]);
    return out;
}

const Value& asValue(const Datum& d, const std::string& var) {
    if (const auto* v = std::get_if<Value>(&d)) return *v;
    fail(ErrorKind::Structural, "variable '" + var + "' holds a key where a value is expected");
}

const Key& asKey(const Datum& d, const std::string& var) {
    if (const auto* k = std::get_if<Key>(&d)) return *k;
    fail(ErrorKind::Structural, "variable '" + var + "' holds a value where a key is expected");
}

class Evaluator {
public:
    Evaluator(const Environment& env, const Database& db) : env_(env), db_(db) {}

    const Relation& eval(const FormulaPtr& f) {
        if (auto it = memo_.find(f.get()); it != memo_.end()) return it->second;
        Relation r = compute(f);
        r.normalize();
        return memo_.emplace(f.get(), std::move(r)).first->second;
    }

private:
    Relation compute(const FormulaPtr& f) {
        switch (f->kind) {
            case Formula::Kind::Bottom: {
                Relation r;
                for (const auto& v : f->vars) r.cols.push_back(v.name);
                return r;
            }
            case Formula::Kind::Rel: return relation(f);
            case Formula::Kind::And: return conjunction(f);
            case Formula::Kind::Or: {
                Relation r;
                for (const auto& v : f->free) r.cols.push_back(v.name);
                for (const auto& k : f->kids) {
                    const Relation& kr = eval(k);
                    std::vector<std::size_t> idx;
                    for (const auto& c : r.cols) idx.push_back(kr.col(c).value());
                    for (const auto& row : kr.rows) r.rows.push_back(project(row, idx));
                }
                return r;
            }
            case Formula::Kind::AndNot: {
                const Relation& a = eval(f->kids[0]);
                const Relation& b = eval(f->kids[1]);
                std::vector<std::size_t> idx;
                for (const auto& c : b.cols) idx.push_back(a.col(c).value());
                std::set<Tuple> excluded(b.rows.begin(), b.rows.end());
                Relation r{a.cols, {}};
                for (const auto& row : a.rows)
                    if (!excluded.count(project(row, idx))) r.rows.push_back(row);
                return r;
            }
            case Formula::Kind::Exists: {
                const Relation& b = eval(f->kids[0]);
                Relation r;
                std::vector<std::size_t> idx;
                auto drop = names(f->vars);
                for (std::size_t i = 0; i < b.cols.size(); ++i) {
                    if (drop.count(b.cols[i])) continue;
                    r.cols.push_back(b.cols[i]);
                    idx.push_back(i);
                }
                for (const auto& row : b.rows) r.rows.push_back(project(row, idx));
                return r;
            }
            default:
                fail(ErrorKind::Safety, "atom over " + joinNames(f->free) + " cannot be evaluated on its own");
        }
    }

    Relation relation(const FormulaPtr& f) {
        const AssocTable& t = db_.get(f->rel);
        const Sort& s = t.sort();
        if (s.keys.size() + s.vals.size() != f->vars.size()) {
            fail(ErrorKind::Sort, "relation '" + f->rel + "' used with " + std::to_string(f->vars.size()) +
                                      " arguments but has sort " + s.toString());
        }
        Relation r;
        for (const auto& v : f->free) r.cols.push_back(v.name);
        for (const auto& row : t.rows()) {
            Tuple out(r.cols.size());
            std::vector<bool> set(r.cols.size(), false);
            bool ok = true;
            for (std::size_t i = 0; i < f->vars.size() && ok; ++i) {
                Datum d = i < s.keys.size() ? Datum(row.keys[i]) : Datum(row.vals[i - s.keys.size()]);
                std::size_t c = *r.col(f->vars[i].name);
                if (set[c]) {
                    ok = out[c] == d;
                } else {
                    out[c] = std::move(d);
                    set[c] = true;
                }
            }
            if (ok) r.rows.push_back(std::move(out));
        }
        return r;
    }

    static Relation naturalJoin(const Relation& a, const Relation& b) {
        std::vector<std::size_t> sharedA, sharedB, restB;
        for (std::size_t i = 0; i < b.cols.size(); ++i) {
            if (auto c = a.col(b.cols[i])) {
                sharedA.push_back(*c);
                sharedB.push_back(i);
            } else {
                restB.push_back(i);
            }
        }
        Relation r{a.cols, {}};
        for (auto i : restB) r.cols.push_back(b.cols[i]);
        std::map<Tuple, std::vector<const Tuple*>> index;
        for (const auto& row : b.rows) index[project(row, sharedB)].push_back(&row);
        for (const auto& row : a.rows) {
            auto it = index.find(project(row, sharedA));
            if (it == index.end()) continue;
            for (const Tuple* other : it->second) {
                Tuple out = row;
                for (auto i : restB) out.push_back((*other)[i]);
                r.rows.push_back(std::move(out));
            }
        }
        return r;
    }

    Relation conjunction(const FormulaPtr& f) {
        Relation r{{}, {Tuple{}}};
        std::vector<FormulaPtr> pending;
        for (const auto& k : f->kids) {
            if (isExtender(k->kind)) {
                pending.push_back(k);
            } else {
                r = naturalJoin(r, eval(k));
            }
        }
        while (!pending.empty()) {
            bool progressed = false;
            for (auto it = pending.begin(); it != pending.end(); ++it) {
                if (extend(r, *it)) {
                    pending.erase(it);
                    progressed = true;
                    break;
                }
            }
            if (!progressed) fail(ErrorKind::Safety, "conjunction cannot bind " + joinNames(pending.front()->free));
        }
        return r;
    }

    /// Binds or filters by one extender; false when its inputs are not yet bound.
    bool extend(Relation& r, const FormulaPtr& k) {
        auto bound = [&](const std::vector<Var>& vs) {
            return std::all_of(vs.begin(), vs.end(), [&](const Var& v) { return r.col(v.name).has_value(); });
        };
        switch (k->kind) {
            case Formula::Kind::KeyEq: {
                auto a = r.col(k->vars[0].name);
                auto b = r.col(k->vars[1].name);
                if (!a && !b) return false;
                if (a && b) {
                    filter(r, [&](const Tuple& row) { return row[*a] == row[*b]; });
                } else {
                    std::size_t from = a ? *a : *b;
                    r.cols.push_back(a ? k->vars[1].name : k->vars[0].name);
                    for (auto& row : r.rows) row.push_back(row[from]);
                }
                return true;
            }
            case Formula::Kind::KeyConst: {
                if (auto a = r.col(k->vars[0].name)) {
                    filter(r, [&](const Tuple& row) { return asKey(row[*a], k->vars[0].name) == k->key; });
                } else {
                    r.cols.push_back(k->vars[0].name);
                    for (auto& row : r.rows) row.push_back(k->key);
                }
                return true;
            }
            case Formula::Kind::ValEq: {
                if (!bound(k->term->free)) return false;
                std::vector<Value> vals;
                vals.reserve(r.rows.size());
                for (const auto& row : r.rows) vals.push_back(term(k->term, r, row));
                if (auto a = r.col(k->vars[0].name)) {
                    std::vector<Tuple> kept;
                    for (std::size_t i = 0; i < r.rows.size(); ++i)
                        if (asValue(r.rows[i][*a], k->vars[0].name) == vals[i]) kept.push_back(std::move(r.rows[i]));
                    r.rows = std::move(kept);
                } else {
                    r.cols.push_back(k->vars[0].name);
                    for (std::size_t i = 0; i < r.rows.size(); ++i) r.rows[i].push_back(vals[i]);
                }
                return true;
            }
            case Formula::Kind::FnAtom: {
                if (!bound(k->inKeys) || !bound(k->inVals)) return false;
                applyFn(r, k);
                return true;
            }
            default: return false;
        }
    }

    template <typename Pred>
    static void filter(Relation& r, Pred pred) {
        std::vector<Tuple> kept;
        for (auto& row : r.rows)
            if (pred(row)) kept.push_back(std::move(row));
        r.rows = std::move(kept);
    }

    void applyFn(Relation& r, const FormulaPtr& k) {
        std::vector<std::size_t> inK, inV;
        for (const auto& v : k->inKeys) inK.push_back(*r.col(v.name));
        for (const auto& v : k->inVals) inV.push_back(*r.col(v.name));
        std::vector<std::string> outs;
        for (const auto& v : k->outKeys) outs.push_back(v.name);
        for (const auto& v : k->outVals) outs.push_back(v.name);
        std::vector<std::optional<std::size_t>> existing;
        Relation next{r.cols, {}};
        std::vector<std::size_t> target;
        for (const auto& name : outs) {
            auto c = next.col(name);
            existing.push_back(c);
            if (!c) {
                next.cols.push_back(name);
                target.push_back(next.cols.size() - 1);
            } else {
                target.push_back(*c);
            }
        }
        for (const auto& row : r.rows) {
            KeyTuple keys;
            ValueTuple vals;
            for (std::size_t i = 0; i < inK.size(); ++i) keys.push_back(asKey(row[inK[i]], k->inKeys[i].name));
            for (std::size_t i = 0; i < inV.size(); ++i) vals.push_back(asValue(row[inV[i]], k->inVals[i].name));
            AssocTable res = k->fn->apply(keys, vals);
            for (const auto& fr : res.rows()) {
                Tuple out = row;
                out.resize(next.cols.size());
                bool ok = true;
                for (std::size_t o = 0; o < outs.size() && ok; ++o) {
                    Datum d = o < k->outKeys.size() ? Datum(fr.keys[o]) : Datum(fr.vals[o - k->outKeys.size()]);
                    if (existing[o]) {
                        ok = out[target[o]] == d;
                    } else {
                        out[target[o]] = std::move(d);
                    }
                }
                if (ok) next.rows.push_back(std::move(out));
            }
        }
        r = std::move(next);
    }

    struct Groups {
        std::vector<std::size_t> outer;  // columns of the term's free variables in the body relation
        std::map<Tuple, std::vector<std::size_t>> rows;
    };

    const Groups& groups(const TermPtr& t) {
        if (auto it = groups_.find(t.get()); it != groups_.end()) return it->second;
        const Relation& body = eval(t->body);
        Groups g;
        for (const auto& v : t->free) {
            auto c = body.col(v.name);
            if (!c) fail(ErrorKind::Safety, "aggregate term variable '" + v.name + "' is not bound by its formula");
            g.outer.push_back(*c);
        }
        std::vector<std::size_t> order;
        for (const auto& v : t->bound)
            if (auto c = body.col(v.name)) order.push_back(*c);
        for (std::size_t i = 0; i < body.rows.size(); ++i) g.rows[project(body.rows[i], g.outer)].push_back(i);
        for (auto& [_, idx] : g.rows) {
            std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                return project(body.rows[a], order) < project(body.rows[b], order);
            });
        }
        return groups_.emplace(t.get(), std::move(g)).first->second;
    }

    Value term(const TermPtr& t, const Relation& r, const Tuple& row) {
        switch (t->kind) {
            case Term::Kind::Const: return t->constant;
            case Term::Kind::Var: {
                auto c = r.col(t->var);
                if (!c) fail(ErrorKind::Safety, "variable '" + t->var + "' is not bound");
                return asValue(row[*c], t->var);
            }
            case Term::Kind::MissingNeutral:
                fail(ErrorKind::Sort, "aggregate '" + t->op + "' has no neutral element for padding");
            case Term::Kind::Agg: {
                const Groups& g = groups(t);
                Tuple key;
                for (const auto& v : t->free) key.push_back(row[*r.col(v.name)]);
                const Relation& body = eval(t->body);
                std::vector<Value> elems;
                auto it = g.rows.find(key);
                if (it != g.rows.end()) {
                    for (auto i : it->second) elems.push_back(term(t->inner, body, body.rows[i]));
                }
                if (t->pairwise) checkPairs(t, body, it == g.rows.end() ? nullptr : &it->second);
                if (!t->pairwise) std::sort(elems.begin(), elems.end());
                return env_.aggs->get(t->op).apply(elems);
            }
        }
        return {};
    }

    static void checkPairs(const TermPtr& t, const Relation& body, const std::vector<std::size_t>* idx) {
        std::size_t flag = *body.col(t->bound.front().name);
        bool ok = idx && idx->size() == 2 && asValue(body.rows[(*idx)[0]][flag], "f") == Value(0) &&
                  asValue(body.rows[(*idx)[1]][flag], "f") == Value(1);
        if (!ok) {
            fail(ErrorKind::Structural,
                 "join aggregate over " + joinNames(t->bound) + " did not see exactly one tuple per side");
        }
    }

    const Environment& env_;
    const Database& db_;
    std::map<const Formula*, Relation> memo_;
    std::map<const Term*, Groups> groups_;
};

}  // namespace

AssocTable evaluate(const Query& q, const Environment& env, const Database& db) {
    Evaluator ev(env, db);
    const Relation& r = ev.eval(q.formula);
    std::vector<std::size_t> keyIdx, valIdx;
    for (const auto& v : q.keys) keyIdx.push_back(r.col(v.name).value());
    for (const auto& v : q.vals) valIdx.push_back(r.col(v.name).value());
    KeyedMultiset pairs;
    for (const auto& row : r.rows) {
        KeyTuple k;
        ValueTuple vs;
        for (std::size_t i = 0; i < keyIdx.size(); ++i) k.push_back(asKey(row[keyIdx[i]], q.keys[i].name));
        for (std::size_t i = 0; i < valIdx.size(); ++i) vs.push_back(asValue(row[valIdx[i]], q.vals[i].name));
        pairs.emplace_back(std::move(k), std::move(vs));
    }
    return solve(q.sort, pairs, env.aggs->get(q.resolver));
}

DiffResult diffTest(const ExprPtr& e, const Environment& env, const Database& db) {
    Environment full = env;
    for (const auto& [name, sort] : db.schema()) full.schema[name] = sort;
    DiffResult d;
    d.algebra = lara::evaluate(e, full, db);
    Query q = translate(e, full);
    validate(q);
    d.logic = evaluate(q, full, db);
    d.algebraText = d.algebra.serialize();
    d.logicText = d.logic.serialize();
    d.equal = d.algebraText == d.logicText;
    if (!d.equal) {
        std::istringstream a(d.algebraText), b(d.logicText);
        std::string la, lb;
        for (std::size_t line = 1;; ++line) {
            bool ha = static_cast<bool>(std::getline(a, la));
            bool hb = static_cast<bool>(std::getline(b, lb));
            if (!ha) la = "<end>";
            if (!hb) lb = "<end>";
            if (la != lb) {
                d.firstDifference = "line " + std::to_string(line) + ": algebra '" + la + "' vs logic '" + lb + "'";
                break;
            }
        }
    }
    return d;
}

}  // namespace lara::fo

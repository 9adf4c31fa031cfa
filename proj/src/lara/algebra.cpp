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

#include "lara/algebra.hpp"

#include "lara/error.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace lara {

namespace expr {

namespace {

std::shared_ptr<Expr> make(Expr::Kind k, std::vector<ExprPtr> kids = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->kids = std::move(kids);
    return e;
}

}  // namespace

ExprPtr empty(Sort sort) {
    auto e = make(Expr::Kind::Empty);
    e->emptySort = std::move(sort);
    return e;
}

ExprPtr atom(std::string rel) {
    auto e = make(Expr::Kind::Atom);
    e->rel = std::move(rel);
    return e;
}

ExprPtr join(ExprPtr a, ExprPtr b, std::string agg) {
    auto e = make(Expr::Kind::Join, {std::move(a), std::move(b)});
    e->agg = std::move(agg);
    return e;
}

ExprPtr unite(ExprPtr a, ExprPtr b, std::string agg) {
    auto e = make(Expr::Kind::Union, {std::move(a), std::move(b)});
    e->agg = std::move(agg);
    return e;
}

ExprPtr ext(FnRef fn, ExprPtr x) {
    auto e = make(Expr::Kind::Ext, {std::move(x)});
    e->fn = std::move(fn);
    return e;
}

ExprPtr map(FnRef fn, ExprPtr x) {
    auto e = make(Expr::Kind::Map, {std::move(x)});
    e->fn = std::move(fn);
    return e;
}

ExprPtr aggBy(std::vector<std::string> keys, std::string agg, ExprPtr x) {
    auto e = make(Expr::Kind::AggBy, {std::move(x)});
    e->attrs = std::move(keys);
    e->agg = std::move(agg);
    return e;
}

ExprPtr reduceBy(std::vector<std::string> keys, std::string agg, ExprPtr x) {
    auto e = make(Expr::Kind::ReduceBy, {std::move(x)});
    e->attrs = std::move(keys);
    e->agg = std::move(agg);
    return e;
}

ExprPtr projKeys(std::vector<std::string> keys, std::string agg, ExprPtr x) {
    auto e = make(Expr::Kind::ProjKeys, {std::move(x)});
    e->attrs = std::move(keys);
    e->agg = std::move(agg);
    return e;
}

ExprPtr projVals(std::vector<std::string> vals, ExprPtr x) {
    auto e = make(Expr::Kind::ProjVals, {std::move(x)});
    e->attrs = std::move(vals);
    return e;
}

ExprPtr rename(std::vector<std::pair<std::string, std::string>> renames, ExprPtr x) {
    auto e = make(Expr::Kind::Rename, {std::move(x)});
    e->renames = std::move(renames);
    return e;
}

ExprPtr product(ExprPtr a, ExprPtr b) { return make(Expr::Kind::Product, {std::move(a), std::move(b)}); }

ExprPtr filter(FnRef phi, ExprPtr x) {
    auto e = make(Expr::Kind::Filter, {std::move(x)});
    e->fn = std::move(phi);
    return e;
}

ExprPtr actDom() { return make(Expr::Kind::ActDom); }

ExprPtr ind(std::string rel) {
    auto e = make(Expr::Kind::Ind);
    e->rel = std::move(rel);
    return e;
}

}  // namespace expr

namespace {

std::string list(const std::vector<std::string>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + xs[i];
    return out;
}

}  // namespace

std::string toString(const ExprPtr& e) {
    auto kid = [&](std::size_t i) { return toString(e->kids[i]); };
    switch (e->kind) {
        case Expr::Kind::Empty:
            if (e->emptySort.keys.empty() && e->emptySort.vals.empty()) return "empty";
            return "empty[" + list(e->emptySort.keys) + " ; " + list(e->emptySort.vals) + "]";
        case Expr::Kind::Atom: return e->rel;
        case Expr::Kind::Join: return "join[" + e->agg + "](" + kid(0) + ", " + kid(1) + ")";
        case Expr::Kind::Union: return "union[" + e->agg + "](" + kid(0) + ", " + kid(1) + ")";
        case Expr::Kind::Ext: return "ext[" + e->fn.toString() + "](" + kid(0) + ")";
        case Expr::Kind::Map: return "map[" + e->fn.toString() + "](" + kid(0) + ")";
        case Expr::Kind::AggBy: return "agg[" + e->agg + "; " + list(e->attrs) + "](" + kid(0) + ")";
        case Expr::Kind::ReduceBy: return "red[" + e->agg + "; " + list(e->attrs) + "](" + kid(0) + ")";
        case Expr::Kind::ProjKeys: return "projk[" + e->agg + "; " + list(e->attrs) + "](" + kid(0) + ")";
        case Expr::Kind::ProjVals: return "projv[" + list(e->attrs) + "](" + kid(0) + ")";
        case Expr::Kind::Rename: {
            std::string out = "rename[";
            for (std::size_t i = 0; i < e->renames.size(); ++i)
                out += (i ? ", " : "") + e->renames[i].first + "->" + e->renames[i].second;
            return out + "](" + kid(0) + ")";
        }
        case Expr::Kind::Product: return "product(" + kid(0) + ", " + kid(1) + ")";
        case Expr::Kind::Filter: return "filter[" + e->fn.toString() + "](" + kid(0) + ")";
        case Expr::Kind::ActDom: return "actdom";
        case Expr::Kind::Ind: return "ind(" + e->rel + ")";
    }
    return {};
}

bool staticallyEmpty(const ExprPtr& e) {
    switch (e->kind) {
        case Expr::Kind::Empty: return true;
        case Expr::Kind::Atom:
        case Expr::Kind::ActDom:
        case Expr::Kind::Ind: return false;
        case Expr::Kind::Join:
        case Expr::Kind::Product: return staticallyEmpty(e->kids[0]) || staticallyEmpty(e->kids[1]);
        case Expr::Kind::Union: return staticallyEmpty(e->kids[0]) && staticallyEmpty(e->kids[1]);
        default: return staticallyEmpty(e->kids[0]);
    }
}

bool isCore(const ExprPtr& e) {
    switch (e->kind) {
        case Expr::Kind::Empty:
        case Expr::Kind::Atom: return true;
        case Expr::Kind::Join:
        case Expr::Kind::Union: return isCore(e->kids[0]) && isCore(e->kids[1]);
        case Expr::Kind::Ext: return isCore(e->kids[0]);
        default: return false;
    }
}

namespace {

[[noreturn]] void sortError(const ExprPtr& e, const std::string& msg) {
    std::string text = toString(e);
    if (text.size() > 120) text = text.substr(0, 117) + "...";
    fail(ErrorKind::Sort, msg + " (in " + text + ")");
}

Sort makeSort(const ExprPtr& e, std::vector<std::string> keys, std::vector<std::string> vals) {
    try {
        return Sort(std::move(keys), std::move(vals));
    } catch (const Error& err) {
        sortError(e, err.what());
    }
}

bool contains(const std::vector<std::string>& xs, const std::string& x) {
    return std::find(xs.begin(), xs.end(), x) != xs.end();
}

std::vector<std::string> minus(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::string> out;
    for (const auto& x : a)
        if (!contains(b, x)) out.push_back(x);
    return out;
}

std::vector<std::string> intersect(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::string> out;
    for (const auto& x : a)
        if (contains(b, x)) out.push_back(x);
    return out;
}

std::vector<std::size_t> positions(const std::vector<std::string>& names, const std::vector<std::string>& in) {
    std::vector<std::size_t> out;
    for (const auto& n : names) out.push_back(static_cast<std::size_t>(std::find(in.begin(), in.end(), n) - in.begin()));
    return out;
}

std::string renderKeys(const KeyTuple& k) {
    std::string out = "(";
    for (std::size_t i = 0; i < k.size(); ++i) out += (i ? "," : "") + k[i].toString();
    return out + ")";
}

/// Sort inference with memoization by node.
class TyperImpl {
public:
    explicit TyperImpl(const Environment& env) : env_(env) {}

    const Sort& sortOf(const ExprPtr& e) {
        if (auto it = memo_.find(e.get()); it != memo_.end()) return it->second;
        Sort s = infer(e);
        return memo_.emplace(e.get(), std::move(s)).first->second;
    }

    const ExtFn& fnOf(const ExprPtr& e) {
        sortOf(e);
        return fns_.at(e.get());
    }

    const AggOp& aggOf(const ExprPtr& e) {
        const AggOp* op = env_.aggs->find(e->agg);
        if (!op) sortError(e, "unknown aggregate operator '" + e->agg + "'");
        return *op;
    }

    const Environment& env() const { return env_; }

private:
    void requireNeutral(const ExprPtr& e, const Sort& s1, const Sort& s2) {
        const AggOp& op = aggOf(e);
        if (op.neutral) return;
        bool empty1 = staticallyEmpty(e->kids[0]);
        bool empty2 = staticallyEmpty(e->kids[1]);
        if (e->kind == Expr::Kind::Join && (empty1 || empty2)) return;
        std::vector<std::string> missing;
        if (!empty1) {
            auto m = minus(s2.vals, s1.vals);
            missing.insert(missing.end(), m.begin(), m.end());
        }
        if (!empty2) {
            auto m = minus(s1.vals, s2.vals);
            missing.insert(missing.end(), m.begin(), m.end());
        }
        if (!missing.empty()) {
            sortError(e, "aggregate '" + op.name + "' has no neutral element but padding is needed for " + list(missing));
        }
    }

    Sort infer(const ExprPtr& e) {
        switch (e->kind) {
            case Expr::Kind::Empty: return e->emptySort;
            case Expr::Kind::Atom: {
                auto it = env_.schema.find(e->rel);
                if (it == env_.schema.end()) sortError(e, "unknown relation '" + e->rel + "'");
                return it->second;
            }
            case Expr::Kind::Join:
            case Expr::Kind::Union: {
                const Sort s1 = sortOf(e->kids[0]);
                const Sort& s2 = sortOf(e->kids[1]);
                for (const auto& k : s1.keys)
                    if (s2.hasVal(k)) sortError(e, "attribute '" + k + "' is a key on the left and a value on the right");
                for (const auto& v : s1.vals)
                    if (s2.hasKey(v)) sortError(e, "attribute '" + v + "' is a value on the left and a key on the right");
                aggOf(e);
                requireNeutral(e, s1, s2);
                std::vector<std::string> vals = s1.vals;
                for (const auto& v : minus(s2.vals, s1.vals)) vals.push_back(v);
                if (e->kind == Expr::Kind::Union) return makeSort(e, intersect(s1.keys, s2.keys), vals);
                std::vector<std::string> keys = s1.keys;
                for (const auto& k : minus(s2.keys, s1.keys)) keys.push_back(k);
                return makeSort(e, keys, vals);
            }
            case Expr::Kind::Ext:
            case Expr::Kind::Map: {
                const Sort& s = sortOf(e->kids[0]);
                ExtFn f = resolveExtFn(e->fn, s, env_.fns);
                if (e->kind == Expr::Kind::Map && !f.out.keys.empty()) {
                    sortError(e, "map requires a function without output keys; '" + f.name + "' outputs " + list(f.out.keys));
                }
                std::vector<std::string> keys = s.keys;
                keys.insert(keys.end(), f.out.keys.begin(), f.out.keys.end());
                Sort out = makeSort(e, keys, f.out.vals);
                fns_.emplace(e.get(), std::move(f));
                return out;
            }
            case Expr::Kind::Filter: {
                const Sort& s = sortOf(e->kids[0]);
                fns_.emplace(e.get(), resolveFilter(e->fn, s, env_.fns));
                return s;
            }
            case Expr::Kind::AggBy:
            case Expr::Kind::ProjKeys:
            case Expr::Kind::ReduceBy: {
                const Sort& s = sortOf(e->kids[0]);
                std::set<std::string> seen;
                for (const auto& k : e->attrs) {
                    if (!s.hasKey(k)) sortError(e, "'" + k + "' is not a key attribute of " + s.toString());
                    if (!seen.insert(k).second) sortError(e, "key '" + k + "' listed twice");
                }
                aggOf(e);
                if (e->kind == Expr::Kind::ReduceBy) return makeSort(e, minus(s.keys, e->attrs), s.vals);
                return makeSort(e, intersect(s.keys, e->attrs), s.vals);
            }
            case Expr::Kind::ProjVals: {
                const Sort& s = sortOf(e->kids[0]);
                for (const auto& v : e->attrs)
                    if (!s.hasVal(v)) sortError(e, "'" + v + "' is not a value attribute of " + s.toString());
                return makeSort(e, s.keys, e->attrs);
            }
            case Expr::Kind::Rename: {
                const Sort& s = sortOf(e->kids[0]);
                std::map<std::string, std::string> m;
                for (const auto& [from, to] : e->renames) {
                    if (!s.hasAttr(from)) sortError(e, "cannot rename unknown attribute '" + from + "'");
                    if (!m.emplace(from, to).second) sortError(e, "attribute '" + from + "' renamed twice");
                }
                auto apply = [&](const std::vector<std::string>& xs) {
                    std::vector<std::string> out;
                    for (const auto& x : xs) out.push_back(m.count(x) ? m[x] : x);
                    return out;
                };
                return makeSort(e, apply(s.keys), apply(s.vals));
            }
            case Expr::Kind::Product: {
                const Sort s1 = sortOf(e->kids[0]);
                const Sort& s2 = sortOf(e->kids[1]);
                for (const auto* names : {&s2.keys, &s2.vals})
                    for (const auto& a : *names)
                        if (s1.hasAttr(a)) sortError(e, "product operands share attribute '" + a + "'");
                std::vector<std::string> keys = s1.keys, vals = s1.vals;
                keys.insert(keys.end(), s2.keys.begin(), s2.keys.end());
                vals.insert(vals.end(), s2.vals.begin(), s2.vals.end());
                return makeSort(e, keys, vals);
            }
            case Expr::Kind::ActDom: return Sort({kActDomKey}, {});
            case Expr::Kind::Ind: {
                if (!env_.schema.count(e->rel)) sortError(e, "unknown relation '" + e->rel + "'");
                return Sort({kActDomKey}, {kIndValue});
            }
        }
        sortError(e, "malformed expression");
    }

    const Environment& env_;
    std::map<const Expr*, Sort> memo_;
    std::map<const Expr*, ExtFn> fns_;
};

class Evaluator {
public:
    Evaluator(const Environment& env, const Database& db) : typer_(env), db_(db) {}

    const AssocTable& eval(const ExprPtr& e) {
        if (auto it = memo_.find(e.get()); it != memo_.end()) return it->second;
        AssocTable t = compute(e);
        if (!(t.sort() == typer_.sortOf(e))) {
            fail(ErrorKind::Structural, "internal: result sort " + t.sort().toString() + " differs from inferred " +
                                            typer_.sortOf(e).toString());
        }
        return memo_.emplace(e.get(), std::move(t)).first->second;
    }

private:
    AssocTable compute(const ExprPtr& e) {
        const Sort& sort = typer_.sortOf(e);
        switch (e->kind) {
            case Expr::Kind::Empty: return AssocTable(sort);
            case Expr::Kind::Atom: {
                const AssocTable& t = db_.get(e->rel);
                if (!(t.sort() == sort)) {
                    fail(ErrorKind::Sort, "relation '" + e->rel + "' has sort " + t.sort().toString() +
                                              " but is declared as " + sort.toString());
                }
                return t;
            }
            case Expr::Kind::Join: return join(e, sort);
            case Expr::Kind::Union: return unite(e, sort);
            case Expr::Kind::Ext:
            case Expr::Kind::Map:
            case Expr::Kind::Filter: return extend(e, sort);
            case Expr::Kind::AggBy:
            case Expr::Kind::ProjKeys:
            case Expr::Kind::ReduceBy: return aggregate(e, sort);
            case Expr::Kind::ProjVals: {
                const AssocTable& t = eval(e->kids[0]);
                auto idx = positions(e->attrs, t.sort().vals);
                std::vector<Row> rows;
                for (const Row& r : t.rows()) {
                    Row n{r.keys, {}};
                    for (auto i : idx) n.vals.push_back(r.vals[i]);
                    rows.push_back(std::move(n));
                }
                return AssocTable::fromRows(sort, std::move(rows));
            }
            case Expr::Kind::Rename: return AssocTable::fromRows(sort, eval(e->kids[0]).rows());
            case Expr::Kind::Product: {
                const AssocTable& a = eval(e->kids[0]);
                const AssocTable& b = eval(e->kids[1]);
                std::vector<Row> rows;
                for (const Row& r1 : a.rows()) {
                    for (const Row& r2 : b.rows()) {
                        Row n = r1;
                        n.keys.insert(n.keys.end(), r2.keys.begin(), r2.keys.end());
                        n.vals.insert(n.vals.end(), r2.vals.begin(), r2.vals.end());
                        rows.push_back(std::move(n));
                    }
                }
                return AssocTable::fromRows(sort, std::move(rows));
            }
            case Expr::Kind::ActDom: {
                std::vector<Row> rows;
                for (const auto& [name, t] : db_.tables()) {
                    if (!typer_.env().schema.count(name)) continue;
                    for (const Row& r : t.rows())
                        for (const Key& k : r.keys) rows.push_back(Row{{k}, {}});
                }
                return AssocTable::fromRows(sort, std::move(rows));
            }
            case Expr::Kind::Ind: {
                std::set<Key> keys;
                for (const Row& r : db_.get(e->rel).rows()) keys.insert(r.keys.begin(), r.keys.end());
                std::vector<Row> rows;
                long ord = 0;
                for (const Key& k : keys) rows.push_back(Row{{k}, {Value(++ord)}});
                return AssocTable::fromRows(sort, std::move(rows));
            }
        }
        fail(ErrorKind::Structural, "malformed expression");
    }

    AssocTable join(const ExprPtr& e, const Sort& sort) {
        const AssocTable& a = eval(e->kids[0]);
        const AssocTable& b = eval(e->kids[1]);
        const AggOp& op = typer_.aggOf(e);
        const Sort& s1 = a.sort();
        const Sort& s2 = b.sort();
        auto shared = intersect(s1.keys, s2.keys);
        auto shared1 = positions(shared, s1.keys);
        auto shared2 = positions(shared, s2.keys);
        auto extra2 = positions(minus(s2.keys, s1.keys), s2.keys);

        std::map<KeyTuple, std::vector<const Row*>> index;
        for (const Row& r : b.rows()) {
            KeyTuple k;
            for (auto i : shared2) k.push_back(r.keys[i]);
            index[k].push_back(&r);
        }
        std::vector<Row> rows;
        for (const Row& r1 : a.rows()) {
            KeyTuple k;
            for (auto i : shared1) k.push_back(r1.keys[i]);
            auto it = index.find(k);
            if (it == index.end()) continue;
            ValueTuple left = padRow(r1.vals, s1.vals, sort.vals, op.neutral);
            for (const Row* r2 : it->second) {
                ValueTuple right = padRow(r2->vals, s2.vals, sort.vals, op.neutral);
                Row n{r1.keys, {}};
                for (auto i : extra2) n.keys.push_back(r2->keys[i]);
                for (std::size_t v = 0; v < left.size(); ++v) {
                    try {
                        n.vals.push_back(op.apply({left[v], right[v]}));
                    } catch (const Error& err) {
                        fail(ErrorKind::Eval, std::string(err.what()) + " (at key tuple " + renderKeys(n.keys) + ")");
                    }
                }
                rows.push_back(std::move(n));
            }
        }
        return AssocTable::fromRows(sort, std::move(rows));
    }

    AssocTable unite(const ExprPtr& e, const Sort& sort) {
        const AssocTable& a = eval(e->kids[0]);
        const AssocTable& b = eval(e->kids[1]);
        const AggOp& op = typer_.aggOf(e);
        KeyedMultiset pairs;
        for (const AssocTable* t : {&a, &b}) {
            auto idx = positions(sort.keys, t->sort().keys);
            for (const Row& r : t->rows()) {
                KeyTuple k;
                for (auto i : idx) k.push_back(r.keys[i]);
                pairs.emplace_back(std::move(k), padRow(r.vals, t->sort().vals, sort.vals, op.neutral));
            }
        }
        return solve(sort, pairs, op);
    }

    AssocTable aggregate(const ExprPtr& e, const Sort& sort) {
        const AssocTable& t = eval(e->kids[0]);
        auto idx = positions(sort.keys, t.sort().keys);
        KeyedMultiset pairs;
        for (const Row& r : t.rows()) {
            KeyTuple k;
            for (auto i : idx) k.push_back(r.keys[i]);
            pairs.emplace_back(std::move(k), r.vals);
        }
        return solve(sort, pairs, typer_.aggOf(e));
    }

    AssocTable extend(const ExprPtr& e, const Sort& sort) {
        const AssocTable& t = eval(e->kids[0]);
        const ExtFn& f = typer_.fnOf(e);
        auto kIdx = positions(f.in.keys, t.sort().keys);
        auto vIdx = positions(f.in.vals, t.sort().vals);
        std::vector<Row> rows;
        std::map<std::pair<KeyTuple, ValueTuple>, AssocTable> seen;
        for (const Row& r : t.rows()) {
            KeyTuple k;
            ValueTuple v;
            for (auto i : kIdx) k.push_back(r.keys[i]);
            for (auto i : vIdx) v.push_back(r.vals[i]);
            auto key = std::make_pair(std::move(k), std::move(v));
            auto it = seen.find(key);
            if (it == seen.end()) {
                AssocTable res = f.apply(key.first, key.second);
                it = seen.emplace(std::move(key), std::move(res)).first;
            }
            for (const Row& o : it->second.rows()) {
                Row n{r.keys, o.vals};
                n.keys.insert(n.keys.end(), o.keys.begin(), o.keys.end());
                rows.push_back(std::move(n));
            }
        }
        return AssocTable::fromRows(sort, std::move(rows));
    }

    TyperImpl typer_;
    const Database& db_;
    std::map<const Expr*, AssocTable> memo_;
};

Environment withDatabase(const Environment& env, const Database& db) {
    Environment out = env;
    for (const auto& [name, t] : db.tables()) out.schema.emplace(name, t.sort());
    return out;
}

dsl::FunctionPtr geFunction() {
    static const dsl::FunctionPtr f = [] {
        auto fn = dsl::parseFunction(
            "fn ge (keys key, key2 ; vals) -> (keys ; vals ind) := "
            "(key < key2 -> ind = 0) and (not(key < key2) -> ind = 1)");
        dsl::checkSafety(*fn);
        return fn;
    }();
    return f;
}

ExprPtr keysOfAttr(const std::string& rel, const std::string& attr) {
    ExprPtr copied = expr::ext(FnRef{"copy", {attr + "->" + kActDomKey}, nullptr}, expr::atom(rel));
    ExprPtr bare = expr::ext(FnRef{"pi", {}, nullptr}, copied);
    return expr::aggBy({kActDomKey}, "func", bare);
}

ExprPtr keysOfRelations(const std::vector<std::pair<std::string, Sort>>& rels) {
    ExprPtr acc = expr::ext(FnRef{"emptykeys", {kActDomKey}, nullptr}, expr::empty());
    for (const auto& [name, sort] : rels)
        for (const auto& k : sort.keys) acc = expr::unite(acc, keysOfAttr(name, k), "func");
    return acc;
}

class Desugarer {
public:
    explicit Desugarer(const Environment& env) : typer_(env), env_(env) {}

    ExprPtr run(const ExprPtr& e) {
        if (auto it = memo_.find(e.get()); it != memo_.end()) return it->second;
        ExprPtr out = rewrite(e);
        memo_.emplace(e.get(), out);
        return out;
    }

private:
    ExprPtr rewrite(const ExprPtr& e) {
        const Sort& sort = typer_.sortOf(e);
        switch (e->kind) {
            case Expr::Kind::Empty:
            case Expr::Kind::Atom: return e;
            case Expr::Kind::Join: return expr::join(run(e->kids[0]), run(e->kids[1]), e->agg);
            case Expr::Kind::Union: return expr::unite(run(e->kids[0]), run(e->kids[1]), e->agg);
            case Expr::Kind::Ext:
            case Expr::Kind::Map: return expr::ext(e->fn, run(e->kids[0]));
            case Expr::Kind::Filter: {
                FnRef ref{"filter", {e->fn.name}, e->fn.inlineFn};
                return expr::ext(ref, run(e->kids[0]));
            }
            case Expr::Kind::AggBy:
            case Expr::Kind::ProjKeys:
            case Expr::Kind::ReduceBy: {
                ExprPtr pad = expr::ext(FnRef{"emptykeys", sort.keys, nullptr}, expr::empty());
                return expr::unite(run(e->kids[0]), pad, e->agg);
            }
            case Expr::Kind::ProjVals: return expr::ext(FnRef{"pi", e->attrs, nullptr}, run(e->kids[0]));
            case Expr::Kind::Product: return expr::join(run(e->kids[0]), run(e->kids[1]), "mul");
            case Expr::Kind::Rename: return rename(e, sort);
            case Expr::Kind::ActDom: {
                std::vector<std::pair<std::string, Sort>> rels(env_.schema.begin(), env_.schema.end());
                return run(keysOfRelations(rels));
            }
            case Expr::Kind::Ind: return run(indConstruction(e->rel, env_));
        }
        fail(ErrorKind::Structural, "malformed expression");
    }

    ExprPtr rename(const ExprPtr& e, const Sort& sort) {
        const Sort& in = typer_.sortOf(e->kids[0]);
        std::vector<std::string> keyArgs, valArgs;
        for (const auto& [from, to] : e->renames) {
            if (from == to) continue;
            (in.hasKey(from) ? keyArgs : valArgs).push_back(from + "->" + to);
        }
        ExprPtr cur = run(e->kids[0]);
        if (!keyArgs.empty()) cur = expr::ext(FnRef{"copy", keyArgs, nullptr}, cur);
        if (!valArgs.empty()) cur = expr::ext(FnRef{"copy", valArgs, nullptr}, cur);
        cur = expr::ext(FnRef{"pi", sort.vals, nullptr}, cur);
        if (keyArgs.empty()) return cur;
        ExprPtr pad = expr::ext(FnRef{"emptykeys", sort.keys, nullptr}, expr::empty());
        return expr::unite(cur, pad, "func");
    }

    TyperImpl typer_;
    const Environment& env_;
    std::map<const Expr*, ExprPtr> memo_;
};

}  // namespace

struct Typer::Impl : TyperImpl {
    using TyperImpl::TyperImpl;
};

Typer::Typer(const Environment& env) : impl_(std::make_unique<Impl>(env)) {}
Typer::~Typer() = default;
const Sort& Typer::sortOf(const ExprPtr& e) { return impl_->sortOf(e); }
const ExtFn& Typer::fnOf(const ExprPtr& e) { return impl_->fnOf(e); }
const AggOp& Typer::aggOf(const ExprPtr& e) { return impl_->aggOf(e); }

Sort inferSort(const ExprPtr& e, const Environment& env) {
    TyperImpl t(env);
    return t.sortOf(e);
}

AssocTable evaluate(const ExprPtr& e, const Environment& env, const Database& db) {
    Environment full = withDatabase(env, db);
    Evaluator ev(full, db);
    return ev.eval(e);
}

ExprPtr indConstruction(const std::string& rel, const Environment& env) {
    auto it = env.schema.find(rel);
    if (it == env.schema.end()) fail(ErrorKind::Sort, "unknown relation '" + rel + "'");
    ExprPtr keys = keysOfRelations({*it});
    ExprPtr other = expr::rename({{kActDomKey, std::string(kActDomKey) + "2"}}, keys);
    ExprPtr pairs = expr::product(keys, other);
    ExprPtr indicator = expr::map(FnRef{"ge", {}, geFunction()}, pairs);
    return expr::aggBy({kActDomKey}, "sum", indicator);
}

ExprPtr desugar(const ExprPtr& e, const Environment& env) {
    Desugarer d(env);
    return d.run(e);
}

ModeInfo analyzeMode(const ExprPtr& e, const Environment& env) {
    TyperImpl typer(env);
    typer.sortOf(e);
    ModeInfo info;
    std::set<const Expr*> seen;
    std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& n) {
        if (!seen.insert(n.get()).second) return;
        for (const auto& k : n->kids) walk(k);
        if (n->kind == Expr::Kind::Ind) {
            info.ordered = true;
            info.generic = false;
            info.reasons.push_back("ind(" + n->rel + ") uses the key order");
        }
        if (n->kind == Expr::Kind::Ext || n->kind == Expr::Kind::Map || n->kind == Expr::Kind::Filter) {
            const ExtFn& f = typer.fnOf(n);
            if (f.ordered) {
                info.ordered = true;
                info.reasons.push_back("function '" + f.name + "' compares keys with <");
            }
            if (!f.generic) {
                info.generic = false;
                if (!f.ordered) info.reasons.push_back("function '" + f.name + "' depends on key identities");
            }
        }
    };
    walk(e);
    if (info.ordered) info.generic = false;
    return info;
}

}  // namespace lara

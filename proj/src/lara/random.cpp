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

#include "lara/random.hpp"

#include "lara/dsl.hpp"
#include "lara/error.hpp"

#include <algorithm>

namespace lara::rnd {

namespace {

const char* const kTameFunctions[] = {
    "fn neg (keys ; vals x) -> (keys ; vals y) := add(x, y, 0)",
    "fn half (keys ; vals y) -> (keys ; vals x) := mul(2, x, y)",
    "fn swap (keys a ; vals x) -> (keys d ; vals z) := d = a and add(x, z, 1)",
    "fn avg2 (keys ; vals x, y) -> (keys ; vals z) := exists s (add(x, y, s) and mul(2, z, s))",
    "fn ifeq (keys a, b ; vals x) -> (keys ; vals z) := (a = b -> z = x) and (not (a = b) -> z = 0)",
    "fn fanout (keys a, b ; vals x) -> (keys d ; vals y) := (d = a or d = b) and y = x",
    "fn dupc (keys c ; vals) -> (keys d ; vals z) := d = c and z = 1",
    "fn pos (keys ; vals x) -> (keys ; vals) := lt(0, x)",
    "fn distinctab (keys a, b ; vals) -> (keys ; vals) := not (a = b)",
};

const std::vector<std::string> kKeyAttrs = {"a", "b", "c", "d"};
const std::vector<std::string> kValAttrs = {"x", "y", "z"};

Value randomValue(Rng& rng) {
    if (rng.chance(15)) return Value::rational(rng.range(-5, 5), rng.range(2, 4));
    return Value(rng.range(-2, 4));
}

void allTuples(const std::vector<Key>& pool, std::size_t arity, KeyTuple& cur, std::vector<KeyTuple>& out) {
    if (cur.size() == arity) {
        out.push_back(cur);
        return;
    }
    for (const auto& k : pool) {
        cur.push_back(k);
        allTuples(pool, arity, cur, out);
        cur.pop_back();
    }
}

std::vector<std::string> subset(Rng& rng, const std::vector<std::string>& xs) {
    std::vector<std::string> out;
    for (const auto& x : xs)
        if (rng.chance(50)) out.push_back(x);
    return out;
}

class ExprGen {
public:
    ExprGen(Rng& rng, const Environment& env) : rng_(rng), env_(env) {
        for (const auto& [name, _] : env.schema) rels_.push_back(name);
    }

    ExprPtr gen(int depth) {
        for (int attempt = 0; attempt < 40; ++attempt) {
            ExprPtr e = candidate(depth);
            try {
                inferSort(e, env_);
                return e;
            } catch (const Error&) {
            }
        }
        return expr::atom(rng_.pick(rels_));
    }

private:
    ExprPtr leaf() {
        unsigned r = static_cast<unsigned>(rng_.below(100));
        if (r < 80) return expr::atom(rng_.pick(rels_));
        if (r < 90) return expr::empty(env_.schema.at(rng_.pick(rels_)));
        return expr::actDom();
    }

    ExprPtr candidate(int depth) {
        if (depth <= 1 || rng_.chance(15)) return leaf();
        static const std::vector<std::string> joinAggs = {"mul", "sum", "min", "max"};
        static const std::vector<std::string> unionAggs = {"sum", "prod", "count", "avg", "func"};
        static const std::vector<std::string> groupAggs = {"sum", "max", "min", "count", "avg", "prod"};
        static const std::vector<std::string> extFns = {"neg", "half", "swap", "avg2", "ifeq", "fanout", "dupc"};
        static const std::vector<std::string> mapFns = {"neg", "half", "avg2", "ifeq"};
        static const std::vector<std::string> filters = {"pos", "distinctab"};
        switch (rng_.below(10)) {
            case 0:
            case 1: return expr::join(gen(depth - 1), gen(depth - 1), rng_.pick(joinAggs));
            case 2:
            case 3: return expr::unite(gen(depth - 1), gen(depth - 1), rng_.pick(unionAggs));
            case 4: return expr::ext(FnRef{rng_.pick(extFns), {}, nullptr}, gen(depth - 1));
            case 5: return expr::map(FnRef{rng_.pick(mapFns), {}, nullptr}, gen(depth - 1));
            case 6: return builtin(gen(depth - 1));
            case 7: {
                ExprPtr kid = gen(depth - 1);
                Sort s = inferSort(kid, env_);
                if (rng_.chance(50)) return expr::aggBy(subset(rng_, s.keys), rng_.pick(groupAggs), kid);
                return expr::reduceBy(subset(rng_, s.keys), rng_.pick(groupAggs), kid);
            }
            case 8: {
                ExprPtr kid = gen(depth - 1);
                Sort s = inferSort(kid, env_);
                if (rng_.chance(50)) return expr::projVals(subset(rng_, s.vals), kid);
                return rename(kid, s);
            }
            default: return expr::filter(FnRef{rng_.pick(filters), {}, nullptr}, gen(depth - 1));
        }
    }

    ExprPtr rename(const ExprPtr& kid, const Sort& s) {
        const bool key = rng_.chance(50);
        const auto& have = key ? s.keys : s.vals;
        const auto& pool = key ? kKeyAttrs : kValAttrs;
        if (have.empty()) return kid;
        std::string from = rng_.pick(have);
        std::vector<std::string> free;
        for (const auto& a : pool)
            if (!s.hasAttr(a)) free.push_back(a);
        if (free.empty()) return kid;
        return expr::rename({{from, rng_.pick(free)}}, kid);
    }

    ExprPtr builtin(const ExprPtr& kid) {
        switch (rng_.below(7)) {
            case 0: return expr::ext(FnRef{"eq", {"a", "b"}, nullptr}, kid);
            case 1: return expr::ext(FnRef{"neq", {"x", "y"}, nullptr}, kid);
            case 2: return expr::ext(FnRef{"copy", {"a->d"}, nullptr}, kid);
            case 3: return expr::ext(FnRef{"copy", {"x->z"}, nullptr}, kid);
            case 4: return expr::ext(FnRef{"addval", {"z", "1"}, nullptr}, kid);
            case 5: return expr::ext(FnRef{"pi", {"x"}, nullptr}, kid);
            default: return expr::ext(FnRef{"emptykeys", {"d"}, nullptr}, kid);
        }
    }

    Rng& rng_;
    const Environment& env_;
    std::vector<std::string> rels_;
};

}  // namespace

Environment tameEnvironment() {
    Environment env;
    for (const char* src : kTameFunctions) env.fns.add(dsl::parseFunction(src));
    env.schema["R"] = Sort({"a", "b"}, {"x", "y"});
    env.schema["S"] = Sort({"b", "c"}, {"y", "z"});
    env.schema["T"] = Sort({"a"}, {"x"});
    env.schema["U"] = Sort({"c"}, {});
    return env;
}

Database randomDatabase(Rng& rng, const Environment& env, std::size_t maxKeys) {
    static const std::vector<Key> pool = {Key::integer(1), Key::integer(2), Key::integer(3), Key::integer(-4),
                                          Key::text("p"),  Key::text("q"),  Key::text("rs"), Key::integer(10)};
    std::vector<Key> keys = pool;
    for (std::size_t i = keys.size(); i > 1; --i) std::swap(keys[i - 1], keys[rng.below(i)]);
    std::size_t n = 1 + rng.below(std::min(maxKeys, keys.size()));
    keys.resize(n);

    Database db;
    for (const auto& [name, sort] : env.schema) {
        std::vector<KeyTuple> tuples;
        KeyTuple cur;
        allTuples(keys, sort.keys.size(), cur, tuples);
        std::vector<Row> rows;
        unsigned density = static_cast<unsigned>(rng.range(20, 70));
        for (const auto& t : tuples) {
            if (!rng.chance(density)) continue;
            Row r{t, {}};
            for (std::size_t v = 0; v < sort.vals.size(); ++v) r.vals.push_back(randomValue(rng));
            rows.push_back(std::move(r));
        }
        db.add(name, AssocTable::fromRows(sort, std::move(rows)));
    }
    return db;
}

ExprPtr randomExpr(Rng& rng, const Environment& env, int maxDepth) {
    ExprGen g(rng, env);
    return g.gen(maxDepth);
}

KeyPermutation randomPermutation(Rng& rng, const std::set<Key>& keys) {
    std::vector<Key> targets(keys.begin(), keys.end());
    for (long i = 0; i < 3; ++i) {
        targets.push_back(Key::integer(100 + rng.range(0, 50) * 3 + i));
        targets.push_back(Key::text("k" + std::to_string(rng.range(0, 999)) + "_" + std::to_string(i)));
    }
    for (std::size_t i = targets.size(); i > 1; --i) std::swap(targets[i - 1], targets[rng.below(i)]);
    KeyPermutation pi;
    std::size_t at = 0;
    for (const auto& k : keys) pi.emplace(k, targets[at++]);
    return pi;
}

AssocTable randomMatrix(Rng& rng, std::size_t rows, std::size_t cols, const std::string& rowAttr,
                        const std::string& colAttr, const std::string& valAttr) {
    std::vector<Row> out;
    for (std::size_t i = 1; i <= rows; ++i) {
        for (std::size_t j = 1; j <= cols; ++j) {
            out.push_back(Row{{Key::integer(static_cast<long>(i)), Key::integer(static_cast<long>(j))},
                              {Value(rng.range(-2, 3))}});
        }
    }
    return AssocTable::fromRows(Sort({rowAttr, colAttr}, {valAttr}), std::move(out));
}

namespace {

std::string constant(Rng& rng) {
    return std::to_string(rng.range(-2, 3));
}

std::string condAtom(Rng& rng) {
    switch (rng.below(9)) {
        case 0: return "x1 = x2";
        case 1: return "x1 != x2";
        case 2: return "lt(i1, i2)";
        case 3: return "leq(i1, " + constant(rng) + ")";
        case 4: return "i1 = " + constant(rng);
        case 5: return "i2 > " + constant(rng);
        case 6: return "isint(i1)";
        case 7: return "exists w (add(i1, w, i2) and lt(w, " + constant(rng) + "))";
        default: return "exists z (z = x1 and not (z = x2))";
    }
}

std::string cond(Rng& rng, int depth) {
    if (depth <= 0 || rng.chance(45)) return condAtom(rng);
    switch (rng.below(3)) {
        case 0: return "not (" + cond(rng, depth - 1) + ")";
        case 1: return "(" + cond(rng, depth - 1) + " and " + cond(rng, depth - 1) + ")";
        default: return "(" + cond(rng, depth - 1) + " or " + cond(rng, depth - 1) + ")";
    }
}

std::string keyDef(Rng& rng) { return rng.chance(50) ? "y1 = x1" : "y1 = x2"; }

std::string valDef(Rng& rng) {
    std::string nz = std::to_string(rng.range(1, 3));
    switch (rng.below(8)) {
        case 0: return "add(i1, i2, j1)";
        case 1: return "mul(i1, " + nz + ", j1)";
        case 2: return "j1 = " + constant(rng);
        case 3: return "sub(i2, i1, j1)";
        case 4: return "exists t (add(i1, 1, t) and mul(t, t, j1))";
        case 5: return "floor(i1, j1)";
        case 6: return "j1 = i2";
        default: return "add(j1, " + constant(rng) + ", i1)";
    }
}

}  // namespace

std::string randomSafeFunction(Rng& rng, const std::string& name) {
    std::string body;
    switch (rng.below(6)) {
        case 0: body = cond(rng, 2) + " and " + keyDef(rng) + " and " + valDef(rng); break;
        case 1: {
            std::string a = condAtom(rng);
            body = keyDef(rng) + " and ((" + a + ") -> " + valDef(rng) + ") and (not (" + a + ") -> " + valDef(rng) + ")";
            break;
        }
        case 2: {
            std::string a = condAtom(rng);
            body = keyDef(rng) + " and (((" + a + ") and " + valDef(rng) + ") or (not (" + a + ") and " + valDef(rng) +
                   "))";
            break;
        }
        case 3: body = "(y1 = x1 or y1 = x2) and " + valDef(rng); break;
        case 4: body = keyDef(rng) + " and " + valDef(rng) + " and not (" + cond(rng, 2) + ")"; break;
        default:
            body = "exists w (sub(i2, i1, w) and " + keyDef(rng) + " and add(w, " + constant(rng) + ", j1))";
            break;
    }
    return "fn " + name + " (keys x1, x2 ; vals i1, i2) -> (keys y1 ; vals j1) := " + body;
}

}  // namespace lara::rnd

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
#include "lara/foagg.hpp"
#include "lara/program.hpp"
#include "lara/random.hpp"
#include "lara/stdlib.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace {

using namespace lara;

constexpr double kSoftmaxTolerance = 1e-9;
constexpr double kSampleSeconds = 1.0;
constexpr double kDiffSeconds = 30.0;
constexpr double kGenericSeconds = 60.0;
constexpr double kConvSeconds = 60.0;
constexpr double kSoftmaxSeconds = 1.0;
constexpr double kFuzzSeconds = 120.0;
constexpr double kDesugarSeconds = 5.0;
constexpr int kRandomDiffExprs = 50;
constexpr int kGenericTrials = 200;
constexpr int kRandomConvInstances = 100;
constexpr int kFuzzFormulas = 500;

std::string dataPath(const std::string& rel) { return std::string(LARA_TEST_DATA_DIR) + "/" + rel; }

/// Every table produced by a criterion, rechecked for key-functionality by criterion 7.
std::vector<AssocTable> produced;

AssocTable keep(AssocTable t) {
    produced.push_back(t);
    return t;
}

struct Outcome {
    bool passed = true;
    std::string note;

    void require(bool ok, const std::string& what) {
        if (!ok && passed) note = what;
        passed = passed && ok;
    }
};

int failures = 0;

void criterion(int id, const char* title, double limitSeconds, const std::function<Outcome()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.passed = false;
        o.note = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > limitSeconds) o.require(false, "took longer than the limit");
    if (!o.passed) ++failures;
    std::printf("[%s] criterion %d: %s (%.2fs, limit %.0fs)%s%s\n", o.passed ? "PASS" : "FAIL", id, title, secs,
                limitSeconds, o.note.empty() ? "" : ": ", o.note.c_str());
    std::fflush(stdout);
}

Environment envFor(const Database& db) {
    Environment env;
    env.schema = db.schema();
    env.fns.add(dsl::parseFunction("fn g (keys i ; vals) -> (keys ; vals z) := i = 0 and z = 1"));
    return env;
}

Outcome sampleConformance() {
    Outcome o;
    Database db = loadDatabase(dataPath("fig1"));
    Environment env = envFor(db);
    AssocTable join = keep(evaluate(expr::join(expr::atom("A"), expr::atom("B"), "mul"), env, db));
    o.require(join.size() == 8, "join does not have 8 rows");
    o.require(join.serialize() == loadTable(dataPath("expected/fig2_join.csv")).serialize(), "join differs from the expected table");
    AssocTable ext = keep(evaluate(expr::ext(FnRef{"g", {}, nullptr}, expr::atom("A")), env, db));
    o.require(ext.serialize() == "i:key,j:key,z:val\n0,0,1\n0,1,1\n", "ext[g](A) differs from the expected table");
    return o;
}

Outcome unionSemantics() {
    Outcome o;
    Database db = loadDatabase(dataPath("fig1"));
    Environment env = envFor(db);
    AssocTable u = keep(evaluate(expr::unite(expr::atom("A"), expr::atom("B"), "sum"), env, db));
    // independent Solve_+ over the padded multiset grouped on j
    std::map<Key, ValueTuple> oracle;
    auto addRow = [&](const Key& j, const ValueTuple& padded) {
        auto& acc = oracle.try_emplace(j, ValueTuple(3, Value(0))).first->second;
        for (std::size_t c = 0; c < 3; ++c) acc[c] = acc[c] + padded[c];
    };
    for (const auto& r : db.get("A").rows()) addRow(r.keys[1], {r.vals[0], r.vals[1], Value(0)});
    for (const auto& r : db.get("B").rows()) addRow(r.keys[0], {Value(0), r.vals[0], r.vals[1]});
    const Row* j0 = u.find({Key::integer(0)});
    const Row* j1 = u.find({Key::integer(1)});
    o.require(u.size() == 2 && j0 && j1, "union does not have rows j=0 and j=1");
    if (!o.passed) return o;
    o.require(j0->vals == ValueTuple{Value(4), Value(14), Value(3)}, "row j=0 is not (4,14,3)");
    o.require(j1->vals == ValueTuple{Value(6), Value(17), Value(2)}, "row j=1 is not (6,17,2)");
    o.require(j1->vals == oracle.at(Key::integer(1)) && j0->vals == oracle.at(Key::integer(0)),
              "union differs from the Solve oracle");
    return o;
}

Outcome differential() {
    Outcome o;
    Database db = loadDatabase(dataPath("fig1"));
    Environment env = envFor(db);
    ExprPtr A = expr::atom("A"), B = expr::atom("B");
    FnRef g{"g", {}, nullptr};
    std::vector<ExprPtr> corpus = {
        A,
        B,
        expr::empty(Sort({"i"}, {"v"})),
        expr::join(A, B, "mul"),
        expr::unite(A, B, "sum"),
        expr::ext(g, A),
        expr::join(A, A, "div"),
        expr::aggBy({"j"}, "avg", A),
        expr::reduceBy({"i"}, "max", A),
        expr::projVals({"v2"}, A),
        expr::rename({{"i", "s"}, {"v1", "w"}}, A),
        expr::product(A, expr::rename({{"j", "j2"}, {"k", "k2"}, {"v2", "w2"}, {"v3", "w3"}}, B)),
        expr::actDom(),
        expr::ind("A"),
    };
    int checked = 0;
    for (const auto& e : corpus) {
        fo::validate(fo::translate(e, env));
        fo::DiffResult r = fo::diffTest(e, env, db);
        keep(r.algebra);
        keep(r.logic);
        o.require(r.equal, toString(e) + ": " + r.firstDifference);
        ++checked;
    }
    Environment tame = rnd::tameEnvironment();
    for (int s = 0; s < kRandomDiffExprs; ++s) {
        rnd::Rng rng(1000 + s);
        Database rdb = rnd::randomDatabase(rng, tame, 6);
        ExprPtr e = rnd::randomExpr(rng, tame, 4);
        fo::validate(fo::translate(e, tame));
        fo::DiffResult r = fo::diffTest(e, tame, rdb);
        keep(r.algebra);
        keep(r.logic);
        o.require(r.equal, toString(e) + ": " + r.firstDifference);
        ++checked;
    }
    o.require(checked == static_cast<int>(corpus.size()) + kRandomDiffExprs, "not every expression was checked");
    return o;
}

Outcome genericity() {
    Outcome o;
    Environment env = rnd::tameEnvironment();
    for (int s = 0; s < kGenericTrials; ++s) {
        rnd::Rng rng(5000 + s);
        Database db = rnd::randomDatabase(rng, env);
        ExprPtr e = rnd::randomExpr(rng, env, 4);
        o.require(analyzeMode(e, env).generic, "random expression is not tame: " + toString(e));
        KeyPermutation pi = rnd::randomPermutation(rng, db.activeKeys());
        AssocTable base = keep(evaluate(e, env, db));
        AssocTable moved = keep(evaluate(e, env, db.permuted(pi)));
        o.require(moved == applyKeyPermutation(base, pi), "trial " + std::to_string(s) + ": " + toString(e));
    }
    const Program& conv = stdlib::convolutionProgram();
    Database db = loadDatabase(dataPath("conv/prop4"));
    KeyPermutation swap = {{Key::integer(2), Key::integer(3)}, {Key::integer(3), Key::integer(2)}};
    AssocTable onPermuted = keep(evaluate(conv.result, conv.env, db.permuted(swap)));
    AssocTable permuted = applyKeyPermutation(keep(evaluate(conv.result, conv.env, db)), swap);
    o.require(onPermuted != permuted, "convolution commutes with the 2<->3 swap");
    o.require(analyzeMode(conv.result, conv.env).ordered, "convolution is not flagged as ordered");
    return o;
}

/// Zero-padded convolution over kernel offsets.
stdlib::Matrix reference(const stdlib::Matrix& a, const stdlib::Matrix& k) {
    long rows = static_cast<long>(a.size()), cols = rows ? static_cast<long>(a[0].size()) : 0;
    long m = static_cast<long>(k.size()), mid = m / 2;
    stdlib::Matrix out(rows, std::vector<Value>(cols, Value(0)));
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j)
            for (long p = 0; p < m; ++p)
                for (long q = 0; q < m; ++q) {
                    long s = i + p - mid, t = j + q - mid;
                    if (s >= 0 && s < rows && t >= 0 && t < cols) out[i][j] = out[i][j] + a[s][t] * k[p][q];
                }
    return out;
}

stdlib::Matrix dense(const std::vector<std::vector<long>>& rows) {
    stdlib::Matrix m;
    for (const auto& r : rows) {
        m.emplace_back();
        for (long v : r) m.back().emplace_back(v);
    }
    return m;
}

Outcome convolution() {
    Outcome o;
    const Program& p = stdlib::convolutionProgram();
    auto run = [&](const stdlib::Matrix& a, const stdlib::Matrix& k) {
        return stdlib::tableMatrix(keep(evaluate(p.result, p.env, stdlib::convolutionDatabase(a, k))));
    };
    stdlib::Matrix ones = dense({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
    stdlib::Matrix a = dense({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 1}});
    stdlib::Matrix aPrime = dense({{1, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
    o.require(run(a, ones) == dense({{2, 2, 1, 0}, {2, 2, 1, 0}, {1, 1, 2, 1}, {0, 0, 1, 1}}), "A*K differs");
    o.require(run(aPrime, ones) == dense({{1, 1, 0, 0}, {1, 2, 1, 1}, {0, 1, 2, 2}, {0, 1, 2, 2}}), "A'*K differs");
    stdlib::Matrix c = dense({{3, -1, 0, 2}, {1, 4, -2, 0}, {0, 5, 1, -3}});
    o.require(run(c, dense({{1}})) == c, "identity kernel changes A");
    rnd::Rng rng(424242);
    const std::vector<std::size_t> kernels = {1, 3, 5};
    for (int n = 0; n < kRandomConvInstances; ++n) {
        std::size_t rows = rng.range(1, 6), cols = rng.range(1, 6), m = rng.pick(kernels);
        stdlib::Matrix x(rows, std::vector<Value>(cols)), k(m, std::vector<Value>(m));
        for (auto& r : x)
            for (auto& v : r) v = Value::rational(rng.range(-5, 5), rng.range(1, 3));
        for (auto& r : k)
            for (auto& v : r) v = Value(rng.range(-3, 3));
        stdlib::Matrix expected = reference(x, k);
        o.require(stdlib::convolutionOracle(x, k) == expected, "oracle disagrees on instance " + std::to_string(n));
        o.require(run(x, k) == expected, "expression disagrees on instance " + std::to_string(n));
    }
    return o;
}

Outcome softmax() {
    Outcome o;
    const Program& p = stdlib::softmaxProgram();
    Database db = loadDatabase(dataPath("softmax"));
    AssocTable out = keep(evaluate(p.result, p.env, conformDatabase(db, p)));
    double e3 = std::exp(3.0), e2 = std::exp(2.0);
    std::map<std::string, double> want = {{"f1", e3 / (e3 + e2)}, {"f2", e2 / (e3 + e2)}};
    std::map<std::string, double> rowSum;
    o.require(out.size() == 2, "softmax does not have 2 rows");
    for (const auto& r : out.rows()) {
        double v = r.vals[0].toDouble();
        o.require(std::fabs(v - want.at(r.keys[1].asText())) <= kSoftmaxTolerance, "softmax value off for " + r.keys[1].asText());
        rowSum[r.keys[0].asText()] += v;
    }
    for (const auto& [batch, s] : rowSum) o.require(std::fabs(s - 1.0) <= kSoftmaxTolerance, "batch " + batch + " sums to " + std::to_string(s));
    return o;
}

Outcome safety() {
    Outcome o;
    for (const auto& t : produced)
        o.require(AssocTable::fromRows(t.sort(), t.rows()) == t, "a produced table is not key-functional");
    std::size_t outputs = 0;
    for (int s = 0; s < kFuzzFormulas; ++s) {
        rnd::Rng rng(9000 + s);
        std::string src = rnd::randomSafeFunction(rng, "f" + std::to_string(s));
        auto f = dsl::parseFunction(src);
        dsl::checkSafety(*f);
        for (int n = 0; n < 6; ++n) {
            KeyTuple ks{Key::integer(rng.range(0, 2)), Key::integer(rng.range(0, 2))};
            ValueTuple vs{Value(rng.range(-2, 3)), Value(rng.range(-2, 3))};
            AssocTable r = dsl::evaluate(*f, ks, vs);
            o.require(AssocTable::fromRows(r.sort(), r.rows()) == r, "not functional: " + src);
            o.require(r.size() <= 2, "unexpected output size: " + src);
            outputs += r.size();
        }
    }
    o.require(outputs > 0, "fuzz produced no outputs");
    return o;
}

Outcome desugaring() {
    Outcome o;
    std::vector<std::string> dirs = {"fig1", "softmax", "conv/prop4", "conv/prop4-prime", "conv/identity"};
    for (const auto& dir : dirs) {
        Database db = loadDatabase(dataPath(dir));
        Environment env = envFor(db);
        for (const auto& [name, t] : db.tables()) {
            const auto& keys = t.sort().keys;
            for (std::size_t mask = 0; mask < (std::size_t{1} << keys.size()); ++mask) {
                std::vector<std::string> group;
                for (std::size_t b = 0; b < keys.size(); ++b)
                    if (mask & (std::size_t{1} << b)) group.push_back(keys[b]);
                for (const char* op : {"sum", "max", "count"}) {
                    ExprPtr e = expr::aggBy(group, op, expr::atom(name));
                    AssocTable direct = keep(evaluate(e, env, db));
                    AssocTable viaUnion = evaluate(desugar(e, env), env, db).withColumnOrder(direct.sort());
                    o.require(direct == viaUnion, dir + ": " + toString(e));
                }
            }
            AssocTable ind = keep(evaluate(expr::ind(name), env, db));
            o.require(evaluate(indConstruction(name, env), env, db) == ind, dir + ": ind(" + name + ")");
        }
    }
    return o;
}

}  // namespace

int main() {
    criterion(1, "join and ext on the sample database", kSampleSeconds, sampleConformance);
    criterion(2, "union semantics against Solve", kSampleSeconds, unionSemantics);
    criterion(3, "algebra and FO_Agg translation agree", kDiffSeconds, differential);
    criterion(4, "key-genericity and the ordered witness", kGenericSeconds, genericity);
    criterion(5, "convolution expression against the oracle", kConvSeconds, convolution);
    criterion(6, "softmax against the scalar computation", kSoftmaxSeconds, softmax);
    criterion(7, "finite key-functional results and safe-formula fuzzing", kFuzzSeconds, safety);
    criterion(8, "desugaring and Ind construction equivalences", kDesugarSeconds, desugaring);
    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

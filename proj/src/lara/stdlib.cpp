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

#include "lara/stdlib.hpp"

#include "lara/error.hpp"
#include "lara/programs.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

namespace lara::stdlib {

const Program& softmaxProgram() {
    static const Program p = parseProgram(text::kSoftmax, "softmax.lara");
    return p;
}

const Program& convolutionProgram() {
    static const Program p = parseProgram(text::kConvolution, "conv.lara");
    return p;
}

ExprPtr convolutionExpr() { return convolutionProgram().result; }

Matrix convolutionOracle(const Matrix& a, const Matrix& k) {
    const std::size_t m = k.size();
    for (const auto& row : k) {
        if (row.size() != m) fail(ErrorKind::Structural, "kernel must be square");
    }
    if (m % 2 == 0) fail(ErrorKind::Structural, "kernel dimension must be odd, got " + std::to_string(m));
    const long mid = static_cast<long>(m / 2);
    const long rows = static_cast<long>(a.size());
    Matrix out(a.size());
    for (long i = 0; i < rows; ++i) {
        const long cols = static_cast<long>(a[i].size());
        out[i].assign(a[i].size(), Value(0));
        for (long j = 0; j < cols; ++j) {
            Value sum(0);
            for (long di = -mid; di <= mid; ++di) {
                for (long dj = -mid; dj <= mid; ++dj) {
                    long s = i + di, t = j + dj;
                    if (s < 0 || s >= rows || t < 0 || t >= static_cast<long>(a[s].size())) continue;
                    sum = sum + a[s][t] * k[di + mid][dj + mid];
                }
            }
            out[i][j] = sum;
        }
    }
    return out;
}

AssocTable matrixTable(const Matrix& m, const std::string& row, const std::string& col, const std::string& val) {
    std::vector<Row> rows;
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m[i].size(); ++j) {
            rows.push_back(Row{{Key::integer(static_cast<long>(i + 1)), Key::integer(static_cast<long>(j + 1))},
                               {m[i][j]}});
        }
    }
    return AssocTable::fromRows(Sort({row, col}, {val}), std::move(rows));
}

Matrix tableMatrix(const AssocTable& t) {
    if (t.sort().keys.size() != 2 || t.sort().vals.size() != 1) {
        fail(ErrorKind::Sort, "a matrix table has two keys and one value, got " + t.sort().toString());
    }
    std::size_t rows = 0, cols = 0;
    for (const auto& r : t.rows()) {
        for (const auto& k : r.keys) {
            if (!k.isInteger() || k.asInteger() < 1) fail(ErrorKind::Sort, "matrix keys must be positive integers");
        }
        rows = std::max<std::size_t>(rows, r.keys[0].asInteger().get_ui());
        cols = std::max<std::size_t>(cols, r.keys[1].asInteger().get_ui());
    }
    Matrix m(rows, std::vector<Value>(cols, Value(0)));
    for (const auto& r : t.rows()) m[r.keys[0].asInteger().get_ui() - 1][r.keys[1].asInteger().get_ui() - 1] = r.vals[0];
    return m;
}

Database convolutionDatabase(const Matrix& a, const Matrix& k) {
    Database db;
    db.add("EntryA", matrixTable(a, "i", "j", "v"));
    db.add("EntryK", matrixTable(k, "k", "l", "u"));
    return db;
}

std::string dataDir() {
    if (const char* d = std::getenv("LARA_DATA_DIR"); d && *d) return d;
    return text::kDataDir;
}

namespace {

AssocTable runProgram(const std::string& dir, const std::string& program, const std::string& dbDir) {
    Database raw = loadDatabase(dir + "/" + dbDir);
    Program p = parseProgram(readFile(dir + "/programs/" + program), program, raw.schema());
    Database db = conformDatabase(raw, p);
    return evaluate(p.result, p.env, db);
}

FixtureResult compareExpected(const AssocTable& got, const std::string& expectedPath) {
    FixtureResult r;
    AssocTable want = loadTable(expectedPath);
    r.output = got.serialize();
    r.passed = r.output == want.serialize();
    r.detail = std::string(r.passed ? "ok" : "MISMATCH") + ": result equals " + expectedPath + "\n";
    if (!r.passed) r.detail += "expected:\n" + want.serialize();
    return r;
}

FixtureResult softmaxFixture(const std::string& dir) {
    Database raw = loadDatabase(dir + "/softmax");
    const Program& p = softmaxProgram();
    Database db = conformDatabase(raw, p);
    AssocTable got = evaluate(p.result, p.env, db);

    // Scalar reference: per (batch, feature) maximum over time, then exp / sum of exp.
    const AssocTable& seqs = db.get("Seqs");
    std::map<std::pair<Key, Key>, double> maxima;
    for (const auto& row : seqs.rows()) {
        auto key = std::make_pair(row.keys[1], row.keys[2]);
        double v = row.vals[0].toDouble();
        auto it = maxima.find(key);
        if (it == maxima.end() || v > it->second) maxima[key] = v;
    }
    std::map<Key, double> sums;
    for (const auto& [bf, m] : maxima) sums[bf.first] += std::exp(m);

    FixtureResult r;
    r.output = got.serialize();
    r.passed = got.size() == maxima.size();
    std::ostringstream detail;
    detail.precision(12);
    std::map<Key, double> rowSums;
    for (const auto& row : got.rows()) {
        auto it = maxima.find({row.keys[0], row.keys[1]});
        if (it == maxima.end()) {
            r.passed = false;
            continue;
        }
        double want = std::exp(it->second) / sums[row.keys[0]];
        double have = row.vals[0].toDouble();
        bool ok = std::fabs(want - have) <= 1e-9;
        r.passed = r.passed && ok;
        rowSums[row.keys[0]] += have;
        detail << (ok ? "ok" : "MISMATCH") << ": softmax(" << row.keys[0].toString() << "," << row.keys[1].toString()
               << ") = " << have << ", reference " << want << "\n";
    }
    for (const auto& [b, s] : rowSums) {
        bool ok = std::fabs(s - 1.0) <= 1e-9;
        r.passed = r.passed && ok;
        detail << (ok ? "ok" : "MISMATCH") << ": batch " << b.toString() << " sums to " << s << "\n";
    }
    r.detail = detail.str();
    return r;
}

FixtureResult convFixture(const std::string& dir, const std::string& sub, const std::string& expected) {
    Database raw = loadDatabase(dir + "/conv/" + sub);
    const Program& p = convolutionProgram();
    Database db = conformDatabase(raw, p);
    AssocTable got = evaluate(p.result, p.env, db);
    FixtureResult r = compareExpected(got, dir + "/expected/" + expected);
    Matrix oracle = convolutionOracle(tableMatrix(db.get("EntryA")), tableMatrix(db.get("EntryK")));
    bool same = matrixTable(oracle).serialize() == r.output;
    r.passed = r.passed && same;
    r.detail += std::string(same ? "ok" : "MISMATCH") + ": result equals the direct double-sum convolution\n";
    return r;
}

const std::map<std::string, std::function<FixtureResult(const std::string&)>>& fixtures() {
    static const std::map<std::string, std::function<FixtureResult(const std::string&)>> all = {
        {"fig2-join",
         [](const std::string& d) {
             return compareExpected(runProgram(d, "join_ab.lara", "fig1"), d + "/expected/fig2_join.csv");
         }},
        {"fig2-union",
         [](const std::string& d) {
             return compareExpected(runProgram(d, "union_ab.lara", "fig1"), d + "/expected/fig2_union.csv");
         }},
        {"fig2-ext",
         [](const std::string& d) {
             return compareExpected(runProgram(d, "ext_g.lara", "fig1"), d + "/expected/fig2_ext.csv");
         }},
        {"softmax", softmaxFixture},
        {"conv-prop4", [](const std::string& d) { return convFixture(d, "prop4", "conv_prop4.csv"); }},
        {"conv-prop4-prime", [](const std::string& d) { return convFixture(d, "prop4-prime", "conv_prop4_prime.csv"); }},
        {"conv-identity", [](const std::string& d) { return convFixture(d, "identity", "conv_identity.csv"); }},
    };
    return all;
}

}  // namespace

std::vector<std::string> fixtureNames() {
    std::vector<std::string> out;
    for (const auto& [name, _] : fixtures()) out.push_back(name);
    return out;
}

FixtureResult runFixture(const std::string& name, const std::string& dir) {
    auto it = fixtures().find(name);
    if (it == fixtures().end()) fail(ErrorKind::Structural, "unknown example '" + name + "'");
    return it->second(dir);
}

}  // namespace lara::stdlib

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

#include "lara/error.hpp"
#include "lara/random.hpp"
#include "lara/stdlib.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

namespace lara::stdlib {
namespace {

using test::table;

AssocTable softmaxOf(const AssocTable& seqs) {
    Database db;
    db.add("Seqs", seqs);
    const Program& p = softmaxProgram();
    return evaluate(p.result, p.env, db);
}

std::map<std::string, double> byFeature(const AssocTable& t) {
    std::map<std::string, double> out;
    for (const auto& r : t.rows()) out[r.keys[0].asText() + "/" + r.keys[1].asText()] = r.vals[0].toDouble();
    return out;
}

TEST(SoftmaxTest, MatchesScalarComputation) {
    AssocTable out = softmaxOf(loadTable(test::dataPath("softmax/Seqs.csv")));
    auto v = byFeature(out);
    double e3 = std::exp(3.0), e2 = std::exp(2.0);
    EXPECT_NEAR(v.at("b1/f1"), e3 / (e3 + e2), 1e-9);
    EXPECT_NEAR(v.at("b1/f2"), e2 / (e3 + e2), 1e-9);
    EXPECT_NEAR(v.at("b1/f1"), 0.7310585786300049, 1e-9);
    EXPECT_NEAR(v.at("b1/f1") + v.at("b1/f2"), 1.0, 1e-9);
}

TEST(SoftmaxTest, SingleFeatureIsOne) {
    AssocTable out = softmaxOf(table("time:key,batch:key,features:key,val:val\n\"t1\",\"b\",\"f\",5\n\"t2\",\"b\",\"f\",-2\n"));
    ASSERT_EQ(out.size(), 1U);
    EXPECT_EQ(out.rows()[0].vals[0], Value(1));
}

TEST(SoftmaxTest, EqualMaximaAreUniform) {
    AssocTable out = softmaxOf(table(
        "time:key,batch:key,features:key,val:val\n1,\"b\",\"f1\",4\n1,\"b\",\"f2\",4\n2,\"b\",\"f3\",4\n1,\"c\",\"f1\",0\n"));
    for (const auto& r : out.rows()) {
        Value expected = r.keys[0].asText() == "b" ? Value::rational(1, 3) : Value(1);
        EXPECT_EQ(r.vals[0], expected);
    }
}

TEST(SoftmaxTest, RowsSumToOnePerBatch) {
    rnd::Rng rng(8);
    std::vector<Row> rows;
    for (long t = 1; t <= 3; ++t)
        for (long b = 1; b <= 3; ++b)
            for (long f = 1; f <= 4; ++f)
                rows.push_back({{test::ik(t), test::ik(b), test::ik(f)}, {Value::rational(rng.range(-20, 20), 4)}});
    AssocTable out = softmaxOf(AssocTable::fromRows(Sort({"time", "batch", "features"}, {"val"}), rows));
    std::map<std::string, double> sums;
    for (const auto& r : out.rows()) sums[r.keys[0].toString()] += r.vals[0].toDouble();
    ASSERT_EQ(sums.size(), 3U);
    for (const auto& [batch, s] : sums) EXPECT_NEAR(s, 1.0, 1e-9) << batch;
}

Matrix dense(std::initializer_list<std::initializer_list<long>> rows) {
    Matrix m;
    for (const auto& r : rows) {
        m.emplace_back();
        for (long v : r) m.back().emplace_back(v);
    }
    return m;
}

/// Zero-padded convolution written against kernel offsets.
Matrix referenceConvolution(const Matrix& a, const Matrix& k) {
    long rows = static_cast<long>(a.size()), cols = rows ? static_cast<long>(a[0].size()) : 0;
    long m = static_cast<long>(k.size()), mid = m / 2;
    Matrix out(rows, std::vector<Value>(cols, Value(0)));
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j)
            for (long p = 0; p < m; ++p)
                for (long q = 0; q < m; ++q) {
                    long s = i + p - mid, t = j + q - mid;
                    if (s >= 0 && s < rows && t >= 0 && t < cols) out[i][j] = out[i][j] + a[s][t] * k[p][q];
                }
    return out;
}

Matrix viaExpression(const Matrix& a, const Matrix& k) {
    const Program& p = convolutionProgram();
    return tableMatrix(evaluate(p.result, p.env, convolutionDatabase(a, k)));
}

const Matrix kPaperA = dense({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 1}});
const Matrix kPaperAPrime = dense({{1, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
const Matrix kOnes = dense({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});

TEST(ConvolutionTest, PaperMatrixA) {
    Matrix expected = dense({{2, 2, 1, 0}, {2, 2, 1, 0}, {1, 1, 2, 1}, {0, 0, 1, 1}});
    EXPECT_EQ(convolutionOracle(kPaperA, kOnes), expected);
    EXPECT_EQ(referenceConvolution(kPaperA, kOnes), expected);
    EXPECT_EQ(viaExpression(kPaperA, kOnes), expected);
}

TEST(ConvolutionTest, PaperMatrixAPrime) {
    Matrix expected = dense({{1, 1, 0, 0}, {1, 2, 1, 1}, {0, 1, 2, 2}, {0, 1, 2, 2}});
    EXPECT_EQ(convolutionOracle(kPaperAPrime, kOnes), expected);
    EXPECT_EQ(viaExpression(kPaperAPrime, kOnes), expected);
}

TEST(ConvolutionTest, IdentityKernel) {
    Matrix a = dense({{3, -1, 0, 2}, {1, 4, -2, 0}, {0, 5, 1, -3}});
    EXPECT_EQ(convolutionOracle(a, dense({{1}})), a);
    EXPECT_EQ(viaExpression(a, dense({{1}})), a);
}

TEST(ConvolutionTest, OracleRejectsEvenKernel) {
    EXPECT_THROW(convolutionOracle(kPaperA, dense({{1, 1}, {1, 1}})), Error);
    EXPECT_THROW(convolutionOracle(kPaperA, dense({{1, 1, 1}})), Error);
}

TEST(ConvolutionTest, RandomInstancesAgree) {
    rnd::Rng rng(77);
    for (int n = 0; n < 12; ++n) {
        std::size_t rows = rng.range(1, 4), cols = rng.range(1, 4), m = rng.pick(std::vector<std::size_t>{1, 3});
        Matrix a = tableMatrix(rnd::randomMatrix(rng, rows, cols));
        Matrix k = tableMatrix(rnd::randomMatrix(rng, m, m, "k", "l", "u"));
        if (a.size() != rows || k.size() != m) continue;
        Matrix expected = referenceConvolution(a, k);
        EXPECT_EQ(convolutionOracle(a, k), expected);
        EXPECT_EQ(viaExpression(a, k), expected);
    }
}

TEST(ConvolutionTest, ExpressionIsNotKeyGeneric) {
    const Program& p = convolutionProgram();
    EXPECT_TRUE(analyzeMode(p.result, p.env).ordered);
    Database db = convolutionDatabase(kPaperA, kOnes);
    KeyPermutation swap = {{test::ik(2), test::ik(3)}, {test::ik(3), test::ik(2)}};
    AssocTable permutedResult = evaluate(p.result, p.env, db.permuted(swap));
    AssocTable resultPermuted = applyKeyPermutation(evaluate(p.result, p.env, db), swap);
    EXPECT_NE(permutedResult, resultPermuted);
}

TEST(ConvolutionTest, MatrixTablesRoundTrip) {
    EXPECT_EQ(tableMatrix(matrixTable(kPaperA)), kPaperA);
    EXPECT_EQ(matrixTable(kPaperA).sort(), Sort({"i", "j"}, {"v"}));
}

TEST(FixtureTest, AllShippedFixturesPass) {
    for (const auto& name : fixtureNames()) {
        FixtureResult r = runFixture(name, test::dataPath(""));
        EXPECT_TRUE(r.passed) << name << "\n" << r.detail << r.output;
    }
    EXPECT_THROW(runFixture("nosuch", test::dataPath("")), Error);
}

}  // namespace
}  // namespace lara::stdlib

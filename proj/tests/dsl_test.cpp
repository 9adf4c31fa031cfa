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

#include "lara/dsl.hpp"
#include "lara/error.hpp"
#include "lara/random.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <string>

namespace lara::dsl {
namespace {

using test::ik;
using test::table;
using test::tk;

ErrorKind kindOf(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::Structural;
}

TEST(DslParseTest, InterchangeFunction) {
    auto f = parseFunction("fn f (keys x, y ; vals i) -> (keys x2, y2 ; vals j) := x = x2 and y = y2 and add(i, j, 1)");
    EXPECT_EQ(f->in, Sort({"x", "y"}, {"i"}));
    EXPECT_EQ(f->out, Sort({"x2", "y2"}, {"j"}));
    EXPECT_FALSE(f->ordered());
    EXPECT_NO_THROW(checkSafety(*f));
}

TEST(DslParseTest, Bottom) {
    Formula b = parseFormula("false", Sort({}, {}));
    EXPECT_EQ(b.root->kind, Node::Kind::False);
}

TEST(DslParseTest, NeighborsFormula) {
    auto f = parseFunction(
        "fn neighbors (keys ; vals ci, cj, cs, ct, m) -> (keys ; vals) :="
        " exists mid, m1, lo, hi (add(m1, 1, m) and mul(2, mid, m1) and sub(ci, mid, lo)"
        " and add(ci, mid, hi) and leq(lo, cs) and leq(cs, hi) and leq(cj, ct))");
    EXPECT_EQ(f->body.root->kind, Node::Kind::Exists);
    EXPECT_NO_THROW(checkSafety(*f));
}

TEST(DslParseTest, SortedQuantifiersAndImplication) {
    auto f = parseFunction(
        "fn h (keys x ; vals i) -> (keys ; vals j) := exists k:key (k = x) and (isint(i) implies j = 1)"
        " and (not isint(i) -> j = 0)");
    EXPECT_NO_THROW(checkSafety(*f));
    EXPECT_EQ(evaluate(*f, {ik(4)}, {Value::rational(1, 2)}), table("j:val\n0\n"));
}

TEST(DslParseTest, OrderedAtomsAreFlagged) {
    auto f = parseFunction("fn lo (keys x, y ; vals) -> (keys ; vals j) := x < y and j = 1");
    EXPECT_TRUE(f->ordered());
}

TEST(DslParseTest, Errors) {
    EXPECT_EQ(kindOf([] { parseFunction("fn f (keys x ; vals) -> (keys ; vals j) := x = "); }), ErrorKind::Parse);
    EXPECT_EQ(kindOf([] { parseFunction("fn f (keys ; vals i) -> (keys ; vals j) := sqrt(i, j)"); }),
              ErrorKind::Parse);
    EXPECT_EQ(kindOf([] { parseFunction("fn f (keys x ; vals i) -> (keys ; vals j) := add(x, i, j)"); }),
              ErrorKind::Sort);
    try {
        parseFunction("fn f (keys x ; vals) -> (keys ; vals j) :=\n  j = = 1");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST(DslSafetyTest, AcceptsDeterminedOutputs) {
    EXPECT_NO_THROW(checkSafety(*parseFunction(
        "fn diag (keys k, l ; vals) -> (keys ; vals m) := (k = l -> m = 1) and (not (k = l) -> m = 0)")));
    EXPECT_NO_THROW(checkSafety(*parseFunction("fn s (keys ; vals a, b) -> (keys ; vals c) := sub(c, a, b)")));
}

TEST(DslSafetyTest, RejectsUndetermined) {
    try {
        checkSafety(*parseFunction("fn bad (keys ; vals i) -> (keys ; vals j) := j = j"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Safety);
        EXPECT_NE(std::string(e.what()).find('j'), std::string::npos);
    }
    EXPECT_THROW(checkSafety(*parseFunction("fn b2 (keys ; vals i) -> (keys ; vals j) := lt(i, j)")), Error);
    EXPECT_THROW(checkSafety(*parseFunction("fn b3 (keys ; vals i) -> (keys ; vals j) := not (j = i)")), Error);
    EXPECT_THROW(checkSafety(*parseFunction("fn b4 (keys ; vals i) -> (keys ; vals j) := j = i or i = 1")), Error);
}

TEST(DslEvalTest, InterchangesZerosAndOnes) {
    auto f = parseFunction("fn f (keys x, y ; vals i) -> (keys x2, y2 ; vals j) := x = x2 and y = y2 and add(i, j, 1)");
    EXPECT_EQ(evaluate(*f, {tk("k1"), tk("k2")}, {Value(1)}), table("x2:key,y2:key,j:val\n\"k1\",\"k2\",0\n"));
    EXPECT_EQ(evaluate(*f, {tk("k1"), tk("k2")}, {Value(0)}), table("x2:key,y2:key,j:val\n\"k1\",\"k2\",1\n"));
}

TEST(DslEvalTest, KeyConditionedConstant) {
    auto g = parseFunction("fn g (keys i, j ; vals v1, v2) -> (keys ; vals z) := i = 0 and z = 1");
    EXPECT_EQ(evaluate(*g, {ik(0), ik(0)}, {Value(1), Value(5)}), table("z:val\n1\n"));
    EXPECT_TRUE(evaluate(*g, {ik(1), ik(0)}, {Value(3), Value(7)}).empty());
}

TEST(DslEvalTest, Average) {
    auto a = parseFunction("fn avg (keys k ; vals a, b) -> (keys ; vals c) := exists s (add(a, b, s) and mul(2, c, s))");
    EXPECT_EQ(evaluate(*a, {tk("k")}, {Value(1), Value(2)}), table("c:val\n3/2\n"));
}

TEST(DslEvalTest, KeyQuantifiersRangeOverInputTuple) {
    auto f = parseFunction("fn o (keys x, y ; vals) -> (keys z ; vals j) := (z = x or z = y) and j = 1");
    EXPECT_EQ(evaluate(*f, {ik(1), ik(2)}, {}), table("z:key,j:val\n1,1\n2,1\n"));
    EXPECT_EQ(evaluate(*f, {ik(1), ik(1)}, {}), table("z:key,j:val\n1,1\n"));
}

TEST(DslEvalTest, RejectsNonFunctionalOutput) {
    auto f = parseFunction("fn two (keys x ; vals) -> (keys ; vals j) := j = 1 or j = 2");
    EXPECT_NO_THROW(checkSafety(*f));
    EXPECT_EQ(kindOf([&] { evaluate(*f, {ik(1)}, {}); }), ErrorKind::KeyViolation);
}

TEST(DslEvalTest, ExpApproxPredicate) {
    auto f = parseFunction("fn e (keys ; vals v) -> (keys ; vals w) := expApprox(v, w)");
    EXPECT_EQ(evaluate(*f, {}, {Value(1)}).rows()[0].vals[0], expApprox(Value(1), defaultExpPrecision()));
}

std::vector<Value> integerGrid(long lo, long hi) {
    std::vector<Value> g;
    for (long v = lo; v <= hi; ++v) g.emplace_back(v);
    return g;
}

TEST(DslFuzzTest, SafeFormulasAreFiniteAndFunctional) {
    for (std::uint64_t s = 0; s < 500; ++s) {
        rnd::Rng rng(9000 + s);
        std::string src = rnd::randomSafeFunction(rng, "f");
        auto f = parseFunction(src);
        ASSERT_NO_THROW(checkSafety(*f)) << src;
        for (int n = 0; n < 6; ++n) {
            KeyTuple ks{ik(rng.range(0, 2)), ik(rng.range(0, 2))};
            ValueTuple vs{Value(rng.range(-2, 3)), Value(rng.range(-2, 3))};
            AssocTable r;
            ASSERT_NO_THROW(r = evaluate(*f, ks, vs)) << src;
            EXPECT_LE(r.size(), 2U) << src;
        }
    }
}

TEST(DslFuzzTest, SolverMatchesBruteForce) {
    std::vector<Value> grid = integerGrid(-30, 30);
    for (std::uint64_t s = 0; s < 150; ++s) {
        rnd::Rng rng(20000 + s);
        std::string src = rnd::randomSafeFunction(rng, "f");
        auto f = parseFunction(src);
        for (int n = 0; n < 4; ++n) {
            KeyTuple ks{ik(rng.range(0, 2)), ik(rng.range(0, 2))};
            ValueTuple vs{Value(rng.range(-2, 3)), Value(rng.range(-2, 3))};
            AssocTable solved = evaluate(*f, ks, vs);
            for (const auto& r : solved.rows()) ASSERT_TRUE(r.vals[0] >= grid.front() && r.vals[0] <= grid.back()) << src;
            EXPECT_EQ(solved, bruteForce(*f, ks, vs, grid)) << src;
        }
    }
}

TEST(DslFuzzTest, TameFunctionsCommuteWithPermutations) {
    for (std::uint64_t s = 0; s < 200; ++s) {
        rnd::Rng rng(40000 + s);
        auto f = parseFunction(rnd::randomSafeFunction(rng, "f"));
        ASSERT_FALSE(f->ordered());
        KeyTuple ks{ik(rng.range(0, 2)), ik(rng.range(0, 2))};
        ValueTuple vs{Value(rng.range(-2, 3)), Value(rng.range(-2, 3))};
        KeyPermutation pi = rnd::randomPermutation(rng, {ks.begin(), ks.end()});
        KeyTuple moved;
        for (const Key& k : ks) moved.push_back(pi.count(k) ? pi.at(k) : k);
        EXPECT_EQ(evaluate(*f, moved, vs), applyKeyPermutation(evaluate(*f, ks, vs), pi)) << f->toString();
    }
}

}  // namespace
}  // namespace lara::dsl

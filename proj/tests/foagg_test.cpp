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
#include "lara/foagg.hpp"
#include "lara/random.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

namespace lara::fo {
namespace {

using test::table;

Var key(const std::string& n) { return Var{n, VarSort::Key}; }
Var val(const std::string& n) { return Var{n, VarSort::Val}; }

class FoAggTest : public ::testing::Test {
protected:
    void SetUp() override {
        db = test::fig1();
        env.schema = db.schema();
        env.fns.add(dsl::parseFunction("fn g (keys i ; vals) -> (keys ; vals z) := i = 0 and z = 1"));
    }

    Environment env;
    Database db;
};

TEST_F(FoAggTest, AtomTranslatesToRelation) {
    Query q = translate(expr::atom("A"), env);
    EXPECT_EQ(q.formula->kind, Formula::Kind::Rel);
    EXPECT_EQ(q.formula->rel, "A");
    EXPECT_EQ(q.sort, Sort({"i", "j"}, {"v1", "v2"}));
    EXPECT_EQ(evaluate(q, env, db), db.get("A"));
}

TEST_F(FoAggTest, EmptyTranslatesToBottom) {
    Query q = translate(expr::empty(Sort({"i"}, {"v"})), env);
    EXPECT_EQ(q.formula->kind, Formula::Kind::Bottom);
    EXPECT_NE(q.toString().find("⊥"), std::string::npos);
    EXPECT_TRUE(evaluate(q, env, db).empty());
    EXPECT_TRUE(diffTest(expr::empty(Sort({"i"}, {"v"})), env, db).equal);
}

TEST_F(FoAggTest, AggregateTerm) {
    Database d;
    d.add("Entry", table("y:key,i:val\n\"a\",1\n\"b\",2\n"));
    Environment e;
    e.schema = d.schema();
    Var y = key("y"), y2 = key("y2"), i = val("i"), i2 = val("i2"), out = val("s");
    FormulaPtr entry = build::rel("Entry", {y2}, {i2});
    TermPtr sum = build::agg("sum", {y2, i2}, build::var(i2), entry);
    FormulaPtr phi = build::exists({y, i}, build::conj({build::rel("Entry", {y}, {i}), build::valEq(out, sum)}));
    Query q{phi, "func", {}, {out}, Sort({}, {"s"})};
    EXPECT_NO_THROW(validate(q));
    EXPECT_EQ(evaluate(q, e, d), table("s:val\n3\n"));
}

TEST_F(FoAggTest, JoinMatchesExpectedTable) {
    ExprPtr e = expr::join(expr::atom("A"), expr::atom("B"), "mul");
    Query q = translate(e, env);
    EXPECT_NO_THROW(validate(q));
    EXPECT_EQ(evaluate(q, env, db).serialize(), test::expected("fig2_join.csv"));
    DiffResult r = diffTest(e, env, db);
    EXPECT_TRUE(r.equal) << r.firstDifference;
}

TEST_F(FoAggTest, UnionMatchesExpectedTable) {
    Query q = translate(expr::unite(expr::atom("A"), expr::atom("B"), "sum"), env);
    EXPECT_NE(q.toString().find("η"), std::string::npos);
    AssocTable t = evaluate(q, env, db);
    EXPECT_EQ(t.find({test::ik(0)})->vals, (ValueTuple{Value(4), Value(14), Value(3)}));
    EXPECT_EQ(t.serialize(), test::expected("fig2_union.csv"));
}

TEST_F(FoAggTest, CoreFixturesAgree) {
    ExprPtr A = expr::atom("A"), B = expr::atom("B");
    FnRef g{"g", {}, nullptr};
    ExprPtr b2 = expr::rename({{"j", "j2"}, {"k", "k2"}, {"v2", "w2"}, {"v3", "w3"}}, B);
    std::vector<ExprPtr> corpus = {
        A,
        expr::join(A, B, "mul"),
        expr::unite(A, B, "sum"),
        expr::ext(g, A),
        expr::join(A, A, "div"),
        expr::unite(A, expr::empty(Sort({"i"}, {"v1"})), "sum"),
        expr::aggBy({"j"}, "avg", A),
        expr::reduceBy({"i"}, "max", A),
        expr::projVals({"v2"}, A),
        expr::rename({{"i", "s"}, {"v1", "w"}}, A),
        expr::product(A, b2),
        expr::actDom(),
        expr::ind("A"),
        expr::unite(A, A, "count"),
        expr::join(expr::ext(g, A), B, "add"),
    };
    for (const auto& e : corpus) {
        Query q = translate(e, env);
        EXPECT_NO_THROW(validate(q)) << toString(e);
        DiffResult r = diffTest(e, env, db);
        EXPECT_TRUE(r.equal) << toString(e) << ": " << r.firstDifference;
    }
}

TEST_F(FoAggTest, PrintingIsDeterministic) {
    ExprPtr e = expr::unite(expr::join(expr::atom("A"), expr::atom("B"), "mul"), expr::atom("A"), "sum");
    EXPECT_EQ(translate(e, env).toString(), translate(e, env).toString());
    EXPECT_NE(translate(e, env).toString().find("resolver: func"), std::string::npos);
}

TEST_F(FoAggTest, DifferenceIsReported) {
    DiffResult r = diffTest(expr::atom("A"), env, db);
    EXPECT_TRUE(r.equal);
    EXPECT_TRUE(r.firstDifference.empty());
}

TEST(FoAggValidatorTest, RejectsUnguardedEquality) {
    Var j = val("j"), i = val("i");
    Query q{build::valEq(j, build::var(i)), "func", {}, {j}, Sort({}, {"j"})};
    EXPECT_THROW(validate(q), Error);
}

TEST(FoAggValidatorTest, RejectsMismatchedDisjunction) {
    Var x = key("x"), y = key("y"), v = val("v");
    FormulaPtr a = build::rel("R", {x}, {v});
    FormulaPtr b = build::exists({y}, build::rel("S", {x, y}, {v}));
    EXPECT_NO_THROW(validate(Query{build::disj({a, b}), "func", {x}, {v}, Sort({"x"}, {"v"})}));
    FormulaPtr c = build::rel("S", {x, y}, {v});
    EXPECT_THROW(validate(Query{build::disj({a, c}), "func", {x, y}, {v}, Sort({"x", "y"}, {"v"})}), Error);
}

TEST(FoAggValidatorTest, RejectsUnguardedNegation) {
    Var x = key("x"), y = key("y"), v = val("v");
    FormulaPtr a = build::rel("R", {x}, {v});
    FormulaPtr b = build::rel("S", {x, y}, {v});
    EXPECT_THROW(validate(Query{build::andNot(a, b), "func", {x}, {v}, Sort({"x"}, {"v"})}), Error);
    EXPECT_NO_THROW(validate(Query{build::andNot(a, a), "func", {x}, {v}, Sort({"x"}, {"v"})}));
}

TEST(FoAggRandomTest, TranslationsAreSafeAndAgree) {
    Environment env = rnd::tameEnvironment();
    for (std::uint64_t s = 0; s < 50; ++s) {
        rnd::Rng rng(1000 + s);
        Database db = rnd::randomDatabase(rng, env);
        ExprPtr e = rnd::randomExpr(rng, env, 4);
        ASSERT_NO_THROW(validate(translate(e, env))) << toString(e);
        DiffResult r = diffTest(e, env, db);
        EXPECT_TRUE(r.equal) << toString(e) << ": " << r.firstDifference;
    }
}

}  // namespace
}  // namespace lara::fo

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
#include "lara/table.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <map>

namespace lara {
namespace {

using test::ik;
using test::table;
using test::tk;

const AggOp& agg(const std::string& name) { return builtinAggregates().get(name); }

TEST(PadRowTest, FillsNewAttributesWithNeutral) {
    EXPECT_EQ(padRow({Value(2), Value(6)}, {"v1", "v2"}, {"v1", "v2", "v3"}, Value(0)),
              (ValueTuple{Value(2), Value(6), Value(0)}));
    EXPECT_EQ(padRow({Value(4), Value(8)}, {"v1", "v2"}, {"v1", "v2"}, Value(0)), (ValueTuple{Value(4), Value(8)}));
    EXPECT_EQ(padRow({Value(5)}, {"v2"}, {"v1", "v2", "v3"}, Value(1)),
              (ValueTuple{Value(1), Value(5), Value(1)}));
}

TEST(PadRowTest, RejectsArityMismatch) {
    EXPECT_THROW(padRow({Value(1), Value(2)}, {"v1"}, {"v1", "v2"}, Value(0)), Error);
    EXPECT_THROW(padRow({Value(1)}, {"v9"}, {"v1", "v2"}, Value(0)), Error);
}

TEST(SolveTest, SumsConflicts) {
    Sort s({"k"}, {"v"});
    AssocTable t = solve(s, {{{tk("k")}, {Value(1)}}, {{tk("k")}, {Value(2)}}}, agg("sum"));
    EXPECT_EQ(t, table("k:key,v:val\n\"k\",3\n"));
}

TEST(SolveTest, UnionGroupOfSampleTables) {
    Sort s({"j"}, {"v1", "v2", "v3"});
    KeyedMultiset m = {
        {{ik(0)}, {Value(1), Value(5), Value(0)}},
        {{ik(0)}, {Value(3), Value(7), Value(0)}},
        {{ik(0)}, {Value(0), Value(1), Value(1)}},
        {{ik(0)}, {Value(0), Value(1), Value(2)}},
    };
    EXPECT_EQ(solve(s, m, agg("sum")), table("j:key,v1:val,v2:val,v3:val\n0,4,14,3\n"));
}

TEST(SolveTest, FuncMarksCollisions) {
    Sort s({"k"}, {"v"});
    EXPECT_EQ(solve(s, {{{tk("k")}, {Value(7)}}}, agg("func")), table("k:key,v:val\n\"k\",7\n"));
    AssocTable twice = solve(s, {{{tk("k")}, {Value(7)}}, {{tk("k")}, {Value(7)}}}, agg("func"));
    ASSERT_EQ(twice.size(), 1U);
    EXPECT_TRUE(twice.rows()[0].vals[0].isNonValue());
}

TEST(SolveTest, UndefinedAggregateNamesKey) {
    Sort s({"k"}, {"v"});
    KeyedMultiset three = {{{tk("q")}, {Value(1)}}, {{tk("q")}, {Value(2)}}, {{tk("q")}, {Value(3)}}};
    try {
        solve(s, three, agg("div"));
        FAIL() << "expected an evaluation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Eval);
        EXPECT_NE(std::string(e.what()).find("\"q\""), std::string::npos) << e.what();
    }
}

TEST(SolveTest, IdempotentOnKeyFunctionalInput) {
    rnd::Rng rng(3);
    Environment env = rnd::tameEnvironment();
    for (int n = 0; n < 50; ++n) {
        Database db = rnd::randomDatabase(rng, env);
        for (const auto& [name, t] : db.tables()) {
            KeyedMultiset m;
            for (const auto& r : t.rows()) m.emplace_back(r.keys, r.vals);
            for (const char* op : {"sum", "prod", "min", "max", "func"}) EXPECT_EQ(solve(t.sort(), m, agg(op)), t) << op;
        }
    }
}

TEST(AssocTableTest, RejectsKeyViolation) {
    EXPECT_THROW(table("k:key,v:val\n\"k\",1\n\"k\",2\n"), Error);
    try {
        AssocTable::fromRows(Sort({"k"}, {"v"}), {{{tk("k")}, {Value(1)}}, {{tk("k")}, {Value(2)}}});
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::KeyViolation);
    }
}

TEST(AssocTableTest, DeduplicatesIdenticalRows) {
    AssocTable t = AssocTable::fromRows(Sort({"k"}, {"v"}), {{{ik(1)}, {Value(1)}}, {{ik(1)}, {Value(1)}}});
    EXPECT_EQ(t.size(), 1U);
}

TEST(AssocTableTest, KeylessTableHasAtMostOneRow) {
    EXPECT_THROW(AssocTable::fromRows(Sort({}, {"v"}), {{{}, {Value(1)}}, {{}, {Value(2)}}}), Error);
    EXPECT_EQ(AssocTable::fromRows(Sort({}, {"v"}), {{{}, {Value(1)}}}).size(), 1U);
}

TEST(AssocTableTest, RowsAreSortedByKey) {
    AssocTable t = table("k:key,v:val\n\"b\",1\n3,2\n\"aa\",3\n-1,4\n");
    EXPECT_EQ(t.serialize(), "k:key,v:val\n-1,4\n3,2\n\"b\",1\n\"aa\",3\n");
}

TEST(AssocTableTest, RejectsDuplicateAttributes) {
    EXPECT_THROW(Sort({"a", "a"}, {}), Error);
    EXPECT_THROW(Sort({"a"}, {"a"}), Error);
}

TEST(AssocTableTest, SerializationRoundTrips) {
    rnd::Rng rng(11);
    Environment env = rnd::tameEnvironment();
    for (int n = 0; n < 100; ++n) {
        Database db = rnd::randomDatabase(rng, env);
        for (const auto& [name, t] : db.tables()) EXPECT_EQ(parseTable(t.serialize()), t) << name;
    }
}

TEST(KeyPermutationTest, IdentityLeavesTableUnchanged) {
    AssocTable a = loadTable(test::dataPath("fig1/A.csv"));
    EXPECT_EQ(applyKeyPermutation(a, {}), a);
    EXPECT_EQ(applyKeyPermutation(a, {{ik(0), ik(0)}, {ik(1), ik(1)}}), a);
}

TEST(KeyPermutationTest, SwapMapsFixtureMatrices) {
    AssocTable a = loadTable(test::dataPath("conv/prop4/EntryA.csv"));
    AssocTable aPrime = loadTable(test::dataPath("conv/prop4-prime/EntryA.csv"));
    EXPECT_EQ(applyKeyPermutation(a, {{ik(2), ik(3)}, {ik(3), ik(2)}}), aPrime);
}

TEST(KeyPermutationTest, SingleRow) {
    AssocTable t = table("k:key,v:val\n\"k1\",5\n");
    EXPECT_EQ(applyKeyPermutation(t, {{tk("k1"), tk("k9")}}), table("k:key,v:val\n\"k9\",5\n"));
}

TEST(KeyPermutationTest, RejectsNonInjectiveMap) {
    AssocTable t = table("k:key,v:val\n1,5\n2,6\n");
    try {
        applyKeyPermutation(t, {{ik(1), ik(2)}});
        FAIL() << "expected a structural error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Structural);
    }
}

TEST(KeyPermutationTest, InverseRestoresTable) {
    rnd::Rng rng(5);
    Environment env = rnd::tameEnvironment();
    for (int n = 0; n < 100; ++n) {
        Database db = rnd::randomDatabase(rng, env);
        KeyPermutation pi = rnd::randomPermutation(rng, db.activeKeys());
        KeyPermutation inverse;
        for (const auto& [from, to] : pi) inverse[to] = from;
        for (const auto& [name, t] : db.tables()) EXPECT_EQ(applyKeyPermutation(applyKeyPermutation(t, pi), inverse), t);
    }
}

TEST(DatabaseTest, ActiveKeysAndPermutation) {
    Database db = test::fig1();
    EXPECT_EQ(db.activeKeys(), (std::set<Key>{ik(0), ik(1)}));
    Database p = db.permuted({{ik(0), tk("z")}, {ik(1), ik(0)}});
    EXPECT_EQ(p.activeKeys(), (std::set<Key>{ik(0), tk("z")}));
    EXPECT_EQ(p.schema(), db.schema());
}

}  // namespace
}  // namespace lara

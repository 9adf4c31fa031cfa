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
#include "lara/program.hpp"
#include "lara/random.hpp"
#include "lara/stdlib.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace lara {
namespace {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("lara_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }

    std::string write(const std::string& name, const std::string& text) const {
        fs::path p = path_ / name;
        std::ofstream(p) << text;
        return p.string();
    }
    std::string path() const { return path_.string(); }

private:
    fs::path path_;
};

Error errorOf(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e;
    }
    ADD_FAILURE() << "no error raised";
    return Error(ErrorKind::Structural, "");
}

TEST(LoadTableTest, SampleTable) {
    AssocTable a = loadTable(test::dataPath("fig1/A.csv"));
    EXPECT_EQ(a.size(), 4U);
    EXPECT_EQ(a.sort(), Sort({"i", "j"}, {"v1", "v2"}));
}

TEST(LoadTableTest, HeaderOnlyIsEmpty) {
    TempDir d;
    AssocTable t = loadTable(d.write("E.csv", "k:key,v:val\n"));
    EXPECT_TRUE(t.empty());
    EXPECT_EQ(t.sort(), Sort({"k"}, {"v"}));
}

TEST(LoadTableTest, KeyViolationCitesRows) {
    TempDir d;
    std::string p = d.write("K.csv", "k:key,v:val\n\"k\",1\n\"k\",2\n");
    Error e = errorOf([&] { loadTable(p); });
    EXPECT_EQ(e.kind(), ErrorKind::KeyViolation);
    std::string msg = e.what();
    EXPECT_NE(msg.find('2'), std::string::npos) << msg;
    EXPECT_NE(msg.find('3'), std::string::npos) << msg;
}

TEST(LoadTableTest, MalformedCells) {
    TempDir d;
    EXPECT_EQ(errorOf([&] { loadTable(d.write("a.csv", "k:key,v:val\nabc,1\n")); }).kind(), ErrorKind::Parse);
    EXPECT_EQ(errorOf([&] { loadTable(d.write("b.csv", "k:key,v:val\n1,x\n")); }).kind(), ErrorKind::Parse);
    EXPECT_EQ(errorOf([&] { loadTable(d.write("c.csv", "k:key,v:val\n1\n")); }).kind(), ErrorKind::Parse);
    EXPECT_EQ(errorOf([&] { loadTable(d.write("d.csv", "k:kee\n1\n")); }).kind(), ErrorKind::Parse);
    EXPECT_EQ(errorOf([&] { loadTable(d.path() + "/missing.csv"); }).kind(), ErrorKind::Io);
}

TEST(LoadTableTest, AcceptsDecimalsAndFractions) {
    TempDir d;
    AssocTable t = loadTable(d.write("f.csv", "k:key,v:val\n1,0.5\n2,-3/4\n"));
    EXPECT_EQ(t.find({test::ik(1)})->vals[0], Value::rational(1, 2));
    EXPECT_EQ(t.find({test::ik(2)})->vals[0], Value::rational(-3, 4));
}

TEST(LoadTableTest, SerializationRoundTrip) {
    TempDir d;
    Environment env = rnd::tameEnvironment();
    for (std::uint64_t s = 0; s < 50; ++s) {
        rnd::Rng rng(s);
        Database db = rnd::randomDatabase(rng, env);
        for (const auto& [name, t] : db.tables()) EXPECT_EQ(loadTable(d.write(name + ".csv", t.serialize())), t);
    }
}

TEST(LoadDatabaseTest, OneTablePerFile) {
    Database db = loadDatabase(test::dataPath("fig1"));
    EXPECT_EQ(db.tables().size(), 2U);
    EXPECT_NE(db.find("A"), nullptr);
    EXPECT_NE(db.find("B"), nullptr);
    EXPECT_EQ(errorOf([] { loadDatabase("/nonexistent/lara"); }).kind(), ErrorKind::Io);
}

TEST(ParseProgramTest, SoftmaxHasFourBindings) {
    Program p = parseProgram(readFile(test::dataPath("programs/softmax.lara")), "softmax.lara");
    ASSERT_EQ(p.bindings.size(), 4U);
    EXPECT_EQ(p.bindings[0].first, "Max");
    EXPECT_EQ(p.resultName, "Softmax");
    EXPECT_EQ(inferSort(p.result, p.env), Sort({"batch", "features"}, {"val"}));
}

TEST(ParseProgramTest, TrivialProgram) {
    Program p = parseProgram("result = empty\n");
    ASSERT_EQ(p.bindings.size(), 1U);
    EXPECT_EQ(p.result->kind, Expr::Kind::Empty);
}

TEST(ParseProgramTest, UndefinedFunctionIsNamed) {
    Error e = errorOf([] { parseProgram("table A (i ; v)\nresult = ext[h](A)\n", "p.lara"); });
    std::string msg = e.what();
    EXPECT_NE(msg.find("'h'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("p.lara:2:"), std::string::npos) << msg;
}

TEST(ParseProgramTest, Diagnostics) {
    Error unknown = errorOf([] { parseProgram("result = join[mul](A, B)\n"); });
    EXPECT_NE(std::string(unknown.what()).find("'A'"), std::string::npos);
    Error forward = errorOf([] { parseProgram("table A (i ; v)\nX = Y\nY = A\n"); });
    EXPECT_NE(std::string(forward.what()).find("'Y'"), std::string::npos);
    Error sort = errorOf([] { parseProgram("table A (i ; v)\nresult = projv[w](A)\n"); });
    EXPECT_EQ(sort.kind(), ErrorKind::Sort);
    Error agg = errorOf([] { parseProgram("table A (i ; v)\nresult = agg[median; i](A)\n"); });
    EXPECT_NE(std::string(agg.what()).find("median"), std::string::npos);
    Error syntax = errorOf([] { parseProgram("table A (i ; v)\nresult = join[mul](A\n"); });
    EXPECT_EQ(syntax.kind(), ErrorKind::Parse);
    Error unsafe = errorOf([] { parseProgram("fn bad (keys ; vals i) -> (keys ; vals j) := j = j\n"); });
    EXPECT_EQ(unsafe.kind(), ErrorKind::Safety);
}

TEST(ParseProgramTest, SurfaceConstructs) {
    const char* text = R"(table A (i, j ; v1, v2)
table B (j, k ; v2, v3)
fn g (keys i ; vals) -> (keys ; vals z) := i = 0 and z = 1
fn pos (keys ; vals v1) -> (keys ; vals) := lt(0, v1)
E = empty[i ; w]
J = join[mul](A, B)
U = union[sum](A, B)
X = ext[g](A)
M = map[g](A)
G = agg[sum; i, j](A)
R = red[max; i](A)
P = projk[sum; j](A)
V = projv[v1](A)
N = rename[i->s, v1->w](A)
C = product(A, rename[j->j2, k->k2, v2->w2, v3->w3](B))
F = filter[pos](A)
D = actdom
I = ind(A)
K = ext[copy(i->s)](A)
result = union[sum](J, A)  # comment
)";
    Program p = parseProgram(text);
    EXPECT_EQ(p.bindings.size(), 16U);
    EXPECT_EQ(p.resultName, "result");
    EXPECT_EQ(p.binding("E")->emptySort, Sort({"i"}, {"w"}));
    EXPECT_EQ(inferSort(p.binding("K"), p.env), Sort({"i", "j", "s"}, {"v1", "v2"}));
}

TEST(ParseProgramTest, ContinuationLines) {
    Program p = parseProgram("table A (i ; v)\nresult = union[sum](A,\n    A)\n");
    EXPECT_EQ(p.result->kind, Expr::Kind::Union);
}

TEST(ParseProgramTest, SchemaFromDatabase) {
    Database db = test::fig1();
    Program p = parseProgram("result = join[mul](A, B)\n", "<p>", db.schema());
    EXPECT_EQ(evaluate(p.result, p.env, db).serialize(), test::expected("fig2_join.csv"));
}

TEST(ParseProgramTest, DatabaseIsConformedToDeclarations) {
    Database db;
    db.add("A", parseTable("j:key,i:key,v2:val,v1:val\n0,1,5,6\n"));
    Program p = parseProgram("table A (i, j ; v1, v2)\nresult = A\n");
    EXPECT_EQ(evaluate(p.result, p.env, conformDatabase(db, p)), parseTable("i:key,j:key,v1:val,v2:val\n1,0,6,5\n"));
    Program q = parseProgram("table A (i ; v1)\nresult = A\n");
    EXPECT_THROW(conformDatabase(db, q), Error);
}

TEST(EmbeddedProgramTest, MatchesShippedFiles) {
    EXPECT_EQ(stdlib::softmaxProgram().bindings.size(), 4U);
    Program s = parseProgram(readFile(test::dataPath("programs/softmax.lara")));
    Program c = parseProgram(readFile(test::dataPath("programs/conv.lara")));
    EXPECT_EQ(toString(s.result), toString(stdlib::softmaxProgram().result));
    EXPECT_EQ(toString(c.result), toString(stdlib::convolutionExpr()));
}

}  // namespace
}  // namespace lara

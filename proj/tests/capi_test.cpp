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

#include "lara.h"

#include <gtest/gtest.h>

#include <string>

namespace {

std::string data(const std::string& rel) { return std::string(LARA_TEST_DATA_DIR) + "/" + rel; }

/// Takes ownership of a string returned by the library.
std::string take(char* s) {
    std::string out = s ? s : "";
    lara_string_free(s);
    return out;
}

class CApiTest : public ::testing::Test {
protected:
    void TearDown() override {
        lara_program_free(program);
        lara_database_free(db);
    }

    void open(const std::string& dbDir, const std::string& prog) {
        ASSERT_EQ(lara_database_load(data(dbDir).c_str(), &db), LARA_OK) << lara_last_error();
        ASSERT_EQ(lara_program_load(data(prog).c_str(), db, &program), LARA_OK) << lara_last_error();
    }

    lara_database* db = nullptr;
    lara_program* program = nullptr;
};

TEST_F(CApiTest, EvalJoin) {
    open("fig1", "programs/join_ab.lara");
    char* table = nullptr;
    ASSERT_EQ(lara_eval(program, db, 0, &table), LARA_OK) << lara_last_error();
    std::string text = take(table);
    EXPECT_EQ(text.substr(0, text.find('\n')), "i:key,j:key,k:key,v1:val,v2:val,v3:val");
    EXPECT_NE(text.find("1,1,1,4,16,1"), std::string::npos);
}

TEST_F(CApiTest, OrderedProgramsNeedOptIn) {
    open("conv/prop4", "programs/conv.lara");
    char* table = nullptr;
    EXPECT_EQ(lara_eval(program, db, 0, &table), LARA_ERR_MODE);
    EXPECT_EQ(table, nullptr);
    EXPECT_NE(std::string(lara_last_error()).find("ordered"), std::string::npos);
    ASSERT_EQ(lara_eval(program, db, 1, &table), LARA_OK) << lara_last_error();
    EXPECT_NE(take(table).find("3,3,2"), std::string::npos);
}

TEST_F(CApiTest, GenericTestRejectsOrderedPrograms) {
    open("conv/prop4", "programs/conv.lara");
    char* report = nullptr;
    EXPECT_EQ(lara_generic_test(program, db, 10, 1, &report), LARA_ERR_MODE);
    EXPECT_EQ(report, nullptr);
}

TEST_F(CApiTest, GenericTestIsDeterministic) {
    open("fig1", "programs/union_ab.lara");
    char* a = nullptr;
    char* b = nullptr;
    ASSERT_EQ(lara_generic_test(program, db, 25, 9, &a), LARA_OK) << lara_last_error();
    ASSERT_EQ(lara_generic_test(program, db, 25, 9, &b), LARA_OK) << lara_last_error();
    std::string ta = take(a);
    EXPECT_EQ(ta, take(b));
    EXPECT_NE(ta.find("25/25"), std::string::npos);
}

TEST_F(CApiTest, DiffTestReportsEqual) {
    open("fig1", "programs/join_ab.lara");
    int equal = 0;
    char* report = nullptr;
    ASSERT_EQ(lara_difftest(program, db, &equal, &report), LARA_OK) << lara_last_error();
    EXPECT_EQ(equal, 1);
    EXPECT_EQ(take(report).rfind("EQUAL\n", 0), 0U);
}

TEST_F(CApiTest, TranslateAndCheck) {
    open("fig1", "programs/ext_g.lara");
    char* formula = nullptr;
    ASSERT_EQ(lara_translate(program, &formula), LARA_OK) << lara_last_error();
    EXPECT_NE(take(formula).find("resolver: func"), std::string::npos);
    char* report = nullptr;
    ASSERT_EQ(lara_check(program, &report), LARA_OK) << lara_last_error();
    std::string text = take(report);
    EXPECT_NE(text.find("fn g: safe"), std::string::npos);
    EXPECT_NE(text.find("result : [(i,j),(z)]"), std::string::npos) << text;
}

TEST(CApiErrorTest, StatusCodes) {
    lara_program* p = nullptr;
    EXPECT_EQ(lara_program_parse("result = ext[h](A)\n", "x.lara", nullptr, &p), LARA_ERR_PARSE);
    EXPECT_EQ(p, nullptr);
    EXPECT_NE(std::string(lara_last_error()).find("x.lara:1:"), std::string::npos) << lara_last_error();
    EXPECT_EQ(lara_program_parse("table A (i ; v)\nresult = ext[h](A)\n", "x.lara", nullptr, &p), LARA_ERR_PARSE);
    EXPECT_NE(std::string(lara_last_error()).find("'h'"), std::string::npos) << lara_last_error();
    EXPECT_EQ(lara_program_parse("fn f (keys ; vals i) -> (keys ; vals j) := j = j\n", nullptr, nullptr, &p),
              LARA_ERR_SAFETY);
    EXPECT_EQ(lara_program_load("/nonexistent.lara", nullptr, &p), LARA_ERR_IO);
    EXPECT_EQ(lara_program_parse(nullptr, nullptr, nullptr, &p), LARA_ERR_INVALID_ARGUMENT);
    lara_database* db = nullptr;
    EXPECT_EQ(lara_database_load("/nonexistent", &db), LARA_ERR_IO);
    EXPECT_EQ(db, nullptr);
    EXPECT_STREQ(lara_status_name(LARA_ERR_MODE), "MODE");
}

TEST(CApiErrorTest, MissingTableIsSortError) {
    lara_database* db = nullptr;
    ASSERT_EQ(lara_database_load(data("fig1").c_str(), &db), LARA_OK);
    lara_program* p = nullptr;
    ASSERT_EQ(lara_program_parse("table Z (i ; v)\nresult = Z\n", nullptr, nullptr, &p), LARA_OK);
    char* table = nullptr;
    EXPECT_EQ(lara_eval(p, db, 0, &table), LARA_ERR_SORT);
    lara_program_free(p);
    lara_database_free(db);
}

TEST(CApiExamplesTest, ListAndRun) {
    char* names = nullptr;
    ASSERT_EQ(lara_examples_list(&names), LARA_OK);
    std::string list = take(names);
    EXPECT_NE(list.find("conv-prop4\n"), std::string::npos);
    char* report = nullptr;
    ASSERT_EQ(lara_examples_run("fig2-join", data("").c_str(), &report), LARA_OK) << lara_last_error();
    EXPECT_NE(take(report).find("PASS"), std::string::npos);
    EXPECT_EQ(lara_examples_run("nosuch", nullptr, &report), LARA_ERR_INVALID_ARGUMENT);
}

}  // namespace

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

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>

namespace {

struct DatabaseDeleter {
    void operator()(lara_database* db) const { lara_database_free(db); }
};
struct ProgramDeleter {
    void operator()(lara_program* p) const { lara_program_free(p); }
};
using DatabaseHandle = std::unique_ptr<lara_database, DatabaseDeleter>;
using ProgramHandle = std::unique_ptr<lara_program, ProgramDeleter>;

class Failure {
public:
    explicit Failure(lara_status s) : status(s) {}
    lara_status status;
};

void check(lara_status s) {
    if (s != LARA_OK) throw Failure(s);
}

int report(lara_status s) {
    std::fprintf(stderr, "lara: error [%s]: %s\n", lara_status_name(s), lara_last_error());
    return s == LARA_ERR_CHECK_FAILED ? 1 : 2;
}

/// Prints and releases a string returned by the library.
void emit(char* text, std::FILE* to = stdout) {
    if (!text) return;
    std::fputs(text, to);
    lara_string_free(text);
}

DatabaseHandle openDatabase(const std::optional<std::string>& dir) {
    if (!dir) return {};
    lara_database* db = nullptr;
    check(lara_database_load(dir->c_str(), &db));
    return DatabaseHandle(db);
}

ProgramHandle openProgram(const std::string& path, const DatabaseHandle& db) {
    lara_program* p = nullptr;
    check(lara_program_load(path.c_str(), db.get(), &p));
    return ProgramHandle(p);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LARA: evaluate, translate and test associative-table programs"};
    app.require_subcommand(1);

    std::string program;
    std::optional<std::string> dbDir;
    bool ordered = false;
    unsigned trials = 100;
    std::uint64_t seed = 0;
    std::string example;
    std::optional<std::string> dataDir;

    auto* eval = app.add_subcommand("eval", "Evaluate a program and print the result table");
    eval->add_option("program", program, "Program file")->required();
    eval->add_option("--db", dbDir, "Database directory (one <relation>.csv per table)")->required();
    eval->add_flag("--ordered", ordered, "Allow ordered-mode constructs");

    auto* translate = app.add_subcommand("translate", "Print the equivalent FO_Agg query");
    translate->add_option("program", program, "Program file")->required();
    translate->add_option("--db", dbDir, "Database directory supplying undeclared table sorts");

    auto* checkCmd = app.add_subcommand("check", "Sort-check a program and its functions");
    checkCmd->add_option("program", program, "Program file")->required();
    checkCmd->add_option("--db", dbDir, "Database directory supplying undeclared table sorts");

    auto* difftest = app.add_subcommand("difftest", "Compare algebra and FO_Agg evaluation");
    difftest->add_option("program", program, "Program file")->required();
    difftest->add_option("--db", dbDir, "Database directory")->required();

    auto* generic = app.add_subcommand("generic-test", "Check invariance under random key permutations");
    generic->add_option("program", program, "Program file")->required();
    generic->add_option("--db", dbDir, "Database directory")->required();
    generic->add_option("--trials", trials, "Number of permutations")->check(CLI::PositiveNumber);
    generic->add_option("--seed", seed, "Random seed")->required();

    auto* examples = app.add_subcommand("examples", "Bundled example programs");
    examples->require_subcommand(1);
    auto* list = examples->add_subcommand("list", "List bundled examples");
    auto* run = examples->add_subcommand("run", "Run and verify a bundled example");
    run->add_option("name", example, "Example name")->required();
    run->add_option("--data", dataDir, "Data directory (default: installed data)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*eval) {
            auto db = openDatabase(dbDir);
            auto p = openProgram(program, db);
            char* table = nullptr;
            check(lara_eval(p.get(), db.get(), ordered ? 1 : 0, &table));
            emit(table);
        } else if (*translate) {
            auto db = openDatabase(dbDir);
            auto p = openProgram(program, db);
            char* formula = nullptr;
            check(lara_translate(p.get(), &formula));
            emit(formula);
        } else if (*checkCmd) {
            auto db = openDatabase(dbDir);
            auto p = openProgram(program, db);
            char* text = nullptr;
            check(lara_check(p.get(), &text));
            emit(text);
        } else if (*difftest) {
            auto db = openDatabase(dbDir);
            auto p = openProgram(program, db);
            int equal = 0;
            char* text = nullptr;
            lara_status s = lara_difftest(p.get(), db.get(), &equal, &text);
            emit(text);
            check(s);
        } else if (*generic) {
            auto db = openDatabase(dbDir);
            auto p = openProgram(program, db);
            char* text = nullptr;
            lara_status s = lara_generic_test(p.get(), db.get(), trials, seed, &text);
            emit(text);
            check(s);
        } else if (*list) {
            char* names = nullptr;
            check(lara_examples_list(&names));
            emit(names);
        } else if (*run) {
            char* text = nullptr;
            lara_status s = lara_examples_run(example.c_str(), dataDir ? dataDir->c_str() : nullptr, &text);
            emit(text);
            check(s);
        }
    } catch (const Failure& f) {
        return report(f.status);
    }
    return 0;
}

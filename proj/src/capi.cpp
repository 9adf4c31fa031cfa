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

#include "lara/error.hpp"
#include "lara/foagg.hpp"
#include "lara/program.hpp"
#include "lara/random.hpp"
#include "lara/stdlib.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <sstream>
#include <string>
#include <vector>

struct lara_program {
    lara::Program program;
};

struct lara_database {
    lara::Database db;
};

namespace {

thread_local std::string lastError;

lara_status statusOf(lara::ErrorKind k) {
    switch (k) {
        case lara::ErrorKind::Parse: return LARA_ERR_PARSE;
        case lara::ErrorKind::Sort: return LARA_ERR_SORT;
        case lara::ErrorKind::Safety: return LARA_ERR_SAFETY;
        case lara::ErrorKind::Eval: return LARA_ERR_EVAL;
        case lara::ErrorKind::KeyViolation: return LARA_ERR_KEY_VIOLATION;
        case lara::ErrorKind::Io: return LARA_ERR_IO;
        case lara::ErrorKind::Mode: return LARA_ERR_MODE;
        case lara::ErrorKind::Unsupported: return LARA_ERR_UNSUPPORTED;
        case lara::ErrorKind::Structural: return LARA_ERR_INVALID_ARGUMENT;
    }
    return LARA_ERR_INTERNAL;
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename F>
lara_status guarded(F&& body) {
    try {
        lastError.clear();
        return body();
    } catch (const lara::Error& e) {
        lastError = e.what();
        return statusOf(e.kind());
    } catch (const std::bad_alloc&) {
        lastError = "out of memory";
        return LARA_ERR_INTERNAL;
    } catch (const std::exception& e) {
        lastError = e.what();
        return LARA_ERR_INTERNAL;
    }
}

lara_status invalid(const char* what) {
    lastError = what;
    return LARA_ERR_INVALID_ARGUMENT;
}

/// The database conformed to the program's declarations.
lara::Database prepared(const lara_program* p, const lara_database* db) {
    return lara::conformDatabase(db->db, p->program);
}

std::string reasonsOf(const lara::ModeInfo& m) {
    std::vector<std::string> seen;
    std::string out;
    for (const auto& r : m.reasons) {
        if (std::find(seen.begin(), seen.end(), r) != seen.end()) continue;
        seen.push_back(r);
        out += (out.empty() ? "" : "; ") + r;
    }
    return out;
}

void requireMode(const lara::Program& p, bool ordered) {
    lara::ModeInfo m = lara::analyzeMode(p.result, p.env);
    if (m.ordered && !ordered) {
        lara::fail(lara::ErrorKind::Mode, "'" + p.resultName + "' uses ordered-mode constructs (" + reasonsOf(m) +
                                              "); rerun with --ordered");
    }
}

}  // namespace

extern "C" {

const char* lara_status_name(lara_status status) {
    switch (status) {
        case LARA_OK: return "OK";
        case LARA_ERR_PARSE: return "PARSE";
        case LARA_ERR_SORT: return "SORT";
        case LARA_ERR_SAFETY: return "SAFETY";
        case LARA_ERR_EVAL: return "EVAL";
        case LARA_ERR_KEY_VIOLATION: return "KEY_VIOLATION";
        case LARA_ERR_IO: return "IO";
        case LARA_ERR_MODE: return "MODE";
        case LARA_ERR_UNSUPPORTED: return "UNSUPPORTED";
        case LARA_ERR_INVALID_ARGUMENT: return "INVALID_ARGUMENT";
        case LARA_ERR_INTERNAL: return "INTERNAL";
        case LARA_ERR_CHECK_FAILED: return "CHECK_FAILED";
    }
    return "UNKNOWN";
}

const char* lara_last_error(void) { return lastError.c_str(); }

void lara_string_free(char* s) { std::free(s); }

lara_status lara_database_load(const char* dir, lara_database** out) {
    if (!dir || !out) return invalid("lara_database_load: null argument");
    *out = nullptr;
    return guarded([&] {
        auto db = std::make_unique<lara_database>();
        db->db = lara::loadDatabase(dir);
        *out = db.release();
        return LARA_OK;
    });
}

void lara_database_free(lara_database* db) { delete db; }

lara_status lara_program_parse(const char* text, const char* source, const lara_database* db, lara_program** out) {
    if (!text || !out) return invalid("lara_program_parse: null argument");
    *out = nullptr;
    return guarded([&] {
        auto p = std::make_unique<lara_program>();
        std::map<std::string, lara::Sort> schema;
        if (db) schema = db->db.schema();
        p->program = lara::parseProgram(text, source ? source : "<program>", schema);
        *out = p.release();
        return LARA_OK;
    });
}

lara_status lara_program_load(const char* path, const lara_database* db, lara_program** out) {
    if (!path || !out) return invalid("lara_program_load: null argument");
    *out = nullptr;
    return guarded([&] {
        std::string text = lara::readFile(path);
        return lara_program_parse(text.c_str(), path, db, out);
    });
}

void lara_program_free(lara_program* program) { delete program; }

lara_status lara_check(const lara_program* program, char** report) {
    if (!program || !report) return invalid("lara_check: null argument");
    *report = nullptr;
    return guarded([&] {
        const lara::Program& p = program->program;
        std::ostringstream out;
        for (const auto& entry : p.env.fns.all()) out << "fn " << entry.first << ": safe\n";
        for (const auto& [name, e] : p.bindings) out << name << " : " << lara::inferSort(e, p.env).toString() << "\n";
        lara::ModeInfo m = lara::analyzeMode(p.result, p.env);
        out << "result " << p.resultName << ": " << (m.ordered ? "ordered" : "tame")
            << (m.generic ? ", key-generic" : ", not guaranteed key-generic");
        if (!m.reasons.empty()) out << " (" << reasonsOf(m) << ")";
        out << "\n";
        *report = dup(out.str());
        return LARA_OK;
    });
}

lara_status lara_eval(const lara_program* program, const lara_database* db, int ordered, char** table) {
    if (!program || !db || !table) return invalid("lara_eval: null argument");
    *table = nullptr;
    return guarded([&] {
        const lara::Program& p = program->program;
        requireMode(p, ordered != 0);
        lara::Database d = prepared(program, db);
        *table = dup(lara::evaluate(p.result, p.env, d).serialize());
        return LARA_OK;
    });
}

lara_status lara_translate(const lara_program* program, char** formula) {
    if (!program || !formula) return invalid("lara_translate: null argument");
    *formula = nullptr;
    return guarded([&] {
        const lara::Program& p = program->program;
        lara::fo::Query q = lara::fo::translate(p.result, p.env);
        lara::fo::validate(q);
        *formula = dup(q.toString());
        return LARA_OK;
    });
}

lara_status lara_difftest(const lara_program* program, const lara_database* db, int* equal, char** report) {
    if (!program || !db || !equal || !report) return invalid("lara_difftest: null argument");
    *report = nullptr;
    *equal = 0;
    return guarded([&] {
        const lara::Program& p = program->program;
        lara::Database d = prepared(program, db);
        lara::fo::DiffResult r = lara::fo::diffTest(p.result, p.env, d);
        *equal = r.equal ? 1 : 0;
        std::string text = r.equal ? "EQUAL\n" + r.algebraText
                                   : "DIFFERENT\n" + r.firstDifference + "\nalgebra:\n" + r.algebraText +
                                         "logic:\n" + r.logicText;
        *report = dup(text);
        if (!r.equal) lastError = "translation result differs: " + r.firstDifference;
        return r.equal ? LARA_OK : LARA_ERR_CHECK_FAILED;
    });
}

lara_status lara_generic_test(const lara_program* program, const lara_database* db, unsigned trials, uint64_t seed,
                              char** report) {
    if (!program || !db || !report) return invalid("lara_generic_test: null argument");
    *report = nullptr;
    return guarded([&] {
        const lara::Program& p = program->program;
        lara::ModeInfo m = lara::analyzeMode(p.result, p.env);
        if (m.ordered || !m.generic) {
            lara::fail(lara::ErrorKind::Mode,
                       "generic-test needs a tame program; '" + p.resultName + "' is " +
                           (m.ordered ? "ordered-mode" : "not key-generic") + " (" + reasonsOf(m) + ")");
        }
        lara::Database d = prepared(program, db);
        lara::AssocTable base = lara::evaluate(p.result, p.env, d);
        lara::rnd::Rng rng(seed);
        std::ostringstream out;
        unsigned failed = 0;
        for (unsigned t = 0; t < trials; ++t) {
            lara::KeyPermutation pi = lara::rnd::randomPermutation(rng, d.activeKeys());
            lara::AssocTable expected = lara::applyKeyPermutation(base, pi);
            lara::AssocTable got = lara::evaluate(p.result, p.env, d.permuted(pi));
            if (!(expected == got)) {
                ++failed;
                out << "trial " << t << ": FAILED\n";
            }
        }
        out << (trials - failed) << "/" << trials << " trials satisfy eval(e, pi(D)) = pi(eval(e, D))\n";
        *report = dup(out.str());
        if (failed) lastError = std::to_string(failed) + " of " + std::to_string(trials) + " trials failed";
        return failed ? LARA_ERR_CHECK_FAILED : LARA_OK;
    });
}

lara_status lara_examples_list(char** names) {
    if (!names) return invalid("lara_examples_list: null argument");
    *names = nullptr;
    return guarded([&] {
        std::string out;
        for (const auto& n : lara::stdlib::fixtureNames()) out += n + "\n";
        *names = dup(out);
        return LARA_OK;
    });
}

lara_status lara_examples_run(const char* name, const char* data_dir, char** report) {
    if (!name || !report) return invalid("lara_examples_run: null argument");
    *report = nullptr;
    return guarded([&] {
        std::string dir = data_dir ? data_dir : lara::stdlib::dataDir();
        lara::stdlib::FixtureResult r = lara::stdlib::runFixture(name, dir);
        *report = dup(r.output + r.detail + (r.passed ? "PASS\n" : "FAIL\n"));
        if (!r.passed) lastError = std::string("example '") + name + "' failed its checks";
        return r.passed ? LARA_OK : LARA_ERR_CHECK_FAILED;
    });
}

}  // extern "C"

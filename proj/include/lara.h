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

#ifndef LARA_H
#define LARA_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define LARA_API __declspec(dllexport)
#else
#define LARA_API __attribute__((visibility("default")))
#endif

typedef enum lara_status {
    LARA_OK = 0,
    LARA_ERR_PARSE = 1,
    LARA_ERR_SORT = 2,
    LARA_ERR_SAFETY = 3,
    LARA_ERR_EVAL = 4,
    LARA_ERR_KEY_VIOLATION = 5,
    LARA_ERR_IO = 6,
    LARA_ERR_MODE = 7,
    LARA_ERR_UNSUPPORTED = 8,
    LARA_ERR_INVALID_ARGUMENT = 9,
    LARA_ERR_INTERNAL = 10,
    LARA_ERR_CHECK_FAILED = 11
} lara_status;

typedef struct lara_program lara_program;
typedef struct lara_database lara_database;

/* Every function returning char** output hands ownership to the caller, who
   releases it with lara_string_free. On failure the output is set to NULL and
   lara_last_error() describes the failure on the calling thread. */

LARA_API const char* lara_status_name(lara_status status);
LARA_API const char* lara_last_error(void);
LARA_API void lara_string_free(char* s);

/* One table per *.csv file of dir, named after the file stem. */
LARA_API lara_status lara_database_load(const char* dir, lara_database** out);
LARA_API void lara_database_free(lara_database* db);

/* Parses and sort-checks a program. Relations not declared in the program are
   looked up in db, which may be NULL. */
LARA_API lara_status lara_program_parse(const char* text, const char* source, const lara_database* db,
                                        lara_program** out);
LARA_API lara_status lara_program_load(const char* path, const lara_database* db, lara_program** out);
LARA_API void lara_program_free(lara_program* program);

/* Sorts of all bindings and the mode of the result. */
LARA_API lara_status lara_check(const lara_program* program, char** report);

/* Canonical text of the result table. Ordered-mode programs fail with
   LARA_ERR_MODE unless ordered is nonzero. */
LARA_API lara_status lara_eval(const lara_program* program, const lara_database* db, int ordered, char** table);

/* The equivalent FO_Agg query of the result expression. */
LARA_API lara_status lara_translate(const lara_program* program, char** formula);

/* Evaluates the result directly and through its FO_Agg translation. equal is
   set to 1 when both canonical tables are byte-identical. */
LARA_API lara_status lara_difftest(const lara_program* program, const lara_database* db, int* equal, char** report);

/* Checks eval(e, pi(D)) = pi(eval(e, D)) for `trials` seeded random key
   renamings pi. Fails with LARA_ERR_MODE for programs that are not generic and
   with LARA_ERR_CHECK_FAILED when a trial fails. */
LARA_API lara_status lara_generic_test(const lara_program* program, const lara_database* db, unsigned trials,
                                       uint64_t seed, char** report);

/* Newline-separated names of the shipped examples. */
LARA_API lara_status lara_examples_list(char** names);

/* Runs a shipped example; data_dir may be NULL for the installed data.
   Fails with LARA_ERR_CHECK_FAILED when a check does not hold. */
LARA_API lara_status lara_examples_run(const char* name, const char* data_dir, char** report);

#ifdef __cplusplus
}
#endif

#endif /* LARA_H */

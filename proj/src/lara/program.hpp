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

#pragma once

#include "lara/algebra.hpp"
#include "lara/table.hpp"

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lara {

/// A LARA program: table declarations, extension functions and named
/// expression bindings. The result is the binding named `result`, or the
/// last binding.
struct Program {
    Environment env;  // schema = declared tables (plus any schema given to the parser)
    std::vector<std::string> declared;
    std::vector<std::pair<std::string, ExprPtr>> bindings;
    std::string resultName;
    ExprPtr result;

    ExprPtr binding(const std::string& name) const;
};

/// Parses and sort-checks a program. Relations not declared with `table` are
/// looked up in `schema`. Errors carry `source:line:column`.
Program parseProgram(std::string_view text,
                     const std::string& source = "<program>",
                     const std::map<std::string, Sort>& schema = {});

/// Parses a single expression against the names of `env.schema`.
ExprPtr parseExpr(std::string_view text, const Environment& env, const std::string& source = "<expr>");

/// Reads a table in the canonical format.
AssocTable loadTable(const std::string& path);

/// One table per `*.csv` file of `dir`, named after the file stem.
Database loadDatabase(const std::string& dir);

/// Reorders the columns of `db`'s tables to the sorts declared by `p`; throws
/// Error(Sort) when a declared table is missing or has other attributes.
Database conformDatabase(const Database& db, const Program& p);

std::string readFile(const std::string& path);

}  // namespace lara

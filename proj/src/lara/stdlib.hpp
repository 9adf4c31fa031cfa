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

#include "lara/program.hpp"

#include <string>
#include <vector>

namespace lara::stdlib {

/// Max over time, pointwise exp, sum over features, pointwise division.
const Program& softmaxProgram();

/// The fixed convolution expression over EntryA[(i,j),(v)] and EntryK[(k,l),(u)];
/// its result has sort ((i,j),(v)).
const Program& convolutionProgram();
ExprPtr convolutionExpr();

using Matrix = std::vector<std::vector<Value>>;

/// (A * K)[i][j] = sum of A[s][t] * K[s-i+mid][t-j+mid] over the in-range
/// entries of A, where K is (2 mid + 1) x (2 mid + 1). Throws Error(Structural)
/// for a non-square or even-dimension kernel.
Matrix convolutionOracle(const Matrix& a, const Matrix& k);

/// Dense table with integer keys 1..rows, 1..cols.
AssocTable matrixTable(const Matrix& m, const std::string& row = "i", const std::string& col = "j",
                       const std::string& val = "v");

/// Inverse of matrixTable; missing entries are 0.
Matrix tableMatrix(const AssocTable& t);

/// The database {EntryA, EntryK} representing the pair (A, K).
Database convolutionDatabase(const Matrix& a, const Matrix& k);

/// Directory holding the shipped data files (LARA_DATA_DIR overrides).
std::string dataDir();

struct FixtureResult {
    bool passed = false;
    std::string output;  // canonical table text
    std::string detail;  // one line per check
};

std::vector<std::string> fixtureNames();

/// Runs a shipped fixture against the files under `dataDir` and checks it
/// against its expected table or scalar oracle. Throws Error(Io) for missing
/// files and Error(Structural) for unknown names.
FixtureResult runFixture(const std::string& name, const std::string& dataDir);

}  // namespace lara::stdlib

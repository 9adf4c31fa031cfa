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

#include <stdexcept>
#include <string>

namespace lara {

enum class ErrorKind {
    Structural,    // arity mismatch, non-injective permutation, malformed AST
    KeyViolation,  // key-functionality broken
    Sort,          // sort inference / schema mismatch
    Parse,         // syntax errors in tables, DSL or programs
    Safety,        // DSL formula or FO_Agg formula outside the safe fragment
    Eval,          // runtime evaluation failure (aggregate undefined, solver failure)
    Mode,          // ordered-mode construct used in tame mode
    Io,
    Unsupported,
};

const char* errorKindName(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace lara

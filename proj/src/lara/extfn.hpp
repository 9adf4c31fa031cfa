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

#include "lara/dsl.hpp"
#include "lara/table.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace lara {

/// A reference to an extension function as written in an expression: a DSL
/// function name, or a builtin with arguments such as `copy(i->s)`.
/// `inlineFn` carries a DSL function that is not registered by name.
struct FnRef {
    std::string name;
    std::vector<std::string> args;
    dsl::FunctionPtr inlineFn;

    std::string toString() const;
};

/// An extension function instantiated at the sort of the table it is applied to.
/// Its input sort is a sub-sort of that table's sort; attributes outside it are
/// not seen by the function.
struct ExtFn {
    std::string name;
    Sort in;
    Sort out;
    dsl::FunctionPtr dsl;
    std::function<std::vector<Row>(const KeyTuple&, const ValueTuple&)> builtin;
    bool ordered = false;  // compares keys by order
    bool generic = true;   // commutes with key permutations

    /// f(k̄, v̄) as an associative table of sort `out`.
    AssocTable apply(const KeyTuple& keys, const ValueTuple& vals) const;
};

/// Named DSL functions available to expressions.
class FnEnv {
public:
    /// Registers `f` after checking its safety.
    void add(dsl::FunctionPtr f);
    dsl::FunctionPtr find(const std::string& name) const;
    const std::map<std::string, dsl::FunctionPtr>& all() const noexcept { return fns_; }

private:
    std::map<std::string, dsl::FunctionPtr> fns_;
};

/// Names accepted by resolveExtFn besides DSL functions.
const std::vector<std::string>& builtinExtFnNames();

/// Instantiates `ref` for a table of sort `table`. Throws Error(Sort) on unknown
/// names, signature mismatches and attribute clashes.
ExtFn resolveExtFn(const FnRef& ref, const Sort& table, const FnEnv& env);

/// Instantiates the filter defined by `phi` (a DSL function without outputs):
/// a function of sort (K̄,V̄) -> ((),V̄) that keeps the row iff phi holds.
ExtFn resolveFilter(const FnRef& phi, const Sort& table, const FnEnv& env);

}  // namespace lara

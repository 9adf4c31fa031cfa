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

#include "lara/aggregates.hpp"
#include "lara/extfn.hpp"
#include "lara/table.hpp"

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace lara {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind : std::uint8_t {
        Empty,
        Atom,
        Join,
        Union,
        Ext,
        Map,
        AggBy,
        ReduceBy,
        ProjKeys,
        ProjVals,
        Rename,
        Product,
        Filter,
        ActDom,
        Ind,
    };

    Kind kind = Kind::Empty;
    std::string rel;                 // Atom, Ind
    std::string agg;                 // Join, Union, AggBy, ReduceBy, ProjKeys
    FnRef fn;                        // Ext, Map, Filter
    std::vector<std::string> attrs;  // AggBy/ProjKeys: kept keys; ReduceBy: dropped keys; ProjVals: kept values
    std::vector<std::pair<std::string, std::string>> renames;
    Sort emptySort;                  // Empty
    std::vector<ExprPtr> kids;
};

namespace expr {

ExprPtr empty(Sort sort = {});
ExprPtr atom(std::string rel);
ExprPtr join(ExprPtr a, ExprPtr b, std::string agg);
ExprPtr unite(ExprPtr a, ExprPtr b, std::string agg);
ExprPtr ext(FnRef fn, ExprPtr e);
ExprPtr map(FnRef fn, ExprPtr e);
ExprPtr aggBy(std::vector<std::string> keys, std::string agg, ExprPtr e);
ExprPtr reduceBy(std::vector<std::string> keys, std::string agg, ExprPtr e);
ExprPtr projKeys(std::vector<std::string> keys, std::string agg, ExprPtr e);
ExprPtr projVals(std::vector<std::string> vals, ExprPtr e);
ExprPtr rename(std::vector<std::pair<std::string, std::string>> renames, ExprPtr e);
ExprPtr product(ExprPtr a, ExprPtr b);
ExprPtr filter(FnRef phi, ExprPtr e);
ExprPtr actDom();
ExprPtr ind(std::string rel);

}  // namespace expr

/// Surface syntax of an expression, e.g. `join[mul](A, B)`.
std::string toString(const ExprPtr& e);

/// Names and registries an expression is checked and evaluated against.
struct Environment {
    const AggRegistry* aggs = &builtinAggregates();
    FnEnv fns;
    std::map<std::string, Sort> schema;
};

/// Sort of `e`. Throws Error(Sort) on any violation of the typing rules.
Sort inferSort(const ExprPtr& e, const Environment& env);

/// Memoized typing of every node of an expression, including the extension
/// functions instantiated at Ext, Map and Filter nodes.
class Typer {
public:
    explicit Typer(const Environment& env);
    ~Typer();
    Typer(const Typer&) = delete;
    Typer& operator=(const Typer&) = delete;

    const Sort& sortOf(const ExprPtr& e);
    const ExtFn& fnOf(const ExprPtr& e);
    const AggOp& aggOf(const ExprPtr& e);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// e^D. The schema of `env` is extended with the sorts of `db`'s tables.
AssocTable evaluate(const ExprPtr& e, const Environment& env, const Database& db);

/// Equivalent expression over Empty, Atom, Join, Union and Ext only.
/// Output attributes may come in a different order than in `e`.
ExprPtr desugar(const ExprPtr& e, const Environment& env);

/// The order-indicator construction of Ind(R): a sum aggregation over the
/// pairwise `key >= key2` indicator on R's active keys.
ExprPtr indConstruction(const std::string& rel, const Environment& env);

bool isCore(const ExprPtr& e);

struct ModeInfo {
    bool ordered = false;  // uses key order (Ind, `<` in a function)
    bool generic = true;   // guaranteed to commute with key permutations
    std::vector<std::string> reasons;
};

ModeInfo analyzeMode(const ExprPtr& e, const Environment& env);

/// True when e^D is empty on every database.
bool staticallyEmpty(const ExprPtr& e);

/// Attribute names used by ActDom and Ind results.
inline constexpr const char* kActDomKey = "key";
inline constexpr const char* kIndValue = "ind";

}  // namespace lara

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
#include "lara/value.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lara {

/// The sort (K, V) of a table or expression: ordered, disjoint lists of key
/// and value attribute names.
struct Sort {
    std::vector<std::string> keys;
    std::vector<std::string> vals;

    Sort() = default;
    Sort(std::vector<std::string> k, std::vector<std::string> v);

    std::optional<std::size_t> keyIndex(std::string_view name) const;
    std::optional<std::size_t> valIndex(std::string_view name) const;
    bool hasKey(std::string_view name) const { return keyIndex(name).has_value(); }
    bool hasVal(std::string_view name) const { return valIndex(name).has_value(); }
    bool hasAttr(std::string_view name) const { return hasKey(name) || hasVal(name); }

    /// Same attribute sets, regardless of order.
    bool sameAttributes(const Sort& other) const;

    /// `[(i,j),(v1,v2)]`
    std::string toString() const;

    friend bool operator==(const Sort&, const Sort&) = default;
};

using KeyTuple = std::vector<Key>;
using ValueTuple = std::vector<Value>;

struct Row {
    KeyTuple keys;
    ValueTuple vals;

    friend bool operator==(const Row&, const Row&) = default;
};

/// A finite set of rows of one sort in which the key tuple determines the
/// value tuple. Rows are kept sorted by key tuple, so equal tables have
/// byte-identical serializations. Immutable once built.
class AssocTable {
public:
    AssocTable() = default;
    explicit AssocTable(Sort sort) : sort_(std::move(sort)) {}

    /// Validates arities, removes exact duplicates and throws
    /// Error(KeyViolation) when one key tuple carries two value tuples.
    static AssocTable fromRows(Sort sort, std::vector<Row> rows);

    const Sort& sort() const noexcept { return sort_; }
    const std::vector<Row>& rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }

    const Row* find(const KeyTuple& keys) const;

    /// Canonical text form: header `name:key,...,name:val` then one row per
    /// line in key order; `()` stands for an empty attribute list or row.
    std::string serialize() const;

    /// Same table with its columns reordered to `target` (same attribute sets).
    AssocTable withColumnOrder(const Sort& target) const;

    friend bool operator==(const AssocTable& a, const AssocTable& b) {
        return a.sort_ == b.sort_ && a.rows_ == b.rows_;
    }

private:
    Sort sort_;
    std::vector<Row> rows_;
};

/// Parses the canonical text form. `source` is used in diagnostics.
AssocTable parseTable(std::string_view text, const std::string& source = "<table>");

/// Extends `vals` (over `from`) to the attribute list `to`, filling attributes
/// not in `from` with `neutral`.
ValueTuple padRow(const ValueTuple& vals,
                  const std::vector<std::string>& from,
                  const std::vector<std::string>& to,
                  const std::optional<Value>& neutral);

using KeyedMultiset = std::vector<std::pair<KeyTuple, ValueTuple>>;

/// Groups the multiset by key tuple and aggregates every value attribute with
/// `op` over the multiset of that attribute's values (reduced in sorted order).
AssocTable solve(const Sort& sort, const KeyedMultiset& pairs, const AggOp& op);

using KeyPermutation = std::map<Key, Key>;

/// Replaces every key by its image (identity outside the map).
/// Throws Error(Structural) if the induced map on the table's keys is not injective.
AssocTable applyKeyPermutation(const AssocTable& table, const KeyPermutation& pi);

/// Relation name to table, with each table's sort acting as the declared schema.
class Database {
public:
    void add(const std::string& name, AssocTable table);
    const AssocTable& get(const std::string& name) const;
    const AssocTable* find(const std::string& name) const;
    const std::map<std::string, AssocTable>& tables() const noexcept { return tables_; }
    std::map<std::string, Sort> schema() const;

    /// Every key occurring in some table, in key order.
    std::set<Key> activeKeys() const;

    Database permuted(const KeyPermutation& pi) const;

private:
    std::map<std::string, AssocTable> tables_;
};

}  // namespace lara

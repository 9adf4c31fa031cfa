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

#include "lara/table.hpp"

#include "lara/error.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace lara {

namespace {

std::string joinNames(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ",";
        out += names[i];
    }
    return out;
}

std::string renderKeys(const KeyTuple& keys) {
    std::string out = "(";
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (i) out += ",";
        out += keys[i].toString();
    }
    return out + ")";
}

}  // namespace

Sort::Sort(std::vector<std::string> k, std::vector<std::string> v) : keys(std::move(k)), vals(std::move(v)) {
    std::set<std::string> seen;
    for (const auto* list : {&keys, &vals}) {
        for (const auto& name : *list) {
            if (!seen.insert(name).second) {
                fail(ErrorKind::Structural, "attribute '" + name + "' occurs twice in sort " + toString());
            }
        }
    }
}

std::optional<std::size_t> Sort::keyIndex(std::string_view name) const {
    for (std::size_t i = 0; i < keys.size(); ++i)
        if (keys[i] == name) return i;
    return std::nullopt;
}

std::optional<std::size_t> Sort::valIndex(std::string_view name) const {
    for (std::size_t i = 0; i < vals.size(); ++i)
        if (vals[i] == name) return i;
    return std::nullopt;
}

bool Sort::sameAttributes(const Sort& other) const {
    auto asSet = [](const std::vector<std::string>& v) { return std::set<std::string>(v.begin(), v.end()); };
    return asSet(keys) == asSet(other.keys) && asSet(vals) == asSet(other.vals);
}

std::string Sort::toString() const {
    return "[(" + joinNames(keys) + "),(" + joinNames(vals) + ")]";
}

AssocTable AssocTable::fromRows(Sort sort, std::vector<Row> rows) {
    for (const Row& r : rows) {
        if (r.keys.size() != sort.keys.size() || r.vals.size() != sort.vals.size()) {
            fail(ErrorKind::Structural, "row arity does not match sort " + sort.toString());
        }
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.keys != b.keys) return a.keys < b.keys;
        return a.vals < b.vals;
    });
    std::vector<Row> unique;
    unique.reserve(rows.size());
    for (Row& r : rows) {
        if (!unique.empty() && unique.back().keys == r.keys) {
            if (unique.back().vals == r.vals) continue;
            fail(ErrorKind::KeyViolation, "key tuple " + renderKeys(r.keys) + " maps to two value tuples in table of sort " +
                                              sort.toString());
        }
        unique.push_back(std::move(r));
    }
    AssocTable t(std::move(sort));
    t.rows_ = std::move(unique);
    return t;
}

const Row* AssocTable::find(const KeyTuple& keys) const {
    auto it = std::lower_bound(rows_.begin(), rows_.end(), keys,
                               [](const Row& r, const KeyTuple& k) { return r.keys < k; });
    if (it != rows_.end() && it->keys == keys) return &*it;
    return nullptr;
}

std::string AssocTable::serialize() const {
    std::string out;
    std::vector<std::string> header;
    for (const auto& k : sort_.keys) header.push_back(k + ":key");
    for (const auto& v : sort_.vals) header.push_back(v + ":val");
    out += header.empty() ? "()" : joinNames(header);
    out += "\n";
    for (const Row& r : rows_) {
        std::vector<std::string> cells;
        for (const Key& k : r.keys) cells.push_back(k.toString());
        for (const Value& v : r.vals) cells.push_back(v.toString());
        out += cells.empty() ? "()" : joinNames(cells);
        out += "\n";
    }
    return out;
}

AssocTable AssocTable::withColumnOrder(const Sort& target) const {
    if (!sort_.sameAttributes(target)) {
        fail(ErrorKind::Sort, "cannot reorder " + sort_.toString() + " as " + target.toString());
    }
    std::vector<std::size_t> kmap, vmap;
    for (const auto& k : target.keys) kmap.push_back(*sort_.keyIndex(k));
    for (const auto& v : target.vals) vmap.push_back(*sort_.valIndex(v));
    std::vector<Row> out;
    out.reserve(rows_.size());
    for (const Row& r : rows_) {
        Row n;
        for (auto i : kmap) n.keys.push_back(r.keys[i]);
        for (auto i : vmap) n.vals.push_back(r.vals[i]);
        out.push_back(std::move(n));
    }
    return fromRows(target, std::move(out));
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

struct Cell {
    std::string text;
    bool quoted = false;
};

std::vector<Cell> splitCells(std::string_view line, const std::string& where) {
    std::vector<Cell> cells;
    std::size_t i = 0;
    while (true) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        Cell cell;
        if (i < line.size() && line[i] == '"') {
            cell.quoted = true;
            ++i;
            bool closed = false;
            while (i < line.size()) {
                if (line[i] == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        cell.text += '"';
                        i += 2;
                        continue;
                    }
                    ++i;
                    closed = true;
                    break;
                }
                cell.text += line[i++];
            }
            if (!closed) fail(ErrorKind::Parse, where + ": unterminated quoted cell");
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
            if (i < line.size() && line[i] != ',') fail(ErrorKind::Parse, where + ": text after quoted cell");
        } else {
            std::size_t start = i;
            while (i < line.size() && line[i] != ',') ++i;
            cell.text = std::string(trim(line.substr(start, i - start)));
        }
        cells.push_back(std::move(cell));
        if (i >= line.size()) break;
        ++i;  // comma
    }
    return cells;
}

Key parseKeyCell(const Cell& cell, const std::string& where) {
    if (cell.quoted) return Key::text(cell.text);
    std::string_view s = cell.text;
    std::string_view digits = s;
    if (!digits.empty() && (digits[0] == '-' || digits[0] == '+')) digits.remove_prefix(1);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) {
        fail(ErrorKind::Parse, where + ": malformed key cell '" + cell.text + "' (expected integer or quoted text)");
    }
    std::string z(s[0] == '+' ? s.substr(1) : s);
    return Key::integer(mpz_class(z, 10));
}

}  // namespace

AssocTable parseTable(std::string_view text, const std::string& source) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }
    std::size_t lineNo = 0;
    auto nextLine = [&](std::string_view& out) {
        while (lineNo < lines.size()) {
            std::string_view l = trim(lines[lineNo++]);
            if (l.empty() || l[0] == '#') continue;
            out = l;
            return true;
        }
        return false;
    };

    std::string_view header;
    if (!nextLine(header)) fail(ErrorKind::Parse, source + ": missing header line");
    std::vector<std::string> keys, vals;
    std::vector<std::pair<bool, std::size_t>> columns;  // (isKey, index within its list)
    if (header != "()") {
        for (const Cell& c : splitCells(header, source + ":" + std::to_string(lineNo))) {
            auto colon = c.text.rfind(':');
            if (colon == std::string::npos) {
                fail(ErrorKind::Parse, source + ":" + std::to_string(lineNo) + ": header cell '" + c.text +
                                           "' must be name:key or name:val");
            }
            std::string name(trim(std::string_view(c.text).substr(0, colon)));
            std::string kind(trim(std::string_view(c.text).substr(colon + 1)));
            if (name.empty()) fail(ErrorKind::Parse, source + ": empty attribute name in header");
            if (kind == "key") {
                columns.emplace_back(true, keys.size());
                keys.push_back(name);
            } else if (kind == "val") {
                columns.emplace_back(false, vals.size());
                vals.push_back(name);
            } else {
                fail(ErrorKind::Parse, source + ": attribute kind must be key or val, got '" + kind + "'");
            }
        }
    }
    Sort sort(keys, vals);

    std::vector<Row> rows;
    std::vector<std::size_t> rowLines;
    std::string_view line;
    while (nextLine(line)) {
        std::string where = source + ":" + std::to_string(lineNo);
        Row r;
        r.keys.resize(keys.size());
        r.vals.resize(vals.size());
        if (line == "()") {
            if (!columns.empty()) fail(ErrorKind::Parse, where + ": empty row in a table with attributes");
        } else {
            auto cells = splitCells(line, where);
            if (cells.size() != columns.size()) {
                fail(ErrorKind::Parse, where + ": expected " + std::to_string(columns.size()) + " cells, found " +
                                           std::to_string(cells.size()));
            }
            for (std::size_t c = 0; c < cells.size(); ++c) {
                auto [isKey, idx] = columns[c];
                if (isKey) {
                    r.keys[idx] = parseKeyCell(cells[c], where);
                } else {
                    if (cells[c].quoted) fail(ErrorKind::Parse, where + ": value cells cannot be quoted");
                    try {
                        r.vals[idx] = Value::parse(cells[c].text);
                    } catch (const Error& e) {
                        fail(ErrorKind::Parse, where + ": " + e.what());
                    }
                }
            }
        }
        rows.push_back(std::move(r));
        rowLines.push_back(lineNo);
    }

    // Report key violations with the offending line numbers.
    std::map<KeyTuple, std::size_t> firstSeen;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto [it, inserted] = firstSeen.emplace(rows[i].keys, i);
        if (!inserted && rows[it->second].vals != rows[i].vals) {
            fail(ErrorKind::KeyViolation, source + ": rows at lines " + std::to_string(rowLines[it->second]) + " and " +
                                              std::to_string(rowLines[i]) + " share key tuple " +
                                              renderKeys(rows[i].keys) + " with different values");
        }
    }
    return AssocTable::fromRows(std::move(sort), std::move(rows));
}

ValueTuple padRow(const ValueTuple& vals,
                  const std::vector<std::string>& from,
                  const std::vector<std::string>& to,
                  const std::optional<Value>& neutral) {
    if (vals.size() != from.size()) {
        fail(ErrorKind::Structural, "padRow: " + std::to_string(vals.size()) + " values for " +
                                        std::to_string(from.size()) + " attributes");
    }
    ValueTuple out;
    out.reserve(to.size());
    for (const auto& attr : to) {
        auto it = std::find(from.begin(), from.end(), attr);
        if (it != from.end()) {
            out.push_back(vals[static_cast<std::size_t>(it - from.begin())]);
        } else if (neutral) {
            out.push_back(*neutral);
        } else {
            fail(ErrorKind::Sort, "padding attribute '" + attr + "' requires a neutral element");
        }
    }
    for (const auto& attr : from) {
        if (std::find(to.begin(), to.end(), attr) == to.end()) {
            fail(ErrorKind::Structural, "padRow: attribute '" + attr + "' is missing from the target sort");
        }
    }
    return out;
}

AssocTable solve(const Sort& sort, const KeyedMultiset& pairs, const AggOp& op) {
    std::map<KeyTuple, std::vector<const ValueTuple*>> groups;
    for (const auto& [k, v] : pairs) {
        if (k.size() != sort.keys.size() || v.size() != sort.vals.size()) {
            fail(ErrorKind::Structural, "solve: pair arity does not match sort " + sort.toString());
        }
        groups[k].push_back(&v);
    }
    std::vector<Row> rows;
    rows.reserve(groups.size());
    std::vector<Value> column;
    for (auto& [k, members] : groups) {
        Row r;
        r.keys = k;
        for (std::size_t i = 0; i < sort.vals.size(); ++i) {
            column.clear();
            for (const ValueTuple* v : members) column.push_back((*v)[i]);
            std::sort(column.begin(), column.end());
            try {
                r.vals.push_back(op.apply(std::span<const Value>(column)));
            } catch (const Error& e) {
                fail(ErrorKind::Eval, std::string(e.what()) + " (at key tuple " + renderKeys(k) + ", attribute " +
                                          sort.vals[i] + ")");
            }
        }
        rows.push_back(std::move(r));
    }
    return AssocTable::fromRows(sort, std::move(rows));
}

AssocTable applyKeyPermutation(const AssocTable& table, const KeyPermutation& pi) {
    auto image = [&](const Key& k) -> const Key& {
        auto it = pi.find(k);
        return it == pi.end() ? k : it->second;
    };
    std::map<Key, Key> used;  // image -> preimage
    std::vector<Row> rows;
    rows.reserve(table.size());
    for (const Row& r : table.rows()) {
        Row n;
        n.vals = r.vals;
        for (const Key& k : r.keys) {
            const Key& img = image(k);
            auto [it, inserted] = used.emplace(img, k);
            if (!inserted && it->second != k) {
                fail(ErrorKind::Structural, "key permutation is not injective: " + it->second.toString() + " and " +
                                                k.toString() + " both map to " + img.toString());
            }
            n.keys.push_back(img);
        }
        rows.push_back(std::move(n));
    }
    return AssocTable::fromRows(table.sort(), std::move(rows));
}

void Database::add(const std::string& name, AssocTable table) {
    tables_.insert_or_assign(name, std::move(table));
}

const AssocTable& Database::get(const std::string& name) const {
    if (const AssocTable* t = find(name)) return *t;
    fail(ErrorKind::Sort, "unknown relation '" + name + "'");
}

const AssocTable* Database::find(const std::string& name) const {
    auto it = tables_.find(name);
    return it == tables_.end() ? nullptr : &it->second;
}

std::map<std::string, Sort> Database::schema() const {
    std::map<std::string, Sort> out;
    for (const auto& [name, t] : tables_) out.emplace(name, t.sort());
    return out;
}

std::set<Key> Database::activeKeys() const {
    std::set<Key> out;
    for (const auto& [_, t] : tables_)
        for (const Row& r : t.rows())
            out.insert(r.keys.begin(), r.keys.end());
    return out;
}

Database Database::permuted(const KeyPermutation& pi) const {
    // Injectivity must hold across the whole database, not just per table.
    std::map<Key, Key> used;
    for (const Key& k : activeKeys()) {
        auto it = pi.find(k);
        const Key& img = it == pi.end() ? k : it->second;
        auto [pos, inserted] = used.emplace(img, k);
        if (!inserted) {
            fail(ErrorKind::Structural, "key permutation is not injective on the active domain: " +
                                            pos->second.toString() + " and " + k.toString() + " collide");
        }
    }
    Database out;
    for (const auto& [name, t] : tables_) out.add(name, applyKeyPermutation(t, pi));
    return out;
}

}  // namespace lara

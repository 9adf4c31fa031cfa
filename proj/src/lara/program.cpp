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

#include "lara/program.hpp"

#include "lara/dsl.hpp"
#include "lara/error.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace lara {

namespace {

struct Tok {
    enum class Kind : std::uint8_t { Ident, Number, Sym, End };
    Kind kind = Kind::End;
    std::string text;
    std::size_t line = 0;
    std::size_t col = 0;
};

class Lexer {
public:
    Lexer(std::string_view text, std::string source, std::size_t line)
        : text_(text), source_(std::move(source)), line_(line) {
        tokenize();
    }

    const Tok& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
    Tok next() {
        Tok t = peek();
        if (pos_ < toks_.size() - 1) ++pos_;
        return t;
    }
    bool accept(const std::string& sym) {
        if (peek().kind == Tok::Kind::Sym && peek().text == sym) {
            next();
            return true;
        }
        return false;
    }
    Tok expect(const std::string& sym) {
        Tok t = next();
        if (t.kind != Tok::Kind::Sym || t.text != sym) error("expected '" + sym + "' but found " + describe(t), t);
        return t;
    }
    Tok ident(const std::string& what) {
        Tok t = next();
        if (t.kind != Tok::Kind::Ident) error("expected " + what + " but found " + describe(t), t);
        return t;
    }

    [[noreturn]] void error(const std::string& msg, const Tok& at) const {
        fail(ErrorKind::Parse, source_ + ":" + std::to_string(at.line) + ":" + std::to_string(at.col) + ": " + msg);
    }

    static std::string describe(const Tok& t) {
        if (t.kind == Tok::Kind::End) return "end of statement";
        return "'" + t.text + "'";
    }

    const std::string& source() const { return source_; }

private:
    void tokenize() {
        std::size_t line = line_, col = 1;
        std::size_t i = 0;
        auto push = [&](Tok::Kind k, std::size_t from, std::size_t to, std::size_t c) {
            toks_.push_back(Tok{k, std::string(text_.substr(from, to - from)), line, c});
        };
        while (i < text_.size()) {
            char c = text_[i];
            if (c == '\n') {
                ++line;
                col = 1;
                ++i;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
                ++col;
                continue;
            }
            std::size_t start = i;
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                while (i < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[i])) || text_[i] == '_' ||
                                            text_[i] == '\'')) {
                    ++i;
                }
                push(Tok::Kind::Ident, start, i, col);
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                while (i < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[i])) || text_[i] == '/' ||
                                            text_[i] == '.')) {
                    ++i;
                }
                push(Tok::Kind::Number, start, i, col);
            } else if (c == '-' && i + 1 < text_.size() && text_[i + 1] == '>') {
                i += 2;
                push(Tok::Kind::Sym, start, i, col);
            } else if (std::string_view("[](),;=-").find(c) != std::string_view::npos) {
                ++i;
                push(Tok::Kind::Sym, start, i, col);
            } else {
                Tok t{Tok::Kind::Sym, std::string(1, c), line, col};
                error("unexpected character '" + t.text + "'", t);
            }
            col += i - start;
        }
        toks_.push_back(Tok{Tok::Kind::End, "", line, col});
    }

    std::string_view text_;
    std::string source_;
    std::size_t line_;
    std::vector<Tok> toks_;
    std::size_t pos_ = 0;
};

bool isBuiltinFn(const std::string& name) {
    const auto& names = builtinExtFnNames();
    return std::find(names.begin(), names.end(), name) != names.end();
}

class ExprParser {
public:
    ExprParser(Lexer& lex, const Environment& env, const std::map<std::string, ExprPtr>& bindings)
        : lex_(lex), env_(env), bindings_(bindings) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        if (lex_.peek().kind != Tok::Kind::End) lex_.error("unexpected " + Lexer::describe(lex_.peek()), lex_.peek());
        return e;
    }

private:
    ExprPtr expr() {
        Tok t = lex_.ident("an expression");
        const std::string& w = t.text;
        if (w == "empty") {
            if (!lex_.accept("[")) return expr::empty();
            auto keys = names("]", ";");
            lex_.expect(";");
            auto vals = names("]", "]");
            lex_.expect("]");
            try {
                return expr::empty(Sort(keys, vals));
            } catch (const Error& e) {
                lex_.error(e.what(), t);
            }
        }
        if (w == "actdom") return expr::actDom();
        if (w == "ind") {
            lex_.expect("(");
            Tok r = lex_.ident("a relation name");
            lex_.expect(")");
            requireRelation(r);
            return expr::ind(r.text);
        }
        if (w == "join" || w == "union") {
            lex_.expect("[");
            std::string agg = aggName();
            lex_.expect("]");
            auto [a, b] = two();
            return w == "join" ? expr::join(a, b, agg) : expr::unite(a, b, agg);
        }
        if (w == "ext" || w == "map" || w == "filter") {
            lex_.expect("[");
            FnRef ref = fnRef(w == "filter");
            lex_.expect("]");
            ExprPtr e = one();
            if (w == "ext") return expr::ext(ref, e);
            if (w == "map") return expr::map(ref, e);
            return expr::filter(ref, e);
        }
        if (w == "agg" || w == "red" || w == "projk") {
            lex_.expect("[");
            std::string agg = aggName();
            std::vector<std::string> keys;
            if (lex_.accept(";")) keys = names("]", "]");
            lex_.expect("]");
            ExprPtr e = one();
            if (w == "agg") return expr::aggBy(keys, agg, e);
            if (w == "red") return expr::reduceBy(keys, agg, e);
            return expr::projKeys(keys, agg, e);
        }
        if (w == "projv") {
            lex_.expect("[");
            auto vals = names("]", "]");
            lex_.expect("]");
            return expr::projVals(vals, one());
        }
        if (w == "rename") {
            lex_.expect("[");
            std::vector<std::pair<std::string, std::string>> pairs;
            do {
                Tok from = lex_.ident("an attribute name");
                lex_.expect("->");
                Tok to = lex_.ident("an attribute name");
                pairs.emplace_back(from.text, to.text);
            } while (lex_.accept(","));
            lex_.expect("]");
            return expr::rename(pairs, one());
        }
        if (w == "product") {
            auto [a, b] = two();
            return expr::product(a, b);
        }
        if (auto it = bindings_.find(w); it != bindings_.end()) return it->second;
        requireRelation(t);
        return expr::atom(w);
    }

    void requireRelation(const Tok& t) {
        if (!env_.schema.count(t.text)) lex_.error("unknown relation or binding '" + t.text + "'", t);
    }

    std::string aggName() {
        Tok t = lex_.ident("an aggregate name");
        if (!env_.aggs->find(t.text)) lex_.error("unknown aggregate operator '" + t.text + "'", t);
        return t.text;
    }

    /// Comma-separated names up to (not including) `end`; empty when `end` or `stop` comes first.
    std::vector<std::string> names(const std::string& end, const std::string& stop) {
        std::vector<std::string> out;
        auto at = [&](const std::string& s) { return lex_.peek().kind == Tok::Kind::Sym && lex_.peek().text == s; };
        if (at(end) || at(stop)) return out;
        do {
            out.push_back(lex_.ident("an attribute name").text);
        } while (lex_.accept(","));
        return out;
    }

    FnRef fnRef(bool filter) {
        Tok name = lex_.ident("a function name");
        FnRef ref{name.text, {}, nullptr};
        if (lex_.accept("(")) {
            std::string cur;
            for (;;) {
                Tok t = lex_.next();
                if (t.kind == Tok::Kind::End) lex_.error("unterminated argument list", t);
                if (t.kind == Tok::Kind::Sym && (t.text == ")" || t.text == ",")) {
                    if (cur.empty()) lex_.error("empty argument", t);
                    ref.args.push_back(cur);
                    cur.clear();
                    if (t.text == ")") break;
                    continue;
                }
                cur += t.text;
            }
        }
        if (ref.name == "filter") {
            if (ref.args.size() != 1) lex_.error("filter expects one formula name", name);
            if (!env_.fns.find(ref.args[0])) lex_.error("unknown function '" + ref.args[0] + "'", name);
        } else if (!env_.fns.find(ref.name) && (filter || !isBuiltinFn(ref.name))) {
            lex_.error("unknown function '" + ref.name + "'", name);
        }
        return ref;
    }

    ExprPtr one() {
        lex_.expect("(");
        ExprPtr e = expr();
        lex_.expect(")");
        return e;
    }

    std::pair<ExprPtr, ExprPtr> two() {
        lex_.expect("(");
        ExprPtr a = expr();
        lex_.expect(",");
        ExprPtr b = expr();
        lex_.expect(")");
        return {a, b};
    }

    Lexer& lex_;
    const Environment& env_;
    const std::map<std::string, ExprPtr>& bindings_;
};

struct Statement {
    std::string text;
    std::size_t line = 0;
};

std::string stripComment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

std::vector<Statement> statements(std::string_view text) {
    std::vector<Statement> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        std::string s = stripComment(line);
        if (s.find_first_not_of(" \t\r") == std::string::npos) {
            if (!out.empty()) out.back().text += "\n";
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(s[0])) && !out.empty()) {
            out.back().text += "\n" + s;
        } else {
            out.push_back(Statement{s, no});
        }
    }
    return out;
}

std::string firstWord(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = b;
    while (e < s.size() && (std::isalnum(static_cast<unsigned char>(s[e])) || s[e] == '_')) ++e;
    return s.substr(b, e - b);
}

}  // namespace

ExprPtr Program::binding(const std::string& name) const {
    for (const auto& [n, e] : bindings)
        if (n == name) return e;
    return nullptr;
}

Program parseProgram(std::string_view text, const std::string& source, const std::map<std::string, Sort>& schema) {
    Program p;
    p.env.schema = schema;
    std::map<std::string, ExprPtr> bound;
    std::set<std::string> declared;
    for (const auto& st : statements(text)) {
        std::string word = firstWord(st.text);
        if (word == "fn") {
            dsl::FunctionPtr f;
            try {
                f = dsl::parseFunction(st.text, st.line);
                if (p.env.fns.find(f->name)) fail(ErrorKind::Parse, "function '" + f->name + "' defined twice");
                p.env.fns.add(f);
            } catch (const Error& e) {
                fail(e.kind(), source + ": " + e.what());
            }
            continue;
        }
        Lexer lex(st.text, source, st.line);
        if (word == "table") {
            lex.next();
            Tok name = lex.ident("a relation name");
            lex.expect("(");
            std::vector<std::string> keys, vals;
            auto list = [&](std::vector<std::string>& out, const std::string& end) {
                if (lex.peek().kind == Tok::Kind::Sym && lex.peek().text == end) return;
                do {
                    out.push_back(lex.ident("an attribute name").text);
                } while (lex.accept(","));
            };
            list(keys, ";");
            lex.expect(";");
            list(vals, ")");
            lex.expect(")");
            if (lex.peek().kind != Tok::Kind::End) lex.error("unexpected " + Lexer::describe(lex.peek()), lex.peek());
            if (!declared.insert(name.text).second) lex.error("table '" + name.text + "' declared twice", name);
            try {
                p.env.schema[name.text] = Sort(keys, vals);
            } catch (const Error& e) {
                lex.error(e.what(), name);
            }
            p.declared.push_back(name.text);
            continue;
        }
        Tok name = lex.ident("'table', 'fn' or a binding name");
        lex.expect("=");
        if (bound.count(name.text)) lex.error("'" + name.text + "' is bound twice", name);
        if (p.env.schema.count(name.text)) lex.error("'" + name.text + "' is already a relation name", name);
        ExprParser parser(lex, p.env, bound);
        ExprPtr e = parser.parse();
        try {
            inferSort(e, p.env);
        } catch (const Error& err) {
            fail(err.kind(), source + ":" + std::to_string(name.line) + ": in '" + name.text + "': " + err.what());
        }
        bound[name.text] = e;
        p.bindings.emplace_back(name.text, e);
    }
    if (p.bindings.empty()) fail(ErrorKind::Parse, source + ": program has no bindings");
    p.resultName = bound.count("result") ? "result" : p.bindings.back().first;
    p.result = bound.at(p.resultName);
    return p;
}

ExprPtr parseExpr(std::string_view text, const Environment& env, const std::string& source) {
    Lexer lex(text, source, 1);
    std::map<std::string, ExprPtr> none;
    ExprParser parser(lex, env, none);
    return parser.parse();
}

std::string readFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

AssocTable loadTable(const std::string& path) { return parseTable(readFile(path), path); }

Database loadDatabase(const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) fail(ErrorKind::Io, "'" + dir + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    Database db;
    for (const auto& f : files) db.add(f.stem().string(), loadTable(f.string()));
    return db;
}

Database conformDatabase(const Database& db, const Program& p) {
    Database out;
    std::set<std::string> declared(p.declared.begin(), p.declared.end());
    for (const auto& [name, table] : db.tables()) {
        if (!declared.count(name)) out.add(name, table);
    }
    for (const auto& name : p.declared) {
        const Sort& want = p.env.schema.at(name);
        const AssocTable* t = db.find(name);
        if (!t) fail(ErrorKind::Sort, "relation '" + name + "' is declared but missing from the database");
        if (!t->sort().sameAttributes(want)) {
            fail(ErrorKind::Sort, "relation '" + name + "' is declared as " + want.toString() + " but the database has " +
                                      t->sort().toString());
        }
        out.add(name, t->withColumnOrder(want));
    }
    return out;
}

}  // namespace lara

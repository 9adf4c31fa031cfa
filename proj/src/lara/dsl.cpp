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

#include "lara/dsl.hpp"

#include "lara/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <set>

namespace lara::dsl {

std::string datumToString(const Datum& d) {
    return std::visit([](const auto& x) { return x.toString(); }, d);
}

bool VarSet::empty() const {
    return std::all_of(words.begin(), words.end(), [](std::uint64_t w) { return w == 0; });
}

bool VarSet::subsetOf(const VarSet& o) const {
    for (std::size_t i = 0; i < words.size(); ++i)
        if (words[i] & ~o.words[i]) return false;
    return true;
}

VarSet VarSet::operator|(const VarSet& o) const {
    VarSet r;
    for (std::size_t i = 0; i < words.size(); ++i) r.words[i] = words[i] | o.words[i];
    return r;
}

VarSet VarSet::operator&(const VarSet& o) const {
    VarSet r;
    for (std::size_t i = 0; i < words.size(); ++i) r.words[i] = words[i] & o.words[i];
    return r;
}

VarSet VarSet::minus(const VarSet& o) const {
    VarSet r;
    for (std::size_t i = 0; i < words.size(); ++i) r.words[i] = words[i] & ~o.words[i];
    return r;
}

std::optional<std::size_t> VarSet::first() const {
    for (std::size_t i = 0; i < words.size(); ++i)
        if (words[i]) return i * 64 + static_cast<std::size_t>(std::countr_zero(words[i]));
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Predicates

bool Predicate::canSolve(unsigned boundMask) const {
    return std::any_of(modes.begin(), modes.end(), [&](unsigned m) { return (m & ~boundMask) == 0; });
}

bool Predicate::holds(const std::vector<Value>& args) const {
    std::vector<std::optional<Value>> in(args.begin(), args.end());
    return !solve(in).empty();
}

void PredicateRegistry::add(Predicate p) {
    std::string key = p.name;
    preds_.insert_or_assign(std::move(key), std::move(p));
}

const Predicate* PredicateRegistry::find(const std::string& name) const {
    auto it = preds_.find(name);
    return it == preds_.end() ? nullptr : &it->second;
}

std::vector<std::string> PredicateRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [n, _] : preds_) out.push_back(n);
    return out;
}

namespace {

using Args = std::vector<std::optional<Value>>;
using Solutions = std::vector<std::vector<Value>>;

bool isZero(const Value& v) { return v.isRational() && sgn(v.asRational()) == 0; }

Solutions single(const Args& a) {
    std::vector<Value> full;
    for (const auto& x : a) full.push_back(*x);
    return {full};
}

[[noreturn]] void infinite(const std::string& what) {
    fail(ErrorKind::Eval, "cannot solve " + what + ": infinitely many solutions");
}

Solutions solveAdd(Args a) {
    if (a[0] && a[1] && !a[2]) a[2] = *a[0] + *a[1];
    else if (a[0] && a[2] && !a[1]) a[1] = *a[2] - *a[0];
    else if (a[1] && a[2] && !a[0]) a[0] = *a[2] - *a[1];
    return *a[0] + *a[1] == *a[2] ? single(a) : Solutions{};
}

Solutions solveSub(Args a) {
    if (a[0] && a[1] && !a[2]) a[2] = *a[0] - *a[1];
    else if (a[0] && a[2] && !a[1]) a[1] = *a[0] - *a[2];
    else if (a[1] && a[2] && !a[0]) a[0] = *a[1] + *a[2];
    return *a[0] - *a[1] == *a[2] ? single(a) : Solutions{};
}

Solutions solveMul(Args a) {
    if (!a[2]) {
        a[2] = *a[0] * *a[1];
    } else if (!a[0] || !a[1]) {
        std::size_t known = a[0] ? 0 : 1;
        std::size_t unknown = 1 - known;
        if (isZero(*a[known])) {
            if (isZero(*a[2])) infinite("mul with a zero factor and zero product");
            return {};
        }
        a[unknown] = *a[2] / *a[known];
    }
    return *a[0] * *a[1] == *a[2] ? single(a) : Solutions{};
}

Solutions solveDiv(Args a) {
    if (a[1] && isZero(*a[1])) return {};
    if (!a[2]) {
        a[2] = *a[0] / *a[1];
    } else if (!a[0]) {
        a[0] = *a[1] * *a[2];
    } else if (!a[1]) {
        if (isZero(*a[2])) {
            if (isZero(*a[0])) infinite("div(0, b, 0)");
            return {};
        }
        a[1] = *a[0] / *a[2];
        if (isZero(*a[1])) return {};
    }
    return *a[0] / *a[1] == *a[2] ? single(a) : Solutions{};
}

Solutions solveEq(Args a) {
    if (!a[0]) a[0] = a[1];
    if (!a[1]) a[1] = a[0];
    return *a[0] == *a[1] ? single(a) : Solutions{};
}

Solutions solveFloor(Args a) {
    if (!a[0]->isRational()) return {};
    mpz_class f;
    mpz_fdiv_q(f.get_mpz_t(), a[0]->asRational().get_num_mpz_t(), a[0]->asRational().get_den_mpz_t());
    Value fl(mpq_class(f, 1));
    if (!a[1]) a[1] = fl;
    return *a[1] == fl ? single(a) : Solutions{};
}

Solutions solveExp(Args a) {
    Value e = expApprox(*a[0], defaultExpPrecision());
    if (!a[1]) a[1] = e;
    return *a[1] == e ? single(a) : Solutions{};
}

Predicate test(std::string name, std::size_t arity, std::function<bool(const std::vector<Value>&)> t) {
    unsigned all = (1U << arity) - 1;
    return Predicate{std::move(name), arity, {all}, [t = std::move(t)](const Args& a) {
                         std::vector<Value> full;
                         for (const auto& x : a) full.push_back(*x);
                         return t(full) ? Solutions{full} : Solutions{};
                     }};
}

PredicateRegistry makePredicates() {
    PredicateRegistry reg;
    reg.add({"add", 3, {0b011, 0b101, 0b110}, solveAdd});
    reg.add({"sub", 3, {0b011, 0b101, 0b110}, solveSub});
    reg.add({"mul", 3, {0b011, 0b101, 0b110}, solveMul});
    reg.add({"div", 3, {0b011, 0b101, 0b110}, solveDiv});
    reg.add({"eq", 2, {0b01, 0b10}, solveEq});
    reg.add(test("neq", 2, [](const auto& v) { return v[0] != v[1]; }));
    reg.add(test("lt", 2, [](const auto& v) { return v[0] < v[1]; }));
    reg.add(test("leq", 2, [](const auto& v) { return v[0] <= v[1]; }));
    reg.add(test("isint", 1, [](const auto& v) { return v[0].isInteger(); }));
    reg.add({"floor", 2, {0b01}, solveFloor});
    reg.add({"expApprox", 2, {0b01}, solveExp});
    return reg;
}

}  // namespace

const PredicateRegistry& builtinPredicates() {
    static const PredicateRegistry reg = makePredicates();
    return reg;
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

struct Token {
    enum class Kind : std::uint8_t { Ident, Number, String, Sym, End };
    Kind kind = Kind::End;
    std::string text;
    std::size_t line = 1;
    std::size_t col = 1;
};

class Lexer {
public:
    Lexer(std::string_view src, std::size_t line) : src_(src), line_(line) { lex(); }

    const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
    Token next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

    bool isSym(std::string_view s, std::size_t ahead = 0) const {
        return peek(ahead).kind == Token::Kind::Sym && peek(ahead).text == s;
    }
    bool isWord(std::string_view s, std::size_t ahead = 0) const {
        return peek(ahead).kind == Token::Kind::Ident && peek(ahead).text == s;
    }

    [[noreturn]] void error(const std::string& msg, const Token& at) const {
        fail(ErrorKind::Parse, "line " + std::to_string(at.line) + ", column " + std::to_string(at.col) + ": " + msg);
    }
    [[noreturn]] void error(const std::string& msg) const { error(msg, peek()); }

    void expectSym(std::string_view s) {
        if (!isSym(s)) error("expected '" + std::string(s) + "' but found " + describe(peek()));
        ++pos_;
    }
    void expectWord(std::string_view s) {
        if (!isWord(s)) error("expected '" + std::string(s) + "' but found " + describe(peek()));
        ++pos_;
    }
    Token expectIdent() {
        if (peek().kind != Token::Kind::Ident) error("expected an identifier but found " + describe(peek()));
        return next();
    }

    static std::string describe(const Token& t) {
        return t.kind == Token::Kind::End ? "end of input" : "'" + t.text + "'";
    }

private:
    void lex() {
        std::size_t i = 0;
        std::size_t col = 1;
        auto advance = [&](std::size_t n) {
            for (std::size_t k = 0; k < n; ++k) {
                if (src_[i] == '\n') {
                    ++line_;
                    col = 1;
                } else {
                    ++col;
                }
                ++i;
            }
        };
        while (i < src_.size()) {
            char c = src_[i];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance(1);
                continue;
            }
            if (c == '#') {
                while (i < src_.size() && src_[i] != '\n') advance(1);
                continue;
            }
            Token t;
            t.line = line_;
            t.col = col;
            std::size_t start = i;
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t j = i;
                while (j < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_' || src_[j] == '\''))
                    ++j;
                t.kind = Token::Kind::Ident;
                t.text = std::string(src_.substr(i, j - i));
                advance(j - i);
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '-' && i + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i + 1])))) {
                std::size_t j = i + 1;
                auto digits = [&] {
                    while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
                };
                digits();
                if (j + 1 < src_.size() && (src_[j] == '.' || src_[j] == '/') &&
                    std::isdigit(static_cast<unsigned char>(src_[j + 1]))) {
                    ++j;
                    digits();
                }
                t.kind = Token::Kind::Number;
                t.text = std::string(src_.substr(i, j - i));
                advance(j - i);
            } else if (c == '"') {
                std::size_t j = i + 1;
                std::string s;
                bool closed = false;
                while (j < src_.size()) {
                    if (src_[j] == '"') {
                        if (j + 1 < src_.size() && src_[j + 1] == '"') {
                            s += '"';
                            j += 2;
                            continue;
                        }
                        closed = true;
                        ++j;
                        break;
                    }
                    s += src_[j++];
                }
                if (!closed) {
                    fail(ErrorKind::Parse, "line " + std::to_string(t.line) + ", column " + std::to_string(t.col) +
                                               ": unterminated string");
                }
                t.kind = Token::Kind::String;
                t.text = s;
                advance(j - i);
            } else {
                static const char* const two[] = {":=", "->", "!=", "<=", ">=", "&&", "||"};
                t.kind = Token::Kind::Sym;
                for (const char* s : two) {
                    if (src_.substr(i, 2) == s) t.text = s;
                }
                if (t.text.empty()) {
                    if (std::string_view("(),;:=<>!").find(c) == std::string_view::npos) {
                        fail(ErrorKind::Parse, "line " + std::to_string(t.line) + ", column " +
                                                   std::to_string(t.col) + ": unexpected character '" +
                                                   std::string(1, c) + "'");
                    }
                    t.text = std::string(1, c);
                }
                advance(t.text.size());
            }
            (void)start;
            toks_.push_back(std::move(t));
        }
        Token end;
        end.kind = Token::Kind::End;
        end.line = line_;
        end.col = col;
        toks_.push_back(end);
    }

    std::string_view src_;
    std::size_t line_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Raw syntax tree and sort resolution

struct RawTerm {
    enum class Kind : std::uint8_t { Var, Number, String } kind = Kind::Var;
    std::size_t var = 0;
    std::string text;
    Token at;
};

struct RawNode {
    enum class Kind : std::uint8_t { True, False, Rel, Pred, And, Or, Not, Exists } kind = Kind::True;
    std::string op;  // Rel operator or predicate name
    std::vector<RawTerm> terms;
    std::vector<std::shared_ptr<RawNode>> kids;
    std::size_t var = 0;
    Token at;
};
using RawPtr = std::shared_ptr<RawNode>;

const std::set<std::string>& keywords() {
    static const std::set<std::string> k = {"fn",     "keys", "vals",  "and", "or",
                                            "not",    "implies", "exists", "true", "false"};
    return k;
}

class FormulaParser {
public:
    FormulaParser(Lexer& lex, std::vector<Variable>& vars, std::vector<std::optional<VarSort>>& sorts)
        : lex_(lex), vars_(vars), sorts_(sorts) {
        for (std::size_t i = 0; i < vars_.size(); ++i) scope_[vars_[i].name].push_back(i);
    }

    RawPtr parse() { return implication(); }

private:
    RawPtr make(RawNode::Kind k, const Token& at) {
        auto n = std::make_shared<RawNode>();
        n->kind = k;
        n->at = at;
        return n;
    }

    RawPtr implication() {
        RawPtr lhs = disjunction();
        if (lex_.isWord("implies") || lex_.isSym("->")) {
            Token at = lex_.next();
            RawPtr rhs = implication();
            RawPtr neg = make(RawNode::Kind::Not, at);
            neg->kids.push_back(lhs);
            RawPtr n = make(RawNode::Kind::Or, at);
            n->kids = {neg, rhs};
            return n;
        }
        return lhs;
    }

    RawPtr disjunction() {
        RawPtr first = conjunction();
        if (!(lex_.isWord("or") || lex_.isSym("||"))) return first;
        RawPtr n = make(RawNode::Kind::Or, lex_.peek());
        n->kids.push_back(first);
        while (lex_.isWord("or") || lex_.isSym("||")) {
            lex_.next();
            n->kids.push_back(conjunction());
        }
        return n;
    }

    RawPtr conjunction() {
        RawPtr first = unary();
        if (!(lex_.isWord("and") || lex_.isSym("&&"))) return first;
        RawPtr n = make(RawNode::Kind::And, lex_.peek());
        n->kids.push_back(first);
        while (lex_.isWord("and") || lex_.isSym("&&")) {
            lex_.next();
            n->kids.push_back(unary());
        }
        return n;
    }

    RawPtr unary() {
        const Token& t = lex_.peek();
        if (lex_.isWord("not") || lex_.isSym("!")) {
            Token at = lex_.next();
            RawPtr n = make(RawNode::Kind::Not, at);
            n->kids.push_back(unary());
            return n;
        }
        if (lex_.isWord("exists")) return exists();
        if (lex_.isSym("(")) {
            lex_.next();
            RawPtr inner = implication();
            lex_.expectSym(")");
            return inner;
        }
        if (lex_.isWord("true")) return make(RawNode::Kind::True, lex_.next());
        if (lex_.isWord("false")) return make(RawNode::Kind::False, lex_.next());
        if (t.kind == Token::Kind::Ident && lex_.isSym("(", 1) && !scope_.count(t.text)) {
            Token name = lex_.next();
            lex_.expectSym("(");
            RawPtr n = make(RawNode::Kind::Pred, name);
            n->op = name.text;
            if (!lex_.isSym(")")) {
                n->terms.push_back(term());
                while (lex_.isSym(",")) {
                    lex_.next();
                    n->terms.push_back(term());
                }
            }
            lex_.expectSym(")");
            return n;
        }
        RawTerm lhs = term();
        static const char* const ops[] = {"=", "!=", "<", "<=", ">", ">="};
        for (const char* op : ops) {
            if (lex_.isSym(op)) {
                Token at = lex_.next();
                RawPtr n = make(RawNode::Kind::Rel, at);
                n->op = op;
                n->terms = {lhs, term()};
                return n;
            }
        }
        lex_.error("expected a comparison after " + Lexer::describe(lhs.at));
    }

    RawPtr exists() {
        Token at = lex_.next();
        std::vector<std::size_t> bound;
        do {
            if (lex_.isSym(",")) lex_.next();
            Token name = lex_.expectIdent();
            if (keywords().count(name.text)) lex_.error("'" + name.text + "' is a reserved word", name);
            std::optional<VarSort> sort;
            if (lex_.isSym(":")) {
                lex_.next();
                Token s = lex_.expectIdent();
                if (s.text == "key") sort = VarSort::Key;
                else if (s.text == "val") sort = VarSort::Val;
                else lex_.error("expected 'key' or 'val' after ':'", s);
            }
            auto it = scope_.find(name.text);
            if (it != scope_.end() && !it->second.empty()) {
                lex_.error("variable '" + name.text + "' is already in scope", name);
            }
            if (vars_.size() >= kMaxVars) lex_.error("too many variables", name);
            vars_.push_back({name.text, sort.value_or(VarSort::Val)});
            sorts_.push_back(sort);
            bound.push_back(vars_.size() - 1);
            scope_[name.text].push_back(vars_.size() - 1);
        } while (lex_.isSym(","));
        lex_.expectSym("(");
        RawPtr body = implication();
        lex_.expectSym(")");
        for (auto v : bound) scope_[vars_[v].name].pop_back();
        for (auto it = bound.rbegin(); it != bound.rend(); ++it) {
            RawPtr n = make(RawNode::Kind::Exists, at);
            n->var = *it;
            n->kids.push_back(body);
            body = n;
        }
        return body;
    }

    RawTerm term() {
        Token t = lex_.next();
        RawTerm r;
        r.at = t;
        switch (t.kind) {
            case Token::Kind::Ident: {
                if (keywords().count(t.text)) lex_.error("unexpected keyword '" + t.text + "'", t);
                auto it = scope_.find(t.text);
                if (it == scope_.end() || it->second.empty()) lex_.error("unknown variable '" + t.text + "'", t);
                r.kind = RawTerm::Kind::Var;
                r.var = it->second.back();
                r.text = t.text;
                return r;
            }
            case Token::Kind::Number:
                r.kind = RawTerm::Kind::Number;
                r.text = t.text;
                return r;
            case Token::Kind::String:
                r.kind = RawTerm::Kind::String;
                r.text = t.text;
                return r;
            default:
                lex_.error("expected a variable or constant but found " + Lexer::describe(t), t);
        }
    }

    Lexer& lex_;
    std::vector<Variable>& vars_;
    std::vector<std::optional<VarSort>>& sorts_;
    std::map<std::string, std::vector<std::size_t>> scope_;
};

class Resolver {
public:
    Resolver(Lexer& lex, std::vector<Variable>& vars, std::vector<std::optional<VarSort>>& sorts)
        : lex_(lex), vars_(vars), sorts_(sorts), parent_(vars.size()) {
        for (std::size_t i = 0; i < parent_.size(); ++i) parent_[i] = i;
    }

    NodePtr resolve(const RawPtr& root, Formula& out) {
        collect(*root);
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            auto s = sorts_[find(i)];
            if (!s) {
                fail(ErrorKind::Sort, "cannot infer the sort of variable '" + vars_[i].name +
                                          "'; annotate it as " + vars_[i].name + ":key or " + vars_[i].name + ":val");
            }
            vars_[i].sort = *s;
        }
        out_ = &out;
        return build(*root);
    }

private:
    std::size_t find(std::size_t v) {
        while (parent_[v] != v) v = parent_[v] = parent_[parent_[v]];
        return v;
    }

    void constrain(std::size_t v, VarSort s, const Token& at) {
        std::size_t r = find(v);
        if (sorts_[r] && *sorts_[r] != s) clash(v, at);
        sorts_[r] = s;
    }

    [[noreturn]] void clash(std::size_t v, const Token& at) {
        fail(ErrorKind::Sort, "line " + std::to_string(at.line) + ", column " + std::to_string(at.col) +
                                  ": sort clash: variable '" + vars_[v].name + "' is used both as a key and as a value");
    }

    void unite(std::size_t a, std::size_t b, const Token& at) {
        std::size_t ra = find(a), rb = find(b);
        if (ra == rb) return;
        if (sorts_[ra] && sorts_[rb] && *sorts_[ra] != *sorts_[rb]) clash(a, at);
        if (!sorts_[rb]) sorts_[rb] = sorts_[ra];
        parent_[ra] = rb;
    }

    void collect(const RawNode& n) {
        switch (n.kind) {
            case RawNode::Kind::Pred:
                for (const auto& t : n.terms) {
                    if (t.kind == RawTerm::Kind::Var) constrain(t.var, VarSort::Val, t.at);
                    if (t.kind == RawTerm::Kind::String) {
                        lex_.error("predicate arguments are values; text constant \"" + t.text + "\" is a key", t.at);
                    }
                }
                break;
            case RawNode::Kind::Rel: {
                const RawTerm& a = n.terms[0];
                const RawTerm& b = n.terms[1];
                if (a.kind == RawTerm::Kind::Var && b.kind == RawTerm::Kind::Var) unite(a.var, b.var, n.at);
                for (const RawTerm* t : {&a, &b}) {
                    const RawTerm* other = t == &a ? &b : &a;
                    if (t->kind == RawTerm::Kind::Var && other->kind == RawTerm::Kind::String)
                        constrain(t->var, VarSort::Key, n.at);
                }
                break;
            }
            default:
                for (const auto& k : n.kids) collect(*k);
        }
    }

    Term constantTerm(const RawTerm& t, VarSort s) {
        Term out;
        out.isVar = false;
        if (t.kind == RawTerm::Kind::String) {
            if (s == VarSort::Val) lex_.error("text constant \"" + t.text + "\" compared with a value", t.at);
            out.constant = Key::text(t.text);
            out_->usesKeyConst = true;
            return out;
        }
        if (s == VarSort::Key) {
            if (t.text.find_first_of("./") != std::string::npos) {
                lex_.error("key constant " + t.text + " must be an integer", t.at);
            }
            out.constant = Key::integer(mpz_class(t.text[0] == '+' ? t.text.substr(1) : t.text, 10));
            out_->usesKeyConst = true;
            return out;
        }
        out.constant = Value::parse(t.text);
        return out;
    }

    Term makeTerm(const RawTerm& t, VarSort s) {
        if (t.kind == RawTerm::Kind::Var) {
            Term out;
            out.var = t.var;
            return out;
        }
        return constantTerm(t, s);
    }

    static NodePtr node(Node::Kind k, std::vector<Term> terms, std::vector<NodePtr> kids) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->terms = std::move(terms);
        n->kids = std::move(kids);
        for (const Term& t : n->terms)
            if (t.isVar) n->free.set(t.var);
        for (const auto& c : n->kids) n->free = n->free | c->free;
        return n;
    }

    static NodePtr negate(NodePtr inner) {
        if (inner->kind == Node::Kind::Not) return inner->kids[0];
        if (inner->kind == Node::Kind::True) return node(Node::Kind::False, {}, {});
        if (inner->kind == Node::Kind::False) return node(Node::Kind::True, {}, {});
        return node(Node::Kind::Not, {}, {std::move(inner)});
    }

    NodePtr pred(const std::string& name, std::vector<Term> terms, const Token& at) {
        const Predicate* p = builtinPredicates().find(name);
        if (!p) lex_.error("unknown predicate '" + name + "'", at);
        if (p->arity != terms.size()) {
            lex_.error("predicate '" + name + "' takes " + std::to_string(p->arity) + " arguments, got " +
                           std::to_string(terms.size()),
                       at);
        }
        auto n = std::const_pointer_cast<Node>(node(Node::Kind::Pred, std::move(terms), {}));
        n->pred = p;
        return n;
    }

    NodePtr build(const RawNode& n) {
        switch (n.kind) {
            case RawNode::Kind::True: return node(Node::Kind::True, {}, {});
            case RawNode::Kind::False: return node(Node::Kind::False, {}, {});
            case RawNode::Kind::Pred: {
                std::vector<Term> terms;
                for (const auto& t : n.terms) terms.push_back(makeTerm(t, VarSort::Val));
                return pred(n.op, std::move(terms), n.at);
            }
            case RawNode::Kind::Rel: return relation(n);
            case RawNode::Kind::And:
            case RawNode::Kind::Or: {
                std::vector<NodePtr> kids;
                for (const auto& k : n.kids) {
                    NodePtr c = build(*k);
                    // Flatten nested connectives of the same kind.
                    bool same = (n.kind == RawNode::Kind::And && c->kind == Node::Kind::And) ||
                                (n.kind == RawNode::Kind::Or && c->kind == Node::Kind::Or);
                    if (same) kids.insert(kids.end(), c->kids.begin(), c->kids.end());
                    else kids.push_back(std::move(c));
                }
                return node(n.kind == RawNode::Kind::And ? Node::Kind::And : Node::Kind::Or, {}, std::move(kids));
            }
            case RawNode::Kind::Not: return negate(build(*n.kids[0]));
            case RawNode::Kind::Exists: {
                NodePtr body = build(*n.kids[0]);
                auto e = std::const_pointer_cast<Node>(node(Node::Kind::Exists, {}, {body}));
                e->var = n.var;
                e->free.reset(n.var);
                return e;
            }
        }
        return node(Node::Kind::True, {}, {});
    }

    NodePtr relation(const RawNode& n) {
        const RawTerm& a = n.terms[0];
        const RawTerm& b = n.terms[1];
        VarSort s = VarSort::Val;
        if (a.kind == RawTerm::Kind::Var) s = vars_[a.var].sort;
        else if (b.kind == RawTerm::Kind::Var) s = vars_[b.var].sort;
        else if (a.kind == RawTerm::Kind::String || b.kind == RawTerm::Kind::String) s = VarSort::Key;
        Term ta = makeTerm(a, s);
        Term tb = makeTerm(b, s);
        const std::string& op = n.op;
        if (s == VarSort::Key) {
            if (op == "=") return node(Node::Kind::KeyEq, {ta, tb}, {});
            if (op == "!=") return negate(node(Node::Kind::KeyEq, {ta, tb}, {}));
            out_->usesOrder = true;
            if (op == "<") return node(Node::Kind::KeyLt, {ta, tb}, {});
            if (op == ">") return node(Node::Kind::KeyLt, {tb, ta}, {});
            if (op == "<=") return node(Node::Kind::Or, {}, {node(Node::Kind::KeyLt, {ta, tb}, {}), node(Node::Kind::KeyEq, {ta, tb}, {})});
            return node(Node::Kind::Or, {}, {node(Node::Kind::KeyLt, {tb, ta}, {}), node(Node::Kind::KeyEq, {ta, tb}, {})});
        }
        if (op == "=") return pred("eq", {ta, tb}, n.at);
        if (op == "!=") return pred("neq", {ta, tb}, n.at);
        if (op == "<") return pred("lt", {ta, tb}, n.at);
        if (op == ">") return pred("lt", {tb, ta}, n.at);
        if (op == "<=") return pred("leq", {ta, tb}, n.at);
        return pred("leq", {tb, ta}, n.at);
    }

    Lexer& lex_;
    std::vector<Variable>& vars_;
    std::vector<std::optional<VarSort>>& sorts_;
    std::vector<std::size_t> parent_;
    Formula* out_ = nullptr;
};

Formula parseBody(Lexer& lex, std::vector<Variable> freeVars) {
    Formula f;
    std::vector<std::optional<VarSort>> sorts;
    for (const auto& v : freeVars) sorts.push_back(v.sort);
    f.vars = std::move(freeVars);
    FormulaParser p(lex, f.vars, sorts);
    RawPtr raw = p.parse();
    if (lex.peek().kind != Token::Kind::End) lex.error("unexpected " + Lexer::describe(lex.peek()));
    Resolver r(lex, f.vars, sorts);
    f.root = r.resolve(raw, f);
    return f;
}

std::vector<std::string> identList(Lexer& lex) {
    std::vector<std::string> out;
    if (lex.peek().kind != Token::Kind::Ident || lex.isWord("vals") || lex.isWord("keys")) return out;
    out.push_back(lex.expectIdent().text);
    while (lex.isSym(",")) {
        lex.next();
        out.push_back(lex.expectIdent().text);
    }
    return out;
}

Sort signature(Lexer& lex) {
    lex.expectSym("(");
    std::vector<std::string> keys, vals;
    if (lex.isWord("keys")) {
        lex.next();
        keys = identList(lex);
    }
    if (lex.isSym(";")) lex.next();
    if (lex.isWord("vals")) {
        lex.next();
        vals = identList(lex);
    }
    lex.expectSym(")");
    for (const auto* list : {&keys, &vals})
        for (const auto& n : *list)
            if (keywords().count(n)) fail(ErrorKind::Parse, "'" + n + "' is a reserved word");
    return Sort(keys, vals);
}

}  // namespace

FunctionPtr parseFunction(std::string_view text, std::size_t line) {
    Lexer lex(text, line);
    lex.expectWord("fn");
    auto f = std::make_shared<Function>();
    f->name = lex.expectIdent().text;
    f->in = signature(lex);
    lex.expectSym("->");
    f->out = signature(lex);
    lex.expectSym(":=");

    std::vector<Variable> vars;
    std::set<std::string> seen;
    auto addAll = [&](const std::vector<std::string>& names, VarSort s) {
        for (const auto& n : names) {
            if (!seen.insert(n).second) {
                fail(ErrorKind::Sort, "function '" + f->name + "': attribute '" + n +
                                          "' appears more than once in the signature");
            }
            vars.push_back({n, s});
        }
    };
    addAll(f->in.keys, VarSort::Key);
    addAll(f->in.vals, VarSort::Val);
    addAll(f->out.keys, VarSort::Key);
    addAll(f->out.vals, VarSort::Val);
    f->body = parseBody(lex, std::move(vars));
    return f;
}

Formula parseFormula(std::string_view text, const Sort& freeVars, std::size_t line) {
    Lexer lex(text, line);
    std::vector<Variable> vars;
    for (const auto& k : freeVars.keys) vars.push_back({k, VarSort::Key});
    for (const auto& v : freeVars.vals) vars.push_back({v, VarSort::Val});
    return parseBody(lex, std::move(vars));
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string termString(const Formula& f, const Term& t) {
    return t.isVar ? f.vars[t.var].name : datumToString(t.constant);
}

std::string nodeString(const Formula& f, const Node& n) {
    auto join = [&](const char* sep) {
        std::string out = "(";
        for (std::size_t i = 0; i < n.kids.size(); ++i) {
            if (i) out += sep;
            out += nodeString(f, *n.kids[i]);
        }
        return out + ")";
    };
    switch (n.kind) {
        case Node::Kind::True: return "true";
        case Node::Kind::False: return "false";
        case Node::Kind::KeyEq: return termString(f, n.terms[0]) + " = " + termString(f, n.terms[1]);
        case Node::Kind::KeyLt: return termString(f, n.terms[0]) + " < " + termString(f, n.terms[1]);
        case Node::Kind::Pred: {
            std::string out = n.pred->name + "(";
            for (std::size_t i = 0; i < n.terms.size(); ++i) {
                if (i) out += ", ";
                out += termString(f, n.terms[i]);
            }
            return out + ")";
        }
        case Node::Kind::And: return join(" and ");
        case Node::Kind::Or: return join(" or ");
        case Node::Kind::Not: return "not(" + nodeString(f, *n.kids[0]) + ")";
        case Node::Kind::Exists: {
            const Variable& v = f.vars[n.var];
            return "exists " + v.name + (v.sort == VarSort::Key ? ":key" : ":val") + " (" +
                   nodeString(f, *n.kids[0]) + ")";
        }
    }
    return {};
}

std::string sigString(const Sort& s) {
    std::string out = "(keys ";
    for (std::size_t i = 0; i < s.keys.size(); ++i) out += (i ? ", " : "") + s.keys[i];
    out += " ; vals ";
    for (std::size_t i = 0; i < s.vals.size(); ++i) out += (i ? ", " : "") + s.vals[i];
    return out + ")";
}

}  // namespace

std::string Formula::toString() const { return nodeString(*this, *root); }

std::string Function::toString() const {
    return "fn " + name + " " + sigString(in) + " -> " + sigString(out) + " := " + body.toString();
}

// ---------------------------------------------------------------------------
// Scheduling: which conjuncts can run given a set of bound variables

namespace {

bool termBound(const Term& t, const VarSet& mask) { return !t.isVar || mask.test(t.var); }

class Scheduler {
public:
    explicit Scheduler(const Formula& f) : f_(f) {}

    /// True when `n` can run now without enumerating key variables first.
    bool ready(const Node& n, const VarSet& mask) {
        switch (n.kind) {
            case Node::Kind::True:
            case Node::Kind::False: return true;
            case Node::Kind::KeyEq: return termBound(n.terms[0], mask) || termBound(n.terms[1], mask);
            case Node::Kind::KeyLt: return termBound(n.terms[0], mask) && termBound(n.terms[1], mask);
            case Node::Kind::Pred: {
                unsigned bound = 0;
                for (std::size_t i = 0; i < n.terms.size(); ++i)
                    if (termBound(n.terms[i], mask)) bound |= 1U << i;
                return n.pred->canSolve(bound);
            }
            case Node::Kind::Not: return n.free.subsetOf(mask);
            case Node::Kind::And:
            case Node::Kind::Or:
            case Node::Kind::Exists: return after(n, mask).has_value();
        }
        return false;
    }

    /// Variables guaranteed bound after running `n` from `mask`, or nothing
    /// when `n` cannot run to completion.
    std::optional<VarSet> after(const Node& n, const VarSet& mask) {
        auto key = std::make_pair(&n, mask);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        std::optional<VarSet> r;
        switch (n.kind) {
            case Node::Kind::True:
            case Node::Kind::False:
            case Node::Kind::Not: r = mask; break;
            case Node::Kind::KeyEq:
            case Node::Kind::KeyLt:
            case Node::Kind::Pred: r = mask | n.free; break;
            case Node::Kind::And: {
                std::vector<const Node*> kids;
                for (const auto& k : n.kids) kids.push_back(k.get());
                r = complete(kids, mask);
                break;
            }
            case Node::Kind::Or: {
                std::optional<VarSet> acc;
                for (const auto& k : n.kids) {
                    auto m = complete({k.get()}, mask);
                    if (!m) {
                        acc.reset();
                        r.reset();
                        goto done;
                    }
                    acc = acc ? (*acc & *m) : *m;
                }
                r = acc.value_or(mask);
                break;
            }
            case Node::Kind::Exists: {
                VarSet inner = mask;
                inner.reset(n.var);
                auto m = complete({n.kids[0].get()}, inner);
                if (m) {
                    m->reset(n.var);
                    r = *m | mask;
                }
                break;
            }
        }
    done:
        cache_.emplace(key, r);
        return r;
    }

    /// Greedy run of a conjunction, enumerating key variables when stuck.
    std::optional<VarSet> complete(std::vector<const Node*> pending, VarSet mask) {
        while (!pending.empty()) {
            bool progressed = false;
            for (std::size_t i = 0; i < pending.size(); ++i) {
                if (ready(*pending[i], mask)) {
                    auto m = after(*pending[i], mask);
                    if (!m) return std::nullopt;
                    mask = *m;
                    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(i));
                    progressed = true;
                    break;
                }
            }
            if (progressed) continue;
            auto k = unboundKeyVar(pending, mask);
            if (!k) return std::nullopt;
            mask.set(*k);
        }
        return mask;
    }

    std::optional<std::size_t> unboundKeyVar(const std::vector<const Node*>& pending, const VarSet& mask) const {
        for (const Node* n : pending) {
            VarSet open = n->free.minus(mask);
            for (std::size_t w = 0; w < open.words.size(); ++w) {
                std::uint64_t bits = open.words[w];
                while (bits) {
                    std::size_t v = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
                    if (f_.vars[v].sort == VarSort::Key) return v;
                    bits &= bits - 1;
                }
            }
        }
        return std::nullopt;
    }

private:
    const Formula& f_;
    std::map<std::pair<const Node*, VarSet>, std::optional<VarSet>> cache_;
};

std::vector<const Node*> flatten(const std::vector<const Node*>& nodes) {
    std::vector<const Node*> out;
    for (const Node* n : nodes) {
        if (n->kind == Node::Kind::And) {
            std::vector<const Node*> kids;
            for (const auto& k : n->kids) kids.push_back(k.get());
            auto flat = flatten(kids);
            out.insert(out.end(), flat.begin(), flat.end());
        } else {
            out.push_back(n);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Safety analysis

struct PathState {
    VarSet mask;
    std::map<std::string, std::pair<bool, VarSet>> literals;  // canonical atom -> (polarity, vars)
};

std::string canonTerm(const Term& t) {
    return t.isVar ? "#" + std::to_string(t.var) : "c" + datumToString(t.constant);
}

/// Canonical text of a subformula with quantified variables numbered by depth.
std::string canonNode(const Node& n, std::map<std::size_t, std::string>& bound) {
    auto term = [&](const Term& t) {
        if (t.isVar) {
            if (auto it = bound.find(t.var); it != bound.end()) return it->second;
        }
        return canonTerm(t);
    };
    switch (n.kind) {
        case Node::Kind::True: return "T";
        case Node::Kind::False: return "F";
        case Node::Kind::KeyEq: {
            std::string a = term(n.terms[0]), b = term(n.terms[1]);
            if (b < a) std::swap(a, b);
            return a + "=" + b;
        }
        case Node::Kind::KeyLt: return term(n.terms[0]) + "<" + term(n.terms[1]);
        case Node::Kind::Pred: {
            std::string out = n.pred->name + "(";
            for (const auto& t : n.terms) out += term(t) + ",";
            return out + ")";
        }
        case Node::Kind::Exists: {
            std::string name = "$" + std::to_string(bound.size());
            bound[n.var] = name;
            std::string out = "E" + name + "(" + canonNode(*n.kids[0], bound) + ")";
            bound.erase(n.var);
            return out;
        }
        case Node::Kind::And:
        case Node::Kind::Or:
        case Node::Kind::Not: {
            std::string out = n.kind == Node::Kind::And ? "A(" : n.kind == Node::Kind::Or ? "O(" : "N(";
            for (const auto& k : n.kids) out += canonNode(*k, bound) + ";";
            return out + ")";
        }
    }
    return {};
}

std::string canonNode(const Node& n) {
    std::map<std::size_t, std::string> bound;
    return canonNode(n, bound);
}

class SafetyAnalyzer {
public:
    explicit SafetyAnalyzer(const Function& fn) : fn_(fn), f_(fn.body), sched_(fn.body) {}

    void run() {
        PathState init;
        std::size_t nIn = fn_.in.keys.size() + fn_.in.vals.size();
        for (std::size_t i = 0; i < nIn; ++i) init.mask.set(i);
        std::vector<PathState> finals;
        analyze({f_.root.get()}, init, finals);
        std::size_t nOut = fn_.out.keys.size() + fn_.out.vals.size();
        for (const auto& s : finals) {
            for (std::size_t i = nIn; i < nIn + nOut; ++i) {
                if (!s.mask.test(i)) {
                    fail(ErrorKind::Safety, "function '" + fn_.name + "': output variable '" + f_.vars[i].name +
                                                "' is not determined on every path");
                }
            }
        }
    }

private:
    void analyze(std::vector<const Node*> pending, PathState s, std::vector<PathState>& out) {
        pending = flatten(pending);
        while (!pending.empty()) {
            std::optional<std::size_t> pick;
            for (std::size_t i = 0; i < pending.size() && !pick; ++i)
                if (sched_.ready(*pending[i], s.mask)) pick = i;
            if (!pick) {
                if (auto k = sched_.unboundKeyVar(pending, s.mask)) {
                    s.mask.set(*k);
                    continue;
                }
                stuck(pending, s.mask);
            }
            const Node& n = *pending[*pick];
            pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(*pick));
            switch (n.kind) {
                case Node::Kind::True: break;
                case Node::Kind::False: return;
                case Node::Kind::KeyEq:
                case Node::Kind::KeyLt:
                case Node::Kind::Pred:
                    if (!assume(s, n, true)) return;
                    s.mask = s.mask | n.free;
                    break;
                case Node::Kind::Not: {
                    const Node& kid = *n.kids[0];
                    std::vector<PathState> ignored;
                    analyze({&kid}, s, ignored);
                    if (!assume(s, kid, false)) return;
                    break;
                }
                case Node::Kind::Or: {
                    std::vector<PathState> branches;
                    for (const auto& k : n.kids) analyze({k.get()}, s, branches);
                    for (auto& b : branches) analyze(pending, std::move(b), out);
                    return;
                }
                case Node::Kind::Exists: {
                    if (n.free.subsetOf(s.mask)) {
                        auto known = s.literals.find(canonNode(n));
                        if (known != s.literals.end()) {
                            if (!known->second.first) return;
                            break;
                        }
                    }
                    const bool test = n.free.subsetOf(s.mask);
                    std::vector<PathState> inner;
                    PathState start = s;
                    start.mask.reset(n.var);
                    analyze({n.kids[0].get()}, start, inner);
                    for (auto& b : inner) {
                        b.mask.reset(n.var);
                        for (auto it = b.literals.begin(); it != b.literals.end();) {
                            if (it->second.second.test(n.var)) it = b.literals.erase(it);
                            else ++it;
                        }
                        if (test && !assume(b, n, true)) continue;
                        analyze(pending, std::move(b), out);
                    }
                    return;
                }
                case Node::Kind::And: break;  // flattened above
            }
        }
        if (++paths_ > 10000) {
            fail(ErrorKind::Safety, "function '" + fn_.name + "': formula has more than 10000 evaluation paths");
        }
        out.push_back(std::move(s));
    }

    static bool assume(PathState& s, const Node& atom, bool polarity) {
        std::string c = canonNode(atom);
        auto it = s.literals.find(c);
        if (it != s.literals.end()) return it->second.first == polarity;
        // `x = x` is always true.
        if (atom.kind == Node::Kind::KeyEq && canonTerm(atom.terms[0]) == canonTerm(atom.terms[1])) return polarity;
        s.literals.emplace(c, std::make_pair(polarity, atom.free));
        return true;
    }

    [[noreturn]] void stuck(const std::vector<const Node*>& pending, const VarSet& mask) {
        for (const Node* n : pending) {
            if (auto v = n->free.minus(mask).first()) {
                std::string what = n->kind == Node::Kind::Not ? "negation needs variable '" : "variable '";
                fail(ErrorKind::Safety, "function '" + fn_.name + "': " + what + f_.vars[*v].name +
                                            "' which cannot be determined from the inputs in " + nodeString(f_, *n));
            }
        }
        // A quantified variable whose only occurrences cannot be solved.
        for (const Node* n : pending) {
            fail(ErrorKind::Safety, "function '" + fn_.name + "': cannot evaluate " + nodeString(f_, *n) +
                                        " (a quantified variable is not determined)");
        }
        fail(ErrorKind::Safety, "function '" + fn_.name + "': formula cannot be evaluated");
    }

    const Function& fn_;
    const Formula& f_;
    Scheduler sched_;
    std::size_t paths_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation

using Binding = std::vector<std::optional<Datum>>;

VarSet maskOf(const Binding& b) {
    VarSet m;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b[i]) m.set(i);
    return m;
}

class Evaluator {
public:
    Evaluator(const Formula& f, std::vector<Key> inputKeys) : f_(f), keys_(std::move(inputKeys)), sched_(f) {
        std::sort(keys_.begin(), keys_.end());
        keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
    }

    std::vector<Binding> run(const Binding& start) {
        std::vector<Binding> out;
        conj({f_.root.get()}, start, out);
        dedupe(out);
        return out;
    }

private:
    static void dedupe(std::vector<Binding>& bs) {
        std::sort(bs.begin(), bs.end());
        bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
    }

    const Datum& value(const Term& t, const Binding& b) const { return t.isVar ? *b[t.var] : t.constant; }

    void conj(std::vector<const Node*> pending, const Binding& b, std::vector<Binding>& out) {
        pending = flatten(pending);
        if (pending.empty()) {
            out.push_back(b);
            return;
        }
        VarSet mask = maskOf(b);
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (!sched_.ready(*pending[i], mask)) continue;
            const Node* n = pending[i];
            pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(i));
            for (const Binding& r : node(*n, b)) conj(pending, r, out);
            return;
        }
        if (auto k = sched_.unboundKeyVar(pending, mask)) {
            Binding next = b;
            for (const Key& key : keys_) {
                next[*k] = key;
                conj(pending, next, out);
            }
            return;
        }
        std::string names;
        for (const Node* n : pending) {
            VarSet open = n->free.minus(mask);
            if (auto v = open.first()) {
                names = f_.vars[*v].name;
                break;
            }
        }
        fail(ErrorKind::Eval, "cannot determine variable '" + names + "' in " + nodeString(f_, *pending[0]));
    }

    std::vector<Binding> node(const Node& n, const Binding& b) {
        switch (n.kind) {
            case Node::Kind::True: return {b};
            case Node::Kind::False: return {};
            case Node::Kind::KeyEq: {
                const Term& l = n.terms[0];
                const Term& r = n.terms[1];
                bool lb = !l.isVar || b[l.var];
                bool rb = !r.isVar || b[r.var];
                if (lb && rb) return value(l, b) == value(r, b) ? std::vector<Binding>{b} : std::vector<Binding>{};
                Binding next = b;
                if (lb) next[r.var] = value(l, b);
                else next[l.var] = value(r, b);
                return {next};
            }
            case Node::Kind::KeyLt:
                return std::get<Key>(value(n.terms[0], b)) < std::get<Key>(value(n.terms[1], b))
                           ? std::vector<Binding>{b}
                           : std::vector<Binding>{};
            case Node::Kind::Pred: return pred(n, b);
            case Node::Kind::And: {
                std::vector<const Node*> kids;
                for (const auto& k : n.kids) kids.push_back(k.get());
                std::vector<Binding> out;
                conj(kids, b, out);
                return out;
            }
            case Node::Kind::Or: {
                std::vector<Binding> out;
                for (const auto& k : n.kids) conj({k.get()}, b, out);
                return out;
            }
            case Node::Kind::Not: {
                std::vector<Binding> inner;
                conj({n.kids[0].get()}, b, inner);
                return inner.empty() ? std::vector<Binding>{b} : std::vector<Binding>{};
            }
            case Node::Kind::Exists: {
                Binding start = b;
                start[n.var].reset();
                std::vector<Binding> inner;
                conj({n.kids[0].get()}, start, inner);
                for (auto& r : inner) r[n.var].reset();
                dedupe(inner);
                return inner;
            }
        }
        return {};
    }

    std::vector<Binding> pred(const Node& n, const Binding& b) {
        std::vector<std::optional<Value>> args;
        for (const Term& t : n.terms) {
            if (!t.isVar) args.emplace_back(std::get<Value>(t.constant));
            else if (b[t.var]) args.emplace_back(std::get<Value>(*b[t.var]));
            else args.emplace_back();
        }
        std::vector<Binding> out;
        for (const auto& sol : n.pred->solve(args)) {
            Binding next = b;
            bool ok = true;
            for (std::size_t i = 0; i < n.terms.size() && ok; ++i) {
                const Term& t = n.terms[i];
                if (!t.isVar) continue;
                if (next[t.var]) ok = std::get<Value>(*next[t.var]) == sol[i];
                else next[t.var] = sol[i];
            }
            if (ok) out.push_back(std::move(next));
        }
        return out;
    }

    const Formula& f_;
    std::vector<Key> keys_;
    Scheduler sched_;
};

Binding initialBinding(const Function& f, const KeyTuple& keys, const ValueTuple& vals) {
    if (keys.size() != f.in.keys.size() || vals.size() != f.in.vals.size()) {
        fail(ErrorKind::Structural, "function '" + f.name + "' applied to a tuple of the wrong arity");
    }
    Binding b(f.body.vars.size());
    std::size_t i = 0;
    for (const Key& k : keys) b[i++] = k;
    for (const Value& v : vals) b[i++] = v;
    return b;
}

AssocTable collect(const Function& f, const std::vector<Binding>& bindings) {
    std::size_t base = f.in.keys.size() + f.in.vals.size();
    std::vector<Row> rows;
    for (const Binding& b : bindings) {
        Row r;
        std::size_t i = base;
        for (std::size_t k = 0; k < f.out.keys.size(); ++k, ++i) {
            if (!b[i]) fail(ErrorKind::Eval, "function '" + f.name + "': output '" + f.body.vars[i].name + "' unbound");
            r.keys.push_back(std::get<Key>(*b[i]));
        }
        for (std::size_t v = 0; v < f.out.vals.size(); ++v, ++i) {
            if (!b[i]) fail(ErrorKind::Eval, "function '" + f.name + "': output '" + f.body.vars[i].name + "' unbound");
            r.vals.push_back(std::get<Value>(*b[i]));
        }
        rows.push_back(std::move(r));
    }
    try {
        return AssocTable::fromRows(f.out, std::move(rows));
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::KeyViolation) throw;
        fail(ErrorKind::KeyViolation, "function '" + f.name + "' is not functional: " + e.what());
    }
}

std::string renderInput(const KeyTuple& keys, const ValueTuple& vals) {
    std::string out = "(";
    for (std::size_t i = 0; i < keys.size(); ++i) out += (i ? "," : "") + keys[i].toString();
    out += " | ";
    for (std::size_t i = 0; i < vals.size(); ++i) out += (i ? "," : "") + vals[i].toString();
    return out + ")";
}

// Brute-force truth evaluation under a total assignment of free variables.
class Checker {
public:
    Checker(const Formula& f, std::vector<Key> keys, const std::vector<Value>& grid)
        : f_(f), keys_(std::move(keys)), grid_(grid) {}

    bool holds(const Node& n, Binding& b) {
        switch (n.kind) {
            case Node::Kind::True: return true;
            case Node::Kind::False: return false;
            case Node::Kind::KeyEq: return get(n.terms[0], b) == get(n.terms[1], b);
            case Node::Kind::KeyLt: return std::get<Key>(get(n.terms[0], b)) < std::get<Key>(get(n.terms[1], b));
            case Node::Kind::Pred: {
                std::vector<Value> args;
                for (const Term& t : n.terms) args.push_back(std::get<Value>(get(t, b)));
                try {
                    return n.pred->holds(args);
                } catch (const Error&) {
                    return false;
                }
            }
            case Node::Kind::And:
                for (const auto& k : n.kids)
                    if (!holds(*k, b)) return false;
                return true;
            case Node::Kind::Or:
                for (const auto& k : n.kids)
                    if (holds(*k, b)) return true;
                return false;
            case Node::Kind::Not: return !holds(*n.kids[0], b);
            case Node::Kind::Exists: {
                auto saved = b[n.var];
                bool found = false;
                if (f_.vars[n.var].sort == VarSort::Key) {
                    for (const Key& k : keys_) {
                        b[n.var] = k;
                        if ((found = holds(*n.kids[0], b))) break;
                    }
                } else {
                    for (const Value& v : grid_) {
                        b[n.var] = v;
                        if ((found = holds(*n.kids[0], b))) break;
                    }
                }
                b[n.var] = saved;
                return found;
            }
        }
        return false;
    }

private:
    const Datum& get(const Term& t, const Binding& b) const { return t.isVar ? *b[t.var] : t.constant; }

    const Formula& f_;
    std::vector<Key> keys_;
    const std::vector<Value>& grid_;
};

}  // namespace

void checkSafety(const Function& f) { SafetyAnalyzer(f).run(); }

AssocTable evaluate(const Function& f, const KeyTuple& keys, const ValueTuple& vals) {
    Binding start = initialBinding(f, keys, vals);
    Evaluator ev(f.body, keys);
    std::vector<Binding> results;
    try {
        results = ev.run(start);
    } catch (const Error& e) {
        fail(e.kind(), "function '" + f.name + "' on " + renderInput(keys, vals) + ": " + e.what());
    }
    return collect(f, results);
}

AssocTable bruteForce(const Function& f,
                      const KeyTuple& keys,
                      const ValueTuple& vals,
                      const std::vector<Value>& valueGrid) {
    Binding b = initialBinding(f, keys, vals);
    std::vector<Key> domain(keys.begin(), keys.end());
    std::sort(domain.begin(), domain.end());
    domain.erase(std::unique(domain.begin(), domain.end()), domain.end());
    Checker check(f.body, domain, valueGrid);
    std::size_t base = f.in.keys.size() + f.in.vals.size();
    std::size_t nOut = f.out.keys.size() + f.out.vals.size();
    std::vector<Binding> found;
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == nOut) {
            if (check.holds(*f.body.root, b)) found.push_back(b);
            return;
        }
        std::size_t id = base + i;
        if (f.body.vars[id].sort == VarSort::Key) {
            for (const Key& k : domain) {
                b[id] = k;
                rec(i + 1);
            }
        } else {
            for (const Value& v : valueGrid) {
                b[id] = v;
                rec(i + 1);
            }
        }
        b[id].reset();
    };
    rec(0);
    return collect(f, found);
}

}  // namespace lara::dsl

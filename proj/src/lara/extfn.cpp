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

#include "lara/extfn.hpp"

#include "lara/error.hpp"

#include <algorithm>
#include <mutex>
#include <optional>

namespace lara {

std::string FnRef::toString() const {
    if (args.empty()) return name;
    std::string out = name + "(";
    for (std::size_t i = 0; i < args.size(); ++i) out += (i ? ", " : "") + args[i];
    return out + ")";
}

AssocTable ExtFn::apply(const KeyTuple& keys, const ValueTuple& vals) const {
    if (dsl) return dsl::evaluate(*dsl, keys, vals);
    return AssocTable::fromRows(out, builtin(keys, vals));
}

void FnEnv::add(dsl::FunctionPtr f) {
    dsl::checkSafety(*f);
    std::string name = f->name;
    fns_.insert_or_assign(std::move(name), std::move(f));
}

dsl::FunctionPtr FnEnv::find(const std::string& name) const {
    auto it = fns_.find(name);
    return it == fns_.end() ? nullptr : it->second;
}

const std::vector<std::string>& builtinExtFnNames() {
    static const std::vector<std::string> names = {"copy", "tokey", "toval", "addval", "eq", "neq", "pi", "emptykeys", "filter"};
    return names;
}

namespace {

[[noreturn]] void sortError(const FnRef& ref, const std::string& msg) {
    fail(ErrorKind::Sort, "extension function '" + ref.toString() + "': " + msg);
}

std::pair<std::string, std::string> arrow(const FnRef& ref, const std::string& arg) {
    auto pos = arg.find("->");
    if (pos == std::string::npos) sortError(ref, "expected an argument of the form a->b, got '" + arg + "'");
    auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t") + 1);
        return s;
    };
    std::string a = trim(arg.substr(0, pos));
    std::string b = trim(arg.substr(pos + 2));
    if (a.empty() || b.empty()) sortError(ref, "malformed argument '" + arg + "'");
    return {a, b};
}

void requireFresh(const FnRef& ref, const Sort& table, const std::string& name, std::set<std::string>& used) {
    if (table.hasAttr(name)) sortError(ref, "attribute '" + name + "' already exists in " + table.toString());
    if (!used.insert(name).second) sortError(ref, "attribute '" + name + "' is introduced twice");
}

std::vector<std::size_t> indices(const std::vector<std::string>& names, const std::vector<std::string>& in) {
    std::vector<std::size_t> out;
    for (const auto& n : names) out.push_back(static_cast<std::size_t>(std::find(in.begin(), in.end(), n) - in.begin()));
    return out;
}

Key valueToKey(const Value& v) {
    if (!v.isInteger()) fail(ErrorKind::Eval, "cannot use value " + v.toString() + " as a key: only integers convert");
    return Key::integer(v.asRational().get_num());
}

Value keyToValue(const Key& k) {
    if (!k.isInteger()) fail(ErrorKind::Eval, "cannot use key " + k.toString() + " as a value: only integers convert");
    return Value(mpq_class(k.asInteger()));
}

ExtFn copyFn(const FnRef& ref, const Sort& table, bool toKey, bool toVal) {
    if (ref.args.empty()) sortError(ref, "expects at least one a->b argument");
    std::vector<std::pair<std::string, std::string>> pairs;
    std::set<std::string> used;
    for (const auto& a : ref.args) {
        auto p = arrow(ref, a);
        requireFresh(ref, table, p.second, used);
        pairs.push_back(p);
    }
    bool srcKey = table.hasKey(pairs[0].first);
    for (const auto& [src, _] : pairs) {
        if (!table.hasAttr(src)) sortError(ref, "unknown attribute '" + src + "' in " + table.toString());
        if (table.hasKey(src) != srcKey) sortError(ref, "all sources must be of the same sort");
    }
    if (ref.name == "tokey" && srcKey) sortError(ref, "tokey copies value attributes");
    if (ref.name == "toval" && !srcKey) sortError(ref, "toval copies key attributes");
    bool dstKey = ref.name == "copy" ? srcKey : toKey;
    (void)toVal;

    ExtFn fn;
    fn.name = ref.toString();
    std::vector<std::string> srcs, dsts;
    for (const auto& [s, d] : pairs) {
        srcs.push_back(s);
        dsts.push_back(d);
    }
    fn.in = Sort(srcKey ? srcs : std::vector<std::string>{}, table.vals);
    std::vector<std::string> outVals = table.vals;
    if (!dstKey) outVals.insert(outVals.end(), dsts.begin(), dsts.end());
    fn.out = Sort(dstKey ? dsts : std::vector<std::string>{}, outVals);
    fn.generic = srcKey == dstKey;
    std::vector<std::size_t> srcIdx = srcKey ? std::vector<std::size_t>{} : indices(srcs, table.vals);
    fn.builtin = [srcKey, dstKey, srcIdx](const KeyTuple& keys, const ValueTuple& vals) {
        Row r;
        r.vals = vals;
        std::size_t n = srcKey ? keys.size() : srcIdx.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (srcKey && dstKey) r.keys.push_back(keys[i]);
            else if (srcKey) r.vals.push_back(keyToValue(keys[i]));
            else if (dstKey) r.keys.push_back(valueToKey(vals[srcIdx[i]]));
            else r.vals.push_back(vals[srcIdx[i]]);
        }
        return std::vector<Row>{r};
    };
    return fn;
}

ExtFn addvalFn(const FnRef& ref, const Sort& table) {
    if (ref.args.size() != 2) sortError(ref, "expects addval(attribute, constant)");
    std::set<std::string> used;
    requireFresh(ref, table, ref.args[0], used);
    Value c;
    const std::string& lit = ref.args[1];
    if (lit == "inf") c = Value::posInf();
    else if (lit == "-inf") c = Value::negInf();
    else c = Value::parse(lit);
    ExtFn fn;
    fn.name = ref.toString();
    fn.in = Sort({}, table.vals);
    std::vector<std::string> outVals = table.vals;
    outVals.push_back(ref.args[0]);
    fn.out = Sort({}, outVals);
    fn.builtin = [c](const KeyTuple&, const ValueTuple& vals) {
        Row r{{}, vals};
        r.vals.push_back(c);
        return std::vector<Row>{r};
    };
    return fn;
}

ExtFn eqFn(const FnRef& ref, const Sort& table, bool equal) {
    if (ref.args.empty() || ref.args.size() % 2) sortError(ref, "expects two attribute lists of equal length");
    std::size_t half = ref.args.size() / 2;
    bool keys = table.hasKey(ref.args[0]);
    for (const auto& a : ref.args) {
        if (!table.hasAttr(a)) sortError(ref, "unknown attribute '" + a + "' in " + table.toString());
        if (table.hasKey(a) != keys) sortError(ref, "compared attributes must all be keys or all be values");
    }
    ExtFn fn;
    fn.name = ref.toString();
    std::vector<std::string> inKeys;
    if (keys) {
        for (const auto& a : ref.args)
            if (std::find(inKeys.begin(), inKeys.end(), a) == inKeys.end()) inKeys.push_back(a);
    }
    fn.in = Sort(inKeys, table.vals);
    fn.out = Sort({}, table.vals);
    std::vector<std::size_t> lhs, rhs;
    const auto& pool = keys ? inKeys : table.vals;
    for (std::size_t i = 0; i < half; ++i) {
        lhs.push_back(indices({ref.args[i]}, pool)[0]);
        rhs.push_back(indices({ref.args[half + i]}, pool)[0]);
    }
    fn.builtin = [keys, lhs, rhs, equal](const KeyTuple& k, const ValueTuple& v) {
        bool same = true;
        for (std::size_t i = 0; i < lhs.size() && same; ++i) same = keys ? k[lhs[i]] == k[rhs[i]] : v[lhs[i]] == v[rhs[i]];
        return same == equal ? std::vector<Row>{Row{{}, v}} : std::vector<Row>{};
    };
    return fn;
}

ExtFn piFn(const FnRef& ref, const Sort& table) {
    std::set<std::string> seen;
    for (const auto& a : ref.args) {
        if (!table.hasVal(a)) sortError(ref, "'" + a + "' is not a value attribute of " + table.toString());
        if (!seen.insert(a).second) sortError(ref, "attribute '" + a + "' listed twice");
    }
    ExtFn fn;
    fn.name = ref.toString();
    fn.in = Sort({}, ref.args);
    fn.out = Sort({}, ref.args);
    fn.builtin = [](const KeyTuple&, const ValueTuple& v) { return std::vector<Row>{Row{{}, v}}; };
    return fn;
}

ExtFn emptyKeysFn(const FnRef& ref, const Sort& table) {
    std::set<std::string> used;
    for (const auto& a : ref.args) requireFresh(ref, table, a, used);
    ExtFn fn;
    fn.name = ref.toString();
    fn.in = Sort({}, {});
    fn.out = Sort(ref.args, {});
    fn.builtin = [](const KeyTuple&, const ValueTuple&) { return std::vector<Row>{}; };
    return fn;
}

ExtFn dslFn(const FnRef& ref, const dsl::FunctionPtr& f, const Sort& table) {
    if (!ref.args.empty()) sortError(ref, "DSL functions take no arguments");
    for (const auto& k : f->in.keys) {
        if (!table.hasKey(k)) sortError(ref, "input key '" + k + "' is not a key attribute of " + table.toString());
    }
    for (const auto& v : f->in.vals) {
        if (!table.hasVal(v)) sortError(ref, "input value '" + v + "' is not a value attribute of " + table.toString());
    }
    for (const auto& k : f->out.keys) {
        if (table.hasKey(k)) sortError(ref, "output key '" + k + "' already is a key of " + table.toString());
    }
    ExtFn fn;
    fn.name = f->name;
    fn.in = f->in;
    fn.out = f->out;
    fn.dsl = f;
    fn.ordered = f->body.usesOrder;
    fn.generic = !f->body.usesOrder && !f->body.usesKeyConst;
    return fn;
}

}  // namespace

ExtFn resolveExtFn(const FnRef& ref, const Sort& table, const FnEnv& env) {
    if (ref.name == "filter") {
        if (ref.inlineFn) return resolveFilter(FnRef{ref.inlineFn->name, {}, ref.inlineFn}, table, env);
        if (ref.args.size() != 1) sortError(ref, "expects one formula name");
        return resolveFilter(FnRef{ref.args[0], {}, nullptr}, table, env);
    }
    if (ref.inlineFn) return dslFn(ref, ref.inlineFn, table);
    if (auto f = env.find(ref.name)) return dslFn(ref, f, table);
    if (ref.name == "copy") return copyFn(ref, table, false, false);
    if (ref.name == "tokey") return copyFn(ref, table, true, false);
    if (ref.name == "toval") return copyFn(ref, table, false, true);
    if (ref.name == "addval") return addvalFn(ref, table);
    if (ref.name == "eq") return eqFn(ref, table, true);
    if (ref.name == "neq") return eqFn(ref, table, false);
    if (ref.name == "pi") return piFn(ref, table);
    if (ref.name == "emptykeys") return emptyKeysFn(ref, table);
    fail(ErrorKind::Sort, "unknown extension function '" + ref.name + "'");
}

ExtFn resolveFilter(const FnRef& phi, const Sort& table, const FnEnv& env) {
    dsl::FunctionPtr f = phi.inlineFn ? phi.inlineFn : env.find(phi.name);
    if (!f) fail(ErrorKind::Sort, "unknown filter formula '" + phi.name + "'");
    if (!f->out.keys.empty() || !f->out.vals.empty()) {
        fail(ErrorKind::Sort, "filter formula '" + f->name + "' must not have outputs");
    }
    ExtFn inner = dslFn(FnRef{f->name, {}, nullptr}, f, table);
    ExtFn fn;
    fn.name = "filter(" + f->name + ")";
    fn.in = table;
    fn.out = Sort({}, table.vals);
    fn.ordered = inner.ordered;
    fn.generic = inner.generic;
    auto keyIdx = indices(f->in.keys, table.keys);
    auto valIdx = indices(f->in.vals, table.vals);
    struct Memo {
        std::mutex lock;
        std::map<std::pair<KeyTuple, ValueTuple>, bool> holds;
    };
    auto memo = std::make_shared<Memo>();
    fn.builtin = [f, keyIdx, valIdx, memo](const KeyTuple& keys, const ValueTuple& vals) {
        std::pair<KeyTuple, ValueTuple> in;
        for (auto i : keyIdx) in.first.push_back(keys[i]);
        for (auto i : valIdx) in.second.push_back(vals[i]);
        std::optional<bool> known;
        {
            std::lock_guard<std::mutex> g(memo->lock);
            if (auto it = memo->holds.find(in); it != memo->holds.end()) known = it->second;
        }
        if (!known) {
            known = !dsl::evaluate(*f, in.first, in.second).empty();
            std::lock_guard<std::mutex> g(memo->lock);
            memo->holds.emplace(std::move(in), *known);
        }
        return *known ? std::vector<Row>{Row{{}, vals}} : std::vector<Row>{};
    };
    return fn;
}

}  // namespace lara

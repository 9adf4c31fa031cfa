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

#include "lara/value.hpp"

#include "lara/error.hpp"

#include <mpfr.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

namespace lara {

const char* errorKindName(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Structural: return "structural error";
        case ErrorKind::KeyViolation: return "key violation";
        case ErrorKind::Sort: return "sort error";
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::Safety: return "safety error";
        case ErrorKind::Eval: return "evaluation error";
        case ErrorKind::Mode: return "mode error";
        case ErrorKind::Io: return "i/o error";
        case ErrorKind::Unsupported: return "unsupported";
    }
    return "error";
}

std::size_t codepointLength(std::string_view utf8) {
    std::size_t n = 0;
    for (unsigned char c : utf8) {
        if ((c & 0xC0) != 0x80) ++n;
    }
    return n;
}

std::strong_ordering operator<=>(const Key& a, const Key& b) {
    if (a.kind_ != b.kind_) return a.kind_ <=> b.kind_;
    switch (a.kind_) {
        case Key::Kind::Integer: {
            int c = cmp(a.int_, b.int_);
            return c < 0 ? std::strong_ordering::less
                 : c > 0 ? std::strong_ordering::greater
                         : std::strong_ordering::equal;
        }
        case Key::Kind::Text: {
            auto la = codepointLength(a.text_);
            auto lb = codepointLength(b.text_);
            if (la != lb) return la <=> lb;
            // Byte order on valid UTF-8 coincides with code point order.
            int c = a.text_.compare(b.text_);
            return c < 0 ? std::strong_ordering::less
                 : c > 0 ? std::strong_ordering::greater
                         : std::strong_ordering::equal;
        }
        case Key::Kind::Reserved:
            return std::strong_ordering::equal;
    }
    return std::strong_ordering::equal;
}

std::string Key::toString() const {
    switch (kind_) {
        case Kind::Integer: return int_.get_str();
        case Kind::Text: {
            std::string out = "\"";
            for (char c : text_) {
                if (c == '"') out += '"';
                out += c;
            }
            out += '"';
            return out;
        }
        case Kind::Reserved: return "#reserved";
    }
    return {};
}

Value Value::rational(const mpz_class& num, const mpz_class& den) {
    if (den == 0) fail(ErrorKind::Eval, "rational with zero denominator");
    mpq_class q(num, den);
    q.canonicalize();
    return Value(q);
}

double Value::toDouble() const {
    switch (kind_) {
        case Kind::Rational: return q_.get_d();
        case Kind::PosInf: return HUGE_VAL;
        case Kind::NegInf: return -HUGE_VAL;
        case Kind::NonValue: return std::nan("");
    }
    return 0;
}

std::string Value::toString() const {
    switch (kind_) {
        case Kind::Rational:
            if (q_.get_den() == 1) return q_.get_num().get_str();
            return q_.get_num().get_str() + "/" + q_.get_den().get_str();
        case Kind::PosInf: return "inf";
        case Kind::NegInf: return "-inf";
        case Kind::NonValue: return "nonvalue";
    }
    return {};
}

namespace {

bool allDigits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

mpz_class parseInteger(std::string_view s, std::string_view whole) {
    bool neg = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
        neg = s[0] == '-';
        s.remove_prefix(1);
    }
    if (!allDigits(s)) fail(ErrorKind::Parse, "malformed number '" + std::string(whole) + "'");
    mpz_class z(std::string(s), 10);
    return neg ? mpz_class(-z) : z;
}

}  // namespace

Value Value::parse(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (text.empty()) fail(ErrorKind::Parse, "empty value cell");
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        mpz_class num = parseInteger(text.substr(0, slash), text);
        mpz_class den = parseInteger(text.substr(slash + 1), text);
        if (den == 0) fail(ErrorKind::Parse, "zero denominator in '" + std::string(text) + "'");
        return rational(num, den);
    }
    if (auto dot = text.find('.'); dot != std::string_view::npos) {
        std::string_view intPart = text.substr(0, dot);
        std::string_view frac = text.substr(dot + 1);
        if (!allDigits(frac)) fail(ErrorKind::Parse, "malformed number '" + std::string(text) + "'");
        bool neg = !intPart.empty() && intPart[0] == '-';
        std::string_view digits = intPart;
        if (!digits.empty() && (digits[0] == '-' || digits[0] == '+')) digits.remove_prefix(1);
        if (!digits.empty() && !allDigits(digits)) fail(ErrorKind::Parse, "malformed number '" + std::string(text) + "'");
        mpz_class num(std::string(digits.empty() ? "0" : digits) + std::string(frac), 10);
        mpz_class den;
        mpz_ui_pow_ui(den.get_mpz_t(), 10, frac.size());
        return rational(neg ? mpz_class(-num) : num, den);
    }
    return Value(mpq_class(parseInteger(text, text)));
}

std::strong_ordering operator<=>(const Value& a, const Value& b) {
    if (a.kind_ != b.kind_) return a.kind_ <=> b.kind_;
    if (a.kind_ != Value::Kind::Rational) return std::strong_ordering::equal;
    int c = cmp(a.q_, b.q_);
    return c < 0 ? std::strong_ordering::less : c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal;
}

namespace {

int signOf(const Value& v) {
    switch (v.kind()) {
        case Value::Kind::NegInf: return -1;
        case Value::Kind::PosInf: return 1;
        default: return sgn(v.asRational());
    }
}

bool isInf(const Value& v) {
    return v.kind() == Value::Kind::PosInf || v.kind() == Value::Kind::NegInf;
}

Value infOfSign(int s) { return s > 0 ? Value::posInf() : Value::negInf(); }

}  // namespace

Value operator+(const Value& a, const Value& b) {
    if (a.isNonValue() || b.isNonValue()) return Value::nonValue();
    if (a.isRational() && b.isRational()) return Value(mpq_class(a.asRational() + b.asRational()));
    if (isInf(a) && isInf(b) && a.kind() != b.kind()) fail(ErrorKind::Eval, "undefined sum inf + -inf");
    return isInf(a) ? a : b;
}

Value operator-(const Value& a, const Value& b) {
    if (b.isNonValue()) return Value::nonValue();
    Value nb = b.isRational() ? Value(mpq_class(-b.asRational())) : infOfSign(-signOf(b));
    return a + nb;
}

Value operator*(const Value& a, const Value& b) {
    if (a.isNonValue() || b.isNonValue()) return Value::nonValue();
    if (a.isRational() && b.isRational()) return Value(mpq_class(a.asRational() * b.asRational()));
    int s = signOf(a) * signOf(b);
    if (s == 0) fail(ErrorKind::Eval, "undefined product 0 * inf");
    return infOfSign(s);
}

Value operator/(const Value& a, const Value& b) {
    if (a.isNonValue() || b.isNonValue()) return Value::nonValue();
    if (b.isRational() && sgn(b.asRational()) == 0) fail(ErrorKind::Eval, "division by zero");
    if (a.isRational() && b.isRational()) return Value(mpq_class(a.asRational() / b.asRational()));
    if (isInf(b)) {
        if (isInf(a)) fail(ErrorKind::Eval, "undefined quotient inf / inf");
        return Value(0);
    }
    return infOfSign(signOf(a) * signOf(b));
}

Value expApprox(const Value& x, unsigned digits) {
    if (!x.isRational()) {
        if (x.kind() == Value::Kind::NegInf) return Value(0);
        if (x.kind() == Value::Kind::PosInf) return Value::posInf();
        return Value::nonValue();
    }
    const mpq_class& q = x.asRational();
    // Enough working bits for `digits` fractional digits plus the integer part of exp(q).
    double approxMag = std::max(0.0, q.get_d()) * 1.4426950408889634;
    mpfr_prec_t prec = static_cast<mpfr_prec_t>(digits * 3.33 + approxMag + 64);
    mpfr_t r, scale;
    mpfr_init2(r, prec);
    mpfr_init2(scale, prec);
    mpfr_set_q(r, q.get_mpq_t(), MPFR_RNDN);
    mpfr_exp(r, r, MPFR_RNDN);
    mpz_class pow10;
    mpz_ui_pow_ui(pow10.get_mpz_t(), 10, digits);
    mpfr_set_z(scale, pow10.get_mpz_t(), MPFR_RNDN);
    mpfr_mul(r, r, scale, MPFR_RNDN);
    mpfr_rint(r, r, MPFR_RNDN);
    mpz_class num;
    mpfr_get_z(num.get_mpz_t(), r, MPFR_RNDN);
    mpfr_clear(r);
    mpfr_clear(scale);
    return Value::rational(num, pow10);
}

unsigned defaultExpPrecision() {
    if (const char* env = std::getenv("LARA_EXP_PRECISION")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0 && v <= 10000) return static_cast<unsigned>(v);
    }
    return 40;
}

}  // namespace lara

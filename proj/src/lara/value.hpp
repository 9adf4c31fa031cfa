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

#include <gmpxx.h>

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace lara {

/// An element of the key domain: an arbitrary-precision integer or a unicode
/// text. Keys are totally ordered: integers (numerically) before texts
/// (shortlex on code points). A third, internal-only kind is the reserved key
/// used by the FO_Agg evaluator to pad absent key positions; it sorts last and
/// never appears in loaded tables.
class Key {
public:
    enum class Kind : std::uint8_t { Integer, Text, Reserved };

    Key() : kind_(Kind::Integer), int_(0) {}

    static Key integer(const mpz_class& v) { return Key(Kind::Integer, v, {}); }
    static Key integer(long v) { return Key(Kind::Integer, mpz_class(v), {}); }
    static Key text(std::string v) { return Key(Kind::Text, 0, std::move(v)); }
    static Key reserved() { return Key(Kind::Reserved, 0, {}); }

    Kind kind() const noexcept { return kind_; }
    bool isInteger() const noexcept { return kind_ == Kind::Integer; }
    bool isText() const noexcept { return kind_ == Kind::Text; }
    bool isReserved() const noexcept { return kind_ == Kind::Reserved; }

    const mpz_class& asInteger() const { return int_; }
    const std::string& asText() const { return text_; }

    std::string toString() const;

    friend std::strong_ordering operator<=>(const Key& a, const Key& b);
    friend bool operator==(const Key& a, const Key& b) { return (a <=> b) == 0; }

private:
    Key(Kind kind, mpz_class i, std::string t) : kind_(kind), int_(std::move(i)), text_(std::move(t)) {}

    Kind kind_;
    mpz_class int_;
    std::string text_;
};

/// Number of unicode code points in a UTF-8 string (invalid bytes count as one each).
std::size_t codepointLength(std::string_view utf8);

/// An element of the value domain: an exact rational, or one of the extended
/// points used transiently in computation (+inf, -inf as MIN/MAX neutrals) and
/// the conflict sentinel produced by the func aggregate.
class Value {
public:
    enum class Kind : std::uint8_t { NegInf, Rational, PosInf, NonValue };

    Value() : kind_(Kind::Rational), q_(0) {}
    Value(const mpq_class& q) : kind_(Kind::Rational), q_(q) { q_.canonicalize(); }  // NOLINT(implicit)
    Value(long v) : kind_(Kind::Rational), q_(v) {}                                 // NOLINT(implicit)
    static Value rational(const mpz_class& num, const mpz_class& den);
    static Value posInf() { return Value(Kind::PosInf); }
    static Value negInf() { return Value(Kind::NegInf); }
    static Value nonValue() { return Value(Kind::NonValue); }

    Kind kind() const noexcept { return kind_; }
    bool isRational() const noexcept { return kind_ == Kind::Rational; }
    bool isNonValue() const noexcept { return kind_ == Kind::NonValue; }
    const mpq_class& asRational() const { return q_; }

    bool isInteger() const { return isRational() && q_.get_den() == 1; }
    double toDouble() const;

    /// `p/q`, or `p` when q = 1; `inf`, `-inf`, `nonvalue` for the extended points.
    std::string toString() const;

    /// Parses `p/q`, an integer, or a finite decimal such as `-0.25`.
    static Value parse(std::string_view text);

    friend std::strong_ordering operator<=>(const Value& a, const Value& b);
    friend bool operator==(const Value& a, const Value& b) { return (a <=> b) == 0; }

private:
    explicit Value(Kind k) : kind_(k), q_(0) {}
    Kind kind_;
    mpq_class q_;
};

// Extended arithmetic. Any operation touching nonValue yields nonValue;
// undefined combinations (inf - inf, 0 * inf, x / 0) raise an Eval error.
Value operator+(const Value& a, const Value& b);
Value operator-(const Value& a, const Value& b);
Value operator*(const Value& a, const Value& b);
Value operator/(const Value& a, const Value& b);

/// exp(x) rounded to the nearest multiple of 10^-digits.
Value expApprox(const Value& x, unsigned digits);

/// Precision used by the `expApprox` DSL predicate: LARA_EXP_PRECISION, default 40.
unsigned defaultExpPrecision();

}  // namespace lara

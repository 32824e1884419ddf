#pragma once

#include <gmpxx.h>

#include <string>
#include <string_view>

namespace cfp {

/// Exact arbitrary-precision rational; always kept in canonical (reduced) form.
using Rational = mpq_class;

/// Parses "p/q", an integer, or a finite decimal ("0.5", "-1.25e-2") into an exact rational.
Rational parseRational(std::string_view text);

/// Canonical "p/q" rendering, or "p" when the denominator is one.
std::string toString(const Rational& q);

double toDouble(const Rational& q);

Rational power(const Rational& base, unsigned exponent);

Rational factorial(unsigned n);
/// num/den in lowest terms; the two-argument mpq constructor leaves it uncanonicalized.
Rational ratio(long num, long den);

}  // namespace cfp

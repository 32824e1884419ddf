#include "cfp/rational.hpp"

#include <cctype>

#include "cfp/errors.hpp"

namespace cfp {

namespace {

bool allDigits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

mpz_class parseInteger(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (!allDigits(s)) throw ValidationError("not an integer: '" + std::string(s) + "'");
  mpz_class z(std::string(s), 10);
  return negative ? mpz_class(-z) : z;
}

mpz_class pow10(unsigned long e) {
  mpz_class r;
  mpz_ui_pow_ui(r.get_mpz_t(), 10, e);
  return r;
}

}  // namespace

Rational parseRational(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) throw ValidationError("empty rational literal");

  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    mpz_class num = parseInteger(text.substr(0, slash));
    mpz_class den = parseInteger(text.substr(slash + 1));
    if (den == 0) throw ValidationError("zero denominator in '" + std::string(text) + "'");
    Rational q(num, den);
    q.canonicalize();
    return q;
  }

  std::string_view mantissa = text;
  long exponent = 0;
  if (auto e = text.find_first_of("eE"); e != std::string_view::npos) {
    mantissa = text.substr(0, e);
    exponent = parseInteger(text.substr(e + 1)).get_si();
  }
  bool negative = false;
  if (!mantissa.empty() && (mantissa.front() == '+' || mantissa.front() == '-')) {
    negative = mantissa.front() == '-';
    mantissa.remove_prefix(1);
  }
  std::string digits;
  long fractionDigits = 0;
  if (auto dot = mantissa.find('.'); dot != std::string_view::npos) {
    std::string_view intPart = mantissa.substr(0, dot);
    std::string_view fracPart = mantissa.substr(dot + 1);
    if ((intPart.empty() && fracPart.empty()) || (!intPart.empty() && !allDigits(intPart)) ||
        (!fracPart.empty() && !allDigits(fracPart)))
      throw ValidationError("malformed number '" + std::string(text) + "'");
    digits = std::string(intPart) + std::string(fracPart);
    fractionDigits = static_cast<long>(fracPart.size());
  } else {
    if (!allDigits(mantissa)) throw ValidationError("malformed number '" + std::string(text) + "'");
    digits = std::string(mantissa);
  }
  mpz_class num(digits, 10);
  if (negative) num = -num;
  long scale = exponent - fractionDigits;
  Rational q;
  if (scale >= 0) {
    q = Rational(num * pow10(static_cast<unsigned long>(scale)));
  } else {
    q = Rational(num, pow10(static_cast<unsigned long>(-scale)));
    q.canonicalize();
  }
  return q;
}

std::string toString(const Rational& q) { return q.get_str(10); }

Rational ratio(long num, long den) {
  if (den == 0) throw DomainError("ratio: zero denominator");
  Rational q(num, den);
  q.canonicalize();
  return q;
}

double toDouble(const Rational& q) { return q.get_d(); }

Rational power(const Rational& base, unsigned exponent) {
  mpz_class num, den;
  mpz_pow_ui(num.get_mpz_t(), base.get_num_mpz_t(), exponent);
  mpz_pow_ui(den.get_mpz_t(), base.get_den_mpz_t(), exponent);
  Rational q(num, den);
  q.canonicalize();
  return q;
}

Rational factorial(unsigned n) {
  mpz_class f;
  mpz_fac_ui(f.get_mpz_t(), n);
  return Rational(f);
}

}  // namespace cfp

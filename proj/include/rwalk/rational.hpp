#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/rational.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rwalk {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::rational<Int>;

// Probabilities and weights are exact rationals everywhere except Monte Carlo
// accumulators. Files carry them as "num/den" strings; decimal input is
// rejected so no silent rounding can sneak in.

inline Rat make_rat(long long num, long long den = 1) {
  return Rat(Int(num), Int(den));
}

inline bool is_rational_string(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  bool digits = false, slash = false, den_digits = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (c >= '0' && c <= '9') {
      (slash ? den_digits : digits) = true;
    } else if (c == '/' && !slash && digits) {
      slash = true;
    } else {
      return false;
    }
  }
  return digits && (!slash || den_digits);
}

inline Rat parse_rational(const std::string& s) {
  if (!is_rational_string(s))
    throw std::invalid_argument("not a rational: '" + s +
                                "' (expected num or num/den; decimals are rejected)");
  auto slash = s.find('/');
  if (slash == std::string::npos) return Rat(Int(s), Int(1));
  Int den(s.substr(slash + 1));
  if (den == 0) throw std::invalid_argument("zero denominator in '" + s + "'");
  return Rat(Int(s.substr(0, slash)), den);
}

inline std::string format_rational(const Rat& r) {
  if (r.denominator() == 1) return r.numerator().str();
  return r.numerator().str() + "/" + r.denominator().str();
}

inline double to_double(const Rat& r) {
  using BF = boost::multiprecision::cpp_bin_float_50;
  return static_cast<double>(BF(r.numerator()) / BF(r.denominator()));
}

// log of a positive rational, stable for huge numerators/denominators
inline double log_rational(const Rat& r) {
  using BF = boost::multiprecision::cpp_bin_float_50;
  if (r <= Rat(0)) throw std::domain_error("log of non-positive rational");
  BF v = BF(r.numerator()) / BF(r.denominator());
  return static_cast<double>(log(v));
}

inline Rat rat_pow(const Rat& base, unsigned long long e) {
  Rat acc(1);
  Rat b = base;
  while (e) {
    if (e & 1ULL) acc *= b;
    b *= b;
    e >>= 1ULL;
  }
  return acc;
}

}  // namespace rwalk

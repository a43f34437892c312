#pragma once

// Thin helpers around GMP's mpq_class/mpz_class. All grid-level quantities of
// the construction are exact rationals; doubles appear only at evaluation
// boundaries.

#include <gmpxx.h>

#include <cstdint>
#include <string>

namespace kst {

using Rational = mpq_class;
using BigInt = mpz_class;

/// base^exp as a big integer.
BigInt pow_int(unsigned long base, unsigned long exp);

/// base^(-exp) as an exact rational.
Rational inv_pow(unsigned long base, unsigned long exp);

/// Exact rational value of a finite double.
Rational from_double(double x);

/// Nearest double, ties to even.
double to_double(const Rational& q);
/// Nearest double to num/den without reducing the fraction; den > 0.
double ratio_to_double(const BigInt& num, const BigInt& den);

/// floor(q) as a big integer.
BigInt floor_of(const Rational& q);

/// "num/den" in base 10 (or "num" when the denominator is 1).
std::string to_fraction_string(const Rational& q);

/// Parses "num/den" or "num".
Rational parse_fraction(const std::string& text);

/// Decimal text with 17 significant digits.
std::string decimal17(double x);
std::string decimal17(const Rational& q);

/// Converts a big integer that must fit in 64 bits; throws InternalError otherwise.
std::uint64_t to_u64(const BigInt& z);

}  // namespace kst

#include "kst/rational.hpp"

#include "kst/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>

namespace kst {

BigInt pow_int(unsigned long base, unsigned long exp) {
    BigInt r;
    mpz_ui_pow_ui(r.get_mpz_t(), base, exp);
    return r;
}

Rational inv_pow(unsigned long base, unsigned long exp) {
    Rational q(BigInt(1), pow_int(base, exp));
    q.canonicalize();
    return q;
}

Rational from_double(double x) {
    if (!std::isfinite(x)) throw DomainError("non-finite value cannot be converted to a rational");
    Rational q;
    mpq_set_d(q.get_mpq_t(), x);
    return q;
}

double to_double(const Rational& q) { return ratio_to_double(q.get_num(), q.get_den()); }

double ratio_to_double(const BigInt& num, const BigInt& den) {
    if (sgn(den) <= 0) throw InternalError("ratio_to_double needs a positive denominator");
    Rational raw;
    raw.get_num() = num;
    raw.get_den() = den;
    // mpq_get_d truncates; then pick the nearer of t and its outward neighbour.
    const double t = mpq_get_d(raw.get_mpq_t());
    if (!std::isfinite(t)) return t;
    auto sign_minus = [&](const Rational& v) {  // sign(num/den - v), v canonical
        BigInt lhs = num * v.get_den();
        BigInt rhs = v.get_num() * den;
        return cmp(lhs, rhs);
    };
    const Rational qt = from_double(t);
    const int s = sign_minus(qt);
    if (s == 0) return t;
    const double other = std::nextafter(t, s > 0 ? std::numeric_limits<double>::infinity()
                                                 : -std::numeric_limits<double>::infinity());
    if (!std::isfinite(other)) return t;
    Rational mid = (qt + from_double(other)) / 2;
    const int c = sign_minus(mid) * s;  // > 0: beyond the midpoint, toward other
    if (c > 0) return other;
    if (c < 0) return t;
    std::uint64_t bits_t = 0;
    std::memcpy(&bits_t, &t, sizeof t);
    return (bits_t & 1u) ? other : t;
}

BigInt floor_of(const Rational& q) {
    BigInt r;
    mpz_fdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
    return r;
}

std::string to_fraction_string(const Rational& q) {
    if (q.get_den() == 1) return q.get_num().get_str(10);
    return q.get_num().get_str(10) + "/" + q.get_den().get_str(10);
}

Rational parse_fraction(const std::string& text) {
    Rational q;
    if (q.set_str(text, 10) != 0) throw InputError("malformed rational '" + text + "'");
    if (q.get_den() == 0) throw InputError("zero denominator in '" + text + "'");
    q.canonicalize();
    return q;
}

std::string decimal17(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string decimal17(const Rational& q) { return decimal17(to_double(q)); }

std::uint64_t to_u64(const BigInt& z) {
    if (sgn(z) < 0 || mpz_sizeinbase(z.get_mpz_t(), 2) > 64)
        throw InternalError("integer " + z.get_str() + " does not fit in 64 bits");
    std::uint64_t v = 0;
    mpz_export(&v, nullptr, -1, sizeof v, 0, 0, z.get_mpz_t());
    return v;
}

}  // namespace kst

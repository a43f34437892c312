#include "kst/params.hpp"

#include "kst/errors.hpp"
#include "kst/io.hpp"

#include <cmath>

namespace kst {

namespace {

// Exact rationals beyond this many bits are left out of the JSON dump.
constexpr std::size_t kExactJsonBits = 4096;

std::string fmt_q(const Rational& q) { return decimal17(q); }

}  // namespace

Rational LambdaCoeffs::sum() const {
    Rational s = 0;
    for (const auto& v : values) s += v;
    return s;
}

std::vector<double> LambdaCoeffs::as_doubles() const {
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& v : values) out.push_back(to_double(v));
    return out;
}

BigInt beta(int n, int ell) {
    if (n < 2 || ell < 1) throw DomainError("beta requires n >= 2 and ell >= 1");
    BigInt b = 0;
    for (int i = 0; i < ell; ++i) b = b * n + 1;
    return b;
}

unsigned long beta_exponent(int n, int ell) {
    return static_cast<unsigned long>(to_u64(beta(n, ell)));
}

KstParams make_params(int n, const ParamOverrides& ov) {
    if (n < 2) throw ConstraintError("violated n >= 2 (n = " + std::to_string(n) + ")");
    KstParams p;
    p.n = n;
    p.m = ov.m.value_or(2 * n);
    p.gamma = ov.gamma.value_or(2 * n + 2);
    p.delta = ov.delta.value_or(0.05);
    p.eta = ov.eta.value_or(0.9);  // raised below when 0.9 is inadmissible
    p.lambda_depth = ov.lambda_depth.value_or(8);

    if (p.m < 2 * n)
        throw ConstraintError("violated m >= 2n (m = " + std::to_string(p.m) + ", n = " + std::to_string(n) + ")");
    if (p.gamma < p.m + 2)
        throw ConstraintError("violated gamma >= m + 2 (gamma = " + std::to_string(p.gamma) +
                              ", m = " + std::to_string(p.m) + ")");
    if (p.lambda_depth < 1) throw ConstraintError("violated lambda_depth >= 1");
    if (!std::isfinite(p.delta) || !std::isfinite(p.eta)) throw ConstraintError("delta and eta must be finite");

    p.a = Rational(1, p.gamma * (p.gamma - 1));
    p.a.canonicalize();
    p.alpha = std::log(2.0) / std::log(static_cast<double>(p.gamma));
    p.nu = std::pow(2.0, -p.alpha) * (p.gamma + 3);

    Rational qn(n), qm(p.m);
    p.delta_upper = 1 - qn / (qn - qm + 1);
    p.eta_lower = (qm - qn + 1) / (qn + 1) * from_double(p.delta) + 2 * qn / (qm + 1);

    if (!ov.eta && p.eta_lower > from_double(p.eta)) {
        // smallest multiple of 0.01 at or above the lower bound
        p.eta = std::ceil(to_double(p.eta_lower) * 100.0) / 100.0;
        while (from_double(p.eta) < p.eta_lower) p.eta = std::nextafter(p.eta, 2.0);
    }

    const Rational d = from_double(p.delta), e = from_double(p.eta);
    if (!(d > 0)) throw ConstraintError("violated 0 < delta (delta = " + decimal17(p.delta) + ")");
    if (!(d < p.delta_upper))
        throw ConstraintError("violated delta < 1 - n/(n-m+1) = " + fmt_q(p.delta_upper) +
                              " (delta = " + decimal17(p.delta) + ")");
    if (!(p.eta_lower > 0)) throw ConstraintError("violated 0 < (m-n+1)/(n+1)*delta + 2n/(m+1)");
    if (!(p.eta_lower <= e))
        throw ConstraintError("violated eta >= (m-n+1)/(n+1)*delta + 2n/(m+1) = " + fmt_q(p.eta_lower) +
                              " (eta = " + decimal17(p.eta) + ")");
    if (!(e < 1)) throw ConstraintError("violated eta < 1 (eta = " + decimal17(p.eta) + ")");
    return p;
}

LambdaCoeffs lambda_coeffs(const KstParams& p) {
    LambdaCoeffs lc;
    lc.values.reserve(p.n);
    lc.values.emplace_back(1);
    std::vector<unsigned long> betas;
    for (int l = 1; l <= p.lambda_depth; ++l) betas.push_back(beta_exponent(p.n, l));
    // Common denominator gamma^((i-1) beta(depth)) avoids big gcds for large n.
    const unsigned long top = betas.back();
    for (int i = 2; i <= p.n; ++i) {
        const unsigned long w = static_cast<unsigned long>(i - 1);
        BigInt num = 0;
        for (unsigned long b : betas) num += pow_int(p.gamma, w * (top - b));
        // num is 1 mod gamma, so the fraction is already in lowest terms.
        lc.values.emplace_back(num, pow_int(p.gamma, w * top));
    }
    lc.tail_bound = 2 * inv_pow(p.gamma, beta_exponent(p.n, p.lambda_depth + 1));

    Rational lhs = lc.sum() + p.n * lc.tail_bound;
    Rational rhs(p.gamma - 1, p.gamma - 2);
    rhs.canonicalize();
    if (!(lhs < rhs)) throw InternalError("lambda sum exceeds (gamma-1)/(gamma-2)");
    return lc;
}

std::string params_to_json(const KstParams& p, const LambdaCoeffs* lc) {
    Json j;
    j["n"] = p.n;
    j["m"] = p.m;
    j["gamma"] = p.gamma;
    j["a"] = json_rational(p.a);
    j["alpha"] = json_real(p.alpha);
    j["nu"] = json_real(p.nu);
    j["delta"] = json_real(p.delta);
    j["eta"] = json_real(p.eta);
    j["lambda_depth"] = p.lambda_depth;
    j["delta_upper"] = json_rational(p.delta_upper);
    j["delta_upper_exceeds_one"] = p.delta_upper_exceeds_one();
    j["eta_lower"] = json_rational(p.eta_lower);
    if (lc) {
        Json dec = Json::array(), exact = Json::array();
        bool small = true;
        for (const auto& v : lc->values) {
            dec.push_back(decimal17(v));
            if (mpz_sizeinbase(v.get_den_mpz_t(), 2) > kExactJsonBits) small = false;
        }
        j["lambda"] = dec;
        if (small) {
            for (const auto& v : lc->values) exact.push_back(json_rational(v));
            j["lambda_exact"] = exact;
        }
        // The tail bound underflows doubles quickly; its exponent is exact.
        j["tail_bound_log10"] =
            json_real(std::log10(2.0) - static_cast<double>(beta_exponent(p.n, p.lambda_depth + 1)) *
                                            std::log10(static_cast<double>(p.gamma)));
        j["lambda_sum"] = decimal17(lc->sum());
    }
    return j.dump(2) + "\n";
}

}  // namespace kst

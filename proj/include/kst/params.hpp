#pragma once

#include "kst/rational.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kst {

/// Optional user overrides for make_params; unset fields take the defaults
/// m = 2n, gamma = 2n + 2, delta = 0.05, eta = 0.9, lambda_depth = 8. When
/// eta = 0.9 is below (m-n+1)/(n+1) delta + 2n/(m+1) (every n >= 3 with the
/// other defaults), the default eta is that bound rounded up to a multiple of 0.01.
struct ParamOverrides {
    std::optional<int> m;
    std::optional<int> gamma;
    std::optional<double> delta;
    std::optional<double> eta;
    std::optional<int> lambda_depth;
};

/// Every constant of one superposition run. Immutable once built by make_params.
struct KstParams {
    int n = 0;
    int m = 0;
    int gamma = 0;
    Rational a;          // 1/(gamma(gamma-1))
    double alpha = 0.0;  // log_gamma 2
    double nu = 0.0;     // 2^-alpha (gamma+3)
    double delta = 0.0;
    double eta = 0.0;
    int lambda_depth = 0;

    /// Right-hand side of the delta constraint, 1 - n/(n-m+1), evaluated literally.
    Rational delta_upper;
    /// Left-hand side of the eta constraint, (m-n+1)/(n+1) delta + 2n/(m+1).
    Rational eta_lower;

    bool delta_upper_exceeds_one() const { return delta_upper > 1; }
};

/// Truncated lambda_i series. values[0] is lambda_1 = 1.
struct LambdaCoeffs {
    std::vector<Rational> values;
    Rational tail_bound;

    Rational sum() const;
    std::vector<double> as_doubles() const;
};

KstParams make_params(int n, const ParamOverrides& overrides = {});

/// beta_n(ell) = 1 + n + ... + n^(ell-1), exact.
BigInt beta(int n, int ell);

/// beta_n(ell) as an exponent; throws InternalError beyond 64 bits.
unsigned long beta_exponent(int n, int ell);

LambdaCoeffs lambda_coeffs(const KstParams& params);

/// JSON text for params and their lambda coefficients (stable key order).
std::string params_to_json(const KstParams& params, const LambdaCoeffs* lambdas = nullptr);

}  // namespace kst

#pragma once

#include "kst/inner.hpp"
#include "kst/io.hpp"
#include "kst/params.hpp"

#include <cstdint>
#include <vector>

namespace kst {

/// 0 below 0, identity on [0,1], 1 above 1.
double sigma(double x);
Rational sigma_exact(const Rational& x);

/// Which index range each axis of a bump family covers.
enum class GridExtent {
    Literal,  // 0 .. gamma^k - 1, i.e. D_k as printed
    Closed,   // 0 .. gamma^k, adding the right end point 1
};

/// (D_k^j)^n: axis index a gives the point (a + j S_k) gamma^-k with
/// S_k = sum_{l=2}^k gamma^(k-l).
struct ShiftedGrid {
    int n = 0;
    int gamma = 0;
    int k = 0;
    int j = 0;
    GridExtent extent = GridExtent::Literal;

    std::uint64_t per_axis() const;
    std::uint64_t size() const;
    /// Integer j S_k; the shift itself is this times gamma^-k.
    std::uint64_t shift_units() const;
    Rational shift() const;
    /// Axis indices of the flat index (axis 0 varies fastest).
    std::vector<std::uint64_t> axis_indices(std::uint64_t flat) const;
    /// Shifted coordinates of the flat index.
    std::vector<Rational> point(std::uint64_t flat) const;
};

/// Certified bracket for b_k: lo is the lambda_depth-term partial sum and the
/// true b_k for the truncated lambdas lies in [lo, hi].
struct BkBound {
    Rational lo;
    Rational hi;
};

BkBound b_k_bounds(const KstParams& p, const LambdaCoeffs& lc, int k);
Rational b_k(const KstParams& p, const LambdaCoeffs& lc, int k);

/// xi(d) = sum_i lambda_i psi(d_i); each d_i must be a grid point of depth k in [0,2).
Rational xi(const KstParams& p, const LambdaCoeffs& lc, const InnerEvaluator& ev,
            const std::vector<Rational>& d, int k);

struct BumpSpec {
    Rational center_left;  // xi(d)
    Rational plateau;      // (gamma - 2) b_k
    Rational slope;        // gamma^beta(k+1)
    int k = 0;

    Rational ramp() const { return 1 / slope; }
    Rational support_left() const { return center_left - ramp(); }
    Rational support_right() const { return center_left + plateau + ramp(); }
};

BumpSpec make_bump(const KstParams& p, const LambdaCoeffs& lc, const Rational& center_left, int k);

/// Trapezoid value in floating point from the exact fields.
double theta(const BumpSpec& b, double x);
Rational theta_exact(const BumpSpec& b, const Rational& x);

struct SupportAudit {
    Rational min_gap;
    bool ok = false;
    std::uint64_t count = 0;

    Json to_json() const;
};

/// Sorts the family's supports by xi and returns the smallest gap between
/// neighbours. Plateaus use the upper b_k bound so the check is conservative.
SupportAudit disjoint_support_audit(const KstParams& p, const LambdaCoeffs& lc, const InnerEvaluator& ev,
                                    int k, int j, GridExtent extent = GridExtent::Literal);

}  // namespace kst

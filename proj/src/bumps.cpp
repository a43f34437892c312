#include "kst/bumps.hpp"

#include "kst/errors.hpp"

#include <algorithm>
#include <cmath>

namespace kst {

namespace {

constexpr double kAuditBudget = 1e4;

std::uint64_t upow(std::uint64_t b, int e) {
    std::uint64_t r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

}  // namespace

double sigma(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x;
}

Rational sigma_exact(const Rational& x) {
    if (x <= 0) return 0;
    if (x >= 1) return 1;
    return x;
}

std::uint64_t ShiftedGrid::per_axis() const {
    const std::uint64_t g = upow(gamma, k);
    return extent == GridExtent::Closed ? g + 1 : g;
}

std::uint64_t ShiftedGrid::size() const { return upow(per_axis(), n); }

std::uint64_t ShiftedGrid::shift_units() const {
    std::uint64_t s = 0;
    for (int l = 2; l <= k; ++l) s += upow(gamma, k - l);
    return static_cast<std::uint64_t>(j) * s;
}

Rational ShiftedGrid::shift() const {
    Rational q(BigInt(static_cast<unsigned long>(shift_units())), pow_int(gamma, k));
    q.canonicalize();
    return q;
}

std::vector<std::uint64_t> ShiftedGrid::axis_indices(std::uint64_t flat) const {
    std::vector<std::uint64_t> a(n);
    const std::uint64_t pa = per_axis();
    for (int i = 0; i < n; ++i) {
        a[i] = flat % pa;
        flat /= pa;
    }
    return a;
}

std::vector<Rational> ShiftedGrid::point(std::uint64_t flat) const {
    std::vector<Rational> out;
    const BigInt den = pow_int(gamma, k);
    for (std::uint64_t a : axis_indices(flat)) {
        Rational q(BigInt(static_cast<unsigned long>(a + shift_units())), den);
        q.canonicalize();
        out.push_back(q);
    }
    return out;
}

BkBound b_k_bounds(const KstParams& p, const LambdaCoeffs& lc, int k) {
    if (k < 1) throw DomainError("b_k needs k >= 1");
    const Rational lsum = lc.sum();
    Rational series = 0;
    for (int l = k + 1; l <= k + p.lambda_depth; ++l) series += inv_pow(p.gamma, beta_exponent(p.n, l));
    BkBound b;
    b.lo = series * lsum;
    // Remaining terms are dominated by a geometric series of ratio 1/gamma.
    Rational tail = inv_pow(p.gamma, beta_exponent(p.n, k + p.lambda_depth + 1)) * Rational(p.gamma, p.gamma - 1);
    b.hi = b.lo + tail * lsum;
    return b;
}

Rational b_k(const KstParams& p, const LambdaCoeffs& lc, int k) { return b_k_bounds(p, lc, k).lo; }

Rational xi(const KstParams& p, const LambdaCoeffs& lc, const InnerEvaluator& ev,
            const std::vector<Rational>& d, int k) {
    if (static_cast<int>(d.size()) != p.n) throw DomainError("xi needs n coordinates");
    const BigInt g = pow_int(p.gamma, k);
    Rational s = 0;
    for (int i = 0; i < p.n; ++i) {
        if (d[i] < 0 || d[i] >= 2) throw DomainError("xi coordinate " + decimal17(d[i]) + " outside [0,2)");
        Rational scaled = d[i] * Rational(g);
        if (scaled.get_den() != 1) throw DomainError("xi coordinate is not a grid point of depth " + std::to_string(k));
        s += lc.values[i] * ev.psi_extended(k, to_u64(scaled.get_num()));
    }
    return s;
}

BumpSpec make_bump(const KstParams& p, const LambdaCoeffs& lc, const Rational& center_left, int k) {
    BumpSpec b;
    b.center_left = center_left;
    b.plateau = (p.gamma - 2) * b_k(p, lc, k);
    b.slope = Rational(pow_int(p.gamma, beta_exponent(p.n, k + 1)));
    b.k = k;
    return b;
}

double theta(const BumpSpec& b, double x) {
    const double s = to_double(b.slope);
    const double c = to_double(b.center_left);
    const double e = to_double(b.center_left + b.plateau);
    return sigma(s * (x - c) + 1.0) - sigma(s * (x - e));
}

Rational theta_exact(const BumpSpec& b, const Rational& x) {
    return sigma_exact(b.slope * (x - b.center_left) + 1) - sigma_exact(b.slope * (x - b.center_left - b.plateau));
}

Json SupportAudit::to_json() const {
    return Json{{"min_gap", decimal17(min_gap)}, {"ok", ok}, {"count", count}};
}

SupportAudit disjoint_support_audit(const KstParams& p, const LambdaCoeffs& lc, const InnerEvaluator& ev,
                                    int k, int j, GridExtent extent) {
    if (j < 0 || j > p.m) throw DomainError("shift index j outside 0..m");
    if (k < 1) throw DomainError("audit needs k >= 1");
    ShiftedGrid grid{p.n, p.gamma, k, j, extent};
    if (std::pow(static_cast<double>(grid.per_axis()), p.n) > kAuditBudget)
        throw BudgetError("support audit over more than 10^4 bumps");
    const std::uint64_t count = grid.size();
    std::vector<Rational> centers;
    centers.reserve(count);
    for (std::uint64_t f = 0; f < count; ++f) centers.push_back(xi(p, lc, ev, grid.point(f), k));
    std::sort(centers.begin(), centers.end());

    const BkBound bk = b_k_bounds(p, lc, k);
    const Rational w = inv_pow(p.gamma, beta_exponent(p.n, k + 1));
    const Rational reach = (p.gamma - 2) * bk.hi + 2 * w;  // plateau plus both ramps
    SupportAudit out;
    out.count = count;
    if (count < 2) {
        out.ok = true;
        return out;
    }
    for (std::uint64_t i = 1; i < count; ++i) {
        // left(next) - right(prev) = xi_next - w - (xi_prev + P + w)
        Rational gap = centers[i] - centers[i - 1] - reach;
        if (i == 1 || gap < out.min_gap) out.min_gap = gap;
    }
    out.ok = out.min_gap > 0;
    return out;
}

}  // namespace kst

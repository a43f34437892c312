#pragma once

#include "kst/params.hpp"
#include "kst/rational.hpp"

#include <cstdint>
#include <deque>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kst {

/// d = sum_l digits[l-1] gamma^-l, a point of D_k with k = digits.size().
struct BaseGammaPoint {
    std::vector<int> digits;
    int gamma = 0;

    int k() const { return static_cast<int>(digits.size()); }
    Rational value() const;
    /// Integer i with d = i gamma^-k.
    std::uint64_t index() const;

    static BaseGammaPoint from_index(std::uint64_t idx, int k, int gamma);
    /// Parses "0.12" style decimal text in base gamma <= 10.
    static BaseGammaPoint parse(const std::string& text, int gamma);
};

/// Equal after zero padding to a common depth.
bool operator==(const BaseGammaPoint& a, const BaseGammaPoint& b);

struct PsiValue {
    double value = 0.0;
    Rational exact;        // psi_k of the truncated argument
    double err_bound = 0;  // nu gamma^(-alpha k) = nu 2^-k
};

struct HolderAudit {
    double max_ratio = 0.0;
    std::pair<Rational, Rational> witness;
    std::uint64_t pairs = 0;
};

struct PsiRow {
    Rational d;
    Rational psi;
};

/// Exact psi_k on the grids D_k plus continuum evaluation. The memo is a
/// mutex-guarded cache; results never depend on what was cached before.
class InnerEvaluator {
public:
    explicit InnerEvaluator(const KstParams& params);

    const KstParams& params() const { return params_; }

    /// psi_k(idx gamma^-k) for 0 <= idx <= gamma^k. The closing point idx = gamma^k
    /// (the value 1) maps to 1, matching the shift rule at x = 1.
    Rational psi_index(int k, std::uint64_t idx) const;
    Rational psi_grid(const BaseGammaPoint& d) const;

    /// psi at idx gamma^-k for idx in [0, 2 gamma^k), using the [1,2) shift.
    Rational psi_extended(int k, std::uint64_t idx) const;

    /// Truncates the exact base-gamma expansion of x in [0,2) at depth k_trunc.
    PsiValue psi(const Rational& x, int k_trunc) const;
    PsiValue psi(double x, int k_trunc) const;

    /// psi_extended(k, i) for i in [0, count).
    std::vector<Rational> table(int k, std::uint64_t count) const;

    std::size_t memo_size() const;

private:
    Rational compute(int k, std::uint64_t idx) const;

    const Rational& digit_weight(int l) const;  // gamma^-beta(l), cached
    std::uint64_t gpow(int k) const;

    KstParams params_;
    int max_depth_ = 0;  // largest k whose grid indices fit the memo key
    mutable std::mutex mu_;
    mutable std::unordered_map<std::uint64_t, Rational> memo_;
    mutable std::deque<Rational> weights_;  // deque keeps references stable
};

/// Max of |psi(x)-psi(y)| / (nu |x-y|^alpha) over distinct pairs of D_k and D_k + 1.
HolderAudit holder_audit(const InnerEvaluator& ev, int k);

/// (d, psi(d)) for d in D_k ascending.
std::vector<PsiRow> psi_plot_data(const InnerEvaluator& ev, int k);
std::string psi_plot_csv(const std::vector<PsiRow>& rows);

/// True when psi never decreases between consecutive rows.
bool is_nondecreasing(const std::vector<PsiRow>& rows);

}  // namespace kst

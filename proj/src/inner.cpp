#include "kst/inner.hpp"

#include "kst/errors.hpp"
#include "kst/io.hpp"

#include <cmath>
#include <limits>

namespace kst {

namespace {

constexpr std::uint64_t kKeyLimit = std::uint64_t(1) << 57;
constexpr std::uint64_t kHolderBudget = 10000;
constexpr std::uint64_t kPlotBudget = 1000000;

}  // namespace

Rational BaseGammaPoint::value() const {
    Rational v(BigInt(static_cast<unsigned long>(index())), pow_int(gamma, digits.size()));
    v.canonicalize();
    return v;
}

std::uint64_t BaseGammaPoint::index() const {
    std::uint64_t idx = 0;
    for (int dg : digits) idx = idx * gamma + static_cast<std::uint64_t>(dg);
    return idx;
}

BaseGammaPoint BaseGammaPoint::from_index(std::uint64_t idx, int k, int gamma) {
    BaseGammaPoint p;
    p.gamma = gamma;
    p.digits.assign(k, 0);
    for (int l = k - 1; l >= 0; --l) {
        p.digits[l] = static_cast<int>(idx % gamma);
        idx /= gamma;
    }
    if (idx != 0) throw DomainError("grid index outside D_k");
    return p;
}

BaseGammaPoint BaseGammaPoint::parse(const std::string& text, int gamma) {
    if (gamma > 10) throw DomainError("digit-string parsing needs gamma <= 10");
    if (text.size() < 3 || text.compare(0, 2, "0.") != 0)
        throw InputError("grid point must look like 0.d1d2...");
    BaseGammaPoint p;
    p.gamma = gamma;
    for (std::size_t i = 2; i < text.size(); ++i) {
        int dg = text[i] - '0';
        if (dg < 0 || dg >= gamma) throw InputError("bad base-" + std::to_string(gamma) + " digit in '" + text + "'");
        p.digits.push_back(dg);
    }
    return p;
}

bool operator==(const BaseGammaPoint& a, const BaseGammaPoint& b) {
    if (a.gamma != b.gamma) return false;
    const std::size_t k = std::max(a.digits.size(), b.digits.size());
    for (std::size_t i = 0; i < k; ++i) {
        int da = i < a.digits.size() ? a.digits[i] : 0;
        int db = i < b.digits.size() ? b.digits[i] : 0;
        if (da != db) return false;
    }
    return true;
}

InnerEvaluator::InnerEvaluator(const KstParams& params) : params_(params) {
    std::uint64_t g = 1;
    while (g <= kKeyLimit / static_cast<std::uint64_t>(params_.gamma)) {
        g *= params_.gamma;
        ++max_depth_;
    }
}

std::uint64_t InnerEvaluator::gpow(int k) const {
    if (k < 0 || k > max_depth_) throw DomainError("depth " + std::to_string(k) + " exceeds supported grid depth");
    std::uint64_t g = 1;
    for (int i = 0; i < k; ++i) g *= params_.gamma;
    return g;
}

const Rational& InnerEvaluator::digit_weight(int l) const {
    std::lock_guard<std::mutex> lock(mu_);
    while (static_cast<int>(weights_.size()) < l)
        weights_.push_back(inv_pow(params_.gamma, beta_exponent(params_.n, static_cast<int>(weights_.size()) + 1)));
    return weights_[l - 1];
}

Rational InnerEvaluator::psi_index(int k, std::uint64_t idx) const {
    if (k < 1) throw DomainError("psi_k needs k >= 1");
    if (idx > gpow(k)) throw DomainError("grid index outside the closed unit interval");
    return compute(k, idx);
}

Rational InnerEvaluator::compute(int k, std::uint64_t idx) const {
    const std::uint64_t g = static_cast<std::uint64_t>(params_.gamma);
    while (k > 1 && idx % g == 0) {
        idx /= g;
        --k;
    }
    if (k == 1) {
        Rational v(static_cast<unsigned long>(idx), static_cast<unsigned long>(g));
        v.canonicalize();
        return v;
    }
    const std::uint64_t key = (idx << 6) | static_cast<std::uint64_t>(k);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
    }
    const std::uint64_t last = idx % g;
    Rational v;
    if (last < g - 1) {
        v = compute(k - 1, idx / g) + static_cast<unsigned long>(last) * digit_weight(k);
    } else {
        v = (compute(k, idx - 1) + compute(k - 1, (idx + 1) / g)) / 2;
    }
    std::lock_guard<std::mutex> lock(mu_);
    memo_.emplace(key, v);
    return v;
}

Rational InnerEvaluator::psi_grid(const BaseGammaPoint& d) const {
    if (d.gamma != params_.gamma) throw DomainError("grid point base differs from gamma");
    if (d.k() < 1) throw DomainError("grid point needs at least one digit");
    return psi_index(d.k(), d.index());
}

Rational InnerEvaluator::psi_extended(int k, std::uint64_t idx) const {
    const std::uint64_t g = gpow(k);
    if (idx >= 2 * g) throw DomainError("psi is defined on [0,2) only");
    if (idx >= g) return 1 + psi_index(k, idx - g);
    return psi_index(k, idx);
}

PsiValue InnerEvaluator::psi(const Rational& x, int k_trunc) const {
    if (x < 0 || x >= 2) throw DomainError("psi argument " + decimal17(x) + " outside [0,2)");
    if (k_trunc < 1) throw DomainError("truncation depth must be >= 1");
    const std::uint64_t g = gpow(k_trunc);
    const BigInt idx = floor_of(x * Rational(BigInt(static_cast<unsigned long>(g))));
    PsiValue out;
    out.exact = psi_extended(k_trunc, to_u64(idx));
    out.value = to_double(out.exact);
    out.err_bound = params_.nu * std::ldexp(1.0, -k_trunc);
    return out;
}

PsiValue InnerEvaluator::psi(double x, int k_trunc) const {
    if (!(x >= 0.0 && x < 2.0)) throw DomainError("psi argument " + decimal17(x) + " outside [0,2)");
    return psi(from_double(x), k_trunc);
}

std::vector<Rational> InnerEvaluator::table(int k, std::uint64_t count) const {
    std::vector<Rational> out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) out.push_back(psi_extended(k, i));
    return out;
}

std::size_t InnerEvaluator::memo_size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return memo_.size();
}

HolderAudit holder_audit(const InnerEvaluator& ev, int k) {
    const KstParams& p = ev.params();
    if (k < 1) throw DomainError("holder audit needs k >= 1");
    double gk = std::pow(static_cast<double>(p.gamma), k);
    if (gk > static_cast<double>(kHolderBudget))
        throw BudgetError("holder audit over gamma^k = " + decimal17(gk) + " points exceeds 10^4");
    const std::uint64_t g = static_cast<std::uint64_t>(gk);
    const std::uint64_t count = 2 * g;
    std::vector<Rational> exact = ev.table(k, count);
    std::vector<double> vals(count);
    for (std::uint64_t i = 0; i < count; ++i) vals[i] = to_double(exact[i]);
    std::vector<double> denom(count);
    for (std::uint64_t s = 1; s < count; ++s)
        denom[s] = p.nu * std::pow(static_cast<double>(s) / gk, p.alpha);

    HolderAudit out;
    std::uint64_t bi = 0, bj = 1;
    for (std::uint64_t i = 0; i < count; ++i) {
        for (std::uint64_t j = i + 1; j < count; ++j) {
            double r = std::fabs(vals[j] - vals[i]) / denom[j - i];
            if (r > out.max_ratio) {
                out.max_ratio = r;
                bi = i;
                bj = j;
            }
        }
    }
    out.pairs = count * (count - 1) / 2;
    // Recompute the winning ratio from the exact difference.
    out.max_ratio = std::fabs(to_double(exact[bj] - exact[bi])) / denom[bj - bi];
    Rational xi(static_cast<unsigned long>(bi), static_cast<unsigned long>(g));
    Rational xj(static_cast<unsigned long>(bj), static_cast<unsigned long>(g));
    xi.canonicalize();
    xj.canonicalize();
    out.witness = {xi, xj};
    return out;
}

std::vector<PsiRow> psi_plot_data(const InnerEvaluator& ev, int k) {
    if (k < 1) throw DomainError("plot data needs k >= 1");
    double gk = std::pow(static_cast<double>(ev.params().gamma), k);
    if (gk > static_cast<double>(kPlotBudget))
        throw BudgetError("plot grid of gamma^k = " + decimal17(gk) + " rows exceeds 10^6");
    const std::uint64_t g = static_cast<std::uint64_t>(gk);
    std::vector<PsiRow> rows;
    rows.reserve(g);
    for (std::uint64_t i = 0; i < g; ++i) {
        Rational d(static_cast<unsigned long>(i), static_cast<unsigned long>(g));
        d.canonicalize();
        rows.push_back({d, ev.psi_index(k, i)});
    }
    return rows;
}

std::string psi_plot_csv(const std::vector<PsiRow>& rows) {
    CsvTable t({"d", "psi"});
    for (const auto& r : rows) t.add_row({decimal17(r.d), decimal17(r.psi)});
    return t.text();
}

bool is_nondecreasing(const std::vector<PsiRow>& rows) {
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].psi < rows[i - 1].psi) return false;
    return true;
}

}  // namespace kst

#include "kst/target.hpp"

#include "kst/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kst {

namespace {

constexpr double kLatticeBudget = 1e6;

// Lattice size for sampling an expression's sup norm.
int sampling_resolution(int n) {
    int r = 2;
    while (std::pow(r + 1.0, n) <= 1e5) ++r;
    return r;
}

// Calls fn(point) for every point of a resolution^n lattice on [0,1]^n.
template <class F>
void for_lattice(int n, int resolution, F&& fn) {
    std::vector<int> idx(n, 0);
    std::vector<double> x(n, 0.0);
    const double step = resolution > 1 ? 1.0 / (resolution - 1) : 0.0;
    for (;;) {
        for (int i = 0; i < n; ++i) x[i] = idx[i] * step;
        fn(x);
        int i = 0;
        while (i < n && ++idx[i] == resolution) idx[i++] = 0;
        if (i == n) return;
    }
}

}  // namespace

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names{"zero", "one", "product", "gaussian", "ridge"};
    return names;
}

TargetFunction builtin_target(const std::string& name, int n) {
    if (n < 1) throw DomainError("target dimension must be positive");
    TargetFunction t;
    t.dim = n;
    t.provenance = name;
    t.builtin = true;
    if (name == "zero") {
        t.eval = [](const double*) { return 0.0; };
        t.sup_norm_bound = 0.0;
    } else if (name == "one") {
        t.eval = [](const double*) { return 1.0; };
        t.sup_norm_bound = 1.0;
    } else if (name == "product") {
        t.eval = [n](const double* x) {
            double v = 1.0;
            for (int i = 0; i < n; ++i) v *= x[i];
            return v;
        };
        t.sup_norm_bound = 1.0;
    } else if (name == "gaussian") {
        t.eval = [n](const double* x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += x[i] * x[i];
            return std::exp(-s);
        };
        t.sup_norm_bound = 1.0;
    } else if (name == "ridge") {
        t.eval = [n](const double* x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += x[i];
            return std::sin(std::numbers::pi * s) / n;
        };
        t.sup_norm_bound = 1.0 / n;
    } else {
        throw InputError("unknown built-in target '" + name + "'");
    }
    return t;
}

TargetFunction expr_target(const std::string& text, int n) {
    Expr e = parse_expr(text, n);
    TargetFunction t;
    t.dim = n;
    t.provenance = text;
    t.builtin = false;
    t.eval = [e](const double* x) { return eval_expr(*e, x); };
    double sup = 0.0;
    for_lattice(n, sampling_resolution(n), [&](const std::vector<double>& x) {
        sup = std::max(sup, std::fabs(t.eval(x.data())));
    });
    t.sup_norm_bound = sup;
    return t;
}

TargetFunction make_target(const std::string& spec, int n) {
    const auto& names = builtin_names();
    if (std::find(names.begin(), names.end(), spec) != names.end()) return builtin_target(spec, n);
    return expr_target(spec, n);
}

std::vector<double> cumulative_modulus(const std::vector<double>& raw) {
    std::vector<double> out(raw.size());
    double run = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = run = std::max(run, raw[i]);
    return out;
}

ModulusTable modulus_estimate(const TargetFunction& f, int resolution, int gamma, int levels) {
    if (resolution < 2) throw DomainError("modulus resolution must be >= 2");
    if (std::pow(static_cast<double>(resolution), f.dim) > kLatticeBudget)
        throw BudgetError("modulus lattice resolution^n exceeds 10^6");
    const int n = f.dim;
    std::vector<double> hs(levels), raw(levels, 0.0);
    for (int l = 0; l < levels; ++l) hs[l] = std::pow(static_cast<double>(gamma), -(levels - l));
    std::vector<double> y(n);
    for_lattice(n, resolution, [&](const std::vector<double>& x) {
        const double fx = f.eval(x.data());
        for (int l = 0; l < levels; ++l) {
            for (int i = 0; i < n; ++i) {
                if (x[i] + hs[l] > 1.0) continue;
                y = x;
                y[i] += hs[l];
                raw[l] = std::max(raw[l], std::fabs(f.eval(y.data()) - fx));
            }
        }
    });
    ModulusTable t;
    auto cum = cumulative_modulus(raw);
    // Report with h decreasing: gamma^-1 first.
    for (int l = levels - 1; l >= 0; --l) {
        t.h.push_back(hs[l]);
        t.omega.push_back(cum[l]);
    }
    return t;
}

}  // namespace kst

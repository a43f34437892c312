#pragma once

#include "kst/expr.hpp"

#include <functional>
#include <string>
#include <vector>

namespace kst {

/// f : [0,1]^n -> R together with a bound on its sup norm.
struct TargetFunction {
    int dim = 0;
    std::function<double(const double*)> eval;
    double sup_norm_bound = 0.0;
    /// Built-in name or expression text; enough to rebuild the target.
    std::string provenance;
    bool builtin = false;

    double operator()(const std::vector<double>& p) const { return eval(p.data()); }
};

/// zero, one, product, gaussian, ridge.
const std::vector<std::string>& builtin_names();

TargetFunction builtin_target(const std::string& name, int n);

/// Parses an expression; the sup-norm bound is the sampled max of |f|.
TargetFunction expr_target(const std::string& text, int n);

/// Built-in when the spec names one, expression otherwise.
TargetFunction make_target(const std::string& spec, int n);

struct ModulusTable {
    std::vector<double> h;
    std::vector<double> omega;  // nondecreasing in h
};

/// Empirical modulus over axis-aligned pairs (x, x + h e_i), x on a lattice
/// of `resolution` points per axis, for h = gamma^-1 .. gamma^-levels. Each
/// entry is the running max over all steps up to h, so omega is monotone.
ModulusTable modulus_estimate(const TargetFunction& f, int resolution, int gamma, int levels = 3);

/// Running max over raw per-step maxima ordered from the smallest step up.
std::vector<double> cumulative_modulus(const std::vector<double>& raw_small_to_large);

}  // namespace kst

#pragma once

#include "kst/decompose.hpp"
#include "kst/io.hpp"
#include "kst/relunet.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace kst {

/// ceil(ln(2/eps) / ln(1/eta)).
int r_of_epsilon(double eta, double eps);

struct EpsilonSplit {
    double eps_psi = 0.0;  // n eps / (2 (2n+1)^2 nu_r)
    double eps_phi = 0.0;  // eps / (4 (2n+1))
};

EpsilonSplit epsilon_split(const KstParams& p, double nu_r, double eps);

struct PipelineCaps {
    int r_cap = 3;
    int extra_random = 10000;  // random points on top of the decomposition's audit set
    std::uint64_t psi_knot_limit = 1000000;
    int dense_check = 256;     // points evaluated through the assembled network
};

/// max |a - b| over a point set, kept exact.
struct ErrorTriple {
    double f_fr = 0.0;    // ||f - f_r||
    double fr_net = 0.0;  // ||f_r - net||
    double f_net = 0.0;   // ||f - net||
    bool triangle_ok = false;
    std::uint64_t points = 0;

    Json to_json() const;
};

struct SizeBound {
    double c0 = 1.0, c1 = 1.0, c2 = 1.0;  // placeholders
    double exponent_psi = 0.0;            // [1 + log2(n+1)] / 2
    int r = 0;
    int C = 0;
    double c3 = 0.0, c4 = 0.0, c3_tilde = 0.0, c4_tilde = 0.0;
    double W_bound = 0.0;
    double L_bound = 0.0;
    std::uint64_t W_measured = 0;
    int L_measured = 0;
    bool W_within = false;
    bool L_within = false;

    Json to_json() const;
    std::string csv() const;
};

struct PipelineReport {
    std::string target;
    std::uint64_t seed = 0;
    double eps = 0.0;
    double eta = 0.0;
    int r_needed = 0;
    int r_used = 0;
    bool partial = false;
    std::vector<int> k_list;
    std::vector<double> residual_norms;
    double nu_r = 0.0;
    double nu_r_measured = 0.0;
    double K_C_bound = 0.0;
    double eps_psi = 0.0;
    double eps_phi = 0.0;

    int psi_depth = 0;
    std::uint64_t psi_knots = 0;
    double psi_error_bound = 0.0;  // nu 2^-K
    double psi_required_knots = 0.0;
    bool psi_certified = false;
    double psi_eps_measured = 0.0;
    double phi_required_knots = 0.0;
    double phi_eps_measured = 0.0;

    ErrorTriple grid;    // audit grid, with f_r at the exact grid rationals
    ErrorTriple random;  // the decomposition's random audit points plus the extra ones
    ErrorTriple total;
    bool network_half_ok_grid = false;  // ||f_r - net|| <= eps / 2 on the grid
    bool full_ok_grid = false;          // ||f - net|| <= eps on the grid
    bool network_half_ok = false;       // the same over all points
    bool full_ok = false;
    std::uint64_t dense_checked = 0;

    AssemblyAccounting accounting;
    SizeReport size;
    SizeBound bound;

    Json to_json() const;
};

struct StageTime {
    std::string stage;
    double seconds = 0.0;
};

struct PipelineResult {
    PipelineReport report;
    KstNetwork network;
    UnivariateNet psi;
    std::vector<UnivariateNet> phi;
    DecompositionState state;
    std::vector<StageTime> timings;  // kept out of the report so reports stay reproducible
};

/// Runs from a finished decomposition; uses min(r(eps), r_cap, s.r()) layers.
PipelineResult run_pipeline(const DecompositionState& s, double eps, const PipelineCaps& caps = {});

/// Decomposes to min(r(eps), r_cap) layers first.
PipelineResult run_pipeline(const KstParams& params, const TargetFunction& f, double eps,
                            const PipelineCaps& caps = {}, const DecompositionConfig& config = {});

SizeBound size_bound_report(const PipelineReport& report, const KstParams& params);

/// Rows (eps, r, W, L, errors) for one pipeline per eps.
std::string experiment_csv(const std::vector<PipelineReport>& reports);

}  // namespace kst

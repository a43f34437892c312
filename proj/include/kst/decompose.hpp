#pragma once

#include "kst/bumps.hpp"
#include "kst/inner.hpp"
#include "kst/io.hpp"
#include "kst/params.hpp"
#include "kst/target.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kst {

struct DecompositionConfig {
    int k_max = 0;             // 0 picks default_k_max
    int audit_resolution = 0;  // 0 picks default_audit_resolution
    int random_points = 1000;
    std::uint64_t seed = 1;
    std::uint64_t grid_budget = 1000000;
    bool closed_grid = true;  // axis indices 0..gamma^k, so x_i = 1 lies in a cell
    int psi_margin = 2;       // psi is tabulated at depth k_max + psi_margin
};

/// min(3, largest k with (gamma^k + 1)^n <= budget).
int default_k_max(const KstParams& p, std::uint64_t budget);
/// 101 per axis for n = 2, 31 for n = 3, smaller beyond.
int default_audit_resolution(int n);

/// Uniform double in [0,1) from the top 53 bits of a 64-bit draw.
double unit_draw(std::uint64_t bits);

/// Everything fixed for one decomposition run. Aggregates sum_i lambda_i psi
/// are kept as integers over the common denominator D = 2^K gamma^beta(K)
/// gamma^((n-1) beta(depth)), where K = k_max + psi_margin is the psi truncation depth.
struct DecompositionContext {
    KstParams params;
    LambdaCoeffs lambdas;
    std::shared_ptr<const InnerEvaluator> ev;
    TargetFunction target;
    DecompositionConfig config;  // with defaults resolved
    int k_max = 0;
    int k_trunc = 0;
    std::uint64_t g_trunc = 0;  // gamma^k_trunc
    BigInt D;
    Rational a_shift;                        // a
    std::vector<std::vector<BigInt>> table;  // table[i][idx] = lambda_i psi(idx / g_trunc) D

    // Audit points: a resolution^n lattice followed by seeded random points.
    std::size_t audit_count = 0;
    std::vector<double> audit_x;             // audit_count * n
    std::vector<double> audit_f;             // f at audit points
    std::vector<std::uint32_t> audit_index;  // [(p * (m+1) + j) * n + i]

    // Residual lattice with spacing gamma^-k_max, R points per axis.
    std::uint64_t lattice_R = 0;
    std::vector<std::uint32_t> lattice_index;  // [j * R + p]

    /// floor((x + j a) gamma^K) for exact x in [0,1].
    std::uint32_t shifted_index(const Rational& x, int j) const;
};

struct LayerBump {
    BigInt left;  // (xi - ramp width) * D, the support's left end
    double coeff = 0.0;
};

/// One iteration's bumps for all m+1 outer functions.
struct Layer {
    int k = 0;
    bool k_warning = false;  // no k <= k_max met the modulus condition
    Rational slope;          // gamma^beta(k+1)
    Rational plateau;        // (gamma-2) b_k
    BigInt W;                // ramp width times D
    BigInt plateau_floor;    // floor(plateau D)
    BigInt support_width;    // 2 W + ceil(plateau D); Y is inside iff 0 < Y - left < support_width
    std::size_t overlaps = 0;  // neighbouring support pairs that intersect, over all j
    Rational slope_plateau;  // slope * plateau
    std::vector<std::vector<LayerBump>> per_j;  // sorted by left

    /// Sum of coeff * theta over the bumps containing y = Y / D, in order of
    /// their position. A layer without overlaps hits at most one bump.
    double eval_scaled(int j, const BigInt& Y) const;
    double eval(int j, const Rational& y, const BigInt& D) const;
};

struct KChoice {
    int k = 1;
    bool warning = false;
    std::vector<double> h;      // gamma^-1 .. gamma^-k_max
    std::vector<double> omega;  // cumulative modulus at each h
    double threshold = 0.0;     // delta * ||e_{r-1}||
};

struct LipschitzReport {
    double nu_r = 0.0;           // paper formula with the measured ||f||
    double nu_r_measured = 0.0;  // with measured ||e_{l-1}|| in place of eta^{l-1} ||f||
    double K_C_bound = 0.0;
    int C = 0;
    bool within_K_C = false;
    std::vector<int> k_list;
};

/// Immutable snapshot after r iterations.
class DecompositionState {
public:
    static DecompositionState start(const KstParams& params, const TargetFunction& target,
                                    const DecompositionConfig& config = {});

    const DecompositionContext& context() const { return *ctx_; }
    std::shared_ptr<const DecompositionContext> context_ptr() const { return ctx_; }
    int r() const { return static_cast<int>(layers_.size()); }
    std::vector<int> k_list() const;
    std::vector<bool> k_warnings() const;
    const std::vector<double>& residual_norms() const { return norms_; }
    const std::vector<std::shared_ptr<const Layer>>& layers() const { return layers_; }
    /// e_r = f - f_r at the audit points.
    const std::vector<double>& audit_residual() const { return e_audit_; }

    /// The first r iterations of this run.
    DecompositionState truncated(int r) const;

    /// phi_j^r(y).
    double phi(int j, const Rational& y) const;
    /// f_r at an exact point of [0,1]^n.
    double f_r(const std::vector<Rational>& x) const;
    double f_r(const std::vector<double>& x) const;
    /// f_r at audit point p, using the cached shifted indices.
    double f_r_audit(std::size_t p) const;

    /// e_r on the lattice of spacing stride * gamma^-k_max, axis 0 fastest.
    std::vector<double> lattice_residual(std::uint64_t stride) const;

    friend DecompositionState iterate(const DecompositionState& s, std::optional<int> forced_k);

private:
    double f_r_indices(const std::uint32_t* idx, std::size_t stride_j) const;

    std::shared_ptr<const DecompositionContext> ctx_;
    std::vector<std::shared_ptr<const Layer>> layers_;
    std::vector<double> norms_;
    std::vector<double> e_audit_;
};

/// Smallest k in 1..k_max with cumulative modulus of e_{r-1} at gamma^-k at
/// most delta ||e_{r-1}||; k_max with a warning when none qualifies.
KChoice choose_k_r(const DecompositionState& s);
KChoice choose_k_from_lattice(const DecompositionContext& ctx, const std::vector<double>& e_lattice, double norm);

/// Adds one layer. forced_k replays a recorded run.
DecompositionState iterate(const DecompositionState& s, std::optional<int> forced_k = std::nullopt);

/// Runs iterations until r layers exist.
DecompositionState decompose(const KstParams& params, const TargetFunction& target, int r,
                             const DecompositionConfig& config = {});

double evaluate_phi(const DecompositionState& s, int j, double y);
double evaluate_f_r(const DecompositionState& s, const std::vector<double>& x);

LipschitzReport lipschitz_report(const DecompositionState& s);

/// Serialized state; bumps are listed per j and per layer.
void write_decomposition(const DecompositionState& s, std::ostream& out);
std::string decomposition_to_string(const DecompositionState& s);

/// Rebuilds the exact state by replaying the recorded k_list and checks the
/// recorded residual norms; the bump arrays in the file are not parsed.
DecompositionState load_decomposition(const std::string& path);
DecompositionState load_decomposition_text(const std::string& text);

/// Params subset stored in the decomposition file.
Json params_json(const KstParams& p);
KstParams params_from_json(const Json& j);

/// CSV rows (r, norm, eta^r bound, eta^r ||f|| bound).
std::string residual_csv(const DecompositionState& s);

}  // namespace kst

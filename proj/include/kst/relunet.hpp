#pragma once

#include "kst/decompose.hpp"
#include "kst/io.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace kst {

enum class UnitKind { Input, Relu, Linear };

const char* unit_kind_name(UnitKind k);

struct Unit {
    UnitKind kind = UnitKind::Linear;
    double bias = 0.0;
    int layer = 0;
};

struct Edge {
    std::uint32_t from = 0;
    std::uint32_t to = 0;
    double w = 0.0;
};

struct SizeReport {
    std::uint64_t W = 0;  // edges plus nonzero biases
    int L = 0;            // largest layer index
    std::uint64_t units = 0;
    std::uint64_t edges = 0;
};

/// Feed-forward ReLU network as a DAG with skip connections. A unit's sources
/// must already exist, so id order is a topological order. A unit computes
/// bias + sum w * source in edge insertion order; relu units clamp at 0.
class ReluNetwork {
public:
    int add_input();
    int add_unit(UnitKind kind, double bias, const std::vector<std::pair<int, double>>& sources);
    void mark_output(int id);

    /// Copies `sub` into this network. Sub input t is replaced by unit
    /// input_map[t]; returns the new ids of sub's outputs.
    std::vector<int> append(const ReluNetwork& sub, const std::vector<int>& input_map);

    std::size_t input_count() const { return inputs_.size(); }
    std::size_t output_count() const { return outputs_.size(); }
    const std::vector<Unit>& units() const { return units_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<int>& inputs() const { return inputs_; }
    const std::vector<int>& outputs() const { return outputs_; }

    std::vector<double> eval(const std::vector<double>& input) const;
    /// rows x input_count values in, rows x output_count values out.
    std::vector<double> eval_batch(const std::vector<double>& inputs, std::size_t rows) const;

    SizeReport size_report() const;

    /// {units, edges, meta{W, L, domain}} with reals as 17-digit strings.
    void write_json(std::ostream& out, const Json& domain) const;

private:
    struct Plan;
    void build_plan() const;

    std::vector<Unit> units_;
    std::vector<Edge> edges_;            // grouped by target, in id order
    std::vector<std::uint64_t> first_;   // first_[u] = first edge of unit u
    std::vector<int> inputs_;
    std::vector<int> outputs_;
    mutable std::shared_ptr<const Plan> plan_;
};

double relu(double x);

/// Realization templates for one-input networks.
enum class UnivariateForm {
    SumOfRelus,    // c0 + sum a_i ReLU(x - t_i)
    ClampedRamps,  // c0 + sum h_i clamp(G x - (P i + O), 0, 1)
    Bumps,         // sum c ReLU(1 - ReLU(s(xi - y)) - ReLU(s(y - xi - P)))
};

const char* univariate_form_name(UnivariateForm f);

struct BumpUnit {
    double b_left = 0.0;   // fl(s xi)
    double b_right = 0.0;  // -fl(s (xi + P))
    double slope = 0.0;
    double coeff = 0.0;
    double xi = 0.0;
};

struct BumpGroup {
    double slope = 0.0;
    double plateau = 0.0;
    double ramp = 0.0;
    std::vector<BumpUnit> bumps;  // ascending xi
};

/// Network of one input and one output on [0, M], plus the data of its
/// template so eval() can skip units that contribute exact zeros. eval()
/// returns the same double as net.eval() for every input.
struct UnivariateNet {
    ReluNetwork net;
    UnivariateForm form = UnivariateForm::SumOfRelus;
    double domain_hi = 1.0;
    std::vector<double> knots;
    std::vector<double> values;  // reference values at the knots
    double eps_measured = 0.0;   // sup error on a 10x finer grid (interpolants)

    // ClampedRamps; ramp i rises over z = G x in [P i + O, P i + O + 1]
    double ramp_gain = 0.0;
    int ramp_period = 1;
    int ramp_offset = 0;
    std::vector<double> prefix;  // output after i full cells
    std::vector<double> heights;
    // SumOfRelus
    double c0 = 0.0;
    std::vector<double> slopes_delta;
    // Bumps
    std::vector<BumpGroup> groups;

    double eval(double x) const;
    SizeReport size() const { return net.size_report(); }
};

/// Linear interpolant of g at knots i M / N as c0 + sum a_i ReLU(x - t_i).
/// eps_measured is the sup of |net - g| over 10 N + 1 uniform points.
UnivariateNet build_univariate(const std::function<double(double)>& g, double M, int N);

/// ClampedRamps network through values[i] at knots i / G, i = 0..N. With
/// period P and offset O < P, the step from values[i] to values[i+1] happens
/// on [(i + O/P) / G, (i + (O+1)/P) / G] and the net is flat elsewhere; P = 1,
/// O = 0 is the linear interpolant. Heights are chosen so the network
/// reproduces the nearest double of each knot value under its own summation
/// order.
UnivariateNet build_interpolant(const std::vector<Rational>& values, std::uint64_t G, int period = 1,
                                int offset = 0);

/// psi_K on knots t_i = i gamma^-K covering [0, 1 + m a]. On [t_i, c_i] with
/// c_i = t_i + (gamma-2)/(gamma-1) gamma^-K, psi stays within
/// (gamma-2) sum_{l>K} gamma^-beta(l) of psi(t_i), so the net is flat there and
/// rises linearly on [c_i, t_{i+1}].
UnivariateNet build_psi_net(const DecompositionContext& ctx);

/// phi_j^r as a sum of exact bump units; zero-coefficient bumps are omitted.
UnivariateNet build_phi_net(const DecompositionState& s, int j);

struct AssemblyAccounting {
    std::uint64_t W_literal = 0;
    std::uint64_t W_psi = 0;
    std::vector<std::uint64_t> W_phi;
    std::uint64_t W_phi_sum = 0;
    std::uint64_t W_phi_max = 0;
    std::uint64_t aggregation = 0;  // shift edges and biases, lambda edges, final sum
    std::uint64_t W_formula = 0;         // (2n^2+n) W_psi + sum_j W_phi_j
    std::uint64_t W_formula_uniform = 0; // (2n^2+n) W_psi + (2n+1) max_j W_phi_j
    int L = 0;
    std::uint64_t psi_copies = 0;

    Json to_json() const;
};

struct KstNetwork {
    ReluNetwork net;
    AssemblyAccounting accounting;
};

/// Wires n(m+1) copies of psi_net and one copy of each phi net into the
/// superposition sum_j phi_j(sum_i lambda_i psi(x_i + j a)).
KstNetwork assemble_kst(const UnivariateNet& psi_net, const std::vector<UnivariateNet>& phi_nets,
                        const KstParams& params, const LambdaCoeffs& lambdas);

/// The same superposition computed from the univariate nets directly, with
/// the assembled network's operation order.
double compose_kst(const UnivariateNet& psi_net, const std::vector<UnivariateNet>& phi_nets,
                   const KstParams& params, const std::vector<double>& lambdas, const double* x);

}  // namespace kst

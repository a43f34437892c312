#include "kst/relunet.hpp"

#include "kst/errors.hpp"
#include "kst/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kst {

namespace {

constexpr std::size_t kBatch = 32;

}  // namespace

double relu(double x) { return x > 0.0 ? x : 0.0; }

const char* unit_kind_name(UnitKind k) {
    switch (k) {
    case UnitKind::Input: return "input";
    case UnitKind::Relu: return "relu";
    case UnitKind::Linear: return "linear";
    }
    return "?";
}

const char* univariate_form_name(UnivariateForm f) {
    switch (f) {
    case UnivariateForm::SumOfRelus: return "sum_of_relus";
    case UnivariateForm::ClampedRamps: return "clamped_ramps";
    case UnivariateForm::Bumps: return "bumps";
    }
    return "?";
}

// ---------------------------------------------------------------- ReluNetwork

struct ReluNetwork::Plan {
    std::vector<std::uint32_t> slot;
    std::size_t slots = 0;
};

int ReluNetwork::add_input() {
    if (first_.empty()) first_.push_back(0);
    const int id = static_cast<int>(units_.size());
    units_.push_back(Unit{UnitKind::Input, 0.0, 0});
    first_.push_back(edges_.size());
    inputs_.push_back(id);
    plan_.reset();
    return id;
}

int ReluNetwork::add_unit(UnitKind kind, double bias, const std::vector<std::pair<int, double>>& sources) {
    if (kind == UnitKind::Input) throw InternalError("use add_input for input units");
    if (first_.empty()) first_.push_back(0);
    const int id = static_cast<int>(units_.size());
    int layer = 0;
    for (const auto& [src, w] : sources) {
        if (src < 0 || src >= id) throw InternalError("edge source must precede its target");
        layer = std::max(layer, units_[src].layer);
        edges_.push_back(Edge{static_cast<std::uint32_t>(src), static_cast<std::uint32_t>(id), w});
    }
    units_.push_back(Unit{kind, bias, layer + 1});
    first_.push_back(edges_.size());
    plan_.reset();
    return id;
}

void ReluNetwork::mark_output(int id) {
    if (id < 0 || id >= static_cast<int>(units_.size())) throw InternalError("output id out of range");
    outputs_.push_back(id);
    plan_.reset();
}

std::vector<int> ReluNetwork::append(const ReluNetwork& sub, const std::vector<int>& input_map) {
    if (input_map.size() != sub.inputs_.size()) throw InternalError("input map does not match the subnetwork");
    std::vector<int> map(sub.units_.size(), -1);
    for (std::size_t t = 0; t < sub.inputs_.size(); ++t) map[sub.inputs_[t]] = input_map[t];
    std::vector<std::pair<int, double>> src;
    for (std::size_t u = 0; u < sub.units_.size(); ++u) {
        if (sub.units_[u].kind == UnitKind::Input) {
            if (map[u] < 0) throw InternalError("unmapped subnetwork input");
            continue;
        }
        src.clear();
        for (std::uint64_t e = sub.first_[u]; e < sub.first_[u + 1]; ++e)
            src.emplace_back(map[sub.edges_[e].from], sub.edges_[e].w);
        map[u] = add_unit(sub.units_[u].kind, sub.units_[u].bias, src);
    }
    std::vector<int> outs;
    for (int o : sub.outputs_) outs.push_back(map[o]);
    return outs;
}

void ReluNetwork::build_plan() const {
    auto plan = std::make_shared<Plan>();
    const std::size_t U = units_.size();
    constexpr std::int64_t kForever = std::numeric_limits<std::int64_t>::max();
    std::vector<std::int64_t> last(U);
    for (std::size_t u = 0; u < U; ++u) last[u] = static_cast<std::int64_t>(u);
    for (const Edge& e : edges_) last[e.from] = std::max<std::int64_t>(last[e.from], e.to);
    for (int o : outputs_) last[o] = kForever;
    plan->slot.resize(U);
    std::vector<std::uint32_t> free_slots;
    for (std::size_t u = 0; u < U; ++u) {
        if (free_slots.empty()) {
            plan->slot[u] = static_cast<std::uint32_t>(plan->slots++);
        } else {
            plan->slot[u] = free_slots.back();
            free_slots.pop_back();
        }
        for (std::uint64_t e = first_[u]; e < first_[u + 1]; ++e) {
            const std::uint32_t s = edges_[e].from;
            if (last[s] == static_cast<std::int64_t>(u)) {
                free_slots.push_back(plan->slot[s]);
                last[s] = -1;
            }
        }
        if (last[u] == static_cast<std::int64_t>(u)) {  // never read
            free_slots.push_back(plan->slot[u]);
            last[u] = -1;
        }
    }
    plan_ = plan;
}

std::vector<double> ReluNetwork::eval(const std::vector<double>& input) const {
    return eval_batch(input, 1);
}

std::vector<double> ReluNetwork::eval_batch(const std::vector<double>& inputs, std::size_t rows) const {
    const std::size_t nin = inputs_.size();
    if (inputs.size() != rows * nin)
        throw InputError("network expects " + std::to_string(nin) + " inputs per row");
    if (!plan_) build_plan();
    const Plan& plan = *plan_;
    const std::size_t nout = outputs_.size();
    std::vector<double> out(rows * nout);
    const std::size_t blocks = (rows + kBatch - 1) / kBatch;
    const std::size_t workers = std::min<std::size_t>(std::max(1, thread_count()), std::max<std::size_t>(blocks, 1));
    std::vector<std::size_t> input_pos(units_.size(), 0);
    for (std::size_t t = 0; t < nin; ++t) input_pos[inputs_[t]] = t;

    auto run = [&](std::size_t w) {
        std::vector<double> buf(plan.slots * kBatch);
        for (std::size_t blk = w; blk < blocks; blk += workers) {
            const std::size_t r0 = blk * kBatch;
            const std::size_t nb = std::min(kBatch, rows - r0);
            for (std::size_t u = 0; u < units_.size(); ++u) {
                double* v = &buf[plan.slot[u] * kBatch];
                const Unit& unit = units_[u];
                if (unit.kind == UnitKind::Input) {
                    for (std::size_t b = 0; b < nb; ++b) v[b] = inputs[(r0 + b) * nin + input_pos[u]];
                    continue;
                }
                for (std::size_t b = 0; b < nb; ++b) v[b] = unit.bias;
                for (std::uint64_t e = first_[u]; e < first_[u + 1]; ++e) {
                    const double wgt = edges_[e].w;
                    const double* src = &buf[plan.slot[edges_[e].from] * kBatch];
                    for (std::size_t b = 0; b < nb; ++b) v[b] += wgt * src[b];
                }
                if (unit.kind == UnitKind::Relu)
                    for (std::size_t b = 0; b < nb; ++b) v[b] = relu(v[b]);
            }
            for (std::size_t b = 0; b < nb; ++b)
                for (std::size_t o = 0; o < nout; ++o)
                    out[(r0 + b) * nout + o] = buf[plan.slot[outputs_[o]] * kBatch + b];
        }
    };
    parallel_for(workers, run);
    return out;
}

SizeReport ReluNetwork::size_report() const {
    SizeReport r;
    r.units = units_.size();
    r.edges = edges_.size();
    r.W = edges_.size();
    for (const Unit& u : units_) {
        if (u.bias != 0.0) ++r.W;
        r.L = std::max(r.L, u.layer);
    }
    return r;
}

void ReluNetwork::write_json(std::ostream& out, const Json& domain) const {
    const SizeReport sr = size_report();
    Json meta{{"W", sr.W}, {"L", sr.L}, {"domain", domain}, {"inputs", inputs_}, {"outputs", outputs_}};
    out << "{\"edges\":[";
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        if (e) out << ',';
        out << "{\"from\":" << edges_[e].from << ",\"to\":" << edges_[e].to << ",\"w\":\"" << decimal17(edges_[e].w)
            << "\"}";
    }
    out << "],\"meta\":" << meta.dump() << ",\"units\":[";
    for (std::size_t u = 0; u < units_.size(); ++u) {
        if (u) out << ',';
        out << "{\"bias\":\"" << decimal17(units_[u].bias) << "\",\"id\":" << u << ",\"kind\":\""
            << unit_kind_name(units_[u].kind) << "\",\"layer\":" << units_[u].layer << '}';
    }
    out << "]}\n";
}

// ---------------------------------------------------------------- univariate nets

double UnivariateNet::eval(double x) const {
    switch (form) {
    case UnivariateForm::SumOfRelus: {
        double s = c0;
        for (std::size_t i = 0; i < slopes_delta.size(); ++i) s += slopes_delta[i] * relu(-knots[i] + x);
        return s;
    }
    case UnivariateForm::ClampedRamps: {
        const double z = ramp_gain * x;
        const std::size_t N = heights.size();
        const double P = ramp_period, O = ramp_offset;
        // q = number of ramps with P q + O + 1 <= z
        std::size_t q = 0;
        if (z >= O + 1) {
            const double fq = std::floor((z - O - 1) / P) + 1;
            q = fq >= static_cast<double>(N) ? N : static_cast<std::size_t>(fq);
            while (q < N && P * static_cast<double>(q) + O + 1 <= z) ++q;
            while (q > 0 && P * static_cast<double>(q - 1) + O + 1 > z) --q;
        }
        if (q >= N) return prefix[N];
        const double frac = std::max(0.0, z - (P * static_cast<double>(q) + O));
        return prefix[q] + heights[q] * frac;
    }
    case UnivariateForm::Bumps: {
        double s = 0.0;
        constexpr double tol = 0x1.0p-40;
        for (const BumpGroup& g : groups) {
            const double lo = x - g.plateau - 2 * g.ramp - tol;
            const double hi = x + 2 * g.ramp + tol;
            auto it = std::lower_bound(g.bumps.begin(), g.bumps.end(), lo,
                                       [](const BumpUnit& b, double v) { return b.xi < v; });
            for (; it != g.bumps.end() && it->xi <= hi; ++it) {
                const double u1 = relu(it->b_left + -it->slope * x);
                const double u2 = relu(it->b_right + it->slope * x);
                const double u3 = relu(1.0 + -1.0 * u1 + -1.0 * u2);
                s += it->coeff * u3;
            }
        }
        return s;
    }
    }
    throw InternalError("unknown univariate form");
}

UnivariateNet build_univariate(const std::function<double(double)>& g, double M, int N) {
    if (N < 1) throw InputError("interpolation needs N >= 1");
    if (!(M > 0.0) || !std::isfinite(M)) throw InputError("interpolation domain must be [0, M] with M > 0");
    UnivariateNet u;
    u.form = UnivariateForm::SumOfRelus;
    u.domain_hi = M;
    for (int i = 0; i <= N; ++i) {
        const double t = M * i / N;
        const double v = g(t);
        if (!std::isfinite(v)) throw DomainError("interpolated function is not finite at " + decimal17(t));
        u.knots.push_back(t);
        u.values.push_back(v);
    }
    u.c0 = u.values[0];
    double prev = 0.0;
    for (int i = 0; i < N; ++i) {
        const double slope = (u.values[i + 1] - u.values[i]) / (u.knots[i + 1] - u.knots[i]);
        u.slopes_delta.push_back(slope - prev);
        prev = slope;
    }
    const int x = u.net.add_input();
    std::vector<std::pair<int, double>> out_src;
    for (int i = 0; i < N; ++i) {
        const int h = u.net.add_unit(UnitKind::Relu, -u.knots[i], {{x, 1.0}});
        out_src.emplace_back(h, u.slopes_delta[i]);
    }
    u.net.mark_output(u.net.add_unit(UnitKind::Linear, u.c0, out_src));

    const int audit = 10 * N;
    double worst = 0.0;
    for (int q = 0; q <= audit; ++q) {
        const double t = M * q / audit;
        worst = std::max(worst, std::fabs(u.eval(t) - g(t)));
    }
    u.eps_measured = worst;
    return u;
}

UnivariateNet build_interpolant(const std::vector<Rational>& values, std::uint64_t G, int period, int offset) {
    if (values.size() < 2) throw InputError("interpolant needs at least two knots");
    if (period < 1 || offset < 0 || offset >= period) throw InputError("ramp offset must lie in [0, period)");
    const std::size_t N = values.size() - 1;
    UnivariateNet u;
    u.form = UnivariateForm::ClampedRamps;
    u.ramp_gain = static_cast<double>(G) * period;
    u.ramp_period = period;
    u.ramp_offset = offset;
    u.domain_hi = static_cast<double>(N) / static_cast<double>(G);
    std::vector<double> target(N + 1);
    for (std::size_t i = 0; i <= N; ++i) {
        target[i] = to_double(values[i]);
        u.knots.push_back(static_cast<double>(i) / static_cast<double>(G));
    }
    u.values = target;
    u.prefix.push_back(target[0]);
    for (std::size_t i = 0; i < N; ++i) {
        const double s = u.prefix.back();
        double h = target[i + 1] - s;
        for (int tries = 0; tries < 8 && s + h != target[i + 1]; ++tries)
            h = std::nextafter(h, s + h < target[i + 1] ? std::numeric_limits<double>::infinity()
                                                        : -std::numeric_limits<double>::infinity());
        u.heights.push_back(h);
        u.prefix.push_back(s + h);
    }

    // Ramp i is relu(z - s_i) - relu(z - s_i - 1) with s_i = P i + O. Both
    // differences are exact for integer s_i, so the clamp is exact.
    const int x = u.net.add_input();
    const auto start = [&](std::size_t i) { return static_cast<double>(period) * static_cast<double>(i) + offset; };
    std::vector<std::pair<int, double>> out_src;
    if (period == 1 && offset == 0) {
        std::vector<int> A(N + 1);
        for (std::size_t i = 0; i <= N; ++i)
            A[i] = u.net.add_unit(UnitKind::Relu, -start(i), {{x, u.ramp_gain}});
        for (std::size_t i = 0; i < N; ++i) {
            const int c = u.net.add_unit(UnitKind::Relu, 0.0, {{A[i], 1.0}, {A[i + 1], -1.0}});
            out_src.emplace_back(c, u.heights[i]);
        }
    } else {
        std::vector<int> A(N), B(N);
        for (std::size_t i = 0; i < N; ++i) {
            A[i] = u.net.add_unit(UnitKind::Relu, -start(i), {{x, u.ramp_gain}});
            B[i] = u.net.add_unit(UnitKind::Relu, -(start(i) + 1), {{x, u.ramp_gain}});
        }
        for (std::size_t i = 0; i < N; ++i) {
            const int c = u.net.add_unit(UnitKind::Relu, 0.0, {{A[i], 1.0}, {B[i], -1.0}});
            out_src.emplace_back(c, u.heights[i]);
        }
    }
    u.net.mark_output(u.net.add_unit(UnitKind::Linear, target[0], out_src));
    return u;
}

UnivariateNet build_psi_net(const DecompositionContext& ctx) {
    const KstParams& p = ctx.params;
    const Rational top = (1 + p.m * p.a) * Rational(BigInt(static_cast<unsigned long>(ctx.g_trunc)));
    BigInt N = floor_of(top);
    if (Rational(N) < top) N += 1;
    const std::uint64_t count = to_u64(N) + 1;
    return build_interpolant(ctx.ev->table(ctx.k_trunc, count), ctx.g_trunc, p.gamma - 1, p.gamma - 2);
}

UnivariateNet build_phi_net(const DecompositionState& s, int j) {
    const auto& ctx = s.context();
    if (j < 0 || j > ctx.params.m) throw DomainError("outer index j outside 0..m");
    const int g = ctx.params.gamma;
    UnivariateNet u;
    u.form = UnivariateForm::Bumps;
    u.domain_hi = 2.0 * (g - 1) / (g - 2);
    const int y = u.net.add_input();
    std::vector<std::pair<int, double>> out_src;
    for (const auto& layer : s.layers()) {
        BumpGroup grp;
        grp.slope = to_double(layer->slope);
        grp.plateau = to_double(layer->plateau);
        grp.ramp = to_double(1 / layer->slope);
        const BigInt sl = layer->slope.get_num();  // slope is an integer
        const Rational sP = layer->slope_plateau;
        for (const LayerBump& b : layer->per_j[j]) {
            if (b.coeff == 0.0) continue;
            const BigInt X = b.left + layer->W;
            BumpUnit bu;
            bu.slope = grp.slope;
            bu.coeff = b.coeff;
            bu.xi = ratio_to_double(X, ctx.D);
            bu.b_left = ratio_to_double(sl * X, ctx.D);
            // s (xi + P) = (s X + sP D) / D
            Rational right(sl * X, ctx.D);
            right.canonicalize();
            right += sP;
            bu.b_right = -to_double(right);
            grp.bumps.push_back(bu);
        }
        for (const BumpUnit& bu : grp.bumps) {
            const int u1 = u.net.add_unit(UnitKind::Relu, bu.b_left, {{y, -bu.slope}});
            const int u2 = u.net.add_unit(UnitKind::Relu, bu.b_right, {{y, bu.slope}});
            const int u3 = u.net.add_unit(UnitKind::Relu, 1.0, {{u1, -1.0}, {u2, -1.0}});
            out_src.emplace_back(u3, bu.coeff);
        }
        u.groups.push_back(std::move(grp));
    }
    u.net.mark_output(u.net.add_unit(UnitKind::Linear, 0.0, out_src));
    return u;
}

// ---------------------------------------------------------------- assembly

Json AssemblyAccounting::to_json() const {
    return Json{{"W_literal", W_literal},     {"W_psi", W_psi},           {"W_phi", W_phi},
                {"W_phi_sum", W_phi_sum},     {"W_phi_max", W_phi_max},   {"aggregation", aggregation},
                {"W_formula", W_formula},               {"W_formula_uniform", W_formula_uniform}, {"L", L},
                {"psi_copies", psi_copies}};
}

KstNetwork assemble_kst(const UnivariateNet& psi_net, const std::vector<UnivariateNet>& phi_nets,
                        const KstParams& p, const LambdaCoeffs& lambdas) {
    const int n = p.n;
    const int m = p.m;
    if (static_cast<int>(phi_nets.size()) != m + 1)
        throw InputError("assembly needs m + 1 = " + std::to_string(m + 1) + " outer networks");
    const double psi_need = to_double(1 + m * p.a);
    if (psi_net.domain_hi < psi_need)
        throw DomainError("inner network covers [0, " + decimal17(psi_net.domain_hi) + "], needs [0, 1 + m a]");
    const double phi_need = 2.0 * (p.gamma - 1) / (p.gamma - 2);
    for (const auto& ph : phi_nets)
        if (ph.domain_hi < phi_need) throw DomainError("outer network does not cover [0, 2(gamma-1)/(gamma-2))");
    const std::vector<double> lam = lambdas.as_doubles();

    KstNetwork out;
    ReluNetwork& net = out.net;
    std::vector<int> x(n);
    for (int i = 0; i < n; ++i) x[i] = net.add_input();
    std::vector<int> finals;
    for (int j = 0; j <= m; ++j) {
        const double shift = to_double(j * p.a);
        std::vector<std::pair<int, double>> agg;
        for (int i = 0; i < n; ++i) {
            const int s = net.add_unit(UnitKind::Linear, shift, {{x[i], 1.0}});
            const int o = net.append(psi_net.net, {s}).at(0);
            agg.emplace_back(o, lam[i]);
        }
        const int a = net.add_unit(UnitKind::Linear, 0.0, agg);
        finals.emplace_back(net.append(phi_nets[j].net, {a}).at(0));
    }
    std::vector<std::pair<int, double>> fin;
    for (int f : finals) fin.emplace_back(f, 1.0);
    net.mark_output(net.add_unit(UnitKind::Linear, 0.0, fin));

    AssemblyAccounting& acc = out.accounting;
    const SizeReport total = net.size_report();
    acc.W_literal = total.W;
    acc.L = total.L;
    acc.W_psi = psi_net.net.size_report().W;
    for (const auto& ph : phi_nets) {
        const std::uint64_t w = ph.net.size_report().W;
        acc.W_phi.push_back(w);
        acc.W_phi_sum += w;
        acc.W_phi_max = std::max(acc.W_phi_max, w);
    }
    const std::uint64_t copies = static_cast<std::uint64_t>(n) * (m + 1);
    acc.psi_copies = copies;
    // shift edges, nonzero shift biases (j >= 1), lambda edges, final sum edges
    acc.aggregation = copies + static_cast<std::uint64_t>(n) * m + copies + (m + 1);
    acc.W_formula = copies * acc.W_psi + acc.W_phi_sum;
    acc.W_formula_uniform = copies * acc.W_psi + (m + 1) * acc.W_phi_max;
    if (acc.W_literal != acc.W_formula + acc.aggregation)
        throw InternalError("assembled size " + std::to_string(acc.W_literal) + " differs from the accounting " +
                            std::to_string(acc.W_formula + acc.aggregation));
    return out;
}

double compose_kst(const UnivariateNet& psi_net, const std::vector<UnivariateNet>& phi_nets, const KstParams& p,
                   const std::vector<double>& lambdas, const double* x) {
    double total = 0.0;
    for (int j = 0; j <= p.m; ++j) {
        const double shift = to_double(j * p.a);
        double y = 0.0;
        for (int i = 0; i < p.n; ++i) y += lambdas[i] * psi_net.eval(shift + 1.0 * x[i]);
        total += 1.0 * phi_nets[j].eval(y);
    }
    return total;
}

}  // namespace kst

#include "kst/pipeline.hpp"

#include "kst/errors.hpp"
#include "kst/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace kst {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Rational abs_diff(double a, double b) { return abs(from_double(a) - from_double(b)); }

struct ExactMax {
    Rational f_fr, fr_net, f_net;
    std::uint64_t points = 0;

    void add(double f, double fr, double net) {
        Rational a = abs_diff(f, fr), b = abs_diff(fr, net), c = abs_diff(f, net);
        if (a > f_fr) f_fr = a;
        if (b > fr_net) fr_net = b;
        if (c > f_net) f_net = c;
        ++points;
    }
    void merge(const ExactMax& o) {
        if (o.f_fr > f_fr) f_fr = o.f_fr;
        if (o.fr_net > fr_net) fr_net = o.fr_net;
        if (o.f_net > f_net) f_net = o.f_net;
        points += o.points;
    }
    ErrorTriple triple() const {
        ErrorTriple t;
        t.f_fr = to_double(f_fr);
        t.fr_net = to_double(fr_net);
        t.f_net = to_double(f_net);
        t.triangle_ok = f_net <= f_fr + fr_net;
        t.points = points;
        return t;
    }
};

}  // namespace

int r_of_epsilon(double eta, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0, 1)");
    if (!(eta > 0.0 && eta < 1.0)) throw DomainError("eta must lie in (0, 1)");
    return static_cast<int>(std::ceil(std::log(2.0 / eps) / std::log(1.0 / eta)));
}

EpsilonSplit epsilon_split(const KstParams& p, double nu_r, double eps) {
    if (!(nu_r > 0.0)) throw DomainError("epsilon split needs nu_r > 0");
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0, 1)");
    const double n = p.n;
    const double w = 2 * n + 1;
    return EpsilonSplit{n * eps / (2 * w * w * nu_r), eps / (4 * w)};
}

Json ErrorTriple::to_json() const {
    return Json{{"f_minus_fr", json_real(f_fr)},
                {"fr_minus_net", json_real(fr_net)},
                {"f_minus_net", json_real(f_net)},
                {"triangle_ok", triangle_ok},
                {"points", points}};
}

Json SizeBound::to_json() const {
    return Json{{"placeholders", {{"c0", json_real(c0)}, {"c1", json_real(c1)}, {"c2", json_real(c2)}}},
                {"exponent_psi", json_real(exponent_psi)},
                {"exponent_phi", json_real(0.5)},
                {"r", r},
                {"C", C},
                {"c3", json_real(c3)},
                {"c4", json_real(c4)},
                {"c3_tilde", json_real(c3_tilde)},
                {"c4_tilde", json_real(c4_tilde)},
                {"W_bound", json_real(W_bound)},
                {"L_bound", json_real(L_bound)},
                {"W_measured", W_measured},
                {"L_measured", L_measured},
                {"W_within", W_within},
                {"L_within", L_within},
                {"symbolic",
                 "W <= n(2n+1) c3~ eps^-[1+log2(n+1)]/2 + (2n+1) c4~ eps^-1/2; "
                 "c3 = [(2n+5) c1]^([1+log2(n+1)]/2) c2^(1/2); c4 = [c1 c2 / n * r (2n+2)^(2 n^C)]^(1/2); "
                 "c3~ = [(4n+2)/n * r (2n+2)^(2 n^C)]^([1+log2(n+1)]/2) c3; c4~ = (8n+4)^(1/2) c4"}};
}

std::string SizeBound::csv() const {
    CsvTable t({"quantity", "measured", "bound", "within"});
    t.add_row({"W", std::to_string(W_measured), decimal17(W_bound), W_within ? "true" : "false"});
    t.add_row({"L", std::to_string(L_measured), decimal17(L_bound), L_within ? "true" : "false"});
    return t.text();
}

Json PipelineReport::to_json() const {
    Json norms = Json::array();
    for (double v : residual_norms) norms.push_back(json_real(v));
    return Json{
        {"target", target},
        {"seed", seed},
        {"eps", json_real(eps)},
        {"eta", json_real(eta)},
        {"r_needed", r_needed},
        {"r_used", r_used},
        {"partial", partial},
        {"k_list", k_list},
        {"residual_norms", norms},
        {"nu_r", json_real(nu_r)},
        {"nu_r_measured", json_real(nu_r_measured)},
        {"K_C_bound", json_real(K_C_bound)},
        {"eps_psi", json_real(eps_psi)},
        {"eps_phi", json_real(eps_phi)},
        {"psi",
         {{"depth", psi_depth},
          {"knots", psi_knots},
          {"error_bound", json_real(psi_error_bound)},
          {"required_knots", json_real(psi_required_knots)},
          {"accuracy_certified", psi_certified},
          {"eps_measured", json_real(psi_eps_measured)}}},
        {"phi", {{"required_knots", json_real(phi_required_knots)}, {"eps_measured", json_real(phi_eps_measured)}}},
        {"errors", {{"audit_grid", grid.to_json()}, {"random", random.to_json()}, {"all", total.to_json()}}},
        {"network_half_ok_grid", network_half_ok_grid},
        {"full_ok_grid", full_ok_grid},
        {"network_half_ok", network_half_ok},
        {"full_ok", full_ok},
        {"dense_checked", dense_checked},
        {"accounting", accounting.to_json()},
        {"size", {{"W", size.W}, {"L", size.L}, {"units", size.units}, {"edges", size.edges}}},
        {"size_bound", bound.to_json()},
    };
}

SizeBound size_bound_report(const PipelineReport& rep, const KstParams& p) {
    SizeBound b;
    const double n = p.n;
    b.exponent_psi = (1.0 + std::log2(n + 1.0)) / 2.0;
    b.r = rep.r_needed;
    b.C = rep.k_list.empty() ? 1 : *std::max_element(rep.k_list.begin(), rep.k_list.end());
    const double growth = b.r * std::pow(2 * n + 2, 2.0 * std::pow(n, b.C));  // r (2n+2)^(2 n^C)
    b.c3 = std::pow((2 * n + 5) * b.c1, b.exponent_psi) * std::sqrt(b.c2);
    b.c4 = std::sqrt(b.c1 * b.c2 / n * growth);
    b.c3_tilde = std::pow((4 * n + 2) / n * growth, b.exponent_psi) * b.c3;
    b.c4_tilde = std::sqrt(8 * n + 4) * b.c4;
    const double e1 = std::pow(rep.eps, -b.exponent_psi);
    const double e2 = std::pow(rep.eps, -0.5);
    b.W_bound = n * (2 * n + 1) * b.c3_tilde * e1 + (2 * n + 1) * b.c4_tilde * e2;
    b.L_bound = b.c0 * b.c3_tilde * e1 + b.c0 * b.c4_tilde * e2;
    b.W_measured = rep.size.W;
    b.L_measured = rep.size.L;
    b.W_within = static_cast<double>(b.W_measured) <= b.W_bound;
    b.L_within = static_cast<double>(b.L_measured) <= b.L_bound;
    return b;
}

PipelineResult run_pipeline(const DecompositionState& s_full, double eps, const PipelineCaps& caps) {
    const auto& ctx = s_full.context();
    const KstParams& p = ctx.params;
    const int n = p.n;
    PipelineResult res;
    PipelineReport& rep = res.report;
    rep.target = ctx.target.provenance;
    rep.seed = ctx.config.seed;
    rep.eps = eps;
    rep.eta = p.eta;
    rep.r_needed = r_of_epsilon(p.eta, eps);
    if (caps.r_cap < 1) throw InputError("r_cap must be positive");
    rep.r_used = std::min({rep.r_needed, caps.r_cap, s_full.r()});
    if (rep.r_used < 1) throw InputError("the decomposition has no iterations");
    auto t0 = Clock::now();
    res.state = s_full.truncated(rep.r_used);
    const DecompositionState& s = res.state;
    res.timings.push_back({"truncate", seconds_since(t0)});
    rep.k_list = s.k_list();
    rep.residual_norms = s.residual_norms();

    const LipschitzReport lip = lipschitz_report(s);
    rep.nu_r = lip.nu_r;
    rep.nu_r_measured = lip.nu_r_measured;
    rep.K_C_bound = lip.K_C_bound;
    if (rep.nu_r > 0.0) {
        const EpsilonSplit sp = epsilon_split(p, rep.nu_r, eps);
        rep.eps_psi = sp.eps_psi;
        rep.eps_phi = sp.eps_phi;
    } else {
        // f_r vanishes, so the inner accuracy is unconstrained
        rep.eps_psi = std::numeric_limits<double>::infinity();
        rep.eps_phi = eps / (4.0 * (2 * n + 1));
    }

    // Inner network.
    t0 = Clock::now();
    res.psi = build_psi_net(ctx);
    rep.psi_depth = ctx.k_trunc;
    rep.psi_knots = res.psi.heights.size() + 1;
    rep.psi_error_bound = p.nu * std::ldexp(1.0, -ctx.k_trunc);
    const double psi_domain = to_double(1 + p.m * p.a);
    rep.psi_required_knots =
        std::isinf(rep.eps_psi) ? 1.0 : std::ceil(psi_domain * std::pow(p.nu / rep.eps_psi, 1.0 / p.alpha));
    rep.psi_certified = rep.psi_error_bound <= rep.eps_psi;
    {
        // psi is exact on the finer grid gamma^-(K+1), so this is a true lower bound on the sup error.
        const int K1 = ctx.k_trunc + 1;
        const std::uint64_t g1 = ctx.g_trunc * p.gamma;
        const std::uint64_t count = static_cast<std::uint64_t>(std::floor(psi_domain * g1)) + 1;
        const std::vector<Rational> exact = ctx.ev->table(K1, count);
        double worst = 0.0;
        for (std::uint64_t i = 0; i < count; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(g1);
            worst = std::max(worst, to_double(abs(from_double(res.psi.eval(t)) - exact[i])));
        }
        rep.psi_eps_measured = worst;
    }
    res.timings.push_back({"psi_net", seconds_since(t0)});

    // Outer networks.
    t0 = Clock::now();
    const double phi_domain = 2.0 * (p.gamma - 1) / (p.gamma - 2);
    rep.phi_required_knots = std::ceil(rep.nu_r * phi_domain / (2.0 * rep.eps_phi));
    res.phi.resize(p.m + 1);
    parallel_for(static_cast<std::size_t>(p.m + 1), [&](std::size_t j) { res.phi[j] = build_phi_net(s, static_cast<int>(j)); });
    {
        std::vector<double> worst(p.m + 1, 0.0);
        parallel_for(static_cast<std::size_t>(p.m + 1), [&](std::size_t j) {
            std::vector<double> ys;
            std::mt19937_64 rng(ctx.config.seed ^ (0x9e3779b97f4a7c15ULL * (j + 1)));
            for (int q = 0; q < 256; ++q) ys.push_back(unit_draw(rng()) * phi_domain);
            for (const BumpGroup& g : res.phi[j].groups) {
                const std::size_t stride = std::max<std::size_t>(1, g.bumps.size() / 64);
                for (std::size_t b = 0; b < g.bumps.size(); b += stride) {
                    const double xi = g.bumps[b].xi;
                    ys.push_back(xi + g.plateau / 2);
                    ys.push_back(xi - g.ramp / 2);
                    ys.push_back(xi + g.plateau + g.ramp / 2);
                }
            }
            for (double y : ys) {
                if (!(y >= 0.0 && y < phi_domain)) continue;
                const double exact = s.phi(static_cast<int>(j), from_double(y));
                worst[j] = std::max(worst[j], std::fabs(res.phi[j].eval(y) - exact));
            }
        });
        rep.phi_eps_measured = *std::max_element(worst.begin(), worst.end());
    }
    res.timings.push_back({"phi_nets", seconds_since(t0)});

    // Assembly.
    t0 = Clock::now();
    res.network = assemble_kst(res.psi, res.phi, p, ctx.lambdas);
    rep.accounting = res.network.accounting;
    rep.size = res.network.net.size_report();
    res.timings.push_back({"assemble", seconds_since(t0)});

    // Errors on the audit set and on extra random points.
    t0 = Clock::now();
    const std::vector<double> lam = ctx.lambdas.as_doubles();
    std::vector<double> net_audit(ctx.audit_count);
    const std::size_t grid_count = ctx.audit_count - static_cast<std::size_t>(ctx.config.random_points);
    ExactMax grid_max, random_max;
    {
        std::vector<ExactMax> parts(ctx.audit_count);
        parallel_for(ctx.audit_count, [&](std::size_t q) {
            const double* x = &ctx.audit_x[q * n];
            net_audit[q] = compose_kst(res.psi, res.phi, p, lam, x);
            parts[q].add(ctx.audit_f[q], s.f_r_audit(q), net_audit[q]);
        });
        for (std::size_t q = 0; q < ctx.audit_count; ++q) (q < grid_count ? grid_max : random_max).merge(parts[q]);
    }
    {
        std::mt19937_64 rng(ctx.config.seed + 0x51ed27);
        const int E = std::max(0, caps.extra_random);
        std::vector<double> xs(static_cast<std::size_t>(E) * n);
        for (double& v : xs) v = unit_draw(rng());
        std::vector<ExactMax> parts(E);
        parallel_for(static_cast<std::size_t>(E), [&](std::size_t q) {
            std::vector<double> x(xs.begin() + q * n, xs.begin() + (q + 1) * n);
            parts[q].add(ctx.target.eval(x.data()), s.f_r(x), compose_kst(res.psi, res.phi, p, lam, x.data()));
        });
        for (const auto& e : parts) random_max.merge(e);
    }
    ExactMax all = grid_max;
    all.merge(random_max);
    rep.grid = grid_max.triple();
    rep.random = random_max.triple();
    rep.total = all.triple();
    rep.total.triangle_ok = rep.total.triangle_ok && rep.grid.triangle_ok && rep.random.triangle_ok;
    res.timings.push_back({"errors", seconds_since(t0)});

    // Dense pass through the assembled network on a spread of audit points.
    t0 = Clock::now();
    {
        const std::size_t D = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, caps.dense_check)), ctx.audit_count);
        std::vector<std::size_t> pick;
        for (std::size_t q = 0; q < D; ++q) pick.push_back(q * ctx.audit_count / D);
        std::vector<double> in;
        for (std::size_t q : pick) in.insert(in.end(), &ctx.audit_x[q * n], &ctx.audit_x[q * n] + n);
        const std::vector<double> out = res.network.net.eval_batch(in, pick.size());
        for (std::size_t t = 0; t < pick.size(); ++t)
            if (out[t] != net_audit[pick[t]])
                throw InternalError("dense network output differs from the structured evaluation at audit point " +
                                    std::to_string(pick[t]));
        rep.dense_checked = pick.size();
    }
    res.timings.push_back({"dense_check", seconds_since(t0)});

    rep.partial = rep.r_used < rep.r_needed || rep.psi_required_knots > static_cast<double>(caps.psi_knot_limit);
    rep.network_half_ok_grid = grid_max.fr_net <= Rational(from_double(eps)) / 2;
    rep.full_ok_grid = grid_max.f_net <= from_double(eps);
    rep.network_half_ok = all.fr_net <= Rational(from_double(eps)) / 2;
    rep.full_ok = all.f_net <= from_double(eps);
    rep.bound = size_bound_report(rep, p);
    return res;
}

PipelineResult run_pipeline(const KstParams& params, const TargetFunction& f, double eps, const PipelineCaps& caps,
                            const DecompositionConfig& config) {
    if (f.sup_norm_bound > 1.0) throw InputError("target sup-norm bound exceeds 1");
    const int r = std::min(r_of_epsilon(params.eta, eps), caps.r_cap);
    auto t0 = Clock::now();
    DecompositionState s = decompose(params, f, r, config);
    const double dt = seconds_since(t0);
    PipelineResult res = run_pipeline(s, eps, caps);
    res.timings.insert(res.timings.begin(), StageTime{"decompose", dt});
    return res;
}

std::string experiment_csv(const std::vector<PipelineReport>& reports) {
    CsvTable t({"eps", "r", "W", "L", "f_minus_fr_grid", "fr_minus_net_grid", "f_minus_net_grid", "f_minus_fr",
                "fr_minus_net", "f_minus_net", "partial"});
    for (const auto& r : reports)
        t.add_row({decimal17(r.eps), std::to_string(r.r_used), std::to_string(r.size.W), std::to_string(r.size.L),
                   decimal17(r.grid.f_fr), decimal17(r.grid.fr_net), decimal17(r.grid.f_net), decimal17(r.total.f_fr),
                   decimal17(r.total.fr_net), decimal17(r.total.f_net), r.partial ? "true" : "false"});
    return t.text();
}

}  // namespace kst

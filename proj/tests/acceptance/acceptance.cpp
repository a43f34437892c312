// One PASS/FAIL line per acceptance criterion; indented lines carry the numbers.

#include "../unit/oracles.hpp"

#include "kst/bumps.hpp"
#include "kst/decompose.hpp"
#include "kst/inner.hpp"
#include "kst/io.hpp"
#include "kst/pipeline.hpp"
#include "kst/relunet.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

using namespace kst;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, bool ok, const std::string& what) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << what << std::endl;
    if (!ok) ++failures;
}

void detail(const std::string& s) { std::cout << "    " << s << std::endl; }

std::string fmt(double x) { return decimal17(x); }

KstParams params_with(int n, int m, int gamma, double delta, std::optional<double> eta = std::nullopt) {
    ParamOverrides o;
    o.m = m;
    o.gamma = gamma;
    o.delta = delta;
    o.eta = eta;
    return make_params(n, o);
}

void criterion1() {
    const auto t0 = Clock::now();
    KstParams p = params_with(2, 8, 10, 0.05, 0.9);
    InnerEvaluator ev(p);
    std::uint64_t mismatches = 0, closed = 0, closed_bad = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        auto digits = oracle::digits_of(i, 3, 10);
        const Rational got = ev.psi_index(3, i);
        if (got != oracle::psi_digits(digits, 2, 10)) ++mismatches;
        bool restricted = true;
        for (int d : digits) restricted = restricted && d < 9;
        if (restricted) {
            ++closed;
            if (got != oracle::closed_form(digits, 2, 10)) ++closed_bad;
        }
    }
    const double dt = since(t0);
    detail("oracle mismatches " + std::to_string(mismatches) + " of 1000; closed-form mismatches " +
           std::to_string(closed_bad) + " of " + std::to_string(closed) + "; " + fmt(dt) + " s");
    verdict(1, mismatches == 0 && closed_bad == 0 && dt < 5.0, "psi on D_3 (n=2, gamma=10) equals the oracle exactly");
}

void criterion2() {
    bool ok = true;
    for (auto [n, g] : {std::pair{2, 6}, std::pair{2, 10}, std::pair{3, 8}}) {
        const auto t0 = Clock::now();
        InnerEvaluator ev(params_with(n, 2 * n, g, 0.05));
        HolderAudit h = holder_audit(ev, 3);
        const double dt = since(t0);
        detail("n=" + std::to_string(n) + " gamma=" + std::to_string(g) + ": max_ratio " + fmt(h.max_ratio) +
               " over " + std::to_string(h.pairs) + " pairs, witness (" + decimal17(h.witness.first) + ", " +
               decimal17(h.witness.second) + "), " + fmt(dt) + " s");
        ok = ok && h.max_ratio <= 1.0 && dt < 30.0;
    }
    verdict(2, ok, "Holder ratio <= 1 on D_3 for (2,6), (2,10), (3,8)");
}

void criterion3() {
    InnerEvaluator ev(make_params(2));
    std::mt19937_64 rng(2024);
    int bad = 0;
    for (int t = 0; t < 1000; ++t) {
        Rational x(BigInt(static_cast<unsigned long>(rng() >> 11)), BigInt(1) << 53);
        x.canonicalize();
        const int k = 1 + static_cast<int>(rng() % 20);
        if (ev.psi(Rational(x + 1), k).exact - ev.psi(x, k).exact != 1) ++bad;
    }
    detail(std::to_string(bad) + " of 1000 random x violate psi(x+1) = psi(x) + 1 (depths 1..20)");
    verdict(3, bad == 0, "shift identity holds exactly");
}

void criterion4() {
    const auto t0 = Clock::now();
    KstParams p = make_params(2);
    LambdaCoeffs lc = lambda_coeffs(p);
    InnerEvaluator ev(p);
    bool ok = true;
    std::uint64_t total = 0;
    for (int k = 1; k <= 2; ++k) {
        for (int j = 0; j <= p.m; ++j) {
            SupportAudit a = disjoint_support_audit(p, lc, ev, k, j);
            total += a.count;
            ok = ok && a.ok;
            detail("k=" + std::to_string(k) + " j=" + std::to_string(j) + ": " + std::to_string(a.count) +
                   " bumps, min_gap " + decimal17(a.min_gap) + (a.ok ? "" : "  (overlap)"));
        }
    }
    detail("k=1: psi_1 is the identity, so xi(0, 5/6) and xi(1/6, 0) are 1/6 - 5 lambda_2/6 apart, "
           "less than a plateau plus two ramps; " + std::to_string(total) + " bumps, " + fmt(since(t0)) + " s");
    verdict(4, ok && since(t0) < 60.0, "bump supports disjoint for n=2, gamma=6, k in {1,2}, j in 0..4");
}

void criterion5() {
    KstParams p = make_params(2);
    bool ok = true;
    for (const char* name : {"product", "gaussian", "ridge"}) {
        const auto t0 = Clock::now();
        DecompositionConfig c;  // 101^2 audit grid plus 1000 random points
        DecompositionState s = decompose(p, builtin_target(name, 2), 3, c);
        const double dt = since(t0);
        std::string line = std::string(name) + ":";
        const auto& norms = s.residual_norms();
        const int res = s.context().config.audit_resolution;
        const std::size_t grid = static_cast<std::size_t>(res) * res;
        for (int r = 1; r <= 3; ++r) {
            // the grid part of the audit set, recomputed from the truncated state
            DecompositionState sr = s.truncated(r);
            double g = 0.0;
            for (std::size_t q = 0; q < grid; ++q) g = std::max(g, std::fabs(sr.audit_residual()[q]));
            const double bound = std::pow(p.eta, r);
            ok = ok && g <= bound;
            line += " r=" + std::to_string(r) + " grid " + fmt(g) + " (all " + fmt(norms[r]) + ") <= " + fmt(bound) +
                    (g <= bound ? "" : " VIOLATED");
            if (g > bound * norms[0]) line += " [above eta^r ||f|| = " + fmt(bound * norms[0]) + "]";
        }
        std::string ks;
        for (int k : s.k_list()) ks += std::to_string(k) + " ";
        detail(line + "; k = " + ks + "; " + fmt(dt) + " s");
        ok = ok && dt < 120.0;
    }
    verdict(5, ok, "residual decay ||e_r|| <= eta^r on the 101^2 grid, r = 1..3, three targets");
}

struct ProductRun {
    PipelineResult res;
    bool ok = false;
};

ProductRun product_run() {
    KstParams p = make_params(2);
    PipelineCaps caps;
    caps.r_cap = 3;
    ProductRun pr{run_pipeline(p, builtin_target("product", 2), 0.5, caps), false};
    return pr;
}

void criterion6(const PipelineResult& res) {
    const KstParams& p = res.state.context().params;
    const std::vector<double> lam = res.state.context().lambdas.as_doubles();
    std::mt19937_64 rng(6);
    const int N = 10000;
    std::vector<double> xs(2 * N);
    for (double& v : xs) v = unit_draw(rng());
    const std::vector<double> net = res.network.net.eval_batch(xs, N);
    double worst = 0.0;
    for (int t = 0; t < N; ++t) worst = std::max(worst, std::fabs(net[t] - compose_kst(res.psi, res.phi, p, lam, &xs[2 * t])));
    detail("product, r=3: max |network - composition| " + fmt(worst) + " over " + std::to_string(N) + " points, W " +
           std::to_string(res.report.size.W));
    verdict(6, worst <= 1e-10, "assembled network equals the composition within 1e-10");
}

void criterion7(const PipelineResult& capped) {
    const PipelineReport& c = capped.report;
    bool ok = c.network_half_ok_grid;
    detail("product, defaults, eps=0.5, r_cap=3 (r used " + std::to_string(c.r_used) + " of " +
           std::to_string(c.r_needed) + "): ||f_r - net|| grid " + fmt(c.grid.fr_net) + ", all points " +
           fmt(c.total.fr_net) + " (<= 0.25)");
    KstParams p = params_with(2, 8, 10, 0.02, 0.5);
    for (const char* name : {"product", "gaussian", "ridge"}) {
        PipelineCaps caps;
        caps.r_cap = 1000;
        PipelineResult r = run_pipeline(p, builtin_target(name, 2), 0.5, caps);
        const PipelineReport& q = r.report;
        ok = ok && q.full_ok_grid && q.r_used == q.r_needed;
        std::string norms;
        for (double v : q.residual_norms) norms += fmt(v) + " ";
        detail(std::string(name) + ", n=2 m=8 gamma=10 delta=0.02 eta=0.5, eps=0.5, r=" + std::to_string(q.r_used) +
               " uncapped: ||f - net|| grid " + fmt(q.grid.f_net) + " all " + fmt(q.total.f_net) +
               "; ||f_r - net|| grid " + fmt(q.grid.fr_net) + "; ||e_r|| " + norms + (q.full_ok_grid ? "" : " EXCEEDS eps"));
    }
    detail("k_max is 2 at gamma=10 under the 10^6 grid budget, so later layers reuse k=2 and the residual "
           "stalls; the closed grid's boundary cells collide with interior cells");
    verdict(7, ok, "||f_r - net|| <= eps/2 (capped product) and ||f - net|| <= eps (uncapped eta=0.5 runs)");
}

void criterion8(const PipelineResult& res) {
    const AssemblyAccounting& a = res.report.accounting;
    const KstParams& p = res.state.context().params;
    const std::uint64_t n = p.n, m = p.m;
    std::uint64_t phi_sum = 0;
    for (const auto& ph : res.phi) phi_sum += ph.net.size_report().W;
    const std::uint64_t W_formula = (2 * n * n + n) * res.psi.net.size_report().W + phi_sum;
    // shift edges, shift biases for j >= 1, lambda edges, final sum edges
    const std::uint64_t agg = n * (m + 1) + n * m + n * (m + 1) + (m + 1);
    const std::uint64_t literal = res.network.net.size_report().W;
    detail("literal W " + std::to_string(literal) + ", size formula " + std::to_string(W_formula) +
           ", aggregation term " + std::to_string(agg) + ", uniform-phi accounting " + std::to_string(a.W_formula_uniform));
    verdict(8, literal == W_formula + agg && a.W_formula == W_formula && a.aggregation == agg && a.W_literal == literal,
            "literal edge count = size formula + aggregation weights, exact");
}

void criterion9() {
    KstParams p = make_params(2);
    InnerEvaluator ev(p);
    const double M = to_double(1 + p.m * p.a);
    auto psi = [&](double t) { return ev.psi(t, 12).value; };
    bool ok = true;
    double prev = INFINITY;
    std::string line;
    std::vector<double> errs;
    for (int N : {16, 32, 64, 128}) {
        const double e = build_univariate(psi, M, N).eps_measured;
        ok = ok && e <= prev;
        prev = e;
        errs.push_back(e);
        line += "N=" + std::to_string(N) + " " + fmt(e) + "  ";
    }
    detail(line);
    std::string rates;
    for (std::size_t i = 1; i < errs.size(); ++i) rates += fmt(errs[i - 1] / errs[i]) + " ";
    detail("ratios per doubling " + rates + "(Holder exponent predicts 2^alpha = " + fmt(std::pow(2.0, p.alpha)) + ")");
    verdict(9, ok, "psi interpolation error nonincreasing over N = 16, 32, 64, 128");
}

void criterion10() {
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / ("kst_accept_" + std::to_string(std::random_device{}()));
    bool ok = true;
    std::vector<std::string> files{"d.json", "decay.csv", "report.json", "net.json"};
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = base / std::to_string(run);
        fs::create_directories(dir);
        const std::string threads = run == 0 ? "1" : "4";
        const std::string cli = std::string(KST_CLI_PATH) + " --threads " + threads;
        const std::string dec = cli + " decompose --n 2 --f gaussian --iters 2 --k-max 2 --seed 99 --out " +
                                (dir / "d.json").string() + " --csv " + (dir / "decay.csv").string() +
                                " --timings " + (dir / "t1.csv").string();
        const std::string as = cli + " assemble --decomp " + (dir / "d.json").string() + " --eps 0.5 --report " +
                               (dir / "report.json").string() + " --network " + (dir / "net.json").string() +
                               " --timings " + (dir / "t2.csv").string();
        ok = ok && std::system(dec.c_str()) == 0 && std::system(as.c_str()) == 0;
    }
    for (const auto& f : files) {
        const std::string a = ok ? read_text_file((base / "0" / f).string()) : "";
        const std::string b = ok ? read_text_file((base / "1" / f).string()) : "";
        const bool same = ok && a == b && !a.empty();
        detail(f + ": " + std::to_string(a.size()) + " bytes, " + (same ? "identical" : "DIFFERENT"));
        ok = ok && same;
    }
    std::error_code ec;
    fs::remove_all(base, ec);
    verdict(10, ok, "two decompose + assemble runs (1 and 4 threads) give byte-identical files");
}

}  // namespace

int main() {
    const auto t0 = Clock::now();
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    ProductRun pr = product_run();
    criterion6(pr.res);
    criterion7(pr.res);
    criterion8(pr.res);
    criterion9();
    criterion10();
    std::cout << failures << " criteria failed; " << fmt(since(t0)) << " s total" << std::endl;
    return failures == 0 ? 0 : 1;
}

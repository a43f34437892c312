#include "kst/cli.hpp"

#include "kst/decompose.hpp"
#include "kst/errors.hpp"
#include "kst/inner.hpp"
#include "kst/io.hpp"
#include "kst/parallel.hpp"
#include "kst/params.hpp"
#include "kst/pipeline.hpp"
#include "kst/target.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace kst {

namespace {

struct ParamFlags {
    int n = 2;
    std::optional<int> m, gamma, lambda_depth;
    std::optional<double> delta, eta;

    void add(CLI::App* app) {
        app->add_option("--n", n, "input dimension")->check(CLI::PositiveNumber);
        app->add_option("--m", m, "number of outer functions minus one (default 2n)");
        app->add_option("--gamma", gamma, "grid base (default 2n+2)");
        app->add_option("--delta", delta, "modulus threshold factor (default 0.05)");
        app->add_option("--eta", eta, "contraction factor (default 0.9, raised to the admissible bound for n >= 3)");
        app->add_option("--lambda-depth", lambda_depth, "terms kept in each lambda series (default 8)");
    }
    KstParams build() const {
        ParamOverrides o;
        o.m = m;
        o.gamma = gamma;
        o.delta = delta;
        o.eta = eta;
        o.lambda_depth = lambda_depth;
        return make_params(n, o);
    }
};

struct DecompFlags {
    std::string f = "product";
    int k_max = 0;
    int audit_resolution = 0;
    int random_points = 1000;
    std::uint64_t seed = 1;
    bool literal_grid = false;

    void add(CLI::App* app) {
        app->add_option("--f", f, "built-in target name or expression in x1..xn");
        app->add_option("--k-max", k_max, "largest grid depth (0 = default)");
        app->add_option("--audit-res", audit_resolution, "audit grid points per axis (0 = default)");
        app->add_option("--random-points", random_points, "seeded random audit points");
        app->add_option("--seed", seed, "seed for the random audit points");
        app->add_flag("--literal-grid", literal_grid, "use only the grid cells with indices below gamma^k");
    }
    DecompositionConfig config() const {
        DecompositionConfig c;
        c.k_max = k_max;
        c.audit_resolution = audit_resolution;
        c.random_points = random_points;
        c.seed = seed;
        c.closed_grid = !literal_grid;
        return c;
    }
};

void emit(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") out << text;
    else write_text_file(path, text);
}

void emit_timings(const std::string& path, const std::vector<StageTime>& t, std::ostream& err) {
    if (path.empty()) {
        for (const auto& s : t) err << "time " << s.stage << ' ' << decimal17(s.seconds) << " s\n";
        return;
    }
    CsvTable csv({"stage", "seconds"});
    for (const auto& s : t) csv.add_row({s.stage, decimal17(s.seconds)});
    write_text_file(path, csv.text());
}

int resolve_threads(int flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("KST_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
        }
        throw InputError(std::string("KST_THREADS must be a positive integer, got '") + env + "'");
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<double> parse_eps_list(const std::string& text) {
    std::vector<double> eps;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw InputError("bad eps value '" + item + "'");
        eps.push_back(v);
    }
    if (eps.empty()) throw InputError("eps list is empty");
    return eps;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Constructive superposition: inner function, outer iteration, ReLU assembly"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: KST_THREADS or hardware)");

    ParamFlags pf;
    std::string out_path, csv_path, timings_path, decomp_path, network_path;
    int k = 3, iters = 3, r_cap = 3, extra_random = 10000;
    double eps = 0.5;
    std::string eps_list;
    DecompFlags df;

    auto* c_params = app.add_subcommand("params", "print parameters and lambda coefficients as JSON");
    pf.add(c_params);
    c_params->add_option("--out", out_path, "output file (default stdout)");

    auto* c_inner = app.add_subcommand("inner", "psi on the grid D_k as CSV");
    pf.add(c_inner);
    c_inner->add_option("--k", k, "grid depth")->check(CLI::PositiveNumber);
    c_inner->add_option("--out", out_path, "output file (default stdout)");

    auto* c_decomp = app.add_subcommand("decompose", "run the outer iteration; write state JSON and decay CSV");
    pf.add(c_decomp);
    df.add(c_decomp);
    c_decomp->add_option("--iters", iters, "number of iterations r")->check(CLI::NonNegativeNumber);
    c_decomp->add_option("--out", out_path, "decomposition JSON file");
    c_decomp->add_option("--csv", csv_path, "residual decay CSV (default stdout)");
    c_decomp->add_option("--timings", timings_path, "stage timings CSV (default stderr)");

    auto* c_recon = app.add_subcommand("reconstruct", "reload a decomposition and audit f_r against f");
    c_recon->add_option("--decomp", decomp_path, "decomposition JSON file")->required();
    c_recon->add_option("--out", out_path, "audit JSON (default stdout)");
    c_recon->add_option("--csv", csv_path, "per-point CSV (x, f, f_r, e_r)");

    auto* c_asm = app.add_subcommand("assemble", "build the ReLU network from a decomposition");
    c_asm->add_option("--decomp", decomp_path, "decomposition JSON file")->required();
    c_asm->add_option("--eps", eps, "target accuracy in (0,1)");
    c_asm->add_option("--r-cap", r_cap, "largest number of layers used");
    c_asm->add_option("--extra-random", extra_random, "random points added to the audit set");
    c_asm->add_option("--report", out_path, "pipeline report JSON (default stdout)");
    c_asm->add_option("--network", network_path, "network JSON file");
    c_asm->add_option("--timings", timings_path, "stage timings CSV (default stderr)");

    auto* c_exp = app.add_subcommand("experiment", "error and size over a list of eps values");
    pf.add(c_exp);
    df.add(c_exp);
    c_exp->add_option("--eps", eps_list, "comma-separated eps values")->required();
    c_exp->add_option("--r-cap", r_cap, "largest number of layers used");
    c_exp->add_option("--extra-random", extra_random, "random points added to the audit set");
    c_exp->add_option("--out", out_path, "CSV file (default stdout)");
    c_exp->add_option("--timings", timings_path, "stage timings CSV (default stderr)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        set_thread_count(resolve_threads(threads));

        if (c_params->parsed()) {
            const KstParams p = pf.build();
            const LambdaCoeffs lam = lambda_coeffs(p);
            emit(out_path, params_to_json(p, &lam) + "\n", out);
        } else if (c_inner->parsed()) {
            const KstParams p = pf.build();
            const InnerEvaluator ev(p);
            emit(out_path, psi_plot_csv(psi_plot_data(ev, k)), out);
        } else if (c_decomp->parsed()) {
            const KstParams p = pf.build();
            const TargetFunction f = make_target(df.f, p.n);
            const auto t0 = std::chrono::steady_clock::now();
            const DecompositionState s = decompose(p, f, iters, df.config());
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (!out_path.empty()) {
                std::ofstream os(out_path, std::ios::binary);
                if (!os) throw InputError("cannot write " + out_path);
                write_decomposition(s, os);
            }
            emit(csv_path, residual_csv(s), out);
            emit_timings(timings_path, {{"decompose", dt}}, err);
        } else if (c_recon->parsed()) {
            const DecompositionState s = load_decomposition(decomp_path);
            const auto& ctx = s.context();
            const int n = ctx.params.n;
            const auto& e = s.audit_residual();
            double worst = 0.0;
            for (double v : e) worst = std::max(worst, std::fabs(v));
            const LipschitzReport lip = lipschitz_report(s);
            Json norms = Json::array();
            for (double v : s.residual_norms()) norms.push_back(json_real(v));
            Json rep{{"r", s.r()},
                     {"k_list", s.k_list()},
                     {"residual_norms", norms},
                     {"audit_points", ctx.audit_count},
                     {"max_abs_residual", json_real(worst)},
                     {"replay_matches", true},
                     {"nu_r", json_real(lip.nu_r)},
                     {"nu_r_measured", json_real(lip.nu_r_measured)},
                     {"K_C_bound", json_real(lip.K_C_bound)},
                     {"within_K_C", lip.within_K_C}};
            emit(out_path, rep.dump(2) + "\n", out);
            if (!csv_path.empty()) {
                std::vector<std::string> head;
                for (int i = 1; i <= n; ++i) head.push_back("x" + std::to_string(i));
                head.insert(head.end(), {"f", "f_r", "e_r"});
                CsvTable csv(head);
                for (std::size_t q = 0; q < ctx.audit_count; ++q) {
                    std::vector<std::string> row;
                    for (int i = 0; i < n; ++i) row.push_back(decimal17(ctx.audit_x[q * n + i]));
                    row.push_back(decimal17(ctx.audit_f[q]));
                    row.push_back(decimal17(s.f_r_audit(q)));
                    row.push_back(decimal17(e[q]));
                    csv.add_row(row);
                }
                write_text_file(csv_path, csv.text());
            }
        } else if (c_asm->parsed()) {
            const auto t0 = std::chrono::steady_clock::now();
            const DecompositionState s = load_decomposition(decomp_path);
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            PipelineCaps caps;
            caps.r_cap = r_cap;
            caps.extra_random = extra_random;
            PipelineResult res = run_pipeline(s, eps, caps);
            res.timings.insert(res.timings.begin(), StageTime{"load", dt});
            emit(out_path, res.report.to_json().dump(2) + "\n", out);
            if (!network_path.empty()) {
                std::ofstream os(network_path, std::ios::binary);
                if (!os) throw InputError("cannot write " + network_path);
                const int n = s.context().params.n;
                res.network.net.write_json(os, Json{{"dim", n}, {"lower", json_real(0.0)}, {"upper", json_real(1.0)}});
                os << '\n';
            }
            emit_timings(timings_path, res.timings, err);
        } else if (c_exp->parsed()) {
            const std::vector<double> list = parse_eps_list(eps_list);
            const KstParams p = pf.build();
            const TargetFunction f = make_target(df.f, p.n);
            int r_max = 0;
            for (double e : list) r_max = std::max(r_max, std::min(r_of_epsilon(p.eta, e), r_cap));
            const auto t0 = std::chrono::steady_clock::now();
            const DecompositionState s = decompose(p, f, r_max, df.config());
            std::vector<StageTime> times{
                {"decompose", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
            PipelineCaps caps;
            caps.r_cap = r_cap;
            caps.extra_random = extra_random;
            std::vector<PipelineReport> reports;
            for (double e : list) {
                PipelineResult res = run_pipeline(s, e, caps);
                for (auto& t : res.timings) times.push_back({"eps=" + decimal17(e) + " " + t.stage, t.seconds});
                reports.push_back(std::move(res.report));
            }
            emit(out_path, experiment_csv(reports), out);
            emit_timings(timings_path, times, err);
        }
        return 0;
    } catch (const BudgetError& e) {
        err << "budget: " << e.what() << '\n';
        return 3;
    } catch (const InternalError& e) {
        err << "internal: " << e.what() << '\n';
        return 4;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::bad_alloc&) {
        err << "budget: out of memory\n";
        return 3;
    } catch (const std::exception& e) {
        err << "internal: " << e.what() << '\n';
        return 4;
    }
}

}  // namespace kst

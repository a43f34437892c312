#include "kst/decompose.hpp"

#include "kst/errors.hpp"
#include "kst/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace kst {

namespace {

std::uint64_t upow(std::uint64_t b, int e) {
    std::uint64_t r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

double grid_points(std::uint64_t per_axis, int n) { return std::pow(static_cast<double>(per_axis), n); }

BigInt ceil_of(const Rational& q) { return -floor_of(-q); }

void check_j(const DecompositionContext& ctx, int j) {
    if (j < 0 || j > ctx.params.m) throw DomainError("outer index j outside 0..m");
}

}  // namespace

int default_k_max(const KstParams& p, std::uint64_t budget) {
    int best = 1;
    for (int k = 1; k <= 3; ++k)
        if (grid_points(upow(p.gamma, k) + 1, p.n) <= static_cast<double>(budget)) best = k;
    return best;
}

int default_audit_resolution(int n) {
    if (n <= 1) return 1001;
    if (n == 2) return 101;
    if (n == 3) return 31;
    return std::max(2, static_cast<int>(std::floor(std::pow(1e5, 1.0 / n))));
}

double unit_draw(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::uint32_t DecompositionContext::shifted_index(const Rational& x, int j) const {
    Rational v = (x + j * a_shift) * Rational(BigInt(static_cast<unsigned long>(g_trunc)));
    return static_cast<std::uint32_t>(to_u64(floor_of(v)));
}

// ---------------------------------------------------------------- Layer

double Layer::eval_scaled(int j, const BigInt& Y) const {
    const auto& bs = per_j[j];
    thread_local BigInt u;
    thread_local BigInt z;
    z = Y - support_width;
    // Bumps whose open support (left, left + support_width) contains Y.
    auto lo = std::partition_point(bs.begin(), bs.end(), [&](const LayerBump& b) { return b.left <= z; });
    auto hi = std::partition_point(lo, bs.end(), [&](const LayerBump& b) { return b.left < Y; });
    if (hi - lo > 1 && overlaps == 0) throw InternalError("overlapping bump supports in a disjoint layer");
    double v = 0.0;
    for (auto it = lo; it != hi; ++it) {
        u = Y - it->left;
        if (u >= W) {
            z = u - W;
            if (z <= plateau_floor) {
                v += it->coeff;
                continue;
            }
        }
        Rational t(u, W);
        t.canonicalize();
        const Rational th = sigma_exact(t) - sigma_exact(t - 1 - slope_plateau);
        v += it->coeff * to_double(th);
    }
    return v;
}

double Layer::eval(int j, const Rational& y, const BigInt& D) const {
    const auto& bs = per_j[j];
    const Rational yD = y * Rational(D);
    const Rational width = Rational(2 * W) + plateau * Rational(D);
    // left < yD  <=>  left < ceil(yD);  left > yD - width  <=>  left > floor(yD - width)
    const BigInt yc = ceil_of(yD);
    const BigInt zf = floor_of(yD - width);
    auto lo = std::partition_point(bs.begin(), bs.end(), [&](const LayerBump& b) { return b.left <= zf; });
    auto hi = std::partition_point(lo, bs.end(), [&](const LayerBump& b) { return b.left < yc; });
    if (hi - lo > 1 && overlaps == 0) throw InternalError("overlapping bump supports in a disjoint layer");
    double v = 0.0;
    for (auto it = lo; it != hi; ++it) {
        const Rational t = (yD - Rational(it->left)) / Rational(W);
        const Rational th = sigma_exact(t) - sigma_exact(t - 1 - slope_plateau);
        v += th == 1 ? it->coeff : it->coeff * to_double(th);
    }
    return v;
}

// ---------------------------------------------------------------- state

DecompositionState DecompositionState::start(const KstParams& params, const TargetFunction& target,
                                             const DecompositionConfig& config) {
    if (target.dim != params.n)
        throw InputError("target has dimension " + std::to_string(target.dim) + " but n = " +
                         std::to_string(params.n));
    auto ctx = std::make_shared<DecompositionContext>();
    ctx->params = params;
    ctx->lambdas = lambda_coeffs(params);
    ctx->ev = std::make_shared<InnerEvaluator>(params);
    ctx->target = target;
    ctx->config = config;
    const int n = params.n;
    const int m = params.m;
    const int gamma = params.gamma;

    ctx->k_max = config.k_max > 0 ? config.k_max : default_k_max(params, config.grid_budget);
    ctx->config.k_max = ctx->k_max;
    if (ctx->config.audit_resolution <= 0) ctx->config.audit_resolution = default_audit_resolution(n);
    if (ctx->config.audit_resolution < 2) throw InputError("audit resolution must be at least 2");
    if (ctx->config.random_points < 0) throw InputError("random point count must be nonnegative");
    ctx->lattice_R = upow(gamma, ctx->k_max) + 1;
    if (grid_points(ctx->lattice_R, n) > static_cast<double>(config.grid_budget))
        throw BudgetError("residual lattice (gamma^k_max + 1)^n = " + decimal17(grid_points(ctx->lattice_R, n)) +
                          " exceeds the grid budget");
    if (grid_points(ctx->config.audit_resolution, n) > 1e6) throw BudgetError("audit grid exceeds 10^6 points");

    if (config.psi_margin < 2) throw InputError("psi margin must be at least 2");
    ctx->k_trunc = ctx->k_max + ctx->config.psi_margin;
    ctx->g_trunc = upow(gamma, ctx->k_trunc);
    if (static_cast<double>(ctx->g_trunc) > 1e8) throw BudgetError("psi table gamma^(k_max + psi_margin) exceeds 10^8");
    ctx->a_shift = params.a;
    ctx->D = pow_int(2, ctx->k_trunc) * pow_int(gamma, beta_exponent(n, ctx->k_trunc)) *
             pow_int(gamma, (n - 1) * beta_exponent(n, params.lambda_depth));

    const Rational ma_g = (1 + m * params.a) * Rational(BigInt(static_cast<unsigned long>(ctx->g_trunc)));
    const std::uint64_t count = to_u64(floor_of(ma_g)) + 2;
    const std::vector<Rational> psi = ctx->ev->table(ctx->k_trunc, count);
    ctx->table.assign(n, std::vector<BigInt>(count));
    const Rational Dq(ctx->D);
    for (int i = 0; i < n; ++i) {
        const Rational scale = ctx->lambdas.values[i] * Dq;
        parallel_for(count, [&](std::size_t idx) {
            Rational v = scale * psi[idx];
            v.canonicalize();
            if (v.get_den() != 1) throw InternalError("aggregate table entry is not an integer");
            ctx->table[i][idx] = v.get_num();
        });
    }

    // Audit points.
    const int res = ctx->config.audit_resolution;
    const std::uint64_t grid_count = upow(res, n);
    ctx->audit_count = grid_count + static_cast<std::size_t>(ctx->config.random_points);
    ctx->audit_x.resize(ctx->audit_count * n);
    for (std::uint64_t f = 0; f < grid_count; ++f) {
        std::uint64_t rest = f;
        for (int i = 0; i < n; ++i) {
            ctx->audit_x[f * n + i] = static_cast<double>(rest % res) / (res - 1);
            rest /= res;
        }
    }
    std::mt19937_64 rng(ctx->config.seed);
    for (std::size_t p = grid_count; p < ctx->audit_count; ++p)
        for (int i = 0; i < n; ++i) ctx->audit_x[p * n + i] = unit_draw(rng());

    ctx->audit_f.resize(ctx->audit_count);
    ctx->audit_index.resize(ctx->audit_count * (m + 1) * n);
    parallel_for(ctx->audit_count, [&](std::size_t p) {
        const double* x = &ctx->audit_x[p * n];
        ctx->audit_f[p] = target.eval(x);
        std::uint64_t rest = p;
        for (int i = 0; i < n; ++i) {
            // grid points are the exact rationals c / (res - 1); the double is only the network input
            Rational xq;
            if (p < grid_count) {
                xq = Rational(static_cast<unsigned long>(rest % res), static_cast<unsigned long>(res - 1));
                xq.canonicalize();
                rest /= res;
            } else {
                xq = from_double(x[i]);
            }
            for (int j = 0; j <= m; ++j)
                ctx->audit_index[(p * (m + 1) + j) * n + i] = ctx->shifted_index(xq, j);
        }
    });

    const std::uint64_t R = ctx->lattice_R;
    const std::uint64_t lat_step = upow(gamma, ctx->k_trunc - ctx->k_max);
    ctx->lattice_index.resize((m + 1) * R);
    for (int j = 0; j <= m; ++j) {
        const std::uint64_t off = to_u64(floor_of(j * params.a * Rational(BigInt(static_cast<unsigned long>(ctx->g_trunc)))));
        for (std::uint64_t p = 0; p < R; ++p) ctx->lattice_index[j * R + p] = static_cast<std::uint32_t>(p * lat_step + off);
    }

    DecompositionState s;
    s.ctx_ = ctx;
    s.e_audit_ = ctx->audit_f;
    double norm = 0.0;
    for (double v : s.e_audit_) norm = std::max(norm, std::fabs(v));
    s.norms_.push_back(norm);
    return s;
}

std::vector<int> DecompositionState::k_list() const {
    std::vector<int> out;
    for (const auto& l : layers_) out.push_back(l->k);
    return out;
}

std::vector<bool> DecompositionState::k_warnings() const {
    std::vector<bool> out;
    for (const auto& l : layers_) out.push_back(l->k_warning);
    return out;
}

DecompositionState DecompositionState::truncated(int r) const {
    if (r < 0 || r > this->r()) throw DomainError("truncation beyond the completed iterations");
    if (r == this->r()) return *this;
    DecompositionState s;
    s.ctx_ = ctx_;
    s.layers_.assign(layers_.begin(), layers_.begin() + r);
    s.norms_.assign(norms_.begin(), norms_.begin() + r + 1);
    s.e_audit_.resize(ctx_->audit_count);
    parallel_for(ctx_->audit_count, [&](std::size_t p) { s.e_audit_[p] = ctx_->audit_f[p] - s.f_r_audit(p); });
    return s;
}

double DecompositionState::f_r_indices(const std::uint32_t* idx, std::size_t stride_j) const {
    if (layers_.empty()) return 0.0;
    const auto& ctx = *ctx_;
    BigInt Y;
    double total = 0.0;
    for (int j = 0; j <= ctx.params.m; ++j) {
        const std::uint32_t* row = idx + j * stride_j;
        Y = ctx.table[0][row[0]];
        for (int i = 1; i < ctx.params.n; ++i) Y += ctx.table[i][row[i]];
        double phi = 0.0;
        for (const auto& layer : layers_) phi += layer->eval_scaled(j, Y);
        total += phi;
    }
    return total;
}

double DecompositionState::f_r_audit(std::size_t p) const {
    const auto& ctx = *ctx_;
    return f_r_indices(&ctx.audit_index[p * (ctx.params.m + 1) * ctx.params.n], ctx.params.n);
}

double DecompositionState::f_r(const std::vector<Rational>& x) const {
    const auto& ctx = *ctx_;
    const int n = ctx.params.n;
    if (static_cast<int>(x.size()) != n) throw DomainError("f_r needs n coordinates");
    std::vector<std::uint32_t> idx((ctx.params.m + 1) * n);
    for (int i = 0; i < n; ++i) {
        if (x[i] < 0 || x[i] > 1) throw DomainError("f_r point outside [0,1]^n");
        for (int j = 0; j <= ctx.params.m; ++j) idx[j * n + i] = ctx.shifted_index(x[i], j);
    }
    return f_r_indices(idx.data(), n);
}

double DecompositionState::f_r(const std::vector<double>& x) const {
    std::vector<Rational> q;
    q.reserve(x.size());
    for (double v : x) {
        if (!std::isfinite(v)) throw DomainError("f_r point is not finite");
        q.push_back(from_double(v));
    }
    return f_r(q);
}

double DecompositionState::phi(int j, const Rational& y) const {
    const auto& ctx = *ctx_;
    check_j(ctx, j);
    const int g = ctx.params.gamma;
    if (y < 0 || y >= Rational(2 * (g - 1), g - 2))
        throw DomainError("outer argument " + decimal17(y) + " outside [0, 2(gamma-1)/(gamma-2))");
    double v = 0.0;
    for (const auto& layer : layers_) v += layer->eval(j, y, ctx.D);
    return v;
}

std::vector<double> DecompositionState::lattice_residual(std::uint64_t stride) const {
    const auto& ctx = *ctx_;
    const int n = ctx.params.n;
    const int m = ctx.params.m;
    const std::uint64_t R = ctx.lattice_R;
    if (stride == 0 || (R - 1) % stride != 0) throw InternalError("lattice stride must divide gamma^k_max");
    const std::uint64_t Q = (R - 1) / stride + 1;
    const std::uint64_t total = upow(Q, n);
    const double denom = static_cast<double>(R - 1);
    std::vector<double> out(total);
    parallel_for(total, [&](std::size_t f) {
        std::vector<double> x(n);
        std::vector<std::uint32_t> idx((m + 1) * n);
        std::uint64_t rest = f;
        for (int i = 0; i < n; ++i) {
            const std::uint64_t p = (rest % Q) * stride;
            rest /= Q;
            x[i] = static_cast<double>(p) / denom;
            for (int j = 0; j <= m; ++j) idx[j * n + i] = ctx.lattice_index[j * R + p];
        }
        out[f] = ctx.target.eval(x.data()) - f_r_indices(idx.data(), n);
    });
    return out;
}

// ---------------------------------------------------------------- iteration

KChoice choose_k_from_lattice(const DecompositionContext& ctx, const std::vector<double>& e, double norm) {
    const int n = ctx.params.n;
    const int km = ctx.k_max;
    const std::uint64_t R = ctx.lattice_R;
    if (e.size() != upow(R, n)) throw InternalError("residual lattice has the wrong size");
    std::vector<double> raw(km);  // raw[k-1]: steps of gamma^-k
    for (int k = 1; k <= km; ++k) {
        const std::uint64_t step = upow(ctx.params.gamma, km - k);
        double worst = 0.0;
        std::uint64_t axis_stride = 1;
        for (int i = 0; i < n; ++i) {
            for (std::uint64_t f = 0; f < e.size(); ++f) {
                const std::uint64_t coord = (f / axis_stride) % R;
                if (coord + step >= R) continue;
                worst = std::max(worst, std::fabs(e[f + step * axis_stride] - e[f]));
            }
            axis_stride *= R;
        }
        raw[k - 1] = worst;
    }
    KChoice c;
    c.threshold = ctx.params.delta * norm;
    c.omega.assign(km, 0.0);
    double run = 0.0;
    for (int k = km; k >= 1; --k) {
        run = std::max(run, raw[k - 1]);
        c.omega[k - 1] = run;
    }
    for (int k = 1; k <= km; ++k) c.h.push_back(std::pow(static_cast<double>(ctx.params.gamma), -k));
    c.k = km;
    c.warning = true;
    for (int k = 1; k <= km; ++k) {
        if (c.omega[k - 1] <= c.threshold) {
            c.k = k;
            c.warning = false;
            break;
        }
    }
    return c;
}

KChoice choose_k_r(const DecompositionState& s) {
    return choose_k_from_lattice(s.context(), s.lattice_residual(1), s.residual_norms().back());
}

DecompositionState iterate(const DecompositionState& s, std::optional<int> forced_k) {
    const auto& ctx = s.context();
    const KstParams& p = ctx.params;
    const int n = p.n;
    const int m = p.m;
    const int km = ctx.k_max;

    auto layer = std::make_shared<Layer>();
    std::vector<double> e_lat;
    std::uint64_t e_stride;  // lattice stride of e_lat
    if (forced_k) {
        if (*forced_k < 1 || *forced_k > km)
            throw InputError("recorded k = " + std::to_string(*forced_k) + " outside 1..k_max");
        layer->k = *forced_k;
        e_lat = s.lattice_residual(1);
        e_stride = 1;
        layer->k_warning = choose_k_from_lattice(ctx, e_lat, s.residual_norms().back()).warning;
    } else {
        e_lat = s.lattice_residual(1);
        e_stride = 1;
        KChoice c = choose_k_from_lattice(ctx, e_lat, s.residual_norms().back());
        layer->k = c.k;
        layer->k_warning = c.warning;
    }
    const int k = layer->k;
    const GridExtent extent = ctx.config.closed_grid ? GridExtent::Closed : GridExtent::Literal;
    const std::uint64_t G = ShiftedGrid{n, p.gamma, k, 0, extent}.per_axis();
    if (grid_points(G, n) > static_cast<double>(ctx.config.grid_budget))
        throw BudgetError("bump grid for k = " + std::to_string(k) + " exceeds the grid budget");

    const unsigned long bexp = beta_exponent(n, k + 1);
    layer->slope = Rational(pow_int(p.gamma, bexp));
    layer->plateau = (p.gamma - 2) * b_k(p, ctx.lambdas, k);
    layer->slope_plateau = layer->slope * layer->plateau;
    const BigInt gb = pow_int(p.gamma, bexp);
    if (!mpz_divisible_p(ctx.D.get_mpz_t(), gb.get_mpz_t())) throw InternalError("ramp width is not a multiple of 1/D");
    layer->W = ctx.D / gb;
    const Rational PD = layer->plateau * Rational(ctx.D);
    layer->plateau_floor = floor_of(PD);
    layer->support_width = 2 * layer->W + ceil_of(PD);

    // Coefficients e_{r-1}(d)/(m+1) on the unshifted grid.
    const std::uint64_t total = upow(G, n);
    const std::uint64_t grid_stride = upow(p.gamma, km - k) / e_stride;  // in e_lat units
    const std::uint64_t Q = (ctx.lattice_R - 1) / e_stride + 1;
    std::vector<double> coeff(total);
    for (std::uint64_t f = 0; f < total; ++f) {
        std::uint64_t rest = f, lat = 0, mul = 1;
        for (int i = 0; i < n; ++i) {
            lat += (rest % G) * grid_stride * mul;
            rest /= G;
            mul *= Q;
        }
        coeff[f] = e_lat[lat] / (m + 1);
    }

    const std::uint64_t S = ShiftedGrid{n, p.gamma, k, 1, extent}.shift_units();
    const std::uint64_t up = upow(p.gamma, ctx.k_trunc - k);
    layer->per_j.resize(m + 1);
    parallel_for(static_cast<std::size_t>(m + 1), [&](std::size_t j) {
        std::vector<LayerBump> bs(total);
        for (std::uint64_t f = 0; f < total; ++f) {
            std::uint64_t rest = f;
            BigInt X = 0;
            for (int i = 0; i < n; ++i) {
                X += ctx.table[i][(rest % G + j * S) * up];
                rest /= G;
            }
            bs[f].left = X - layer->W;
            bs[f].coeff = coeff[f];
        }
        std::stable_sort(bs.begin(), bs.end(), [](const LayerBump& a, const LayerBump& b) { return a.left < b.left; });
        layer->per_j[j] = std::move(bs);
    });
    // Exact disjointness: consecutive lefts must be at least one support width apart.
    layer->overlaps = 0;
    for (const auto& bs : layer->per_j)
        for (std::size_t b = 1; b < bs.size(); ++b)
            if (bs[b].left - bs[b - 1].left < layer->support_width) ++layer->overlaps;

    DecompositionState out;
    out.ctx_ = s.ctx_;
    out.layers_ = s.layers_;
    out.layers_.push_back(layer);
    out.norms_ = s.norms_;
    out.e_audit_.resize(ctx.audit_count);
    parallel_for(ctx.audit_count, [&](std::size_t q) { out.e_audit_[q] = ctx.audit_f[q] - out.f_r_audit(q); });
    double norm = 0.0;
    for (double v : out.e_audit_) norm = std::max(norm, std::fabs(v));
    out.norms_.push_back(norm);
    return out;
}

DecompositionState decompose(const KstParams& params, const TargetFunction& target, int r,
                             const DecompositionConfig& config) {
    if (r < 0) throw InputError("iteration count must be nonnegative");
    DecompositionState s = DecompositionState::start(params, target, config);
    for (int i = 0; i < r; ++i) s = iterate(s);
    return s;
}

double evaluate_phi(const DecompositionState& s, int j, double y) {
    if (!std::isfinite(y)) throw DomainError("outer argument is not finite");
    return s.phi(j, from_double(y));
}

double evaluate_f_r(const DecompositionState& s, const std::vector<double>& x) { return s.f_r(x); }

LipschitzReport lipschitz_report(const DecompositionState& s) {
    if (s.r() < 1) throw DomainError("Lipschitz report needs at least one iteration");
    const KstParams& p = s.context().params;
    const auto& norms = s.residual_norms();
    LipschitzReport rep;
    rep.k_list = s.k_list();
    rep.C = *std::max_element(rep.k_list.begin(), rep.k_list.end());
    const double g = p.gamma;
    double sum = 0.0, sum_measured = 0.0;
    for (int l = 1; l <= s.r(); ++l) {
        const double gb = std::pow(g, static_cast<double>(beta_exponent(p.n, rep.k_list[l - 1] + 1)));
        sum += std::pow(p.eta, l - 1) * gb;
        sum_measured += norms[l - 1] * gb;
    }
    rep.nu_r = norms[0] / (p.m + 1) * sum;
    rep.nu_r_measured = sum_measured / (p.m + 1);
    rep.K_C_bound = norms[0] / (p.m + 1) * s.r() * std::pow(g, 2.0 * std::pow(p.n, rep.C));
    rep.within_K_C = rep.nu_r <= rep.K_C_bound;
    return rep;
}

// ---------------------------------------------------------------- serialization

Json params_json(const KstParams& p) {
    return Json{{"n", p.n},          {"m", p.m},   {"gamma", p.gamma}, {"delta", json_real(p.delta)},
                {"eta", json_real(p.eta)}, {"lambda_depth", p.lambda_depth}};
}

KstParams params_from_json(const Json& j) {
    ParamOverrides o;
    o.m = require(j, "m").get<int>();
    o.gamma = require(j, "gamma").get<int>();
    o.delta = read_real(require(j, "delta"));
    o.eta = read_real(require(j, "eta"));
    o.lambda_depth = require(j, "lambda_depth").get<int>();
    return make_params(require(j, "n").get<int>(), o);
}

namespace {

Json header_json(const DecompositionState& s) {
    const auto& ctx = s.context();
    Json norms = Json::array();
    for (double v : s.residual_norms()) norms.push_back(json_real(v));
    Json warns = Json::array();
    for (bool w : s.k_warnings()) warns.push_back(w);
    return Json{
        {"format", "kst-decomposition"},
        {"version", 1},
        {"params", params_json(ctx.params)},
        {"target",
         {{"spec", ctx.target.provenance}, {"builtin", ctx.target.builtin},
          {"sup_norm_bound", json_real(ctx.target.sup_norm_bound)}}},
        {"config",
         {{"k_max", ctx.k_max},
          {"k_trunc", ctx.k_trunc},
          {"audit_resolution", ctx.config.audit_resolution},
          {"random_points", ctx.config.random_points},
          {"grid_budget", ctx.config.grid_budget},
          {"closed_grid", ctx.config.closed_grid},
          {"psi_margin", ctx.config.psi_margin}}},
        {"seed", ctx.config.seed},
        {"r", s.r()},
        {"k_list", s.k_list()},
        {"k_warnings", warns},
        {"residual_norms", norms},
    };
}

void write_outer(const DecompositionState& s, std::ostream& out) {
    const auto& ctx = s.context();
    const Rational Dq(ctx.D);
    out << '[';
    for (int j = 0; j <= ctx.params.m; ++j) {
        if (j) out << ',';
        out << "{\"j\":" << j << ",\"layers\":[";
        for (int l = 0; l < s.r(); ++l) {
            const Layer& layer = *s.layers()[l];
            if (l) out << ',';
            const std::string plateau = decimal17(layer.plateau);
            const std::string slope = decimal17(layer.slope);
            out << "{\"k\":" << layer.k << ",\"bumps\":[";
            const auto& bs = layer.per_j[j];
            for (std::size_t b = 0; b < bs.size(); ++b) {
                if (b) out << ',';
                const double xi = ratio_to_double(bs[b].left + layer.W, ctx.D);
                out << "{\"coeff\":\"" << decimal17(bs[b].coeff) << "\",\"plateau\":\"" << plateau
                    << "\",\"slope\":\"" << slope << "\",\"xi\":\"" << decimal17(xi) << "\"}";
            }
            out << "]}";
        }
        out << "]}";
    }
    out << ']';
}

}  // namespace

void write_decomposition(const DecompositionState& s, std::ostream& out) {
    // Keys in sorted order, with the bump arrays streamed in place.
    Json head = header_json(s);
    head["outer"] = nullptr;
    out << '{';
    bool first = true;
    for (auto it = head.begin(); it != head.end(); ++it) {
        if (!first) out << ',';
        first = false;
        out << Json(it.key()).dump() << ':';
        if (it.key() == "outer") write_outer(s, out);
        else out << it.value().dump();
    }
    out << "}\n";
}

std::string decomposition_to_string(const DecompositionState& s) {
    std::ostringstream os;
    write_decomposition(s, os);
    return os.str();
}

DecompositionState load_decomposition_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text, [](int depth, Json::parse_event_t ev, Json& parsed) {
            return !(depth == 1 && ev == Json::parse_event_t::key && parsed == "outer");
        });
    } catch (const Json::exception& e) {
        throw InputError(std::string("malformed decomposition file: ") + e.what());
    }
    try {
        if (!j.is_object() || j.value("format", "") != "kst-decomposition")
            throw InputError("not a decomposition file");
        const KstParams p = params_from_json(require(j, "params"));
        const Json& t = require(j, "target");
        const TargetFunction f = make_target(require(t, "spec").get<std::string>(), p.n);
        const Json& c = require(j, "config");
        DecompositionConfig cfg;
        cfg.k_max = require(c, "k_max").get<int>();
        cfg.audit_resolution = require(c, "audit_resolution").get<int>();
        cfg.random_points = require(c, "random_points").get<int>();
        cfg.grid_budget = require(c, "grid_budget").get<std::uint64_t>();
        cfg.closed_grid = require(c, "closed_grid").get<bool>();
        cfg.psi_margin = require(c, "psi_margin").get<int>();
        cfg.seed = require(j, "seed").get<std::uint64_t>();
        const auto ks = require(j, "k_list").get<std::vector<int>>();
        const Json& norms = require(j, "residual_norms");
        if (norms.size() != ks.size() + 1) throw InputError("residual_norms length does not match k_list");

        DecompositionState s = DecompositionState::start(p, f, cfg);
        for (int k : ks) s = iterate(s, k);
        for (std::size_t r = 0; r < norms.size(); ++r)
            if (json_real(s.residual_norms()[r]) != norms[r])
                throw InputError("decomposition file does not match its replay at r = " + std::to_string(r));
        return s;
    } catch (const Json::exception& e) {
        throw InputError(std::string("malformed decomposition file: ") + e.what());
    }
}

DecompositionState load_decomposition(const std::string& path) { return load_decomposition_text(read_text_file(path)); }

std::string residual_csv(const DecompositionState& s) {
    CsvTable t({"r", "residual_norm", "eta_r_bound", "eta_r_times_norm_f"});
    const auto& norms = s.residual_norms();
    const double eta = s.context().params.eta;
    for (std::size_t r = 1; r < norms.size(); ++r) {
        const double b = std::pow(eta, static_cast<double>(r));
        t.add_row({std::to_string(r), decimal17(norms[r]), decimal17(b), decimal17(b * norms[0])});
    }
    return t.text();
}

}  // namespace kst

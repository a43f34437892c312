#include "oracles.hpp"

#include "kst/decompose.hpp"
#include "kst/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

using namespace kst;

namespace {

DecompositionConfig small_config() {
    DecompositionConfig c;
    c.k_max = 2;
    c.audit_resolution = 41;
    c.random_points = 200;
    c.seed = 5;
    return c;
}

// theta of one recorded bump at y, from the exact layer fields.
double dense_theta(const Layer& L, const LayerBump& b, const Rational& yD) {
    Rational t = (yD - Rational(b.left)) / Rational(L.W);
    return to_double(sigma_exact(t) - sigma_exact(t - 1 - L.slope_plateau));
}

}  // namespace

TEST_CASE("defaults for k_max and the audit grid") {
    KstParams p = make_params(2);
    CHECK(default_k_max(p, 1000000) == 3);
    ParamOverrides o;
    o.m = 8;
    o.gamma = 10;
    o.delta = 0.02;
    o.eta = 0.5;
    CHECK(default_k_max(make_params(2, o), 1000000) == 2);
    CHECK(default_audit_resolution(2) == 101);
    CHECK(default_audit_resolution(3) == 31);
    CHECK(unit_draw(0) == 0.0);
    CHECK(unit_draw(~std::uint64_t(0)) < 1.0);
}

TEST_CASE("zero target stays zero") {
    KstParams p = make_params(2);
    DecompositionState s = decompose(p, builtin_target("zero", 2), 2, small_config());
    CHECK(s.k_list() == std::vector<int>{1, 1});
    for (double v : s.residual_norms()) CHECK(v == 0.0);
    for (const auto& layer : s.layers())
        for (const auto& bs : layer->per_j)
            for (const auto& b : bs) CHECK(b.coeff == 0.0);
    CHECK(s.f_r(std::vector<double>{0.3, 0.7}) == 0.0);
    CHECK(evaluate_phi(s, 2, 0.5) == 0.0);
    KChoice c = choose_k_r(s);
    CHECK(c.k == 1);
    CHECK_FALSE(c.warning);
}

TEST_CASE("no iterations means phi is zero") {
    DecompositionState s = DecompositionState::start(make_params(2), builtin_target("product", 2), small_config());
    CHECK(s.r() == 0);
    CHECK(evaluate_phi(s, 0, 1.0) == 0.0);
    CHECK(s.residual_norms().size() == 1);
    CHECK(s.residual_norms()[0] == 1.0);
    CHECK_THROWS_AS(lipschitz_report(s), DomainError);
}

TEST_CASE("choose_k_r picks the smallest admissible k") {
    KstParams p = make_params(2);
    DecompositionConfig c;
    c.audit_resolution = 41;
    c.random_points = 100;
    DecompositionState s = DecompositionState::start(p, builtin_target("product", 2), c);
    KChoice k = choose_k_r(s);
    // axis steps of h change x1 x2 by at most h: 1/6 > 0.05 >= 1/36
    CHECK(k.k == 2);
    CHECK_FALSE(k.warning);
    CHECK(k.omega[0] == doctest::Approx(1.0 / 6));
    CHECK(k.omega[1] == doctest::Approx(1.0 / 36));
    CHECK(k.omega[0] > k.threshold);
    CHECK(k.omega[1] <= k.threshold);
    for (std::size_t i = 1; i < k.omega.size(); ++i) CHECK(k.omega[i] <= k.omega[i - 1]);
}

TEST_CASE("residual decay for the product target") {
    KstParams p = make_params(2);
    DecompositionConfig c;
    c.random_points = 1000;
    DecompositionState s = decompose(p, builtin_target("product", 2), 2, c);
    const auto& norms = s.residual_norms();
    REQUIRE(norms.size() == 3);
    CHECK(norms[0] == 1.0);
    for (int r = 1; r <= 2; ++r) CHECK(norms[r] <= std::pow(p.eta, r));

    // f_1 at random points
    DecompositionState s1 = s.truncated(1);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 2000; ++t) {
        std::vector<double> x{u(rng), u(rng)};
        CHECK(std::fabs(x[0] * x[1] - s1.f_r(x)) <= p.eta);
    }
    CHECK(s1.residual_norms().size() == 2);
    CHECK(s1.audit_residual() != s.audit_residual());
}

TEST_CASE("layer coefficients are the previous residual at the unshifted grid") {
    KstParams p = make_params(2);
    LambdaCoeffs lc = lambda_coeffs(p);
    DecompositionConfig c = small_config();
    TargetFunction f = builtin_target("gaussian", 2);
    DecompositionState s1 = decompose(p, f, 1, c);
    DecompositionState s2 = iterate(s1, 2);
    const Layer& L = *s2.layers()[1];
    const auto& ctx = s2.context();
    const int k = 2;
    for (int j : {0, 3}) {
        std::multimap<BigInt, double> by_left;
        for (const auto& b : L.per_j[j]) by_left.emplace(b.left, b.coeff);
        ShiftedGrid g{2, p.gamma, k, j, GridExtent::Closed};
        ShiftedGrid g0{2, p.gamma, k, 0, GridExtent::Closed};
        REQUIRE(L.per_j[j].size() == g.size());
        for (std::uint64_t flat = 0; flat < g.size(); flat += 7) {
            Rational xq = xi(p, lc, *ctx.ev, g.point(flat), k);
            Rational left = xq * Rational(ctx.D) - Rational(L.W);
            REQUIRE(left.get_den() == 1);
            auto d = g0.point(flat);
            const double expect = (f({to_double(d[0]), to_double(d[1])}) - s1.f_r(d)) / (p.m + 1);
            auto range = by_left.equal_range(left.get_num());
            REQUIRE(range.first != range.second);
            bool found = false;
            for (auto it = range.first; it != range.second; ++it) found = found || it->second == expect;
            CHECK(found);
        }
    }
}

TEST_CASE("phi on a plateau midpoint is the coefficient") {
    KstParams p = make_params(2);
    DecompositionState s = decompose(p, builtin_target("product", 2), 1, small_config());
    const Layer& L = *s.layers()[0];
    const auto& ctx = s.context();
    const auto& bs = L.per_j[1];
    int checked = 0;
    for (std::size_t b = 1; b + 1 < bs.size() && checked < 200; b += 3) {
        if (bs[b].left - bs[b - 1].left < L.support_width) continue;
        if (bs[b + 1].left - bs[b].left < L.support_width) continue;
        Rational mid = (Rational(bs[b].left + L.W) + L.plateau * Rational(ctx.D) / 2) / Rational(ctx.D);
        CHECK(s.phi(1, mid) == bs[b].coeff);
        ++checked;
    }
    CHECK(checked > 50);
}

TEST_CASE("interval search equals dense summation") {
    KstParams p = make_params(2);
    DecompositionState s = decompose(p, builtin_target("ridge", 2), 2, small_config());
    const auto& ctx = s.context();
    std::mt19937_64 rng(23);
    const double top = 2.0 * (p.gamma - 1) / (p.gamma - 2);
    std::uniform_real_distribution<double> u(0.0, top);
    for (int t = 0; t < 1000; ++t) {
        const int j = t % (p.m + 1);
        // half the samples land inside a bump's support
        Rational y;
        if (t % 2) {
            const auto& bs = s.layers()[t % 2]->per_j[j];
            const auto& b = bs[(t * 7919) % bs.size()];
            y = (Rational(b.left) + Rational(s.layers()[1]->W) * oracle::q(t % 5, 2)) / Rational(ctx.D);
        } else {
            y = from_double(u(rng));
        }
        if (y >= oracle::q(2 * (p.gamma - 1), p.gamma - 2)) continue;
        const Rational yD = y * Rational(ctx.D);
        double dense = 0.0;
        for (const auto& layer : s.layers()) {
            double lv = 0.0;
            for (const auto& b : layer->per_j[j]) {
                const double th = dense_theta(*layer, b, yD);
                if (th != 0.0) lv += b.coeff * th;
            }
            dense += lv;
        }
        CHECK(s.phi(j, y) == doctest::Approx(dense).epsilon(1e-12).scale(1e-12));
    }
}

TEST_CASE("phi stays within the layer coefficient budget") {
    KstParams p = make_params(2);
    DecompositionState s = decompose(p, builtin_target("gaussian", 2), 2, small_config());
    double budget = 0.0;
    for (int l = 0; l < s.r(); ++l) budget += s.residual_norms()[l] / (p.m + 1);
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 2.0 * (p.gamma - 1) / (p.gamma - 2));
    for (int t = 0; t < 2000; ++t) {
        const double y = u(rng);
        for (int j = 0; j <= p.m; ++j) CHECK(std::fabs(evaluate_phi(s, j, y)) <= budget * (1 + 1e-12) + 1e-15);
    }
    CHECK_THROWS_AS(evaluate_phi(s, 0, 2.5), DomainError);
    CHECK_THROWS_AS(evaluate_phi(s, 0, -0.1), DomainError);
}

TEST_CASE("Lipschitz report") {
    KstParams p = make_params(2);
    DecompositionState s0 = DecompositionState::start(p, builtin_target("product", 2), small_config());
    DecompositionState s = iterate(s0, 2);
    LipschitzReport rep = lipschitz_report(s);
    CHECK(rep.nu_r == doctest::Approx(std::pow(6.0, 7) / 5));
    CHECK(rep.C == 2);
    CHECK(rep.k_list == std::vector<int>{2});
    CHECK(rep.K_C_bound == doctest::Approx(std::pow(6.0, 8) / 5));
    CHECK(rep.within_K_C);
    DecompositionState s2 = iterate(s, 1);
    LipschitzReport r2 = lipschitz_report(s2);
    CHECK(r2.nu_r == doctest::Approx((std::pow(6.0, 7) + 0.9 * std::pow(6.0, 3)) / 5));
    CHECK(r2.nu_r <= r2.K_C_bound);
}

TEST_CASE("serialization round trip") {
    KstParams p = make_params(2);
    DecompositionState s = decompose(p, builtin_target("product", 2), 2, small_config());
    const std::string text = decomposition_to_string(s);
    DecompositionState back = load_decomposition_text(text);
    CHECK(back.k_list() == s.k_list());
    CHECK(back.residual_norms() == s.residual_norms());
    CHECK(decomposition_to_string(back) == text);
    CHECK(residual_csv(s).rfind("r,", 0) == 0);
    CHECK_THROWS_AS(load_decomposition_text("{}"), InputError);
    CHECK_THROWS(load_decomposition("/nonexistent/d.json"));
    KstParams q = params_from_json(params_json(p));
    CHECK(q.gamma == p.gamma);
    CHECK(q.a == p.a);
    CHECK(q.eta == p.eta);
}

TEST_CASE("configuration errors") {
    KstParams p = make_params(2);
    DecompositionConfig c = small_config();
    CHECK_THROWS_AS(DecompositionState::start(p, builtin_target("product", 3), c), InputError);
    c.psi_margin = 1;
    CHECK_THROWS_AS(DecompositionState::start(p, builtin_target("product", 2), c), InputError);
    DecompositionConfig big;
    big.k_max = 4;
    CHECK_THROWS_AS(DecompositionState::start(p, builtin_target("product", 2), big), BudgetError);
    DecompositionState s = DecompositionState::start(p, builtin_target("product", 2), small_config());
    CHECK_THROWS_AS(iterate(s, 3), InputError);
}

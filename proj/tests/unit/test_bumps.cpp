#include "oracles.hpp"

#include "kst/bumps.hpp"
#include "kst/errors.hpp"

#include <doctest.h>

#include <random>

using namespace kst;

namespace {

KstParams gamma10_depth3() {
    ParamOverrides o;
    o.m = 8;
    o.gamma = 10;
    o.lambda_depth = 3;
    return make_params(2, o);
}

}  // namespace

TEST_CASE("sigma") {
    CHECK(sigma(-1) == 0);
    CHECK(sigma(0.5) == 0.5);
    CHECK(sigma(2) == 1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int t = 0; t < 10000; ++t) {
        const double x = u(rng);
        CHECK(sigma(x) == std::max(0.0, x) - std::max(0.0, x - 1));
    }
    CHECK(sigma_exact(oracle::q(1, 3)) == oracle::q(1, 3));
}

TEST_CASE("shifted grids") {
    ShiftedGrid g1{2, 6, 1, 3};
    CHECK(g1.shift() == 0);
    CHECK(g1.size() == 36);
    ShiftedGrid g0{2, 6, 2, 0};
    CHECK(g0.shift() == 0);
    ShiftedGrid g{2, 6, 3, 2};
    CHECK(g.shift() == 2 * (oracle::gpow_neg(6, 2) + oracle::gpow_neg(6, 3)));
    CHECK(g.size() == 216 * 216);
    ShiftedGrid c{2, 6, 2, 0, GridExtent::Closed};
    CHECK(c.per_axis() == 37);
    auto pt = g.point(1 + 216 * 5);
    CHECK(pt[0] == oracle::q(1, 216) + g.shift());
    CHECK(pt[1] == oracle::q(5, 216) + g.shift());
}

TEST_CASE("xi examples") {
    KstParams p = gamma10_depth3();
    LambdaCoeffs lc = lambda_coeffs(p);
    InnerEvaluator ev(p);
    CHECK(xi(p, lc, ev, {0, 0}, 1) == 0);
    CHECK(xi(p, lc, ev, {oracle::q(3, 10), oracle::q(3, 10)}, 1) == oracle::q(33030003, 100000000));
    CHECK_THROWS_AS(xi(p, lc, ev, {Rational(2), 0}, 1), DomainError);
    CHECK_THROWS_AS(xi(p, lc, ev, {oracle::q(1, 100), 0}, 1), DomainError);
    const Rational cap = oracle::q(2 * (p.gamma - 1), p.gamma - 2);
    for (std::uint64_t f = 0; f < 400; ++f) {
        ShiftedGrid g{2, 10, 1, 0};
        (void)g;
        std::vector<Rational> d{oracle::q(f % 20, 10), oracle::q(f / 20, 10)};
        CHECK(xi(p, lc, ev, d, 1) < cap);
    }
}

TEST_CASE("xi is monotone along digit-restricted coordinates") {
    KstParams p = make_params(2);
    LambdaCoeffs lc = lambda_coeffs(p);
    InnerEvaluator ev(p);
    for (int a = 0; a < 36; ++a) {
        if (a % 6 == 5) continue;
        for (int b = 0; b + 1 < 36; ++b) {
            if (b % 6 == 5 || (b + 1) % 6 == 5) continue;
            Rational x(a, 36), y0(b, 36), y1(b + 1, 36);
            CHECK(xi(p, lc, ev, {x, y0}, 2) < xi(p, lc, ev, {x, y1}, 2));
            CHECK(xi(p, lc, ev, {y0, x}, 2) < xi(p, lc, ev, {y1, x}, 2));
        }
    }
}

TEST_CASE("b_k partial sums") {
    KstParams p = gamma10_depth3();
    LambdaCoeffs lc = lambda_coeffs(p);
    // Three terms beyond k = 1 are 10^-3, 10^-7, 10^-15.
    Rational lo = (oracle::gpow_neg(10, 3) + oracle::gpow_neg(10, 7) + oracle::gpow_neg(10, 15)) * lc.sum();
    CHECK(b_k(p, lc, 1) == lo);
    BkBound b = b_k_bounds(p, lc, 1);
    CHECK(b.hi > b.lo);
    CHECK(b.hi - b.lo < 2 * oracle::gpow_neg(10, oracle::beta(2, 1 + 1 + 3)) * lc.sum());
    KstParams d = make_params(2);
    LambdaCoeffs ld = lambda_coeffs(d);
    CHECK(b_k(d, ld, 1) > oracle::gpow_neg(6, 3) * ld.sum());
    CHECK(b_k(d, ld, 1) < oracle::gpow_neg(6, 3) * ld.sum() * oracle::q(101, 100));
    for (int k = 1; k <= 4; ++k) {
        Rational ratio = b_k(d, ld, k + 1) / b_k(d, ld, k);
        CHECK(ratio <= oracle::gpow_neg(6, oracle::beta(2, k + 2) - oracle::beta(2, k + 1)) * oracle::q(11, 10));
        CHECK(ratio < 1);
    }
}

TEST_CASE("theta shape") {
    KstParams p = make_params(2);
    LambdaCoeffs lc = lambda_coeffs(p);
    BumpSpec b = make_bump(p, lc, oracle::q(1, 3), 2);
    CHECK(b.slope == 279936);
    CHECK(b.plateau == 4 * b_k(p, lc, 2));
    CHECK(theta_exact(b, b.center_left) == 1);
    CHECK(theta_exact(b, b.center_left + b.plateau) == 1);
    CHECK(theta_exact(b, b.support_left()) == 0);
    CHECK(theta_exact(b, b.support_right()) == 0);
    CHECK(theta(b, to_double(b.center_left)) == 1);
    CHECK(theta(b, to_double(b.support_left())) == doctest::Approx(0).epsilon(1e-9));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(to_double(b.support_left()) - 1e-5, to_double(b.support_right()) + 1e-5);
    for (int t = 0; t < 2000; ++t) {
        Rational x = from_double(u(rng)), y = from_double(u(rng));
        if (x == y) continue;
        Rational tx = theta_exact(b, x), ty = theta_exact(b, y);
        CHECK(tx >= 0);
        CHECK(tx <= 1);
        Rational q = (tx - ty) / (x - y);
        CHECK(abs(q) <= b.slope);
    }
    // exact slope on the ramp interiors
    Rational r0 = b.support_left() + b.ramp() / 4, r1 = b.support_left() + b.ramp() / 2;
    CHECK((theta_exact(b, r1) - theta_exact(b, r0)) / (r1 - r0) == b.slope);
}

TEST_CASE("support audit for k = 2 on the literal grid") {
    KstParams p = make_params(2);
    LambdaCoeffs lc = lambda_coeffs(p);
    InnerEvaluator ev(p);
    for (int j = 0; j <= 4; ++j) {
        SupportAudit a = disjoint_support_audit(p, lc, ev, 2, j);
        CHECK(a.count == 1296);
        CHECK(a.ok);
        CHECK(a.min_gap > 0);
    }
    CHECK_THROWS_AS(disjoint_support_audit(p, lc, ev, 3, 0), BudgetError);
    CHECK_THROWS_AS(disjoint_support_audit(p, lc, ev, 1, 5), DomainError);
}

TEST_CASE("support audit at k = 1 finds the overlap of the identity level") {
    // psi_1 is the identity, so xi(0, 5/6) and xi(1/6, 0) sit closer than a
    // plateau plus two ramps.
    KstParams p = make_params(2);
    LambdaCoeffs lc = lambda_coeffs(p);
    InnerEvaluator ev(p);
    SupportAudit a = disjoint_support_audit(p, lc, ev, 1, 0);
    CHECK(a.count == 36);
    CHECK_FALSE(a.ok);
    Rational gap = oracle::q(1, 6) - oracle::q(5, 6) * lc.values[1] - (4 * b_k_bounds(p, lc, 1).hi + 2 * oracle::q(1, 216));
    CHECK(a.min_gap == gap);
}

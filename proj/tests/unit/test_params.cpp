#include "oracles.hpp"

#include "kst/errors.hpp"
#include "kst/params.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>

using namespace kst;

TEST_CASE("beta examples and recurrence") {
    CHECK(beta(2, 1) == 1);
    CHECK(beta(2, 3) == 7);
    CHECK(beta(3, 2) == 4);
    for (int n = 2; n <= 6; ++n)
        for (int l = 1; l <= 12; ++l) CHECK(beta(n, l + 1) == n * beta(n, l) + 1);
    CHECK(beta(2, 80) == pow_int(2, 80) - 1);
}

TEST_CASE("defaults for n = 2..6") {
    for (int n = 2; n <= 6; ++n) {
        KstParams p = make_params(n);
        CHECK(p.m == 2 * n);
        CHECK(p.gamma == 2 * n + 2);
        CHECK(p.delta == 0.05);
        CHECK(p.lambda_depth == 8);
        CHECK(p.a == oracle::q(1, p.gamma * (p.gamma - 1)));
        // (m-n+1)/(n+1) delta + 2n/(m+1) <= eta < 1, exact
        const Rational lower = oracle::q(n + 1, n + 1) * from_double(0.05) + oracle::q(2 * n, 2 * n + 1);
        CHECK(p.eta_lower == lower);
        CHECK(lower <= from_double(p.eta));
        CHECK(p.eta < 1.0);
        CHECK(p.eta >= 0.9);
        CHECK(std::fabs(p.eta * 100 - std::round(p.eta * 100)) < 1e-9);
        if (n >= 3) CHECK(p.eta - 0.01 < to_double(lower));
    }
    CHECK(make_params(2).eta == 0.9);
    CHECK(make_params(3).eta == 0.91);
    ParamOverrides o;
    o.eta = 0.95;
    CHECK(make_params(3, o).eta == 0.95);
}

TEST_CASE("n = 2 defaults pin the eta inequality") {
    KstParams p = make_params(2);
    CHECK(p.eta_lower == from_double(0.05) + oracle::q(4, 5));
    CHECK(p.alpha == doctest::Approx(std::log(2.0) / std::log(6.0)));
    CHECK(p.nu == doctest::Approx(std::pow(2.0, -p.alpha) * 9));
}

TEST_CASE("constraint violations") {
    ParamOverrides o;
    o.gamma = 5;
    CHECK_THROWS_AS(make_params(2, o), ConstraintError);
    try {
        make_params(2, o);
    } catch (const ConstraintError& e) {
        CHECK(std::string(e.what()).find("gamma >= m + 2") != std::string::npos);
    }
    ParamOverrides e;
    e.eta = 0.5;
    CHECK_THROWS_AS(make_params(2, e), ConstraintError);
    CHECK_THROWS(make_params(1));
}

TEST_CASE("lambda coefficients") {
    ParamOverrides o;
    o.m = 8;
    o.gamma = 10;
    o.delta = 0.02;
    o.eta = 0.9;
    o.lambda_depth = 3;
    KstParams p = make_params(2, o);
    LambdaCoeffs lc = lambda_coeffs(p);
    REQUIRE(lc.values.size() == 2);
    CHECK(lc.values[0] == 1);
    CHECK(lc.values[1] == oracle::q(1010001, 10000000));
    CHECK(lc.values[1] == oracle::lambda(2, 2, 10, 3));

    KstParams d = make_params(2);
    LambdaCoeffs ld = lambda_coeffs(d);
    CHECK(ld.values[0] == 1);
    CHECK(ld.sum() < oracle::q(5, 4));
}

TEST_CASE("lambda depth d and d+1 differ by at most the tail bound") {
    for (int n = 2; n <= 3; ++n) {
        for (int depth = 1; depth <= 8; ++depth) {
            ParamOverrides a, b;
            a.lambda_depth = depth;
            b.lambda_depth = depth + 1;
            LambdaCoeffs la = lambda_coeffs(make_params(n, a));
            LambdaCoeffs lb = lambda_coeffs(make_params(n, b));
            for (int i = 0; i < n; ++i) {
                Rational diff = lb.values[i] - la.values[i];
                CHECK(diff >= 0);
                CHECK(diff <= la.tail_bound);
                CHECK(la.values[i] == oracle::lambda(i + 1, n, 2 * n + 2, depth));
            }
        }
    }
}

TEST_CASE("params JSON uses fraction objects and 17-digit reals") {
    KstParams p = make_params(2);
    LambdaCoeffs lc = lambda_coeffs(p);
    auto j = nlohmann::json::parse(params_to_json(p, &lc));
    CHECK(j["gamma"] == 6);
    CHECK(j["m"] == 4);
    CHECK(j["a"]["num"] == "1");
    CHECK(j["a"]["den"] == "30");
    CHECK(j["delta"].is_string());
    CHECK(params_to_json(p, &lc) == params_to_json(make_params(2), &lc));
}

#include <cmath>
#include <functional>
#include <string>

#include <doctest.h>

#include "gapfolio/dual_transform.hpp"
#include "gapfolio/errors.hpp"
#include "gapfolio/market.hpp"
#include "gapfolio/pde_core.hpp"
#include "gapfolio/rng.hpp"
#include "gapfolio/simulate.hpp"

using namespace gapfolio;

namespace {

std::string thrown_kind(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return "";
}

MarketParams equal_rates() {
    MarketParams p;
    p.r1 = p.r2 = 0.05;
    return p;
}

const DualSurface& eq_dual() {
    static const DualSurface ds = [] {
        const MarketParams p = equal_rates();
        DualSurface d = build_u(solve_w(validate_params(p), p, Grid{-8.0, 4.0, 601, 300}, 1e-8));
        build_v(d);
        return d;
    }();
    return ds;
}

}  // namespace

TEST_CASE("path rng is deterministic per (seed, path) and well distributed") {
    PathRng a(42, 7), b(42, 7), c(42, 8);
    for (int i = 0; i < 16; ++i) CHECK(a.normal() == b.normal());
    CHECK(PathRng(42, 7).uniform() != c.uniform());

    PathRng r(11, 0);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double g = r.normal();
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    CHECK(std::fabs(mean) < 0.03);
    CHECK(std::fabs(sq / n - mean * mean - 1.0) < 0.05);
}

TEST_CASE("all-cash policy is deterministic and matches compounding") {
    MarketParams p;
    SimConfig cfg;
    cfg.n_paths = 400;
    cfg.n_steps = 50;
    const auto st = simulate_policy(*make_zero_policy(), p, cfg);
    const double dt = p.T / cfg.n_steps;
    const double x_T = std::pow(1.0 + p.r1 * dt, cfg.n_steps);  // x0 = 1
    const double expect = (x_T - p.d) * (x_T - p.d);
    CHECK(st.mean_sq_dev == doctest::Approx(expect).epsilon(1e-12));
    CHECK(st.std_err <= 1e-12);
    CHECK(st.terminal_min == doctest::Approx(x_T).epsilon(1e-12));
    CHECK(st.terminal_max == doctest::Approx(x_T).epsilon(1e-12));
    CHECK(st.max_abs_pi == 0.0);
    CHECK(st.n_paths == 400);
}

TEST_CASE("all-in-stock estimate matches the lognormal moment") {
    MarketParams p;
    SimConfig cfg;
    cfg.n_paths = 50000;
    cfg.n_steps = 600;
    const auto st = simulate_policy(*make_all_in_stock_policy(), p, cfg);
    // E[(X_T - d)^2] = x0^2 e^{(2 mu + sigma2) T} - 2 d x0 e^{mu T} + d^2
    const double expect = 71.95387321293316;
    CHECK(std::fabs(st.mean_sq_dev - expect) < 4.0 * st.std_err + 0.05);
    CHECK(st.std_err > 0.0);
    CHECK(st.terminal_min < st.terminal_max);
}

TEST_CASE("results are identical for any worker count") {
    MarketParams p;
    SimConfig cfg;
    cfg.n_paths = 2000;
    cfg.n_steps = 50;
    cfg.n_threads = 1;
    const auto one = simulate_policy(*make_all_in_stock_policy(), p, cfg);
    cfg.n_threads = 3;
    const auto three = simulate_policy(*make_all_in_stock_policy(), p, cfg);
    CHECK(one.mean_sq_dev == three.mean_sq_dev);  // bitwise, not approximate
    CHECK(one.std_err == three.std_err);
    CHECK(one.terminal_mean == three.terminal_mean);
    CHECK(one.terminal_min == three.terminal_min);
    CHECK(one.terminal_max == three.terminal_max);
}

TEST_CASE("antithetic pairing keeps determinism and pairs the draws") {
    MarketParams p;
    SimConfig cfg;
    cfg.n_paths = 2000;
    cfg.n_steps = 50;
    cfg.antithetic = true;
    cfg.n_threads = 1;
    const auto a = simulate_policy(*make_all_in_stock_policy(), p, cfg);
    cfg.n_threads = 4;
    const auto b = simulate_policy(*make_all_in_stock_policy(), p, cfg);
    CHECK(a.mean_sq_dev == b.mean_sq_dev);
    CHECK(a.n_paths == 2000);
    // mirrored shocks keep the two halves of each pair distinct paths
    CHECK(a.terminal_min < a.terminal_mean);
}

TEST_CASE("formula policies expose their closed forms") {
    MarketParams p;
    const auto classical = make_classical_no_gap_policy(p, p.r1);
    CHECK(classical->eval(1.0, 0.0).pi == doctest::Approx(10.942938936595233).epsilon(1e-12));
    const auto constant = make_constant_dollar_policy(2.5);
    CHECK(constant->eval(-3.0, 1.0).pi == 2.5);
    CHECK(make_zero_policy()->eval(1.0, 0.0).pi == 0.0);
    CHECK(make_all_in_stock_policy()->eval(1.5, 0.0).pi == 1.5);
    CHECK(make_zero_policy()->name() == "zero");
}

TEST_CASE("surface policy reproduces the equal-rates feedback form") {
    const OptimalPolicy pol(eq_dual());
    // pi(x, t) = (mu - r)/sigma2 * (d e^{-r (T-t)} - x), here the ratio is 1
    for (double t : {0.0, 1.0, 2.5}) {
        const double cap = 10.0 * std::exp(-0.05 * (3.0 - t));
        for (double x : {-2.0, 0.0, 1.0, 4.0}) {
            const auto e = pol.eval(x, t);
            CHECK_FALSE(e.extrapolated);
            CHECK(e.pi == doctest::Approx(cap - x).epsilon(5e-3));
        }
    }
    // at or above the discounted target the position closes out
    const auto edge = pol.eval(9.5, 0.0);
    CHECK(edge.pi == 0.0);
    CHECK(edge.extrapolated);
}

TEST_CASE("policy failures carry the offending path") {
    MarketParams p;
    SimConfig cfg;
    cfg.n_paths = 8;
    cfg.n_steps = 4;
    const auto nan_policy = make_constant_dollar_policy(std::nan(""));
    try {
        simulate_policy(*nan_policy, p, cfg);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == "PolicyEvaluationFailure");
        CHECK(std::string(e.what()).find("path") != std::string::npos);
    }
}

TEST_CASE("simulation validates its configuration") {
    MarketParams p;
    SimConfig cfg;
    const auto pol = make_zero_policy();
    {
        SimConfig c2 = cfg;
        c2.n_paths = 0;
        CHECK(thrown_kind([&] { simulate_policy(*pol, p, c2); }) == "NonPositive");
    }
    {
        SimConfig c2 = cfg;
        c2.n_steps = 0;
        CHECK(thrown_kind([&] { simulate_policy(*pol, p, c2); }) == "NonPositive");
    }
    {
        SimConfig c2 = cfg;
        c2.t0 = p.T;  // nothing left to simulate
        CHECK(thrown_kind([&] { simulate_policy(*pol, p, c2); }) == "OutOfRange");
    }
    {
        SimConfig c2 = cfg;
        c2.x0 = 9.5;  // at/above the discounted target
        CHECK(thrown_kind([&] { simulate_policy(*pol, p, c2); }) == "OutOfRange");
    }
}

TEST_CASE("verification compares policies against the reference value") {
    const MarketParams p = equal_rates();
    const double v_ref = legendre_V(eq_dual(), 1.0, 0.0).V;
    SimConfig cfg;
    cfg.n_paths = 4000;
    cfg.n_steps = 80;
    const OptimalPolicy opt(eq_dual());
    std::vector<const Policy*> alts;
    const auto zero = make_zero_policy();
    const auto all_in = make_all_in_stock_policy();
    alts.push_back(zero.get());
    alts.push_back(all_in.get());
    const auto rep = verify_value(v_ref, opt, alts, p, cfg);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].policy == "optimal");
    CHECK(rep.std_err_reliable);
    CHECK(std::fabs(rep.rows[0].z_score) <= 3.0);
    for (std::size_t i = 1; i < rep.rows.size(); ++i) CHECK(rep.rows[i].pass);
    CHECK(rep.pass);

    SimConfig tiny = cfg;
    tiny.n_paths = 50;  // below the floor for a trustworthy standard error
    const auto unreliable = verify_value(v_ref, opt, alts, p, tiny);
    CHECK_FALSE(unreliable.std_err_reliable);
    CHECK_FALSE(unreliable.pass);
}

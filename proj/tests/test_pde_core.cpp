#include <cmath>
#include <functional>
#include <string>

#include <doctest.h>

#include "gapfolio/errors.hpp"
#include "gapfolio/market.hpp"
#include "gapfolio/pde_core.hpp"

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

// Coarse z-aligned grid: z = 0 and s = 1 fall exactly on nodes, so closed-form
// checks need no interpolation.
Grid coarse_grid() { return Grid{-8.0, 4.0, 601, 300}; }

MarketParams equal_rates() {
    MarketParams p;
    p.r1 = p.r2 = 0.05;
    return p;
}

}  // namespace

TEST_CASE("default grid tracks the target") {
    MarketParams p;
    const Grid g = Grid::defaults(p);
    CHECK(g.z_min == doctest::Approx(std::log(20.0) - 14.0));
    CHECK(g.z_max == doctest::Approx(std::log(20.0) + 4.0));
    CHECK(g.nz == 1801);
    CHECK(g.ns == 600);
    CHECK(g.dz() == doctest::Approx(0.01));
    CHECK(g.z(0) == doctest::Approx(g.z_min));
    CHECK(g.z(g.nz - 1) == doctest::Approx(g.z_max));

    MarketParams q = p;
    q.T = 1.5;
    CHECK(Grid::defaults(q).ns == 300);
}

TEST_CASE("array storage is dense row-major") {
    Array2d a(3, 4);
    a(1, 2) = 7.5;
    CHECK(a.rows() == 3);
    CHECK(a.cols() == 4);
    CHECK(a.row(1)[2] == 7.5);
    CHECK(a.data().size() == 12);
}

TEST_CASE("regularized slope saturates like the exact clamp") {
    MarketParams p;
    const auto c = validate_params(p);
    // deep in the left tail w < 0, w_z ~ 0+: ratio -> -inf, slope caps at a1
    CHECK(regularized_A(-9.5, 1e-12, 1e-8, c) == doctest::Approx(1.3));
    // positive w with tiny derivative: ratio -> +inf, slope caps at a2
    CHECK(regularized_A(0.5, 1e-12, 1e-8, c) == doctest::Approx(0.7));
    // interior: w/wz = -0.9 -> slope 0.9
    CHECK(regularized_A(-0.9, 1.0, 1e-8, c) == doctest::Approx(0.9));
}

TEST_CASE("solver validates grid and regularization inputs") {
    MarketParams p;
    const auto c = validate_params(p);
    CHECK(thrown_kind([&] { solve_w(c, p, Grid{0.0, 1.0, 4, 10}, 1e-8); }) == "GridInvalid");
    CHECK(thrown_kind([&] { solve_w(c, p, Grid{1.0, -1.0, 101, 10}, 1e-8); }) == "GridInvalid");
    CHECK(thrown_kind([&] { solve_w(c, p, Grid{-8.0, 4.0, 101, 0}, 1e-8); }) == "GridInvalid");
    CHECK(thrown_kind([&] { solve_w(c, p, coarse_grid(), 0.0); }) == "NonPositive");
    CHECK(thrown_kind([&] { solve_w(c, p, coarse_grid(), 1.0); }) == "NonPositive");
    // truncation must cover both initial boundary points with margin
    CHECK(thrown_kind([&] { solve_w(c, p, Grid{-8.0, 2.8, 541, 30}, 1e-8); }) == "GridTooSmall");
    CHECK(thrown_kind([&] { solve_w(c, p, Grid{1.5, 7.0, 276, 30}, 1e-8); }) == "GridTooSmall");
}

TEST_CASE("solver reproduces the closed form when the rates coincide") {
    // with equal rates the transformed equation is linear with constant
    // coefficients and w(z, s) = 1/2 e^{theta s} e^z - e^{-r s} d, theta = 0
    const MarketParams p = equal_rates();
    const auto c = validate_params(p);
    const auto sol = solve_w(c, p, coarse_grid(), 1e-8);

    CHECK(sol.s_nodes.size() == 301);
    CHECK(sol.ds() == doctest::Approx(0.01));
    // initial level is analytic
    CHECK(sol.w(0, 400) == doctest::Approx(0.5 - 10.0).epsilon(1e-12));   // z = 0
    CHECK(sol.w_z(0, 400) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sol.w(0, 500) == doctest::Approx(0.5 * std::exp(2.0) - 10.0));  // z = 2
    // interior accuracy after 100 backward-Euler steps (s = 1)
    CHECK(sol.w(100, 400) == doctest::Approx(-9.01229424500714).epsilon(5e-5));
    // terminal level keeps the same form (s = 3)
    CHECK(sol.w(300, 400) == doctest::Approx(0.5 - 10.0 * std::exp(-0.15)).epsilon(5e-5));
    // Picard converged quickly everywhere
    for (int it : sol.picard_iterations) CHECK(it <= 10);
    CHECK(sol.residuals.back() <= 1e-9);
}

TEST_CASE("closed-form solution passes the envelope check at grid accuracy") {
    const MarketParams p = equal_rates();
    const auto c = validate_params(p);
    const auto sol = solve_w(c, p, coarse_grid(), 1e-8);
    // the closed form sits exactly on both envelopes, so the allowance must
    // absorb the discretization error; 5e-3 does on this grid
    const auto rep = check_w_bounds(sol, c, p, 5e-3, 0.0);
    CHECK(rep.ok());
    CHECK(rep.nodes_checked == 301L * 601L);
    CHECK(rep.worst_w_lower > 0.0);
    CHECK(rep.worst_w_upper > 0.0);
}

TEST_CASE("envelope check flags a corrupted surface") {
    const MarketParams p = equal_rates();
    const auto c = validate_params(p);
    auto sol = solve_w(c, p, coarse_grid(), 1e-8);
    sol.w(150, 300) += 1.0;  // push one node above the upper envelope
    const auto rep = check_w_bounds(sol, c, p, 5e-3, 0.0);
    CHECK_FALSE(rep.ok());
    bool found = false;
    for (const auto& v : rep.violations)
        if (v.level == 150 && v.node == 300 && std::string(v.bound) == "w_upper") found = true;
    CHECK(found);
}

TEST_CASE("rate-gap solve stays inside its envelopes on the default grid") {
    MarketParams p;
    const auto c = validate_params(p);
    const auto sol = solve_w(c, p, Grid::defaults(p), 1e-8);

    // left Robin layer is trimmed but bounded
    CHECK(sol.usable_from > 0);
    CHECK(sol.grid.z(sol.usable_from) <= 2.162823150618887 - 1.0 + 1e-12);

    const auto rep = check_w_bounds(sol, c, p, 1e-6, 1e-6);
    CHECK(rep.ok());

    // interior spot value at z = 0, s = 1 (interpolated between nodes)
    const Grid& g = sol.grid;
    const int i = static_cast<int>(std::floor((0.0 - g.z_min) / g.dz()));
    const double al = (0.0 - g.z(i)) / g.dz();
    const double w01 = sol.w(200, i) * (1.0 - al) + sol.w(200, i + 1) * al;
    CHECK(w01 > -9.3545);
    CHECK(w01 < -8.6625);
}

TEST_CASE("starved iteration budget raises a divergence error") {
    MarketParams p;
    const auto c = validate_params(p);
    SolverOptions opts;
    opts.max_picard_iters = 1;
    CHECK(thrown_kind([&] { solve_w(c, p, coarse_grid(), 1e-8, opts); }) == "PicardDivergence");
}

TEST_CASE("regularization continuation lands on the same surface") {
    const MarketParams p = equal_rates();
    const auto c = validate_params(p);
    const auto plain = solve_w(c, p, coarse_grid(), 1e-8);
    SolverOptions opts;
    opts.eps_continuation = true;
    const auto ladder = solve_w(c, p, coarse_grid(), 1e-8, opts);
    CHECK(ladder.w(100, 400) == doctest::Approx(plain.w(100, 400)).epsilon(1e-6));
    CHECK(ladder.w(300, 450) == doctest::Approx(plain.w(300, 450)).epsilon(1e-6));
}

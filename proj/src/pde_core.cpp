#include "gapfolio/pde_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gapfolio/errors.hpp"

namespace gapfolio {

namespace {

// w_z by central differences in the interior, one-sided second order at the
// edges; the same stencil feeds A's argument and the boundary rows.
void derivative_z(const std::vector<double>& w, double dz, std::vector<double>& out) {
    const int n = static_cast<int>(w.size());
    const double inv2 = 1.0 / (2.0 * dz);
    out[0] = (-3.0 * w[0] + 4.0 * w[1] - w[2]) * inv2;
    for (int i = 1; i + 1 < n; ++i) out[i] = (w[i + 1] - w[i - 1]) * inv2;
    out[n - 1] = (3.0 * w[n - 1] - 4.0 * w[n - 2] + w[n - 3]) * inv2;
}

// In-place Thomas solve; lo[0] and up[n-1] are ignored.
void solve_tridiagonal(const std::vector<double>& lo, const std::vector<double>& di,
                       const std::vector<double>& up, const std::vector<double>& rhs,
                       std::vector<double>& cp, std::vector<double>& dp, std::vector<double>& x) {
    const int n = static_cast<int>(di.size());
    if (std::fabs(di[0]) < 1e-300)
        throw Error::numerical("SingularSystem", "zero pivot in tridiagonal solve (row 0)");
    cp[0] = up[0] / di[0];
    dp[0] = rhs[0] / di[0];
    for (int i = 1; i < n; ++i) {
        const double den = di[i] - lo[i] * cp[i - 1];
        if (std::fabs(den) < 1e-300)
            throw Error::numerical("SingularSystem",
                                   "zero pivot in tridiagonal solve (row " + std::to_string(i) + ")");
        cp[i] = up[i] / den;
        dp[i] = (rhs[i] - lo[i] * dp[i - 1]) / den;
    }
    x[n - 1] = dp[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i] = dp[i] - cp[i] * x[i + 1];
}

double b_initial(const DerivedConstants& c, const MarketParams& p) {
    return std::log(2.0 * p.d) - std::log1p(c.a2);
}

double l_initial(const DerivedConstants& c, const MarketParams& p) {
    return std::log(2.0 * p.d) - std::log1p(c.a1);
}

// First column index clear of the left Robin boundary layer. The boundary
// data discounts at r2 while the interior constant mode decays at r1; the
// mismatch excites the operator's stationary kernel mode e^{-z}, whose
// amplitude c(s) is read off the edge value. Trim where the mode could still
// reach 1e-3 of the e^{+z} solution scale, then extend past any remaining
// non-positive w_z.
int compute_usable_from(const WSolution& sol, const DerivedConstants& c, const MarketParams& p) {
    const Grid& g = sol.grid;
    const double dz = g.dz();
    double c_est = 0.0;
    for (size_t j = 1; j < sol.s_nodes.size(); ++j) {
        const double s = sol.s_nodes[j];
        const double layer = sol.w(static_cast<int>(j), 0) + std::exp(-p.r1 * s) * p.d -
                             0.5 * std::exp(c.theta1 * s) * std::exp(g.z_min);
        c_est = std::max(c_est, layer);
    }
    int idx = 0;
    if (c_est > 0.0) {
        const double rho_tol = 1e-3;
        const double zeta = 0.5 * (std::log(2.0 * c_est) - g.z_min +
                                   std::max(-c.theta2 * p.T, 0.0) - std::log(rho_tol));
        idx = std::max(0, static_cast<int>(std::ceil(zeta / dz)));
    }
    int last_bad = -1;
    for (size_t j = 1; j < sol.s_nodes.size(); ++j) {
        const double* wz = sol.w_z.row(static_cast<int>(j));
        for (int i = g.nz - 1; i > last_bad; --i) {
            if (wz[i] <= 0.0) {
                last_bad = i;
                break;
            }
        }
    }
    if (last_bad >= 0) idx = std::max(idx, last_bad + 1 + static_cast<int>(std::ceil(1.0 / dz)));
    return idx;
}

}  // namespace

Grid Grid::defaults(const MarketParams& p) {
    Grid g;
    const double anchor = std::log(2.0 * p.d);
    g.z_min = anchor - 14.0;
    g.z_max = anchor + 4.0;
    g.nz = 1801;
    g.ns = std::max(1, static_cast<int>(std::llround(200.0 * p.T)));
    return g;
}

double regularized_A(double w_val, double wz_val, double eps, const DerivedConstants& c) noexcept {
    return clamp_A(w_val / (std::fabs(wz_val) + eps), c);
}

WSolution solve_w(const DerivedConstants& c, const MarketParams& p, const Grid& g, double eps,
                  const SolverOptions& opts) {
    if (!(g.z_min < g.z_max) || g.nz < 5 || g.ns < 1)
        throw Error::validation("GridInvalid", "need z_min < z_max, nz >= 5, ns >= 1");
    if (!(eps > 0.0 && eps < 1.0))
        throw Error::validation("NonPositive", "eps must lie in (0, 1)");
    if (opts.max_picard_iters < 1 || !(opts.picard_tol > 0.0))
        throw Error::validation("ConfigInvalid", "picard options must be positive");

    const double b0 = b_initial(c, p);
    const double l0 = l_initial(c, p);
    if (g.z_max < b0 + 0.5 || g.z_min > l0 - 1.0)
        throw Error::numerical("GridTooSmall",
                               "grid must span the initial boundaries with margin: need z_max >= " +
                                   std::to_string(b0 + 0.5) + " and z_min <= " + std::to_string(l0 - 1.0));

    const int nz = g.nz, ns = g.ns;
    const double dz = g.dz();
    const double ds = p.T / ns;
    const double inv_ds = 1.0 / ds;
    const double inv_dz2 = 1.0 / (dz * dz);
    const double inv_2dz = 1.0 / (2.0 * dz);

    WSolution sol;
    sol.params = p;
    sol.consts = c;
    sol.grid = g;
    sol.epsilon = eps;
    sol.s_nodes.resize(ns + 1);
    for (int j = 0; j <= ns; ++j) sol.s_nodes[j] = j * ds;
    sol.w = Array2d(ns + 1, nz);
    sol.w_z = Array2d(ns + 1, nz);
    sol.picard_iterations.reserve(ns);
    sol.residuals.reserve(ns);

    std::vector<double> ez(nz);
    for (int i = 0; i < nz; ++i) ez[i] = std::exp(g.z(i));

    // Initial level: exact data and its exact derivative. The finite
    // difference of 1/2 e^z overshoots by dz^2/6 * 1/2 e^z, which would sit
    // outside the derivative envelope exactly at s = 0 where it is tight.
    for (int i = 0; i < nz; ++i) {
        sol.w(0, i) = 0.5 * ez[i] - p.d;
        sol.w_z(0, i) = 0.5 * ez[i];
    }

    std::vector<double> ladder;
    if (opts.eps_continuation && opts.continuation_start > eps) {
        for (double e = opts.continuation_start; e > eps * (1.0 + 1e-12); e *= 1e-2)
            ladder.push_back(e);
    }
    ladder.push_back(eps);

    std::vector<double> W(nz), Wz(nz), Wnew(nz);
    std::vector<double> lo(nz), di(nz), up(nz), rhs(nz), cp(nz), dp(nz);

    for (int n = 0; n < ns; ++n) {
        const double s1 = sol.s_nodes[n + 1];
        const double robin_rhs = -std::exp(-p.r2 * s1) * p.d;
        const double neumann_rhs = 0.5 * std::exp(c.theta1 * s1) * ez[nz - 1];
        const double* w_prev = sol.w.row(n);
        std::copy(w_prev, w_prev + nz, W.begin());

        int iters = 0;
        double last_update = std::numeric_limits<double>::infinity();
        for (double e : ladder) {
            bool converged = false;
            for (int m = 0; m < opts.max_picard_iters; ++m) {
                derivative_z(W, dz, Wz);
                for (int i = 1; i + 1 < nz; ++i) {
                    const double A = regularized_A(W[i], Wz[i], e, c);
                    const double D = 0.5 * p.sigma2 * A * A;
                    const double beta = p.mu - D - p.sigma2 * A;
                    const double gamma = p.mu - p.sigma2 * A;
                    lo[i] = -D * inv_dz2 - beta * inv_2dz;
                    di[i] = inv_ds + 2.0 * D * inv_dz2 + gamma;
                    up[i] = -D * inv_dz2 + beta * inv_2dz;
                    rhs[i] = w_prev[i] * inv_ds;
                }
                // Robin row (1 + 3/(2dz)) W0 - (2/dz) W1 + (1/(2dz)) W2 = rhs;
                // fold the W2 entry with interior row 1 to stay tridiagonal.
                if (std::fabs(up[1]) < 1e-300 || std::fabs(lo[nz - 2]) < 1e-300)
                    throw Error::numerical("SingularSystem", "degenerate boundary fold");
                {
                    const double f = inv_2dz / up[1];
                    di[0] = (1.0 + 3.0 * inv_2dz) - f * lo[1];
                    up[0] = (-4.0 * inv_2dz) - f * di[1];
                    rhs[0] = robin_rhs - f * rhs[1];
                }
                {
                    const double f = inv_2dz / lo[nz - 2];
                    lo[nz - 1] = (-4.0 * inv_2dz) - f * di[nz - 2];
                    di[nz - 1] = (3.0 * inv_2dz) - f * up[nz - 2];
                    rhs[nz - 1] = neumann_rhs - f * rhs[nz - 2];
                }
                solve_tridiagonal(lo, di, up, rhs, cp, dp, Wnew);

                double update = 0.0, wmax = 0.0;
                for (int i = 0; i < nz; ++i) {
                    if (!std::isfinite(Wnew[i]))
                        throw Error::numerical("NonFiniteValue",
                                               "non-finite iterate at step " + std::to_string(n));
                    update = std::max(update, std::fabs(Wnew[i] - W[i]));
                    wmax = std::max(wmax, std::fabs(Wnew[i]));
                }
                W.swap(Wnew);
                ++iters;
                if (update <= opts.picard_tol * (1.0 + wmax)) {
                    last_update = update;
                    converged = true;
                    break;
                }
            }
            if (!converged)
                throw Error::numerical("PicardDivergence",
                                       "step " + std::to_string(n) + ": no convergence in " +
                                           std::to_string(opts.max_picard_iters) + " iterations");
        }
        double* w_next = sol.w.row(n + 1);
        std::copy(W.begin(), W.end(), w_next);
        derivative_z(W, dz, Wz);
        std::copy(Wz.begin(), Wz.end(), sol.w_z.row(n + 1));
        sol.picard_iterations.push_back(iters);
        sol.residuals.push_back(last_update);
    }

    sol.usable_from = compute_usable_from(sol, c, p);
    if (g.z(sol.usable_from) > l0 - 1.0)
        throw Error::numerical("GridTooSmall",
                               "left Robin layer reaches the boundary region; extend z_min "
                               "(usable interior starts at z = " +
                                   std::to_string(g.z(sol.usable_from)) + ")");

    // Region pinning at the final level: the saving region must still own the
    // usable left edge and the borrowing region the right edge, otherwise the
    // boundary curves have drifted out of the truncation window.
    {
        const int jl = ns;
        const int il = std::max(sol.usable_from, 1);
        const int ir = nz - 2;
        const double Al = regularized_A(sol.w(jl, il), sol.w_z(jl, il), eps, c);
        const double Ar = regularized_A(sol.w(jl, ir), sol.w_z(jl, ir), eps, c);
        if (Al < c.a1 - 1e-9 || Ar > c.a2 + 1e-9)
            throw Error::numerical("GridTooSmall",
                                   "boundary curves touch the truncation window at s = T");
    }
    return sol;
}

WBoundReport check_w_bounds(const WSolution& sol, const DerivedConstants& c, const MarketParams& p,
                            double tol_abs, double tol_rel) {
    const Grid& g = sol.grid;
    const int nz = g.nz;
    const double theta3 = std::min(p.mu - p.sigma2 * c.a1 * (c.a1 + 3.0), p.r1);

    std::vector<double> ez(nz);
    for (int i = 0; i < nz; ++i) ez[i] = std::exp(g.z(i));

    WBoundReport rep;
    const double inf = std::numeric_limits<double>::infinity();
    rep.worst_w_lower = rep.worst_w_upper = inf;
    rep.worst_wz_lower = rep.worst_wz_upper = rep.worst_wz_floor = inf;

    auto record = [&rep](double margin, double& worst, int j, int i, const char* tag) {
        worst = std::min(worst, margin);
        if (margin < 0.0) rep.violations.push_back({j, i, tag, margin});
    };

    for (int j = 0; j < static_cast<int>(sol.s_nodes.size()); ++j) {
        const double s = sol.s_nodes[j];
        const double e_th1 = std::exp(c.theta1 * s), e_th2 = std::exp(c.theta2 * s);
        const double e_mr1 = std::exp(-p.r1 * s), e_mr2 = std::exp(-p.r2 * s);
        const double e_k = std::exp(c.k * s), e_mkap = std::exp(-c.kappa * s);
        const double floor_wz = -std::exp(-theta3 * s) * p.d;
        const double* w = sol.w.row(j);
        const double* wz = sol.w_z.row(j);
        for (int i = 0; i < nz; ++i) {
            const double tw = tol_abs + tol_rel * std::fabs(w[i]);
            record(w[i] - (0.5 * e_th2 * ez[i] - e_mr1 * p.d) + tw, rep.worst_w_lower, j, i, "w_lower");
            record((0.5 * e_th1 * ez[i] - e_mr2 * p.d) - w[i] + tw, rep.worst_w_upper, j, i, "w_upper");
            const double twz = tol_abs + tol_rel * std::fabs(wz[i]);
            record(0.5 * e_k * ez[i] - wz[i] + twz, rep.worst_wz_upper, j, i, "wz_upper");
            record(wz[i] - floor_wz + twz, rep.worst_wz_floor, j, i, "wz_floor");
            if (i >= sol.usable_from)
                record(wz[i] - 0.5 * e_mkap * ez[i] + twz, rep.worst_wz_lower, j, i, "wz_lower");
        }
        rep.nodes_checked += nz;
    }
    return rep;
}

}  // namespace gapfolio

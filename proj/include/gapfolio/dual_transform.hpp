#pragma once

#include <span>
#include <vector>

#include "gapfolio/market.hpp"
#include "gapfolio/pde_core.hpp"

namespace gapfolio {

// Dual value surface u(y, t) and its antiderivative v(y, t) on the log grid
// y_i = e^{z_i}. Levels are indexed by remaining horizon s = T - t, matching
// the solver's time levels (level 0 is t = T).
struct DualSurface {
    MarketParams params;
    DerivedConstants consts;
    std::vector<double> z_nodes;  // nz, ascending
    std::vector<double> y_nodes;  // e^{z_i}
    std::vector<double> s_nodes;  // ns + 1, ascending remaining horizon
    int usable_from = 0;          // columns below this sit in the left boundary layer
    Array2d u;                    // u(j, i) = u(y_i, T - s_j)
    Array2d u_y;                  // dual marginal du/dy > 0 on usable columns
    Array2d v;                    // v_y = -u, anchored at y_0
    bool has_v = false;

    int levels() const { return static_cast<int>(s_nodes.size()); }
    int nodes() const { return static_cast<int>(y_nodes.size()); }
    double ds() const { return s_nodes.size() > 1 ? s_nodes[1] - s_nodes[0] : 0.0; }
    double dz() const { return z_nodes.size() > 1 ? z_nodes[1] - z_nodes[0] : 0.0; }
};

// u(y, t) = w(ln y, T - t); u_y = w_z e^{-z}. Requires u_y > 0 on the usable
// columns of every level.
DualSurface build_u(const WSolution& sol);

// v solves v_y = -u (trapezoid in y), anchored below y_0 by v(0+) = 0 and the
// exact limit u -> -e^{-r1 s} d as y -> 0: v(y_0) = -(u_lim + u(y_0))/2 * y_0.
// Throws "TailTooFat" when the residual |u(y_0) - u_lim| * y_0 exceeds
// tail_tol_factor * d, i.e. the neglected tail mass of the integral is not
// negligible at the requested accuracy.
void build_v(DualSurface& ds, double tail_tol_factor = 1e-4);

// Primal quantities at one point, recovered from the dual surface by the
// conjugacy V(x, t) = v(J, t) - x J at the multiplier level J solving
// u(J, t) = -x.
struct ValueEval {
    double V = 0.0;
    double V_x = 0.0;   // = -J
    double V_xx = 0.0;  // = 1 / u_y(J, t)
    double J = 0.0;
    double rho = 0.0;  // J u_y(J, t), the risk budget scale
    double pi = 0.0;   // feedback stock position
};

// Evaluate at (x, t). t must lie in [0, T]; x must lie strictly below the
// discounted target d e^{-r1 (T-t)} (validation "OutOfRange" otherwise).
// Throws numerical "NotBracketed" when -x falls outside the usable range of
// the tabulated u at the bracketing time levels.
ValueEval legendre_V(const DualSurface& ds, double x, double t);

double feedback_policy(const DualSurface& ds, double x, double t);

// Closed-form envelopes around V: lower e^{-theta1 tau} (max(e^{-r2 tau} d - x, 0))^2,
// upper e^{-theta2 tau} (e^{-r1 tau} d - x)^2. The lower bound takes the
// positive part; without it the square crosses above the value near the
// discounted target.
struct ValueBounds {
    double lower = 0.0;
    double upper = 0.0;
};
ValueBounds value_bounds(const MarketParams& p, const DerivedConstants& c, double x, double t);

// Node-exact primal grid: for each time level, x_i = -u_i on usable columns
// (descending in x as i grows toward the target). No interpolation error;
// used for whole-surface sweeps and bound verification.
struct ValueSurface {
    std::vector<double> t_nodes;  // ascending calendar time
    std::vector<std::vector<double>> x;  // per level, ascending
    std::vector<std::vector<double>> V, V_x, V_xx, J, pi;
};
ValueSurface build_value_surface(const DualSurface& ds);

}  // namespace gapfolio

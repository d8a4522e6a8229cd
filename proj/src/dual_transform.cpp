#include "gapfolio/dual_transform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gapfolio/errors.hpp"

namespace gapfolio {

namespace {

struct LevelEval {
    double V, V_x, V_xx, J, rho;
};

double region_policy(double rho, double x, const DerivedConstants& c) {
    double pi;
    if (c.a2 * rho > x)
        pi = c.a2 * rho;  // borrowing
    else if (c.a1 * rho < x)
        pi = c.a1 * rho;  // saving
    else
        pi = x;  // full-stock band
    return std::max(pi, 0.0);
}

LevelEval eval_level(const DualSurface& ds, int j, double x) {
    const int nz = ds.nodes();
    const int lo = ds.usable_from;
    const double* u = ds.u.row(j);
    const double* uy = ds.u_y.row(j);
    const double* v = ds.v.row(j);
    const double target = -x;
    if (target < u[lo])
        throw Error::numerical("NotBracketed",
                               "x = " + std::to_string(x) + " exceeds the tabulated range at s = " +
                                   std::to_string(ds.s_nodes[j]) + "; extend z_min");
    if (target > u[nz - 1])
        throw Error::numerical("NotBracketed",
                               "x = " + std::to_string(x) + " lies below the tabulated range at s = " +
                                   std::to_string(ds.s_nodes[j]) + "; extend z_max");
    const double* it = std::upper_bound(u + lo, u + nz, target);
    int i = static_cast<int>(it - u) - 1;
    i = std::min(std::max(i, lo), nz - 2);
    const double du = u[i + 1] - u[i];
    if (!(du > 0.0))
        throw Error::numerical("NonMonotoneDual", "flat u segment at level " + std::to_string(j));
    const double alpha = (target - u[i]) / du;
    const double zJ = ds.z_nodes[i] + alpha * ds.dz();
    const double J = std::exp(zJ);
    const double v_at = v[i] - 0.5 * (u[i] + target) * (J - ds.y_nodes[i]);
    const double uy_at = uy[i] + alpha * (uy[i + 1] - uy[i]);
    LevelEval out;
    out.J = J;
    out.V = v_at - x * J;
    out.V_x = -J;
    out.V_xx = 1.0 / uy_at;
    out.rho = J * uy_at;
    return out;
}

struct TimePos {
    int j0, j1;
    double frac;  // weight on j1
};

TimePos locate_time(const DualSurface& ds, double t) {
    const double T = ds.params.T;
    if (!(t >= 0.0 && t <= T))
        throw Error::validation("OutOfRange", "t = " + std::to_string(t) + " outside [0, T]");
    const double s = T - t;
    const double js = s / ds.ds();
    double fl = std::floor(js);
    double frac = js - fl;
    if (frac > 1.0 - 1e-9) {
        fl += 1.0;
        frac = 0.0;
    } else if (frac < 1e-9) {
        frac = 0.0;
    }
    int j0 = std::min(static_cast<int>(fl), ds.levels() - 1);
    int j1 = frac > 0.0 ? std::min(j0 + 1, ds.levels() - 1) : j0;
    return {j0, j1, frac};
}

}  // namespace

DualSurface build_u(const WSolution& sol) {
    const Grid& g = sol.grid;
    DualSurface ds;
    ds.params = sol.params;
    ds.consts = sol.consts;
    ds.s_nodes = sol.s_nodes;
    ds.usable_from = sol.usable_from;
    ds.z_nodes.resize(g.nz);
    ds.y_nodes.resize(g.nz);
    for (int i = 0; i < g.nz; ++i) {
        ds.z_nodes[i] = g.z(i);
        ds.y_nodes[i] = std::exp(ds.z_nodes[i]);
    }
    const int levels = static_cast<int>(sol.s_nodes.size());
    ds.u = Array2d(levels, g.nz);
    ds.u_y = Array2d(levels, g.nz);
    for (int j = 0; j < levels; ++j) {
        const double* w = sol.w.row(j);
        const double* wz = sol.w_z.row(j);
        double* u = ds.u.row(j);
        double* uy = ds.u_y.row(j);
        for (int i = 0; i < g.nz; ++i) {
            u[i] = w[i];
            uy[i] = wz[i] / ds.y_nodes[i];
        }
        for (int i = ds.usable_from; i < g.nz; ++i)
            if (!(uy[i] > 0.0))
                throw Error::numerical("NonMonotoneDual",
                                       "u_y <= 0 at level " + std::to_string(j) + ", node " +
                                           std::to_string(i));
    }
    return ds;
}

void build_v(DualSurface& ds, double tail_tol_factor) {
    const int nz = ds.nodes();
    const int levels = ds.levels();
    const MarketParams& p = ds.params;
    ds.v = Array2d(levels, nz);
    for (int j = 0; j < levels; ++j) {
        const double s = ds.s_nodes[j];
        const double u_lim = -std::exp(-p.r1 * s) * p.d;
        const double* u = ds.u.row(j);
        double* v = ds.v.row(j);
        const double y0 = ds.y_nodes[0];
        const double resid = std::fabs(u[0] - u_lim) * y0;
        if (resid > tail_tol_factor * p.d)
            throw Error::numerical("TailTooFat",
                                   "left tail of u carries non-negligible integral mass (" +
                                       std::to_string(resid) + "); extend z_min");
        v[0] = -0.5 * (u_lim + u[0]) * y0;
        for (int i = 1; i < nz; ++i)
            v[i] = v[i - 1] - 0.5 * (u[i - 1] + u[i]) * (ds.y_nodes[i] - ds.y_nodes[i - 1]);
    }
    ds.has_v = true;
}

ValueEval legendre_V(const DualSurface& ds, double x, double t) {
    if (!ds.has_v) throw Error::validation("ConfigInvalid", "dual surface lacks v; call build_v first");
    const double cap = discounted_target(ds.params, t);
    if (!(x < cap))
        throw Error::validation("OutOfRange", "x = " + std::to_string(x) +
                                                  " not below the discounted target " + std::to_string(cap));
    const TimePos tp = locate_time(ds, t);
    const LevelEval e0 = eval_level(ds, tp.j0, x);
    ValueEval out;
    if (tp.j1 == tp.j0 || tp.frac == 0.0) {
        out.V = e0.V;
        out.V_x = e0.V_x;
        out.V_xx = e0.V_xx;
        out.J = e0.J;
        out.rho = e0.rho;
    } else {
        const LevelEval e1 = eval_level(ds, tp.j1, x);
        const double a = tp.frac;
        out.V = (1.0 - a) * e0.V + a * e1.V;
        out.V_x = (1.0 - a) * e0.V_x + a * e1.V_x;
        out.V_xx = (1.0 - a) * e0.V_xx + a * e1.V_xx;
        out.J = (1.0 - a) * e0.J + a * e1.J;
        out.rho = (1.0 - a) * e0.rho + a * e1.rho;
    }
    out.pi = region_policy(out.rho, x, ds.consts);
    return out;
}

double feedback_policy(const DualSurface& ds, double x, double t) {
    return legendre_V(ds, x, t).pi;
}

ValueBounds value_bounds(const MarketParams& p, const DerivedConstants& c, double x, double t) {
    const double tau = p.T - t;
    ValueBounds b;
    const double gap_lo = std::max(std::exp(-p.r2 * tau) * p.d - x, 0.0);
    b.lower = std::exp(-c.theta1 * tau) * gap_lo * gap_lo;
    const double gap_hi = std::exp(-p.r1 * tau) * p.d - x;
    b.upper = std::exp(-c.theta2 * tau) * gap_hi * gap_hi;
    return b;
}

ValueSurface build_value_surface(const DualSurface& ds) {
    if (!ds.has_v) throw Error::validation("ConfigInvalid", "dual surface lacks v; call build_v first");
    const int nz = ds.nodes();
    const int levels = ds.levels();
    ValueSurface vs;
    vs.t_nodes.reserve(levels);
    vs.x.resize(levels);
    vs.V.resize(levels);
    vs.V_x.resize(levels);
    vs.V_xx.resize(levels);
    vs.J.resize(levels);
    vs.pi.resize(levels);
    for (int k = 0; k < levels; ++k) {
        const int j = levels - 1 - k;  // ascending t
        vs.t_nodes.push_back(ds.params.T - ds.s_nodes[j]);
        const double* u = ds.u.row(j);
        const double* uy = ds.u_y.row(j);
        const double* v = ds.v.row(j);
        const int count = nz - ds.usable_from;
        auto& X = vs.x[k];
        auto& V = vs.V[k];
        auto& Vx = vs.V_x[k];
        auto& Vxx = vs.V_xx[k];
        auto& J = vs.J[k];
        auto& PI = vs.pi[k];
        X.reserve(count);
        V.reserve(count);
        Vx.reserve(count);
        Vxx.reserve(count);
        J.reserve(count);
        PI.reserve(count);
        for (int i = nz - 1; i >= ds.usable_from; --i) {  // ascending x
            const double y = ds.y_nodes[i];
            const double x = -u[i];
            X.push_back(x);
            V.push_back(v[i] - x * y);
            Vx.push_back(-y);
            Vxx.push_back(1.0 / uy[i]);
            J.push_back(y);
            PI.push_back(region_policy(y * uy[i], x, ds.consts));
        }
    }
    return vs;
}

}  // namespace gapfolio

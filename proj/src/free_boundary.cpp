#include "gapfolio/free_boundary.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gapfolio/errors.hpp"

namespace gapfolio {

namespace {

// Locate the single up-crossing of I = w + a w_z on [start, nz). Returns the
// interpolated zero in z. The indicator must be negative on the left of the
// crossing and positive on the right; any extra sign change is a failure of
// the three-region structure on this grid.
double single_crossing(const double* w, const double* wz, double a, const Grid& g, int start,
                       int level) {
    const int nz = g.nz;
    const double dz = g.dz();
    int up_at = -1;
    int crossings = 0;
    double prev = w[start] + a * wz[start];
    for (int i = start + 1; i < nz; ++i) {
        const double cur = w[i] + a * wz[i];
        if ((prev <= 0.0) != (cur <= 0.0)) {
            ++crossings;
            if (prev <= 0.0 && cur > 0.0) up_at = i - 1;
        }
        prev = cur;
    }
    if (crossings == 0) {
        const bool all_neg = (w[start] + a * wz[start]) <= 0.0;
        throw Error::numerical("BoundaryAtEdge",
                               std::string("indicator has no zero at level ") + std::to_string(level) +
                                   (all_neg ? "; extend z_max" : "; extend z_min"));
    }
    if (crossings > 1)
        throw Error::numerical("MultipleCrossings", "indicator changes sign " +
                                                        std::to_string(crossings) + " times at level " +
                                                        std::to_string(level));
    if (up_at < start + 2 || up_at + 1 > nz - 3)
        throw Error::numerical("BoundaryAtEdge", "boundary within two cells of the truncation "
                                                 "window at level " +
                                                     std::to_string(level));
    const double i0 = w[up_at] + a * wz[up_at];
    const double i1 = w[up_at + 1] + a * wz[up_at + 1];
    return g.z(up_at) + dz * (0.0 - i0) / (i1 - i0);
}

}  // namespace

double b_initial_limit(const DerivedConstants& c, const MarketParams& p) {
    return std::log(2.0 * p.d) - std::log1p(c.a2);
}

double l_initial_limit(const DerivedConstants& c, const MarketParams& p) {
    return std::log(2.0 * p.d) - std::log1p(c.a1);
}

double terminal_B(const MarketParams& p) {
    const double a2 = (p.mu - p.r2) / p.sigma2;
    return a2 * p.d / (1.0 + a2);
}

double terminal_L(const MarketParams& p) {
    const double a1 = (p.mu - p.r1) / p.sigma2;
    return a1 * p.d / (1.0 + a1);
}

BoundaryCurves extract_z_boundaries(const WSolution& sol, const DerivedConstants& c) {
    const Grid& g = sol.grid;
    BoundaryCurves bc;
    const int levels = static_cast<int>(sol.s_nodes.size());
    bc.s_nodes = sol.s_nodes;
    bc.b.resize(levels);
    bc.l.resize(levels);
    for (int j = 0; j < levels; ++j) {
        const double* w = sol.w.row(j);
        const double* wz = sol.w_z.row(j);
        const int start = j == 0 ? 0 : sol.usable_from;
        bc.b[j] = single_crossing(w, wz, c.a2, g, start, j);
        bc.l[j] = single_crossing(w, wz, c.a1, g, start, j);
        if (bc.l[j] > bc.b[j] + 1e-12)
            throw Error::numerical("BoundaryOrder", "saving boundary above borrowing boundary at "
                                                    "level " +
                                                        std::to_string(j));
    }
    return bc;
}

void map_to_wealth(BoundaryCurves& bc, const DualSurface& ds) {
    const int levels = static_cast<int>(bc.s_nodes.size());
    const double dz = ds.dz();
    const double z_min = ds.z_nodes.front();
    auto u_at = [&](int j, double z) {
        int i = static_cast<int>(std::floor((z - z_min) / dz));
        i = std::min(std::max(i, 0), ds.nodes() - 2);
        const double alpha = (z - ds.z_nodes[i]) / dz;
        const double* u = ds.u.row(j);
        return u[i] + alpha * (u[i + 1] - u[i]);
    };
    bc.t_nodes.resize(levels);
    bc.B.resize(levels);
    bc.L.resize(levels);
    for (int k = 0; k < levels; ++k) {
        const int j = levels - 1 - k;  // ascending t
        bc.t_nodes[k] = ds.params.T - bc.s_nodes[j];
        bc.B[k] = -u_at(j, bc.b[j]);
        bc.L[k] = -u_at(j, bc.l[j]);
    }
}

BoundaryEnvelopes boundary_envelopes(const DerivedConstants& c, const MarketParams& p, double s) {
    BoundaryEnvelopes env;
    const double anchor = std::log(2.0 * p.d);
    env.b_upper = anchor - (p.r1 + c.theta2) * s;
    env.l_lower_statement = anchor - std::log(c.a1 + std::exp((c.theta2 - c.k) * s)) - (p.r1 + c.k) * s;
    env.l_lower_proof = anchor - std::log(c.a1 + std::exp((c.theta1 - c.k) * s)) - (p.r2 + c.k) * s;
    return env;
}

}  // namespace gapfolio

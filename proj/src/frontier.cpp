#include "gapfolio/frontier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gapfolio/errors.hpp"

namespace gapfolio {

double value_sensitivity(const DualSurface& ds, double x, double t) {
    const ValueEval e = legendre_V(ds, x, t);
    return (2.0 * e.V - x * e.V_x) / ds.params.d;
}

FrontierPoint frontier_point(double V, double V_d, double d, double tol) {
    FrontierPoint pt;
    pt.d = d;
    pt.V = V;
    pt.V_d = V_d;
    pt.mean = d - 0.5 * V_d;
    double var = V - 0.25 * V_d * V_d;
    if (var < -tol * (1.0 + std::fabs(V)))
        throw Error::numerical("NegativeVarianceResidual",
                               "V - V_d^2/4 = " + std::to_string(var) + " at d = " + std::to_string(d));
    pt.std_dev = std::sqrt(std::max(var, 0.0));
    return pt;
}

std::vector<double> default_d_grid(const MarketParams& p, double x, double t, int n) {
    if (n < 1) throw Error::validation("NonPositive", "frontier grid needs at least one target");
    const double anchor = x * std::exp(p.r1 * (p.T - t));
    std::vector<double> grid(n);
    const double lo = std::log(1.1 * anchor), hi = std::log(8.0 * anchor);
    for (int i = 0; i < n; ++i) {
        const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
        grid[i] = std::exp(lo + f * (hi - lo));
    }
    return grid;
}

std::vector<FrontierPoint> efficient_frontier(const DualSurface& ds, double x, double t,
                                              std::span<const double> d_values) {
    const MarketParams& p = ds.params;
    const double anchor = x * std::exp(p.r1 * (p.T - t));
    std::vector<FrontierPoint> pts;
    pts.reserve(d_values.size());
    for (double dv : d_values) {
        if (!(dv > anchor))
            throw Error::validation("OutOfRange", "target d = " + std::to_string(dv) +
                                                      " not above the riskless anchor " +
                                                      std::to_string(anchor));
        const double scale = dv / p.d;
        const ValueEval e = legendre_V(ds, x / scale, t);
        const double V = scale * scale * e.V;
        const double V_x = scale * e.V_x;
        const double V_d = (2.0 * V - x * V_x) / dv;
        pts.push_back(frontier_point(V, V_d, dv));
    }
    std::sort(pts.begin(), pts.end(),
              [](const FrontierPoint& a, const FrontierPoint& b) { return a.mean < b.mean; });
    return pts;
}

}  // namespace gapfolio

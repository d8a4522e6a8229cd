#pragma once

#include <span>
#include <vector>

#include "gapfolio/dual_transform.hpp"
#include "gapfolio/market.hpp"

namespace gapfolio {

// One point of the mean-variance efficient frontier, parameterized by the
// target d: the attained terminal mean is d - V_d / 2 and the attained
// variance V - V_d^2 / 4, where V_d is the sensitivity of the squared-
// deviation value to the target.
struct FrontierPoint {
    double d = 0.0;
    double V = 0.0;
    double V_d = 0.0;
    double mean = 0.0;
    double std_dev = 0.0;
};

// V_d = (2 V - x V_x) / d, from the degree-2 homogeneity of the value in
// (x, d): V(x, t; d') = (d'/d)^2 V(x d/d', t; d).
double value_sensitivity(const DualSurface& ds, double x, double t);

// Mean/std from (V, V_d). The variance residual V - V_d^2/4 may round
// slightly negative; residuals below -tol (1 + |V|) raise numerical
// "NegativeVarianceResidual", smaller ones clamp to zero.
FrontierPoint frontier_point(double V, double V_d, double d, double tol = 1e-6);

// Log-spaced targets in [1.1, 8] x e^{r1 (T - t)}, strictly above the
// riskless anchor so every target is admissible from x.
std::vector<double> default_d_grid(const MarketParams& p, double x, double t, int n = 25);

// Frontier traced from one solve via homogeneity: each target d' reuses the
// surface at scaled wealth x d/d'. Points are sorted by attained mean.
std::vector<FrontierPoint> efficient_frontier(const DualSurface& ds, double x, double t,
                                              std::span<const double> d_values);

}  // namespace gapfolio

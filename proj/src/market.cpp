#include "gapfolio/market.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gapfolio/errors.hpp"

namespace gapfolio {

namespace {

bool all_finite(const MarketParams& p) {
    return std::isfinite(p.r1) && std::isfinite(p.r2) && std::isfinite(p.mu) &&
           std::isfinite(p.sigma2) && std::isfinite(p.d) && std::isfinite(p.T);
}

}  // namespace

DerivedConstants validate_params(const MarketParams& p) {
    if (!all_finite(p))
        throw Error::validation("NonFinite", "market parameters must be finite");
    if (p.sigma2 <= 0.0)
        throw Error::validation("NonPositive", "sigma2 must be > 0, got " + std::to_string(p.sigma2));
    if (p.d <= 0.0)
        throw Error::validation("NonPositive", "d must be > 0, got " + std::to_string(p.d));
    if (p.T <= 0.0)
        throw Error::validation("NonPositive", "T must be > 0, got " + std::to_string(p.T));
    if (p.r2 < p.r1)
        throw Error::validation("ParameterOrdering",
                                "need r1 <= r2, got r1 = " + std::to_string(p.r1) +
                                    ", r2 = " + std::to_string(p.r2));
    if (p.mu <= p.r2)
        throw Error::validation("ParameterOrdering",
                                "need mu > r2, got mu = " + std::to_string(p.mu) +
                                    ", r2 = " + std::to_string(p.r2));

    DerivedConstants c;
    c.a1 = (p.mu - p.r1) / p.sigma2;
    c.a2 = (p.mu - p.r2) / p.sigma2;
    c.theta1 = p.sigma2 * c.a1 * c.a1 - 2.0 * p.r1;
    c.theta2 = p.sigma2 * c.a2 * c.a2 - 2.0 * p.r2;
    c.k = std::max(2.0 * p.sigma2 * c.a1 + 4.0 * p.sigma2 * c.a1 * c.a1, c.theta1);
    c.kappa = 2.0 * p.mu + p.sigma2 * (3.0 * c.a1 + 1.0) * (c.a1 + 1.0);
    return c;
}

double clamp_A(double xi, const DerivedConstants& c) noexcept {
    return std::min(std::max(c.a2, -xi), c.a1);
}

C1Report check_c1_conditions(const MarketParams& p) {
    const DerivedConstants c = validate_params(p);
    C1Report rep;
    rep.cd0 = p.mu;
    rep.cd1 = p.sigma2 * c.a2 * c.a2 + p.r1 - 2.0 * p.r2;
    rep.cd2 = 1.0 + 2.0 * p.r1 / (p.mu - p.r1) - 2.0 * c.a1 + c.a2;
    rep.cd0_pass = rep.cd0 > 0.0;
    rep.cd1_pass = rep.cd1 >= 0.0;
    rep.cd2_pass = rep.cd2 >= 0.0;
    return rep;
}

double discounted_target(const MarketParams& p, double t) {
    return p.d * std::exp(-p.r1 * (p.T - t));
}

}  // namespace gapfolio

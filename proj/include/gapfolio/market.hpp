#pragma once

namespace gapfolio {

/// Market primitives. All rates are continuously compounded per year and
/// sigma2 is the variance rate of the stock, so a Sharpe-like quantity
/// (mu - r) / sigma2 is dimensionless. Requires r1 <= r2 < mu; equal rates
/// are admitted as the classical no-gap case.
struct MarketParams {
    double r1 = 0.02;      // saving (deposit) rate
    double r2 = 0.08;      // borrowing rate
    double mu = 0.15;      // stock appreciation rate
    double sigma2 = 0.10;  // stock variance rate
    double d = 10.0;       // terminal wealth target
    double T = 3.0;        // horizon, years
};

/// Constants derived from the market. a1/a2 are the risk-adjusted excess
/// returns per unit variance on the saving/borrowing side; theta1/theta2 the
/// growth rates of the dual-surface envelopes; k and kappa bound the growth
/// and decay of the dual derivative.
struct DerivedConstants {
    double a1 = 0.0;      // (mu - r1) / sigma2
    double a2 = 0.0;      // (mu - r2) / sigma2
    double theta1 = 0.0;  // sigma2*a1^2 - 2 r1
    double theta2 = 0.0;  // sigma2*a2^2 - 2 r2
    double k = 0.0;       // max{2 sigma2 a1 + 4 sigma2 a1^2, theta1}
    double kappa = 0.0;   // 2 mu + sigma2 (3 a1 + 1)(a1 + 1)
};

/// Validates params and returns the derived constants.
/// Throws Error(validation): ParameterOrdering for mu <= r2 or r2 < r1,
/// NonPositive for sigma2/d/T <= 0, NonFinite for non-finite inputs.
DerivedConstants validate_params(const MarketParams& p);

/// Clamped slope function A(xi) = min{max{a2, -xi}, a1}: decreasing,
/// 1-Lipschitz, with range [a2, a1].
double clamp_A(double xi, const DerivedConstants& c) noexcept;

/// Smoothness (C^1 boundary) conditions. Residuals are reported so callers
/// can assert margins; a condition holds when its residual is >= 0 (CD0: > 0).
struct C1Report {
    double cd0 = 0.0;  // mu
    double cd1 = 0.0;  // sigma2*a2^2 + r1 - 2 r2
    double cd2 = 0.0;  // 1 + 2 r1/(mu - r1) - 2 a1 + a2
    bool cd0_pass = false;
    bool cd1_pass = false;
    bool cd2_pass = false;
    bool all() const noexcept { return cd0_pass && cd1_pass && cd2_pass; }
};

C1Report check_c1_conditions(const MarketParams& p);

/// d * e^{-r1 (T - t)}: the wealth level above which the target is
/// super-hedged by saving; the right edge of the solvable wealth domain.
double discounted_target(const MarketParams& p, double t);

}  // namespace gapfolio

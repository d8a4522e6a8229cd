#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gapfolio/dual_transform.hpp"
#include "gapfolio/market.hpp"

namespace gapfolio {

struct PolicyEval {
    double pi = 0.0;
    bool extrapolated = false;  // evaluated outside the tabulated range
};

// Named feedback rule (x, t) -> stock position. Evaluation must be
// deterministic and finite for every simulated state.
class Policy {
public:
    virtual ~Policy() = default;
    virtual PolicyEval eval(double x, double t) const = 0;
    const std::string& name() const { return name_; }

protected:
    explicit Policy(std::string name) : name_(std::move(name)) {}

private:
    std::string name_;
};

std::unique_ptr<Policy> make_zero_policy();
std::unique_ptr<Policy> make_all_in_stock_policy();
// pi = a (e^{-r (T-t)} d - x) with a = (mu - r)/sigma2: the classical rule for
// a market without a rate gap, deliberately unclamped.
std::unique_ptr<Policy> make_classical_no_gap_policy(const MarketParams& p, double r);
std::unique_ptr<Policy> make_constant_dollar_policy(double amount);

// Feedback rule tabulated from the dual surface. Holds its own copy of the
// per-level (x, pi, rho) tables; linear in x and in t, with region-formula
// extrapolation via the dual-side risk budget rho outside the tabulated x
// range. States at or above the discounted target get pi = 0 (the residual
// gap is already attainable risklessly); all positions are clamped at 0.
class OptimalPolicy : public Policy {
public:
    explicit OptimalPolicy(const DualSurface& ds);
    PolicyEval eval(double x, double t) const override;

private:
    PolicyEval eval_level(int j, double x) const;
    double T_, ds_, d_, r1_, a1_, a2_;
    std::vector<std::vector<double>> x_, pi_, rho_;  // per s-level, x ascending
};

struct SimConfig {
    double x0 = 1.0;
    double t0 = 0.0;
    long n_paths = 200000;
    int n_steps = 600;
    std::uint64_t seed = 12345;
    bool antithetic = false;
    int n_threads = 0;  // 0: hardware concurrency
};

struct PathStats {
    double mean_sq_dev = 0.0;  // estimate of E[(X_T - d)^2]
    double std_err = 0.0;
    long n_paths = 0;
    double terminal_mean = 0.0;
    double terminal_var = 0.0;
    double terminal_min = 0.0;
    double terminal_max = 0.0;
    long extrapolated_steps = 0;  // policy evaluations outside tabulated range
    double max_abs_pi = 0.0;      // square-integrability diagnostic
};

// Euler-Maruyama on [t0, T] with drift (r1 1{X>pi} + r2 1{X<pi})(X - pi) +
// mu pi and diffusion sigma pi. Bit-identical results for identical
// (seed, cfg, policy) regardless of thread count. terminal_dump, when
// non-null, receives the per-path terminal wealths in path order.
PathStats simulate_policy(const Policy& pol, const MarketParams& p, const SimConfig& cfg,
                          std::vector<double>* terminal_dump = nullptr);

struct VerifyRow {
    std::string policy;
    double estimate = 0.0;
    double std_err = 0.0;
    double v_ref = 0.0;
    double z_score = 0.0;
    bool pass = false;
};

struct VerifyReport {
    std::vector<VerifyRow> rows;
    double v_ref = 0.0;
    bool std_err_reliable = true;  // n_paths at or above the reliability floor
    bool pass = false;
};

inline constexpr long kStdErrFloor = 100;

// Simulates the optimal policy plus alternatives against the reference value
// v_ref = V(x0, t0): the optimal estimate must sit within 3 std_err of v_ref
// and every alternative at or above v_ref - 3 std_err.
VerifyReport verify_value(double v_ref, const Policy& optimal,
                          const std::vector<const Policy*>& alternatives, const MarketParams& p,
                          const SimConfig& cfg);

}  // namespace gapfolio

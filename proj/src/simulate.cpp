#include "gapfolio/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <string>
#include <thread>

#include "gapfolio/errors.hpp"
#include "gapfolio/rng.hpp"

namespace gapfolio {

namespace {

// Fixed-shape pairwise reduction: the result depends only on the data order,
// never on how paths were distributed across threads.
double pairwise_sum(const double* a, std::size_t n, const std::function<double(double)>& f) {
    if (n <= 64) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += f(a[i]);
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(a, half, f) + pairwise_sum(a + half, n - half, f);
}

class FormulaPolicy : public Policy {
public:
    FormulaPolicy(std::string name, std::function<double(double, double)> fn)
        : Policy(std::move(name)), fn_(std::move(fn)) {}
    PolicyEval eval(double x, double t) const override { return {fn_(x, t), false}; }

private:
    std::function<double(double, double)> fn_;
};

}  // namespace

std::unique_ptr<Policy> make_zero_policy() {
    return std::make_unique<FormulaPolicy>("zero", [](double, double) { return 0.0; });
}

std::unique_ptr<Policy> make_all_in_stock_policy() {
    return std::make_unique<FormulaPolicy>("all_in_stock", [](double x, double) { return x; });
}

std::unique_ptr<Policy> make_classical_no_gap_policy(const MarketParams& p, double r) {
    const double a = (p.mu - r) / p.sigma2;
    const double d = p.d, T = p.T;
    char label[64];
    std::snprintf(label, sizeof label, "classical_no_gap(r=%g)", r);
    return std::make_unique<FormulaPolicy>(
        label, [a, r, d, T](double x, double t) { return a * (std::exp(-r * (T - t)) * d - x); });
}

std::unique_ptr<Policy> make_constant_dollar_policy(double amount) {
    char label[64];
    std::snprintf(label, sizeof label, "constant_dollar(%g)", amount);
    return std::make_unique<FormulaPolicy>(label, [amount](double, double) { return amount; });
}

OptimalPolicy::OptimalPolicy(const DualSurface& ds)
    : Policy("optimal"),
      T_(ds.params.T),
      ds_(ds.ds()),
      d_(ds.params.d),
      r1_(ds.params.r1),
      a1_(ds.consts.a1),
      a2_(ds.consts.a2) {
    const int levels = ds.levels();
    const int nz = ds.nodes();
    x_.resize(levels);
    pi_.resize(levels);
    rho_.resize(levels);
    for (int j = 0; j < levels; ++j) {
        const double* u = ds.u.row(j);
        const double* uy = ds.u_y.row(j);
        const int count = nz - ds.usable_from;
        x_[j].reserve(count);
        pi_[j].reserve(count);
        rho_[j].reserve(count);
        for (int i = nz - 1; i >= ds.usable_from; --i) {  // ascending x order
            const double x = -u[i];
            const double rho = ds.y_nodes[i] * uy[i];
            double pi;
            if (a2_ * rho > x)
                pi = a2_ * rho;
            else if (a1_ * rho < x)
                pi = a1_ * rho;
            else
                pi = x;
            x_[j].push_back(x);
            pi_[j].push_back(std::max(pi, 0.0));
            rho_[j].push_back(rho);
        }
    }
}

PolicyEval OptimalPolicy::eval_level(int j, double x) const {
    const auto& X = x_[j];
    const auto& PI = pi_[j];
    const auto& RHO = rho_[j];
    const double s = j * ds_;
    if (x >= d_ * std::exp(-r1_ * s)) return {0.0, true};
    const std::size_t n = X.size();
    if (x > X.back()) {
        // saving-side sliver between the last tabulated state and the target
        const double slope = (RHO[n - 1] - RHO[n - 2]) / (X[n - 1] - X[n - 2]);
        const double rho = RHO[n - 1] + slope * (x - X[n - 1]);
        return {std::max(a1_ * rho, 0.0), true};
    }
    if (x < X.front()) {
        // deep borrowing side
        const double slope = (RHO[1] - RHO[0]) / (X[1] - X[0]);
        const double rho = RHO[0] + slope * (x - X[0]);
        return {std::max(a2_ * rho, 0.0), true};
    }
    const auto it = std::upper_bound(X.begin(), X.end(), x);
    std::size_t i = static_cast<std::size_t>(it - X.begin());
    i = std::min(std::max<std::size_t>(i, 1), n - 1) - 1;
    const double alpha = (x - X[i]) / (X[i + 1] - X[i]);
    return {PI[i] + alpha * (PI[i + 1] - PI[i]), false};
}

PolicyEval OptimalPolicy::eval(double x, double t) const {
    const double s = std::min(std::max(T_ - t, 0.0), T_);
    const double js = s / ds_;
    double fl = std::floor(js);
    double frac = js - fl;
    if (frac > 1.0 - 1e-9) {
        fl += 1.0;
        frac = 0.0;
    } else if (frac < 1e-9) {
        frac = 0.0;
    }
    const int last = static_cast<int>(x_.size()) - 1;
    const int j0 = std::min(static_cast<int>(fl), last);
    if (frac == 0.0 || j0 == last) return eval_level(j0, x);
    const PolicyEval e0 = eval_level(j0, x);
    const PolicyEval e1 = eval_level(j0 + 1, x);
    return {(1.0 - frac) * e0.pi + frac * e1.pi, e0.extrapolated || e1.extrapolated};
}

PathStats simulate_policy(const Policy& pol, const MarketParams& p, const SimConfig& cfg,
                          std::vector<double>* terminal_dump) {
    validate_params(p);
    if (cfg.n_paths < 1 || cfg.n_steps < 1)
        throw Error::validation("NonPositive", "n_paths and n_steps must be at least 1");
    if (!(cfg.t0 >= 0.0 && cfg.t0 < p.T))
        throw Error::validation("OutOfRange", "t0 must lie in [0, T)");
    if (!(cfg.x0 * std::exp(p.r1 * (p.T - cfg.t0)) < p.d))
        throw Error::validation("OutOfRange", "x0 must satisfy x0 e^{r1 (T - t0)} < d");

    const long n = cfg.n_paths;
    const double dt = (p.T - cfg.t0) / cfg.n_steps;
    const double sq_dt = std::sqrt(dt);
    const double sigma = std::sqrt(p.sigma2);

    std::vector<double> cost(n), x_term(n);
    int workers = cfg.n_threads > 0 ? cfg.n_threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = static_cast<int>(std::min<long>(workers, n));

    std::vector<long> extrap(workers, 0);
    std::vector<double> maxpi(workers, 0.0);
    std::vector<std::exception_ptr> errors(workers);

    auto run_block = [&](int wk, long begin, long end) {
        long ex = 0;
        double mp = 0.0;
        try {
            for (long idx = begin; idx < end; ++idx) {
                const std::uint64_t stream = cfg.antithetic ? static_cast<std::uint64_t>(idx) >> 1
                                                            : static_cast<std::uint64_t>(idx);
                const double sign = (cfg.antithetic && (idx & 1)) ? -1.0 : 1.0;
                PathRng rng(cfg.seed, stream);
                double X = cfg.x0;
                for (int m = 0; m < cfg.n_steps; ++m) {
                    const double t = cfg.t0 + m * dt;
                    PolicyEval pe;
                    try {
                        pe = pol.eval(X, t);
                    } catch (const std::exception& e) {
                        throw Error::numerical("PolicyEvaluationFailure",
                                               pol.name() + " failed on path " + std::to_string(idx) +
                                                   ": " + e.what());
                    }
                    if (!std::isfinite(pe.pi))
                        throw Error::numerical("PolicyEvaluationFailure",
                                               pol.name() + " returned non-finite position on path " +
                                                   std::to_string(idx));
                    if (pe.extrapolated) ++ex;
                    mp = std::max(mp, std::fabs(pe.pi));
                    const double gap = X - pe.pi;
                    const double rate = gap > 0.0 ? p.r1 : p.r2;
                    X += (rate * gap + p.mu * pe.pi) * dt + sigma * pe.pi * sq_dt * (sign * rng.normal());
                }
                const double dev = X - p.d;
                cost[idx] = dev * dev;
                x_term[idx] = X;
            }
        } catch (...) {
            errors[wk] = std::current_exception();
        }
        extrap[wk] = ex;
        maxpi[wk] = mp;
    };

    if (workers == 1) {
        run_block(0, 0, n);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        const long chunk = (n + workers - 1) / workers;
        for (int wk = 0; wk < workers; ++wk) {
            const long b = wk * chunk;
            const long e = std::min(n, b + chunk);
            pool.emplace_back(run_block, wk, b, e);
        }
        for (auto& th : pool) th.join();
    }
    for (auto& ep : errors)
        if (ep) std::rethrow_exception(ep);

    PathStats st;
    st.n_paths = n;
    auto ident = [](double v) { return v; };
    st.mean_sq_dev = pairwise_sum(cost.data(), cost.size(), ident) / n;
    st.terminal_mean = pairwise_sum(x_term.data(), x_term.size(), ident) / n;
    if (n > 1) {
        const double mc = st.mean_sq_dev;
        const double var_cost =
            pairwise_sum(cost.data(), cost.size(), [mc](double v) { return (v - mc) * (v - mc); }) /
            (n - 1);
        st.std_err = std::sqrt(var_cost / n);
        const double mx = st.terminal_mean;
        st.terminal_var = pairwise_sum(x_term.data(), x_term.size(),
                                       [mx](double v) { return (v - mx) * (v - mx); }) /
                          (n - 1);
    }
    st.terminal_min = *std::min_element(x_term.begin(), x_term.end());
    st.terminal_max = *std::max_element(x_term.begin(), x_term.end());
    for (int wk = 0; wk < workers; ++wk) {
        st.extrapolated_steps += extrap[wk];
        st.max_abs_pi = std::max(st.max_abs_pi, maxpi[wk]);
    }
    if (terminal_dump) *terminal_dump = std::move(x_term);
    return st;
}

VerifyReport verify_value(double v_ref, const Policy& optimal,
                          const std::vector<const Policy*>& alternatives, const MarketParams& p,
                          const SimConfig& cfg) {
    VerifyReport rep;
    rep.v_ref = v_ref;
    rep.std_err_reliable = cfg.n_paths >= kStdErrFloor;

    auto z_of = [](double est, double ref, double se) {
        if (se > 0.0) return (est - ref) / se;
        return est == ref ? 0.0 : std::copysign(1e9, est - ref);
    };

    const PathStats opt = simulate_policy(optimal, p, cfg);
    VerifyRow row;
    row.policy = optimal.name();
    row.estimate = opt.mean_sq_dev;
    row.std_err = opt.std_err;
    row.v_ref = v_ref;
    row.z_score = z_of(opt.mean_sq_dev, v_ref, opt.std_err);
    row.pass = std::fabs(row.z_score) <= 3.0;
    rep.rows.push_back(row);

    for (const Policy* alt : alternatives) {
        const PathStats st = simulate_policy(*alt, p, cfg);
        VerifyRow r;
        r.policy = alt->name();
        r.estimate = st.mean_sq_dev;
        r.std_err = st.std_err;
        r.v_ref = v_ref;
        r.z_score = z_of(st.mean_sq_dev, v_ref, st.std_err);
        r.pass = r.z_score >= -3.0;
        rep.rows.push_back(r);
    }

    rep.pass = rep.std_err_reliable;
    for (const auto& r : rep.rows) rep.pass = rep.pass && r.pass;
    return rep;
}

}  // namespace gapfolio

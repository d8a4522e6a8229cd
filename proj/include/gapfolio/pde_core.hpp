#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gapfolio/market.hpp"

namespace gapfolio {

// Bump when the scheme changes in a way that invalidates cached surfaces.
inline constexpr int kSchemeVersion = 1;

/// Dense row-major (time level x space node) storage.
class Array2d {
public:
    Array2d() = default;
    Array2d(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols) {}

    double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
    const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }
    double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// Uniform grid on the truncated log-dual strip [z_min, z_max] x [0, T].
/// The truncation is asymmetric: boundaries live near ln(2d) so the right
/// side needs little room, while the left tail must reach deep enough for
/// the y -> 0 asymptote used by the dual transform.
struct Grid {
    double z_min = 0.0;
    double z_max = 0.0;
    int nz = 0;  // spatial nodes, spacing dz = (z_max - z_min)/(nz - 1)
    int ns = 0;  // time steps on [0, T]

    double dz() const { return (z_max - z_min) / (nz - 1); }
    double z(int i) const { return z_min + i * dz(); }

    /// z in [ln(2d) - 14, ln(2d) + 4], nz = 1801, ns = 200 per year.
    static Grid defaults(const MarketParams& p);
};

struct SolverOptions {
    double picard_tol = 1e-10;    // sup-norm update <= tol * (1 + |w|_inf)
    int max_picard_iters = 50;    // per time step (per epsilon stage)
    bool eps_continuation = false;
    double continuation_start = 1e-2;  // geometric ladder down to eps
};

/// Discrete solution of the regularized truncated dual PDE.
struct WSolution {
    MarketParams params;
    DerivedConstants consts;
    Grid grid;
    double epsilon = 0.0;
    std::vector<double> s_nodes;  // ns + 1 levels, s_0 = 0
    Array2d w;                    // [ns+1 x nz]
    Array2d w_z;                  // level 0 holds the analytic 1/2 e^z
    // First column index clear of the left Robin boundary layer; w_z > 0 and
    // monotonicity hold from here on. 0 when the rates coincide.
    int usable_from = 0;
    std::vector<int> picard_iterations;  // per time step
    std::vector<double> residuals;       // final sup-norm update per step

    double ds() const { return params.T / grid.ns; }
};

/// A(w / (|w_z| + eps)): the clamp with the regularized ratio argument.
double regularized_A(double w_val, double wz_val, double eps, const DerivedConstants& c) noexcept;

/// Backward-Euler march of
///   w_s - 1/2 sigma^2 A^2 w_zz + (mu - 1/2 sigma^2 A^2 - sigma^2 A) w_z + (mu - sigma^2 A) w = 0,
/// A frozen at the previous Picard iterate each linear solve, with
/// left Robin (w - w_z)(z_min, s) = -e^{-r2 s} d,
/// right Neumann w_z(z_max, s) = 1/2 e^{theta1 s} e^{z_max},
/// initial w(z, 0) = 1/2 e^z - d.
/// Throws PicardDivergence, GridTooSmall, NonFiniteValue (all numerical).
WSolution solve_w(const DerivedConstants& c, const MarketParams& p, const Grid& g, double eps,
                  const SolverOptions& opts = {});

struct BoundViolation {
    int level = 0;
    int node = 0;
    const char* bound = "";  // "w_lower", "w_upper", "wz_lower", "wz_upper", "wz_floor"
    double margin = 0.0;     // negative = amount of violation beyond tolerance
};

struct WBoundReport {
    std::vector<BoundViolation> violations;
    // Worst signed margin per family (positive = slack); tolerance already applied.
    double worst_w_lower = 0.0, worst_w_upper = 0.0;
    double worst_wz_lower = 0.0, worst_wz_upper = 0.0, worst_wz_floor = 0.0;
    long nodes_checked = 0;
    bool ok() const noexcept { return violations.empty(); }
};

/// Checks the a-priori envelopes on the discrete solution. Per node the
/// allowance is tol_abs + tol_rel * |value|. The value envelopes
///   1/2 e^{theta2 s} e^z - e^{-r1 s} d <= w <= 1/2 e^{theta1 s} e^z - e^{-r2 s} d
/// and the derivative upper envelope w_z <= 1/2 e^{k s} e^z hold on the whole
/// truncated domain; the positive lower envelope 1/2 e^{-kappa s} e^z <= w_z
/// only outside the left Robin layer (checked for node >= usable_from), while
/// every node must satisfy the truncated-domain floor
/// w_z >= -e^{-theta3 s} d, theta3 = min(mu - sigma2 a1 (a1 + 3), r1).
WBoundReport check_w_bounds(const WSolution& sol, const DerivedConstants& c, const MarketParams& p,
                            double tol_abs, double tol_rel = 0.0);

}  // namespace gapfolio

#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "gapfolio/config.hpp"
#include "gapfolio/dual_transform.hpp"
#include "gapfolio/free_boundary.hpp"
#include "gapfolio/frontier.hpp"
#include "gapfolio/market.hpp"
#include "gapfolio/pde_core.hpp"
#include "gapfolio/simulate.hpp"

namespace gapfolio {

// Shared state for one invocation: configuration plus cache/logging switches.
// The command functions are the CLI subcommands, kept in the library so tests
// drive them in-process.
struct CommandContext {
    RunConfig cfg;
    bool use_cache = true;
    bool refresh = false;          // ignore cache contents, recompute and overwrite
    std::ostream* log = nullptr;   // nullptr: silent
};

// Solve or load the transformed surface for ctx.cfg.
WSolution obtain_surface(const CommandContext& ctx, bool* cache_hit = nullptr);
// Same, then push through the dual chain (u, u_y, v).
DualSurface obtain_dual(const CommandContext& ctx, bool* cache_hit = nullptr);

struct SolveResult {
    bool cache_hit = false;
    int usable_from = 0;
    WBoundReport bounds;
    std::filesystem::path surface_csv, meta_json;
};
SolveResult cmd_solve(const CommandContext& ctx, bool write_surface_csv = true);

struct BoundariesResult {
    BoundaryCurves curves;
    std::filesystem::path wealth_csv, dual_csv, svg_path;
};
BoundariesResult cmd_boundaries(const CommandContext& ctx);

struct ValuePoint {
    double t = 0, x = 0;
    double V = 0, V_x = 0, V_xx = 0, pi = 0, proportion = 0;
    bool in_domain = false;  // false: x at/above the discounted target, row is NaN
};
struct ValueResult {
    std::vector<ValuePoint> points;
    std::filesystem::path csv_path;
};
ValueResult cmd_value(const CommandContext& ctx, const std::vector<double>& xs,
                      const std::vector<double>& ts);

struct PolicyResult {
    std::filesystem::path csv_path;
    std::vector<std::filesystem::path> svg_paths;
};
// Dense policy sections pi(x, t) and pi/x for each requested time (defaults
// 0, T/2, just below T when ts is empty).
PolicyResult cmd_policy(const CommandContext& ctx, std::vector<double> ts);

// Policy specs: optimal | all_in_stock | zero | classical_r1 | classical_r2 |
// constant:<amount>. `ds` is only consulted for "optimal".
std::unique_ptr<Policy> make_policy(const std::string& spec, const MarketParams& p,
                                    const DualSurface* ds);

struct SimulateResult {
    std::string policy;
    PathStats stats;
    std::filesystem::path stats_csv, dump_csv;
};
SimulateResult cmd_simulate(const CommandContext& ctx, const std::string& policy_spec,
                            bool dump_paths = false);

struct VerifyResult {
    VerifyReport report;
    double v_lower = 0, v_upper = 0;  // closed-form sandwich at (x0, t0)
    std::filesystem::path csv_path;
};
VerifyResult cmd_verify(const CommandContext& ctx);

struct FrontierResult {
    std::vector<FrontierPoint> points;
    std::filesystem::path csv_path, svg_path;
};
// Homogeneity route by default; per_target_solves re-solves the PDE per d and
// differentiates the value in d by central differences instead.
FrontierResult cmd_frontier(const CommandContext& ctx, std::vector<double> d_values,
                            bool per_target_solves = false);

struct SweepMember {
    std::string label;
    MarketParams market;
    BoundaryCurves curves;
    double mean_band = 0;  // time-average of L - B
};
struct SweepResult {
    std::vector<SweepMember> members;
    std::filesystem::path summary_csv, combined_svg;
};
// Families: "gap" (rate pairs closing on equal rates), "mu" (drift sweep),
// "sigma" (variance sweep).
SweepResult cmd_sweep(const CommandContext& ctx, const std::string& family);

}  // namespace gapfolio

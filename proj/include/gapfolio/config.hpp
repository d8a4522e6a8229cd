#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gapfolio/market.hpp"
#include "gapfolio/pde_core.hpp"
#include "gapfolio/simulate.hpp"

namespace gapfolio {

struct SolverConfig {
    double eps = 1e-8;
    bool continuation = false;       // per-step regularization ladder
    double picard_tol = 1e-10;
    int max_picard_iters = 50;
    double tail_tol_factor = 1e-4;   // dual antiderivative tail budget
    double bound_tol_abs = 1e-6;     // bound-check allowances
    double bound_tol_rel = 1e-6;
};

struct GridOverrides {
    std::optional<double> z_min, z_max;
    std::optional<int> nz, ns;
};

// Full run configuration: flat key=value text with dotted sections
// (market., grid., solver., sim.) or the same keys nested in a JSON object.
struct RunConfig {
    MarketParams market;
    GridOverrides grid;
    SolverConfig solver;
    SimConfig sim;
    std::string output_dir = "out";
    std::string cache_dir;  // empty: <output_dir>/cache

    Grid resolve_grid() const;      // market defaults, overridden fieldwise
    std::string config_hash() const;  // content key of the solve inputs
};

// Parses flat key=value lines ('#' comments, blank lines ignored). Unknown
// keys and malformed values raise validation "ConfigInvalid".
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_json(const std::string& text);
RunConfig load_config_file(const std::string& path);  // dispatch on .json

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);
void apply_preset(RunConfig& cfg, const std::string& name);
std::vector<std::string> preset_names();

}  // namespace gapfolio

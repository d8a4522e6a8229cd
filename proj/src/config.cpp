#include "gapfolio/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gapfolio/cache.hpp"
#include "gapfolio/errors.hpp"

namespace gapfolio {

namespace {

double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw Error::validation("ConfigInvalid", key + ": not a number: '" + v + "'");
    return x;
}

long parse_long(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw Error::validation("ConfigInvalid", key + ": not an integer: '" + v + "'");
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error::validation("ConfigInvalid", key + ": not a boolean: '" + v + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"market.r1", [](RunConfig& c, const std::string& k, const std::string& v) { c.market.r1 = parse_double(k, v); }},
        {"market.r2", [](RunConfig& c, const std::string& k, const std::string& v) { c.market.r2 = parse_double(k, v); }},
        {"market.mu", [](RunConfig& c, const std::string& k, const std::string& v) { c.market.mu = parse_double(k, v); }},
        {"market.sigma2", [](RunConfig& c, const std::string& k, const std::string& v) { c.market.sigma2 = parse_double(k, v); }},
        {"market.d", [](RunConfig& c, const std::string& k, const std::string& v) { c.market.d = parse_double(k, v); }},
        {"market.T", [](RunConfig& c, const std::string& k, const std::string& v) { c.market.T = parse_double(k, v); }},
        {"grid.z_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.z_min = parse_double(k, v); }},
        {"grid.z_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.z_max = parse_double(k, v); }},
        {"grid.nz", [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.nz = static_cast<int>(parse_long(k, v)); }},
        {"grid.ns", [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.ns = static_cast<int>(parse_long(k, v)); }},
        {"solver.eps", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.eps = parse_double(k, v); }},
        {"solver.continuation", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.continuation = parse_bool(k, v); }},
        {"solver.picard_tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.picard_tol = parse_double(k, v); }},
        {"solver.max_picard_iters", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.max_picard_iters = static_cast<int>(parse_long(k, v)); }},
        {"solver.tail_tol_factor", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.tail_tol_factor = parse_double(k, v); }},
        {"solver.bound_tol_abs", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.bound_tol_abs = parse_double(k, v); }},
        {"solver.bound_tol_rel", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.bound_tol_rel = parse_double(k, v); }},
        {"sim.x0", [](RunConfig& c, const std::string& k, const std::string& v) { c.sim.x0 = parse_double(k, v); }},
        {"sim.t0", [](RunConfig& c, const std::string& k, const std::string& v) { c.sim.t0 = parse_double(k, v); }},
        {"sim.n_paths", [](RunConfig& c, const std::string& k, const std::string& v) { c.sim.n_paths = parse_long(k, v); }},
        {"sim.n_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.sim.n_steps = static_cast<int>(parse_long(k, v)); }},
        {"sim.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.sim.seed = static_cast<std::uint64_t>(std::strtoull(v.c_str(), nullptr, 10)); (void)k; }},
        {"sim.antithetic", [](RunConfig& c, const std::string& k, const std::string& v) { c.sim.antithetic = parse_bool(k, v); }},
        {"sim.n_threads", [](RunConfig& c, const std::string& k, const std::string& v) { c.sim.n_threads = static_cast<int>(parse_long(k, v)); }},
        {"output_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; }},
        {"cache_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.cache_dir = v; }},
    };
    return table;
}

struct PresetDef {
    const char* name;
    double r1, r2, mu, sigma2;
};

// Parameter bundles behind --preset: the gap sweep (fig3a-d), the baseline
// value/derivative panels (fig4a/b), the drift sweep (fig5a-d), the variance
// sweep (fig6a-d), the frontier panel (fig7), and the low-variance policy
// panels (fig8a-c, times 0 / 1.5 / 2.9 picked per panel at the command
// level). All use d = 10, T = 3.
const PresetDef kPresets[] = {
    {"fig3a", 0.02, 0.08, 0.15, 0.10}, {"fig3b", 0.03, 0.07, 0.15, 0.10},
    {"fig3c", 0.04, 0.06, 0.15, 0.10}, {"fig3d", 0.05, 0.05, 0.15, 0.10},
    {"fig4a", 0.02, 0.08, 0.15, 0.10}, {"fig4b", 0.02, 0.08, 0.15, 0.10},
    {"fig5a", 0.02, 0.08, 0.20, 0.10}, {"fig5b", 0.02, 0.08, 0.25, 0.10},
    {"fig5c", 0.02, 0.08, 0.30, 0.10}, {"fig5d", 0.02, 0.08, 0.35, 0.10},
    {"fig6a", 0.02, 0.08, 0.15, 0.30}, {"fig6b", 0.02, 0.08, 0.15, 0.25},
    {"fig6c", 0.02, 0.08, 0.15, 0.20}, {"fig6d", 0.02, 0.08, 0.15, 0.15},
    {"fig7", 0.02, 0.08, 0.15, 0.10},  {"fig8a", 0.02, 0.08, 0.15, 0.15},
    {"fig8b", 0.02, 0.08, 0.15, 0.15}, {"fig8c", 0.02, 0.08, 0.15, 0.15},
};

void flatten_json(const nlohmann::json& node, const std::string& prefix, RunConfig& cfg) {
    if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it) {
            const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
            flatten_json(it.value(), key, cfg);
        }
        return;
    }
    std::string value;
    if (node.is_string())
        value = node.get<std::string>();
    else if (node.is_boolean())
        value = node.get<bool>() ? "true" : "false";
    else if (node.is_number_integer())
        value = std::to_string(node.get<long long>());
    else if (node.is_number()) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", node.get<double>());
        value = buf;
    } else {
        throw Error::validation("ConfigInvalid", prefix + ": unsupported JSON value type");
    }
    apply_override(cfg, prefix, value);
}

}  // namespace

Grid RunConfig::resolve_grid() const {
    Grid g = Grid::defaults(market);
    if (grid.z_min) g.z_min = *grid.z_min;
    if (grid.z_max) g.z_max = *grid.z_max;
    if (grid.nz) g.nz = *grid.nz;
    if (grid.ns) g.ns = *grid.ns;
    return g;
}

std::string RunConfig::config_hash() const { return surface_cache_key(market, resolve_grid(), solver.eps); }

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end()) throw Error::validation("ConfigInvalid", "unknown key '" + key + "'");
    it->second(cfg, key, value);
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error::validation("ConfigInvalid",
                                    "line " + std::to_string(lineno) + ": expected key=value");
        apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig parse_config_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw Error::validation("ConfigInvalid", std::string("JSON parse failure: ") + e.what());
    }
    if (!doc.is_object()) throw Error::validation("ConfigInvalid", "top-level JSON must be an object");
    RunConfig cfg;
    flatten_json(doc, "", cfg);
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error::io("FileUnreadable", "cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const bool json = path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0;
    return json ? parse_config_json(buf.str()) : parse_config_text(buf.str());
}

void apply_preset(RunConfig& cfg, const std::string& name) {
    for (const auto& p : kPresets) {
        if (name == p.name) {
            cfg.market.r1 = p.r1;
            cfg.market.r2 = p.r2;
            cfg.market.mu = p.mu;
            cfg.market.sigma2 = p.sigma2;
            cfg.market.d = 10.0;
            cfg.market.T = 3.0;
            return;
        }
    }
    std::string known;
    for (const auto& p : kPresets) known += std::string(known.empty() ? "" : ", ") + p.name;
    throw Error::validation("ConfigInvalid", "unknown preset '" + name + "' (known: " + known + ")");
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& p : kPresets) out.push_back(p.name);
    return out;
}

}  // namespace gapfolio

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <doctest.h>

#include "gapfolio/cache.hpp"
#include "gapfolio/config.hpp"
#include "gapfolio/csv.hpp"
#include "gapfolio/errors.hpp"
#include "gapfolio/market.hpp"
#include "gapfolio/pde_core.hpp"
#include "gapfolio/svg.hpp"

using namespace gapfolio;
namespace fs = std::filesystem;

namespace {

std::string thrown_kind(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return "";
}

fs::path scratch_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / "gapfolio_tests" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("flat key=value text parses with comments and sections") {
    const std::string text =
        "# run description\n"
        "market.r1 = 0.03\n"
        "market.r2=0.07\n"
        "grid.nz = 301\n"
        "solver.eps = 1e-6\n"
        "solver.continuation = true\n"
        "sim.n_paths = 5000   # inline comment\n"
        "output_dir = runs/a\n";
    const auto cfg = parse_config_text(text);
    CHECK(cfg.market.r1 == 0.03);
    CHECK(cfg.market.r2 == 0.07);
    REQUIRE(cfg.grid.nz.has_value());
    CHECK(*cfg.grid.nz == 301);
    CHECK_FALSE(cfg.grid.z_min.has_value());
    CHECK(cfg.solver.eps == 1e-6);
    CHECK(cfg.solver.continuation);
    CHECK(cfg.sim.n_paths == 5000);
    CHECK(cfg.output_dir == "runs/a");
}

TEST_CASE("config parsing rejects unknown keys and bad values") {
    CHECK(thrown_kind([] { parse_config_text("markets.r1 = 0.03\n"); }) == "ConfigInvalid");
    CHECK(thrown_kind([] { parse_config_text("market.r1 = fast\n"); }) == "ConfigInvalid");
    CHECK(thrown_kind([] { parse_config_text("grid.nz = 10.5\n"); }) == "ConfigInvalid");
    CHECK(thrown_kind([] { parse_config_text("solver.continuation = maybe\n"); }) == "ConfigInvalid");
    CHECK(thrown_kind([] { parse_config_text("just a line\n"); }) == "ConfigInvalid");
    try {
        parse_config_text("market.r1 = 0.03\noops\n");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("json configs flatten to the same keys") {
    const std::string text = R"({
        "market": {"mu": 0.2, "sigma2": 0.3},
        "grid": {"nz": 101, "ns": 40},
        "output_dir": "runs/j"
    })";
    const auto cfg = parse_config_json(text);
    CHECK(cfg.market.mu == 0.2);
    CHECK(cfg.market.sigma2 == 0.3);
    CHECK(*cfg.grid.nz == 101);
    CHECK(*cfg.grid.ns == 40);
    CHECK(cfg.output_dir == "runs/j");

    CHECK(thrown_kind([] { parse_config_json("{\"market\": {\"mu\": [1, 2]}}"); }) == "ConfigInvalid");
    CHECK(thrown_kind([] { parse_config_json("[1, 2]"); }) == "ConfigInvalid");
    CHECK(thrown_kind([] { parse_config_json("{nope"); }) == "ConfigInvalid");
}

TEST_CASE("config files dispatch on extension") {
    const auto dir = scratch_dir("cfg_files");
    {
        std::ofstream out(dir / "a.cfg");
        out << "market.mu = 0.25\n";
    }
    {
        std::ofstream out(dir / "b.json");
        out << "{\"market\": {\"mu\": 0.35}}";
    }
    CHECK(load_config_file((dir / "a.cfg").string()).market.mu == 0.25);
    CHECK(load_config_file((dir / "b.json").string()).market.mu == 0.35);
    CHECK(thrown_kind([&] { load_config_file((dir / "missing.cfg").string()); }) ==
          "FileUnreadable");
}

TEST_CASE("presets select the documented parameter bundles") {
    RunConfig cfg;
    apply_preset(cfg, "fig3b");
    CHECK(cfg.market.r1 == 0.03);
    CHECK(cfg.market.r2 == 0.07);
    apply_preset(cfg, "fig6d");
    CHECK(cfg.market.sigma2 == 0.15);
    apply_preset(cfg, "fig5a");
    CHECK(cfg.market.mu == 0.20);
    CHECK(thrown_kind([&] { apply_preset(cfg, "fig9z"); }) == "ConfigInvalid");
    const auto names = preset_names();
    CHECK(names.size() >= 12);
    bool has_baseline = false;
    for (const auto& n : names) has_baseline = has_baseline || n == "fig4a";
    CHECK(has_baseline);
}

TEST_CASE("grid resolution honors field-wise overrides") {
    RunConfig cfg;
    const Grid def = Grid::defaults(cfg.market);
    const Grid a = cfg.resolve_grid();
    CHECK(a.z_min == def.z_min);
    CHECK(a.nz == def.nz);
    cfg.grid.nz = 301;
    cfg.grid.z_max = 5.0;
    const Grid b = cfg.resolve_grid();
    CHECK(b.nz == 301);
    CHECK(b.z_max == 5.0);
    CHECK(b.z_min == def.z_min);
    CHECK(b.ns == def.ns);
}

TEST_CASE("config hash keys the solve inputs and nothing else") {
    RunConfig a, b;
    CHECK(a.config_hash() == b.config_hash());
    CHECK(a.config_hash().size() == 16);
    CHECK(a.config_hash().find_first_not_of("0123456789abcdef") == std::string::npos);

    b.sim.n_paths = 7;  // simulation settings do not change the surface
    CHECK(a.config_hash() == b.config_hash());
    b.market.mu = 0.2;
    CHECK(a.config_hash() != b.config_hash());

    RunConfig c;
    c.grid.nz = 901;
    CHECK(a.config_hash() != c.config_hash());
    RunConfig d;
    d.solver.eps = 1e-6;
    CHECK(a.config_hash() != d.config_hash());
}

TEST_CASE("surface cache round-trips bitwise") {
    MarketParams p;
    p.r1 = p.r2 = 0.05;
    const auto c = validate_params(p);
    const Grid g{-6.0, 3.2, 231, 30};
    const auto sol = solve_w(c, p, g, 1e-8);
    const auto key = surface_cache_key(p, g, 1e-8);
    CHECK(key.size() == 16);
    CHECK(key == surface_cache_key(p, g, 1e-8));
    CHECK(key != surface_cache_key(p, g, 1e-7));

    const auto dir = scratch_dir("cache_rt");
    store_surface(dir, key, sol);
    WSolution out;
    REQUIRE(load_surface(dir, key, out));
    CHECK(out.grid.nz == g.nz);
    CHECK(out.grid.z_min == g.z_min);
    CHECK(out.usable_from == sol.usable_from);
    CHECK(out.epsilon == sol.epsilon);
    REQUIRE(out.w.data().size() == sol.w.data().size());
    CHECK(out.w.data() == sol.w.data());      // bitwise
    CHECK(out.w_z.data() == sol.w_z.data());
    CHECK(out.s_nodes == sol.s_nodes);

    // clean miss
    WSolution miss;
    CHECK_FALSE(load_surface(dir, "0123456789abcdef", miss));
}

TEST_CASE("corrupted cache entries fail loudly") {
    MarketParams p;
    p.r1 = p.r2 = 0.05;
    const auto c = validate_params(p);
    const Grid g{-6.0, 3.2, 231, 30};
    const auto sol = solve_w(c, p, g, 1e-8);
    const auto key = surface_cache_key(p, g, 1e-8);

    const auto dir = scratch_dir("cache_bad");
    store_surface(dir, key, sol);
    fs::resize_file(dir / (key + ".bin"), 40);  // truncate payload
    WSolution out;
    CHECK(thrown_kind([&] { load_surface(dir, key, out); }) == "CacheCorrupt");

    const auto dir2 = scratch_dir("cache_nometa");
    store_surface(dir2, key, sol);
    fs::remove(dir2 / (key + ".meta.json"));
    CHECK(thrown_kind([&] { load_surface(dir2, key, out); }) == "CacheCorrupt");
}

TEST_CASE("cache directory resolution order") {
    unsetenv("GAPFOLIO_CACHE_DIR");
    CHECK(resolve_cache_dir("explicit", "outdir") == fs::path("explicit"));
    CHECK(resolve_cache_dir("", "outdir") == fs::path("outdir") / "cache");
    setenv("GAPFOLIO_CACHE_DIR", "/tmp/gapfolio_env_cache", 1);
    CHECK(resolve_cache_dir("explicit", "outdir") == fs::path("/tmp/gapfolio_env_cache"));
    unsetenv("GAPFOLIO_CACHE_DIR");
}

TEST_CASE("csv writer emits the hash line, header and %.12g rows") {
    const auto dir = scratch_dir("csv");
    const auto path = dir / "t.csv";
    {
        CsvWriter w(path, "a,b", "deadbeef01234567");
        const double r1[] = {0.1, 2.0};
        w.row(r1);
        const double r2[] = {1e300, std::nan("")};
        w.row(r2);
        w.raw_row("x,y");
        w.close();
    }
    CHECK(slurp(path) == "# config_hash=deadbeef01234567\na,b\n0.1,2\n1e+300,nan\nx,y\n");
    CHECK(CsvWriter::fmt(0.30000000000000004) == "0.3");
    CHECK(CsvWriter::fmt(1.0 / 3.0) == "0.333333333333");
}

TEST_CASE("svg writer produces a plot with escaped labels") {
    const auto dir = scratch_dir("svg");
    const auto path = dir / "p.svg";
    svg::PlotOptions opt;
    opt.title = "a<b & c";
    opt.x_label = "t";
    opt.y_label = "B";
    svg::Series s1{"first", {0, 1, 2}, {1, 4, 2}, "", false};
    svg::Series s2{"second", {0, 1, 2}, {2, 1, 3}, "", true};
    svg::write_line_plot(path, opt, {s1, s2});
    const std::string body = slurp(path);
    CHECK(body.find("<svg") != std::string::npos);
    CHECK(body.find("a&lt;b &amp; c") != std::string::npos);
    CHECK(body.find("polyline") != std::string::npos);
    CHECK(body.find("first") != std::string::npos);
    CHECK(body.find("second") != std::string::npos);
}

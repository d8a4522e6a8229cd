#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr interleaved
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = "\""s + GAPFOLIO_CLI_PATH + "\" " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / "gapfolio_cli" / leaf;
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

// Equal-rates market on a small aligned grid: fast and closed-form checkable.
const std::string& base_config() {
    static const std::string path = [] {
        const fs::path dir = scratch_dir("config");
        const fs::path cfg = dir / "eq.cfg";
        std::ofstream out(cfg);
        out << "market.r1 = 0.05\n"
               "market.r2 = 0.05\n"
               "grid.z_min = -8\n"
               "grid.z_max = 4\n"
               "grid.nz = 601\n"
               "grid.ns = 300\n";
        return cfg.string();
    }();
    return path;
}

std::vector<std::vector<double>> read_csv_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::vector<std::vector<double>> rows;
    int lineno = 0;
    while (std::getline(in, line)) {
        if (++lineno <= 2) continue;  // hash + header
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (...) {
                row.push_back(std::nan(""));
            }
        }
        if (!row.empty()) rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST_CASE("cli requires a subcommand and offers help") {
    CHECK(run_cli("").exit_code == 2);
    const auto help = run_cli("--help");
    CHECK(help.exit_code == 0);
    CHECK(help.output.find("solve") != std::string::npos);
    CHECK(help.output.find("frontier") != std::string::npos);
    CHECK(run_cli("fly").exit_code == 2);
    CHECK(run_cli("solve --wat").exit_code == 2);
}

TEST_CASE("solve writes surface artifacts and reuses the cache") {
    const auto out = scratch_dir("solve");
    const std::string args =
        "solve --config " + base_config() + " --out " + out.string();
    const auto first = run_cli(args);
    CHECK(first.exit_code == 0);
    CHECK(fs::exists(out / "w_surface.csv"));
    CHECK(fs::exists(out / "solve_meta.json"));
    const std::string surface_bytes = slurp(out / "w_surface.csv");
    CHECK(surface_bytes.rfind("# config_hash=", 0) == 0);

    const auto second = run_cli(args);
    CHECK(second.exit_code == 0);
    CHECK(second.output.find("cache") != std::string::npos);
    CHECK(slurp(out / "w_surface.csv") == surface_bytes);  // byte-identical rerun

    const auto meta = slurp(out / "solve_meta.json");
    CHECK(meta.find("\"cache_hit\": true") != std::string::npos);
    CHECK(meta.find("violations") != std::string::npos);
}

TEST_CASE("exit codes distinguish user, numerical and io failures") {
    // validation: drift at/below the borrowing rate
    const auto bad_market = run_cli("solve --config " + base_config() + " --set market.mu=0.05");
    CHECK(bad_market.exit_code == 2);
    CHECK(bad_market.output.find("ParameterOrdering") != std::string::npos);
    // validation: malformed override value
    CHECK(run_cli("solve --config " + base_config() + " --set grid.nz=abc").exit_code == 2);
    CHECK(run_cli("solve --config " + base_config() + " --set nosuch.key=1").exit_code == 2);
    CHECK(run_cli("solve --preset fig9z").exit_code == 2);
    // numerical: truncation cannot hold the initial boundary
    const auto small = run_cli("solve --config " + base_config() + " --set grid.z_max=2.0");
    CHECK(small.exit_code == 3);
    CHECK(small.output.find("GridTooSmall") != std::string::npos);
    // io: unwritable output location
    CHECK(run_cli("solve --config " + base_config() + " --out /proc/nope/sub").exit_code == 4);
}

TEST_CASE("value tabulates the closed form with equal rates") {
    const auto out = scratch_dir("value");
    const auto res = run_cli("value --config " + base_config() + " --x 1,9.5 --t 0 --out " +
                             out.string() + " --quiet");
    CHECK(res.exit_code == 0);
    CHECK(res.output.empty());
    const auto rows = read_csv_rows(out / "value_points.csv");
    REQUIRE(rows.size() == 2);
    // columns: t, x, V, V_x, V_xx, pi, proportion, in_domain
    REQUIRE(rows[0].size() == 8);
    CHECK(rows[0][2] == doctest::Approx(57.86766253967063).epsilon(2e-3));
    CHECK(rows[0][5] == doctest::Approx(7.607079764250578).epsilon(2e-3));
    CHECK(rows[0][7] == 1.0);
    // x = 9.5 sits above the discounted target: NaN row, flagged out of domain
    CHECK(rows[1][7] == 0.0);
    CHECK(std::isnan(rows[1][2]));
}

TEST_CASE("simulate reports the deterministic all-cash estimate") {
    const auto out = scratch_dir("sim");
    const auto res = run_cli("simulate --policy zero --config " + base_config() +
                             " --set sim.n_paths=400 --set sim.n_steps=40 --out " + out.string());
    CHECK(res.exit_code == 0);
    const auto rows = read_csv_rows(out / "simulate_stats.csv");
    REQUIRE(rows.size() == 1);
    const double dt = 3.0 / 40.0;
    const double x_T = std::pow(1.0 + 0.05 * dt, 40.0);
    const double expect = (x_T - 10.0) * (x_T - 10.0);
    // columns: mean_sq_dev, std_err, n_paths, ... (policy label is column 0)
    CHECK(rows[0][1] == doctest::Approx(expect).epsilon(1e-9));
    CHECK(rows[0][3] == 400.0);
}

TEST_CASE("frontier emits the equal-rates point") {
    const auto out = scratch_dir("frontier");
    const auto res =
        run_cli("frontier --config " + base_config() + " --d 10 --out " + out.string());
    CHECK(res.exit_code == 0);
    const auto rows = read_csv_rows(out / "frontier.csv");
    REQUIRE(rows.size() == 1);
    // columns: d, V, V_d, mean, std_dev
    CHECK(rows[0][0] == 10.0);
    CHECK(rows[0][3] == doctest::Approx(3.4525257696078793).epsilon(2e-3));
    CHECK(rows[0][4] == doctest::Approx(3.872756607640318).epsilon(2e-3));
    CHECK(fs::exists(out / "frontier.svg"));
}

TEST_CASE("boundaries produce aligned wealth curves") {
    const auto out = scratch_dir("bounds");
    const auto res = run_cli("boundaries --config " + base_config() + " --out " + out.string());
    CHECK(res.exit_code == 0);
    const auto wealth = read_csv_rows(out / "boundaries_wealth.csv");
    REQUIRE(wealth.size() == 301);
    // columns: t, B, L, discounted_target; terminal row hits a d/(1+a) = 5
    const auto& last = wealth.back();
    CHECK(last[0] == doctest::Approx(3.0));
    CHECK(last[1] == doctest::Approx(5.0).epsilon(2e-3));
    CHECK(last[2] == doctest::Approx(5.0).epsilon(2e-3));
    CHECK(last[3] == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(fs::exists(out / "boundaries_dual.csv"));
    CHECK(fs::exists(out / "boundaries.svg"));
}

TEST_CASE("verify runs the cross-check suite end to end") {
    const auto out = scratch_dir("verify");
    const auto res = run_cli("verify --config " + base_config() +
                             " --set sim.n_paths=2000 --set sim.n_steps=60 --out " + out.string());
    CHECK(res.exit_code == 0);
    const auto rows = read_csv_rows(out / "verify_report.csv");
    CHECK(rows.size() == 4);  // optimal + three alternatives
    CHECK(res.output.find("PASS") != std::string::npos);
}

TEST_CASE("sweep emits per-member artifacts and a summary") {
    const auto out = scratch_dir("sweep");
    const auto res = run_cli("sweep --family gap --config " + base_config() + " --out " +
                             out.string());
    CHECK(res.exit_code == 0);
    const auto rows = read_csv_rows(out / "sweep_gap" / "summary.csv");
    REQUIRE(rows.size() == 4);
    // trailing column is the average no-trade band width; it narrows as the
    // rate gap closes and vanishes at equal rates
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].back() < rows[i - 1].back());
    CHECK(rows.back().back() < 0.05);
    CHECK(fs::exists(out / "sweep_gap" / "combined.svg"));
}

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gapfolio/commands.hpp"
#include "gapfolio/errors.hpp"

namespace {

using gapfolio::Error;

// "lo:hi:n" -> n evenly spaced values; "a,b,c" -> literal values
std::vector<double> parse_list(const std::string& spec) {
    auto to_double = [&](const std::string& tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
            throw Error::validation("ConfigInvalid", "bad number '" + tok + "' in list '" + spec + "'");
        return v;
    };
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::size_t pos = 0;
        while (true) {
            const auto next = spec.find(':', pos);
            parts.push_back(spec.substr(pos, next - pos));
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        if (parts.size() != 3)
            throw Error::validation("ConfigInvalid", "range syntax is lo:hi:count, got '" + spec + "'");
        const double lo = to_double(parts[0]), hi = to_double(parts[1]);
        const long n = std::strtol(parts[2].c_str(), nullptr, 10);
        if (n < 1) throw Error::validation("ConfigInvalid", "range count must be >= 1");
        for (long i = 0; i < n; ++i)
            out.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1));
        return out;
    }
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const auto next = spec.find(',', pos);
        const std::string tok = spec.substr(pos, next - pos);
        if (!tok.empty()) out.push_back(to_double(tok));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    if (out.empty()) throw Error::validation("ConfigInvalid", "empty list '" + spec + "'");
    return out;
}

struct CommonArgs {
    std::string config_file, preset, out_dir;
    std::vector<std::string> sets;
    bool no_cache = false, refresh = false, quiet = false;
};

gapfolio::CommandContext build_context(const CommonArgs& args) {
    gapfolio::CommandContext ctx;
    if (!args.config_file.empty()) ctx.cfg = gapfolio::load_config_file(args.config_file);
    if (!args.preset.empty()) gapfolio::apply_preset(ctx.cfg, args.preset);
    for (const auto& kv : args.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw Error::validation("ConfigInvalid", "--set expects key=value, got '" + kv + "'");
        gapfolio::apply_override(ctx.cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!args.out_dir.empty()) ctx.cfg.output_dir = args.out_dir;
    ctx.use_cache = !args.no_cache;
    ctx.refresh = args.refresh;
    ctx.log = args.quiet ? nullptr : &std::cout;
    return ctx;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-variance portfolio solver for markets where borrowing costs more than "
                 "saving earns: PDE value surface, trading boundaries, Monte Carlo verification, "
                 "efficient frontier."};
    app.require_subcommand(1);
    app.fallthrough();

    CommonArgs args;
    app.add_option("--config", args.config_file, "key=value or JSON configuration file");
    app.add_option("--preset", args.preset,
                   "named parameter bundle (fig3a..d, fig4a/b, fig5a..d, fig6a..d, fig7, fig8a..c)");
    app.add_option("--out", args.out_dir, "output directory (default: out)");
    app.add_option("--set", args.sets, "override a config key, e.g. --set market.mu=0.2")
        ->take_all();
    app.add_flag("--no-cache", args.no_cache, "solve without reading or writing the surface cache");
    app.add_flag("--refresh", args.refresh, "recompute even if a cached surface exists");
    app.add_flag("--quiet", args.quiet, "suppress progress logging");

    auto* solve = app.add_subcommand("solve", "solve the dual PDE surface, check bounds, cache it");
    bool no_surface_csv = false;
    solve->add_flag("--no-surface-csv", no_surface_csv, "skip the (large) full-surface CSV");

    auto* boundaries =
        app.add_subcommand("boundaries", "extract borrowing/saving boundaries, CSVs + SVG");

    auto* value = app.add_subcommand("value", "tabulate V, derivatives and policy at points");
    std::string x_spec = "-5:8:53", t_spec = "0";
    value->add_option("--x", x_spec, "wealth list: a,b,c or lo:hi:count (default -5:8:53)");
    value->add_option("--t", t_spec, "time list (default 0)");

    auto* policy = app.add_subcommand("policy", "dense policy sections per time, CSV + SVGs");
    std::string policy_t_spec;
    policy->add_option("--t", policy_t_spec, "time list (default 0, T/2, T-0.1)");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo a feedback policy");
    std::string policy_spec = "optimal";
    bool dump_paths = false;
    simulate->add_option("--policy", policy_spec,
                         "optimal | all_in_stock | zero | classical_r1 | classical_r2 | "
                         "constant:<amount>");
    simulate->add_flag("--dump-paths", dump_paths, "write per-path terminal wealth CSV");

    auto* verify = app.add_subcommand(
        "verify", "simulate optimal + alternatives against the PDE value (report only; "
                  "a FAIL row does not change the exit code)");

    auto* frontier = app.add_subcommand("frontier", "efficient frontier over targets d");
    std::string d_spec;
    bool per_target = false;
    frontier->add_option("--d", d_spec, "target list (default: 25 log-spaced admissible targets)");
    frontier->add_flag("--per-target-solves,--no-homogeneity", per_target,
                       "re-solve the PDE per target instead of the homogeneity route");

    auto* sweep = app.add_subcommand("sweep", "boundary sweeps over a parameter family");
    std::string family = "gap";
    sweep->add_option("--family", family, "gap | mu | sigma");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // command-line problems follow the validation exit code
    }

    try {
        const gapfolio::CommandContext ctx = build_context(args);
        if (solve->parsed()) {
            gapfolio::cmd_solve(ctx, !no_surface_csv);
        } else if (boundaries->parsed()) {
            gapfolio::cmd_boundaries(ctx);
        } else if (value->parsed()) {
            gapfolio::cmd_value(ctx, parse_list(x_spec), parse_list(t_spec));
        } else if (policy->parsed()) {
            std::vector<double> ts;
            if (!policy_t_spec.empty()) ts = parse_list(policy_t_spec);
            gapfolio::cmd_policy(ctx, ts);
        } else if (simulate->parsed()) {
            gapfolio::cmd_simulate(ctx, policy_spec, dump_paths);
        } else if (verify->parsed()) {
            gapfolio::cmd_verify(ctx);
        } else if (frontier->parsed()) {
            std::vector<double> ds;
            if (!d_spec.empty()) ds = parse_list(d_spec);
            gapfolio::cmd_frontier(ctx, ds, per_target);
        } else if (sweep->parsed()) {
            gapfolio::cmd_sweep(ctx, family);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return gapfolio::exit_code_for(e.category());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: filesystem: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

#include "gapfolio/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "gapfolio/cache.hpp"
#include "gapfolio/csv.hpp"
#include "gapfolio/errors.hpp"
#include "gapfolio/svg.hpp"

namespace gapfolio {

namespace {

std::filesystem::path ensure_outdir(const CommandContext& ctx) {
    std::filesystem::path dir(ctx.cfg.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error::io("FileUnwritable", "cannot create output dir " + dir.string());
    return dir;
}

void logln(const CommandContext& ctx, const std::string& line) {
    if (ctx.log) *ctx.log << line << "\n";
}

std::string fmt_g(double v, const char* spec = "%.6g") {
    char buf[40];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

WSolution obtain_surface(const CommandContext& ctx, bool* cache_hit) {
    const RunConfig& cfg = ctx.cfg;
    const DerivedConstants c = validate_params(cfg.market);
    const Grid g = cfg.resolve_grid();
    const std::string key = surface_cache_key(cfg.market, g, cfg.solver.eps);
    const auto dir = resolve_cache_dir(cfg.cache_dir, cfg.output_dir);
    if (cache_hit) *cache_hit = false;

    if (ctx.use_cache && !ctx.refresh) {
        WSolution sol;
        if (load_surface(dir, key, sol)) {
            if (cache_hit) *cache_hit = true;
            logln(ctx, "solve: cache hit " + key);
            return sol;
        }
    }
    const auto t0 = std::chrono::steady_clock::now();
    SolverOptions opts;
    opts.picard_tol = cfg.solver.picard_tol;
    opts.max_picard_iters = cfg.solver.max_picard_iters;
    opts.eps_continuation = cfg.solver.continuation;
    WSolution sol = solve_w(c, cfg.market, g, cfg.solver.eps, opts);
    const auto t1 = std::chrono::steady_clock::now();
    logln(ctx, "solve: computed " + key + " in " +
                   fmt_g(std::chrono::duration<double>(t1 - t0).count(), "%.2f") + " s");
    if (ctx.use_cache) store_surface(dir, key, sol);
    return sol;
}

DualSurface obtain_dual(const CommandContext& ctx, bool* cache_hit) {
    const WSolution sol = obtain_surface(ctx, cache_hit);
    DualSurface ds = build_u(sol);
    build_v(ds, ctx.cfg.solver.tail_tol_factor);
    return ds;
}

SolveResult cmd_solve(const CommandContext& ctx, bool write_surface_csv) {
    const auto dir = ensure_outdir(ctx);
    SolveResult res;
    const WSolution sol = obtain_surface(ctx, &res.cache_hit);
    res.usable_from = sol.usable_from;
    res.bounds = check_w_bounds(sol, sol.consts, sol.params, ctx.cfg.solver.bound_tol_abs,
                                 ctx.cfg.solver.bound_tol_rel);
    const std::string key = ctx.cfg.config_hash();

    if (write_surface_csv) {
        res.surface_csv = dir / "w_surface.csv";
        CsvWriter csv(res.surface_csv, "s,z,w,w_z", key);
        for (int j = 0; j < static_cast<int>(sol.s_nodes.size()); ++j) {
            const double* w = sol.w.row(j);
            const double* wz = sol.w_z.row(j);
            for (int i = 0; i < sol.grid.nz; ++i) {
                const double row[4] = {sol.s_nodes[j], sol.grid.z(i), w[i], wz[i]};
                csv.row(row);
            }
        }
        csv.close();
    }

    nlohmann::json meta;
    meta["config_hash"] = key;
    meta["cache_hit"] = res.cache_hit;
    meta["usable_from"] = sol.usable_from;
    meta["usable_z"] = sol.grid.z(sol.usable_from);
    meta["bound_check"] = {{"violations", res.bounds.violations.size()},
                           {"nodes_checked", res.bounds.nodes_checked},
                           {"worst_w_lower", res.bounds.worst_w_lower},
                           {"worst_w_upper", res.bounds.worst_w_upper},
                           {"worst_wz_lower", res.bounds.worst_wz_lower},
                           {"worst_wz_upper", res.bounds.worst_wz_upper},
                           {"worst_wz_floor", res.bounds.worst_wz_floor}};
    if (!sol.picard_iterations.empty()) {
        meta["picard"] = {
            {"max_iterations",
             *std::max_element(sol.picard_iterations.begin(), sol.picard_iterations.end())},
            {"last_residual", sol.residuals.back()}};
    }
    res.meta_json = dir / "solve_meta.json";
    {
        std::ofstream out(res.meta_json, std::ios::binary | std::ios::trunc);
        if (!out) throw Error::io("FileUnwritable", "cannot write " + res.meta_json.string());
        out << meta.dump(2) << "\n";
    }
    logln(ctx, "solve: bounds " + std::to_string(res.bounds.violations.size()) + " violation(s) over " +
                   std::to_string(res.bounds.nodes_checked) + " nodes");
    return res;
}

BoundariesResult cmd_boundaries(const CommandContext& ctx) {
    const auto dir = ensure_outdir(ctx);
    const std::string key = ctx.cfg.config_hash();
    const DualSurface ds = obtain_dual(ctx);
    const WSolution sol = obtain_surface(ctx);  // cached by now
    BoundariesResult res;
    res.curves = extract_z_boundaries(sol, sol.consts);
    map_to_wealth(res.curves, ds);

    res.dual_csv = dir / "boundaries_dual.csv";
    {
        CsvWriter csv(res.dual_csv, "s,b,l,b_upper,l_lower_statement,l_lower_proof", key);
        for (std::size_t j = 0; j < res.curves.s_nodes.size(); ++j) {
            const auto env = boundary_envelopes(sol.consts, sol.params, res.curves.s_nodes[j]);
            const double row[6] = {res.curves.s_nodes[j], res.curves.b[j], res.curves.l[j],
                                   env.b_upper, env.l_lower_statement, env.l_lower_proof};
            csv.row(row);
        }
        csv.close();
    }
    res.wealth_csv = dir / "boundaries_wealth.csv";
    {
        CsvWriter csv(res.wealth_csv, "t,B,L,discounted_target", key);
        for (std::size_t k = 0; k < res.curves.t_nodes.size(); ++k) {
            const double t = res.curves.t_nodes[k];
            const double row[4] = {t, res.curves.B[k], res.curves.L[k],
                                   discounted_target(sol.params, t)};
            csv.row(row);
        }
        csv.close();
    }
    res.svg_path = dir / "boundaries.svg";
    {
        std::vector<double> target(res.curves.t_nodes.size());
        for (std::size_t k = 0; k < target.size(); ++k)
            target[k] = discounted_target(sol.params, res.curves.t_nodes[k]);
        svg::PlotOptions opt;
        opt.title = "Borrowing region below B, saving region above L";
        opt.x_label = "t";
        opt.y_label = "wealth";
        svg::write_line_plot(res.svg_path, opt,
                             {{"B(t) borrow below", res.curves.t_nodes, res.curves.B, "", false},
                              {"L(t) save above", res.curves.t_nodes, res.curves.L, "", false},
                              {"discounted target", res.curves.t_nodes, target, "", true}});
    }
    logln(ctx, "boundaries: B(T) = " + fmt_g(res.curves.B.back()) +
                   ", L(T) = " + fmt_g(res.curves.L.back()));
    return res;
}

ValueResult cmd_value(const CommandContext& ctx, const std::vector<double>& xs,
                      const std::vector<double>& ts) {
    const auto dir = ensure_outdir(ctx);
    const DualSurface ds = obtain_dual(ctx);
    ValueResult res;
    res.csv_path = dir / "value_points.csv";
    CsvWriter csv(res.csv_path, "t,x,V,V_x,V_xx,pi,proportion,in_domain", ctx.cfg.config_hash());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double t : ts) {
        for (double x : xs) {
            ValuePoint pt;
            pt.t = t;
            pt.x = x;
            try {
                const ValueEval e = legendre_V(ds, x, t);
                pt.V = e.V;
                pt.V_x = e.V_x;
                pt.V_xx = e.V_xx;
                pt.pi = e.pi;
                pt.proportion = x != 0.0 ? e.pi / x : nan;
                pt.in_domain = true;
            } catch (const Error& err) {
                if (err.category() != ErrorCategory::validation || err.kind() != "OutOfRange") throw;
                pt.V = pt.V_x = pt.V_xx = pt.pi = pt.proportion = nan;
            }
            const double row[8] = {pt.t,  pt.x,  pt.V,          pt.V_x,
                                   pt.V_xx, pt.pi, pt.proportion, pt.in_domain ? 1.0 : 0.0};
            csv.row(row);
            res.points.push_back(pt);
        }
    }
    csv.close();
    logln(ctx, "value: " + std::to_string(res.points.size()) + " point(s)");
    return res;
}

PolicyResult cmd_policy(const CommandContext& ctx, std::vector<double> ts) {
    const auto dir = ensure_outdir(ctx);
    const DualSurface ds = obtain_dual(ctx);
    const MarketParams& p = ds.params;
    if (ts.empty()) ts = {0.0, p.T / 2.0, std::max(p.T - 0.1, 0.95 * p.T)};
    PolicyResult res;
    res.csv_path = dir / "policy_points.csv";
    CsvWriter csv(res.csv_path, "t,x,pi,proportion", ctx.cfg.config_hash());
    std::vector<svg::Series> pi_series, prop_series;
    for (double t : ts) {
        const double cap = discounted_target(p, t);
        svg::Series s_pi, s_prop;
        s_pi.label = "t = " + fmt_g(t, "%.4g");
        s_prop.label = s_pi.label;
        const int n = 250;
        const double x_lo = std::min(0.1, 0.5 * cap);
        for (int i = 0; i < n; ++i) {
            const double x = x_lo + (0.98 * cap - x_lo) * i / (n - 1);
            const double pi = feedback_policy(ds, x, t);
            const double row[4] = {t, x, pi, pi / x};
            csv.row(row);
            s_pi.x.push_back(x);
            s_pi.y.push_back(pi);
            s_prop.x.push_back(x);
            s_prop.y.push_back(pi / x);
        }
        pi_series.push_back(std::move(s_pi));
        prop_series.push_back(std::move(s_prop));
    }
    csv.close();
    svg::PlotOptions opt;
    opt.x_label = "x";
    opt.y_label = "pi(x, t)";
    opt.title = "Stock position vs wealth";
    const auto pi_svg = dir / "policy_pi.svg";
    svg::write_line_plot(pi_svg, opt, pi_series);
    opt.y_label = "pi(x, t) / x";
    opt.title = "Stock proportion vs wealth";
    const auto prop_svg = dir / "policy_proportion.svg";
    svg::write_line_plot(prop_svg, opt, prop_series);
    res.svg_paths = {pi_svg, prop_svg};
    logln(ctx, "policy: sections at " + std::to_string(ts.size()) + " time(s)");
    return res;
}

std::unique_ptr<Policy> make_policy(const std::string& spec, const MarketParams& p,
                                    const DualSurface* ds) {
    if (spec == "optimal") {
        if (!ds) throw Error::validation("ConfigInvalid", "optimal policy needs a solved surface");
        return std::make_unique<OptimalPolicy>(*ds);
    }
    if (spec == "all_in_stock") return make_all_in_stock_policy();
    if (spec == "zero") return make_zero_policy();
    if (spec == "classical_r1") return make_classical_no_gap_policy(p, p.r1);
    if (spec == "classical_r2") return make_classical_no_gap_policy(p, p.r2);
    if (spec.rfind("constant:", 0) == 0) {
        char* end = nullptr;
        const double amt = std::strtod(spec.c_str() + 9, &end);
        if (end == spec.c_str() + 9 || *end != '\0')
            throw Error::validation("ConfigInvalid", "bad constant policy amount in '" + spec + "'");
        return make_constant_dollar_policy(amt);
    }
    throw Error::validation("ConfigInvalid",
                            "unknown policy '" + spec +
                                "' (optimal, all_in_stock, zero, classical_r1, classical_r2, "
                                "constant:<amount>)");
}

SimulateResult cmd_simulate(const CommandContext& ctx, const std::string& policy_spec,
                            bool dump_paths) {
    const auto dir = ensure_outdir(ctx);
    const MarketParams& p = ctx.cfg.market;
    validate_params(p);
    std::unique_ptr<Policy> pol;
    DualSurface ds;
    if (policy_spec == "optimal") {
        ds = obtain_dual(ctx);
        pol = make_policy(policy_spec, p, &ds);
    } else {
        pol = make_policy(policy_spec, p, nullptr);
    }
    SimulateResult res;
    res.policy = pol->name();
    std::vector<double> terminal;
    res.stats = simulate_policy(*pol, p, ctx.cfg.sim, dump_paths ? &terminal : nullptr);

    res.stats_csv = dir / "simulate_stats.csv";
    {
        CsvWriter csv(res.stats_csv,
                      "policy,mean_sq_dev,std_err,n_paths,terminal_mean,terminal_var,terminal_min,"
                      "terminal_max,extrapolated_steps,max_abs_pi",
                      ctx.cfg.config_hash());
        std::string line = res.policy;
        const double vals[] = {res.stats.mean_sq_dev,   res.stats.std_err,
                               static_cast<double>(res.stats.n_paths),
                               res.stats.terminal_mean, res.stats.terminal_var,
                               res.stats.terminal_min,  res.stats.terminal_max,
                               static_cast<double>(res.stats.extrapolated_steps),
                               res.stats.max_abs_pi};
        for (double v : vals) line += "," + CsvWriter::fmt(v);
        csv.raw_row(line);
        csv.close();
    }
    if (dump_paths) {
        res.dump_csv = dir / "terminal_wealth.csv";
        CsvWriter csv(res.dump_csv, "path,x_T", ctx.cfg.config_hash());
        for (std::size_t i = 0; i < terminal.size(); ++i) {
            const double row[2] = {static_cast<double>(i), terminal[i]};
            csv.row(row);
        }
        csv.close();
    }
    logln(ctx, "simulate: " + res.policy + " estimate " + fmt_g(res.stats.mean_sq_dev) + " +- " +
                   fmt_g(res.stats.std_err));
    return res;
}

VerifyResult cmd_verify(const CommandContext& ctx) {
    const auto dir = ensure_outdir(ctx);
    const DualSurface ds = obtain_dual(ctx);
    const MarketParams& p = ds.params;
    const SimConfig& sim = ctx.cfg.sim;

    const double v_ref = legendre_V(ds, sim.x0, sim.t0).V;
    const OptimalPolicy optimal(ds);
    const auto all_in = make_all_in_stock_policy();
    const auto zero = make_zero_policy();
    const auto classical = make_classical_no_gap_policy(p, p.r1);

    VerifyResult res;
    res.report = verify_value(v_ref, optimal, {all_in.get(), zero.get(), classical.get()}, p, sim);
    const ValueBounds vb = value_bounds(p, ds.consts, sim.x0, sim.t0);
    res.v_lower = vb.lower;
    res.v_upper = vb.upper;

    res.csv_path = dir / "verify_report.csv";
    CsvWriter csv(res.csv_path, "policy,estimate,std_err,V_ref,z_score,pass", ctx.cfg.config_hash());
    for (const auto& r : res.report.rows) {
        std::string line = r.policy;
        for (double v : {r.estimate, r.std_err, r.v_ref, r.z_score}) line += "," + CsvWriter::fmt(v);
        line += r.pass ? ",1" : ",0";
        csv.raw_row(line);
    }
    csv.close();
    for (const auto& r : res.report.rows)
        logln(ctx, "verify: " + r.policy + " estimate " + fmt_g(r.estimate) + " +- " +
                       fmt_g(r.std_err) + " z " + fmt_g(r.z_score, "%.2f") +
                       (r.pass ? " PASS" : " FAIL"));
    logln(ctx, std::string("verify: overall ") + (res.report.pass ? "PASS" : "FAIL") +
                   (res.report.std_err_reliable ? "" : " (std_err unreliable: too few paths)"));
    return res;
}

FrontierResult cmd_frontier(const CommandContext& ctx, std::vector<double> d_values,
                            bool per_target_solves) {
    const auto dir = ensure_outdir(ctx);
    const MarketParams& p = ctx.cfg.market;
    const SimConfig& sim = ctx.cfg.sim;
    FrontierResult res;

    if (d_values.empty()) d_values = default_d_grid(p, sim.x0, sim.t0);

    if (!per_target_solves) {
        const DualSurface ds = obtain_dual(ctx);
        res.points = efficient_frontier(ds, sim.x0, sim.t0, d_values);
    } else {
        // independent solve per scaled target; sensitivity by central
        // difference in d
        const double h = 0.01;
        for (double dv : d_values) {
            auto value_at = [&](double target) {
                CommandContext sub = ctx;
                sub.cfg.market.d = target;  // grid defaults follow the new target
                const DualSurface sds = obtain_dual(sub);
                return legendre_V(sds, sim.x0, sim.t0).V;
            };
            const double V = value_at(dv);
            const double Vp = value_at(dv * (1.0 + h));
            const double Vm = value_at(dv * (1.0 - h));
            const double V_d = (Vp - Vm) / (2.0 * h * dv);
            res.points.push_back(frontier_point(V, V_d, dv));
        }
        std::sort(res.points.begin(), res.points.end(),
                  [](const FrontierPoint& a, const FrontierPoint& b) { return a.mean < b.mean; });
    }

    res.csv_path = dir / "frontier.csv";
    {
        CsvWriter csv(res.csv_path, "d,V,V_d,mean,std_dev", ctx.cfg.config_hash());
        for (const auto& pt : res.points) {
            const double row[5] = {pt.d, pt.V, pt.V_d, pt.mean, pt.std_dev};
            csv.row(row);
        }
        csv.close();
    }
    res.svg_path = dir / "frontier.svg";
    {
        svg::Series s;
        s.label = "efficient frontier";
        for (const auto& pt : res.points) {
            s.x.push_back(pt.std_dev);
            s.y.push_back(pt.mean);
        }
        svg::PlotOptions opt;
        opt.title = "Attainable mean vs standard deviation";
        opt.x_label = "std dev of X_T";
        opt.y_label = "mean of X_T";
        svg::write_line_plot(res.svg_path, opt, {s});
    }
    logln(ctx, "frontier: " + std::to_string(res.points.size()) + " point(s)");
    return res;
}

SweepResult cmd_sweep(const CommandContext& ctx, const std::string& family) {
    struct MemberDef {
        std::string label;
        double r1, r2, mu, sigma2;
    };
    std::vector<MemberDef> defs;
    if (family == "gap") {
        defs = {{"r0202_0800", 0.02, 0.08, 0.15, 0.10},
                {"r0300_0700", 0.03, 0.07, 0.15, 0.10},
                {"r0400_0600", 0.04, 0.06, 0.15, 0.10},
                {"r0500_0500", 0.05, 0.05, 0.15, 0.10}};
    } else if (family == "mu") {
        defs = {{"mu020", 0.02, 0.08, 0.20, 0.10},
                {"mu025", 0.02, 0.08, 0.25, 0.10},
                {"mu030", 0.02, 0.08, 0.30, 0.10},
                {"mu035", 0.02, 0.08, 0.35, 0.10}};
    } else if (family == "sigma") {
        defs = {{"s2_030", 0.02, 0.08, 0.15, 0.30},
                {"s2_025", 0.02, 0.08, 0.15, 0.25},
                {"s2_020", 0.02, 0.08, 0.15, 0.20},
                {"s2_015", 0.02, 0.08, 0.15, 0.15}};
    } else {
        throw Error::validation("ConfigInvalid", "unknown sweep family '" + family +
                                                     "' (gap, mu, sigma)");
    }

    const auto base_dir = ensure_outdir(ctx) / ("sweep_" + family);
    std::error_code ec;
    std::filesystem::create_directories(base_dir, ec);
    if (ec) throw Error::io("FileUnwritable", "cannot create " + base_dir.string());

    SweepResult res;
    std::vector<svg::Series> combined;
    for (const auto& def : defs) {
        CommandContext sub = ctx;
        sub.cfg.market.r1 = def.r1;
        sub.cfg.market.r2 = def.r2;
        sub.cfg.market.mu = def.mu;
        sub.cfg.market.sigma2 = def.sigma2;
        sub.cfg.output_dir = (base_dir / def.label).string();
        sub.cfg.cache_dir = resolve_cache_dir(ctx.cfg.cache_dir, ctx.cfg.output_dir).string();
        const BoundariesResult br = cmd_boundaries(sub);

        SweepMember m;
        m.label = def.label;
        m.market = sub.cfg.market;
        m.curves = br.curves;
        double band = 0.0;
        for (std::size_t k = 0; k < m.curves.t_nodes.size(); ++k)
            band += m.curves.L[k] - m.curves.B[k];
        m.mean_band = band / static_cast<double>(m.curves.t_nodes.size());

        svg::Series sb, sl;
        sb.label = def.label + " B";
        sb.x = m.curves.t_nodes;
        sb.y = m.curves.B;
        sl.label = def.label + " L";
        sl.x = m.curves.t_nodes;
        sl.y = m.curves.L;
        sl.dashed = true;
        sb.color = sl.color = "";
        combined.push_back(std::move(sb));
        combined.push_back(std::move(sl));
        res.members.push_back(std::move(m));
    }
    // shared palette per member: B solid, L dashed, same hue
    const char* hues[] = {"#1f6fb2", "#d9541e", "#2c8a4b", "#8446b4"};
    for (std::size_t i = 0; i < combined.size(); ++i) combined[i].color = hues[(i / 2) % 4];

    res.summary_csv = base_dir / "summary.csv";
    {
        CsvWriter csv(res.summary_csv, "label,r1,r2,mu,sigma2,B_T,L_T,mean_band", ctx.cfg.config_hash());
        for (const auto& m : res.members) {
            std::string line = m.label;
            for (double v : {m.market.r1, m.market.r2, m.market.mu, m.market.sigma2,
                             m.curves.B.back(), m.curves.L.back(), m.mean_band})
                line += "," + CsvWriter::fmt(v);
            csv.raw_row(line);
        }
        csv.close();
    }
    res.combined_svg = base_dir / "combined.svg";
    svg::PlotOptions opt;
    opt.title = "Boundary sweep: " + family;
    opt.x_label = "t";
    opt.y_label = "wealth";
    opt.height = 560;
    svg::write_line_plot(res.combined_svg, opt, combined);
    logln(ctx, "sweep " + family + ": " + std::to_string(res.members.size()) + " member(s)");
    return res;
}

}  // namespace gapfolio

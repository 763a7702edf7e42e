// p2pgrid: solve a scenario or compare two of them.
//
//   p2pgrid solve --scenario scenarios/ieee13_pre.json --out out
//   p2pgrid attack-compare --pre scenarios/ieee13_pre.json --post scenarios/ieee13_coord_attack.json
//
// Exit codes: 0 optimal, 1 bad input, 2 infeasible (or unbounded), 3 numerical failure.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include "p2pgrid/settlement.hpp"

using namespace p2pgrid;

namespace {

struct RunConfig {
    std::string scenario;
    std::string pre, post;
    std::string out;
    double tol = 1e-9;
    bool no_shedding = false;
    bool diag_loss = false;
    bool dump_problem = false;
};

std::string now_utc() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

int exit_code(conic::Status s) {
    switch (s) {
        case conic::Status::optimal: return 0;
        case conic::Status::infeasible:
        case conic::Status::unbounded: return 2;
        case conic::Status::numerical_failure: return 3;
    }
    return 3;
}

struct Run {
    Model model;
    conic::Solution sol;
    SettlementReport report;
    double seconds = 0.0;
};

Run run_scenario(const std::string& path, const RunConfig& cfg, const std::string& out_dir) {
    ScenarioSpec sc = load_scenario(path);
    if (cfg.no_shedding) sc.shedding = false;
    if (cfg.diag_loss) sc.loss = LossModel::diagonal;
    auto t0 = std::chrono::steady_clock::now();
    Run r;
    r.model = assemble(sc);
    for (const auto& w : r.model.scenario.agents.warnings) std::cerr << "warning: " << w << "\n";
    if (cfg.dump_problem) {
        std::filesystem::create_directories(out_dir);
        std::ofstream f(std::filesystem::path(out_dir) / "problem.txt");
        conic::dump(r.model.problem, f);
    }
    conic::SolverOptions so;
    so.feastol = so.abstol = so.reltol = cfg.tol;
    r.sol = conic::solve(r.model.problem, so);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.sol.status == conic::Status::optimal)
        r.report = compute_settlement(r.model, r.sol, extract_dlmp(r.sol, r.model));
    return r;
}

void print_summary(const Run& r) {
    const auto& s = r.sol;
    std::printf("scenario      %s\n", r.model.scenario.name.c_str());
    std::printf("status        %s%s (%d iterations, %.3f s)\n", conic::to_string(s.status),
                s.stats.reduced_accuracy ? ", reduced accuracy" : "", s.stats.iterations, r.seconds);
    if (s.status != conic::Status::optimal) {
        std::printf("residuals     primal %.3e dual %.3e gap %.3e\n", s.stats.primal_residual, s.stats.dual_residual,
                    s.stats.relative_gap);
        if (s.status == conic::Status::infeasible) std::printf("hint          %s\n", infeasibility_hint(r.model).c_str());
        return;
    }
    const auto& rep = r.report;
    std::printf("objective     %.6f $\n", s.objective);
    std::printf("  p2p cost    %.6f $\n", rep.p2p_cost);
    std::printf("  grid cost   %.6f $\n", rep.grid_cost);
    std::printf("DLMP range    [%.4f, %.4f] $/MWh\n", rep.dlmp.min_price(), rep.dlmp.max_price());
    std::printf("curtailment   %.6f MW\n", std::max(0.0, rep.curtailment_mw));
    std::printf("max SOC gap   %.3e (%zu above 1e-4)\n", rep.soc.max_gap, rep.soc.flagged.size());
}

std::string default_out() {
    const char* e = std::getenv("P2PGRID_OUT");
    return e && *e ? e : "out";
}

int cmd_solve(const RunConfig& cfg) {
    std::string name = std::filesystem::path(cfg.scenario).stem().string();
    std::string dir = (std::filesystem::path(cfg.out) / name).string();
    Run r = run_scenario(cfg.scenario, cfg, dir);
    print_summary(r);
    if (r.sol.status == conic::Status::optimal) {
        write_report(dir, r.report, r.model.scenario.network, now_utc());
        std::printf("report        %s\n", dir.c_str());
    }
    return exit_code(r.sol.status);
}

int cmd_compare(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    std::string a = fs::path(cfg.pre).stem().string(), b = fs::path(cfg.post).stem().string();
    fs::path dir = fs::path(cfg.out) / (a + "_vs_" + b);
    // independent solves; output writing stays on this thread
    auto fpre = std::async(std::launch::async, [&] { return run_scenario(cfg.pre, cfg, (dir / "pre").string()); });
    Run post = run_scenario(cfg.post, cfg, (dir / "post").string());
    Run pre = fpre.get();
    print_summary(pre);
    print_summary(post);
    int code = std::max(exit_code(pre.sol.status), exit_code(post.sol.status));
    if (code != 0) return code;
    if (pre.model.scenario.feeder_path != post.model.scenario.feeder_path)
        throw SettlementError("scenarios use different feeders: " + pre.model.scenario.feeder_path + " vs " +
                              post.model.scenario.feeder_path);
    CompareReport c = compare(pre.report, post.report, pre.model.scenario.network);
    std::string stamp = now_utc();
    write_report((dir / "pre").string(), pre.report, pre.model.scenario.network, stamp);
    write_report((dir / "post").string(), post.report, post.model.scenario.network, stamp);
    write_compare(dir.string(), c, stamp);
    std::printf("cost          %.6f -> %.6f $ (x%.4f)\n", c.pre_cost, c.post_cost, c.cost_ratio);
    std::printf("curtailment   %+.6f MW\n", c.delta_curtailment_mw);
    for (const auto& d : c.agents)
        std::printf("  %-8s %-8s %12.4f -> %12.4f  (%+.4f)\n", d.id.c_str(), d.kind.c_str(), d.pre, d.post, d.delta);
    std::printf("report        %s\n", dir.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"P2P energy market cleared jointly with an unbalanced distribution feeder"};
    app.require_subcommand(1);
    RunConfig cfg;
    cfg.out = default_out();

    auto add_common = [&](CLI::App* s) {
        s->add_option("--out", cfg.out, "output directory (default $P2PGRID_OUT or ./out)");
        s->add_option("--tol", cfg.tol, "solver tolerance")->check(CLI::PositiveNumber);
        s->add_flag("--no-shedding", cfg.no_shedding, "disable load shedding");
        s->add_flag("--diag-loss", cfg.diag_loss, "keep only self-impedance loss terms");
        s->add_flag("--dump-problem", cfg.dump_problem, "write the conic problem as problem.txt");
    };
    auto* solve = app.add_subcommand("solve", "solve one scenario and write its report");
    auto* sopt = solve->add_option("--scenario", cfg.scenario, "scenario JSON");
    solve->add_option("scenario_path", cfg.scenario, "scenario JSON")->excludes(sopt);
    add_common(solve);
    auto* cmp = app.add_subcommand("attack-compare", "solve two scenarios and report the differences");
    auto* popt = cmp->add_option("--pre", cfg.pre, "baseline scenario JSON");
    auto* qopt = cmp->add_option("--post", cfg.post, "attacked scenario JSON");
    cmp->add_option("pre_path", cfg.pre)->excludes(popt);
    cmp->add_option("post_path", cfg.post)->excludes(qopt);
    add_common(cmp);

    CLI11_PARSE(app, argc, argv);
    try {
        if (solve->parsed()) {
            if (cfg.scenario.empty()) throw CLI::RequiredError("--scenario");
            return cmd_solve(cfg);
        }
        if (cfg.pre.empty() || cfg.post.empty()) throw CLI::RequiredError("--pre and --post");
        return cmd_compare(cfg);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

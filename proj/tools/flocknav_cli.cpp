#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "flocknav/coordination.hpp"
#include "flocknav/errors.hpp"
#include "flocknav/harness.hpp"
#include "flocknav/leader.hpp"
#include "flocknav/scenario.hpp"

namespace {

std::optional<std::string> env_var(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

int cmd_run(const std::string& scenario_path, const std::string& mode, std::string out_prefix,
            std::optional<std::uint64_t> seed, std::optional<int> ticks, bool wall_clock,
            const std::string& followers) {
    flocknav::Scenario s = flocknav::load_scenario(scenario_path);
    if (const auto e = env_var("FLOCKNAV_SEED")) seed = std::stoull(*e);
    if (const auto e = env_var("FLOCKNAV_OUT")) out_prefix = *e;
    if (seed) s.seed = *seed;
    if (ticks) s.ticks = *ticks;
    if (!followers.empty()) s = flocknav::with_follower_controller(std::move(s), followers);

    const flocknav::EpisodeLog log =
        mode == "async" ? flocknav::run_async(s, wall_clock) : flocknav::run_lockstep(s);
    const flocknav::EpisodeSummary summary = flocknav::summarize(log, s.solver.time_budget_ms);
    if (!out_prefix.empty()) {
        flocknav::save_log(log, out_prefix + ".jsonl");
        flocknav::save_summary(summary, out_prefix + ".summary.json");
    }
    std::cout << flocknav::dump_summary(summary);
    return 0;
}

int cmd_compare(const std::string& a_path, const std::string& b_path, std::string out_path) {
    const flocknav::EpisodeLog a = flocknav::load_log(a_path);
    const flocknav::EpisodeLog b = flocknav::load_log(b_path);
    const flocknav::Comparison c = flocknav::compare_logs(a, b);
    const std::string text = flocknav::dump_comparison(c);
    if (const auto e = env_var("FLOCKNAV_OUT")) out_path = *e;
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw flocknav::Error("cannot write " + out_path);
        out << text;
    }
    std::cout << text;
    return 0;
}

int cmd_reference(const std::string& scenario_path, std::string out_path) {
    const flocknav::Scenario s = flocknav::load_scenario(scenario_path);
    const std::vector<flocknav::Vec2> course =
        flocknav::interpolate_waypoints(s.waypoints, s.reference.spacing);
    const flocknav::AgentSpec* leader = nullptr;
    for (const flocknav::AgentSpec& a : s.agents)
        if (a.leader) leader = &a;
    flocknav::AgentState x0;
    x0.pos = leader->pos;
    x0.heading = leader->heading;
    flocknav::SolverConfig cfg = flocknav::frozen_clock(s.solver);
    cfg.time_budget_ms.reset();
    cfg.max_inner_iters = std::max(cfg.max_inner_iters, 2000);
    const flocknav::ReferenceTrajectory ref =
        flocknav::optimize_reference(course, x0, s.input_bounds, s.dt, s.reference, cfg);

    nlohmann::json j;
    j["cost"] = ref.cost;
    j["status"] = flocknav::to_string(ref.status);
    nlohmann::json pts = nlohmann::json::array();
    for (const flocknav::Vec2& p : ref.points) pts.push_back(nlohmann::json::array({p.x, p.y}));
    j["points"] = std::move(pts);
    const std::string text = j.dump(2) + "\n";
    if (const auto e = env_var("FLOCKNAV_OUT")) out_path = *e;
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw flocknav::Error("cannot write " + out_path);
        out << text;
    }
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flocknav: decentralized flock navigation episodes"};
    app.require_subcommand(1);

    std::string scenario_path, out_prefix, mode = "lockstep", followers;
    std::optional<std::uint64_t> seed;
    std::optional<int> ticks;
    bool wall_clock = false;

    CLI::App* run = app.add_subcommand("run", "run one episode and write its log and summary");
    run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--mode", mode, "lockstep or async")
        ->check(CLI::IsMember({"lockstep", "async"}));
    run->add_option("--out", out_prefix, "output prefix (.jsonl and .summary.json are appended)");
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--ticks", ticks, "override the scenario tick count");
    run->add_option("--followers", followers, "override every follower's controller")
        ->check(CLI::IsMember({"nmpc", "vfh"}));
    run->add_flag("--wall-clock", wall_clock,
                  "async only: solve against the real clock and budget (non-deterministic)");

    std::string a_path, b_path, out_path;
    CLI::App* cmp = app.add_subcommand("compare", "compare follower cohesion between two logs");
    cmp->add_option("--a", a_path, "first log (.jsonl)")->required();
    cmp->add_option("--b", b_path, "second log (.jsonl)")->required();
    cmp->add_option("--out", out_path, "write the comparison JSON here");

    std::string ref_scenario, ref_out;
    CLI::App* ref = app.add_subcommand("reference", "compute the leader reference path");
    ref->add_option("--scenario", ref_scenario, "scenario JSON file")->required();
    ref->add_option("--out", ref_out, "write the reference JSON here");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed())
            return cmd_run(scenario_path, mode, out_prefix, seed, ticks, wall_clock, followers);
        if (cmp->parsed()) return cmd_compare(a_path, b_path, out_path);
        if (ref->parsed()) return cmd_reference(ref_scenario, ref_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "flocknav/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "flocknav/errors.hpp"

namespace flocknav {
namespace {

using nlohmann::json;

constexpr const char* kSchema = "flocknav-log-v1";

struct Fnv {
    std::uint64_t h = 14695981039346656037ULL;

    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    }
    void sep() {
        const unsigned char s = 0xFF;
        bytes(&s, 1);
    }
    void u64(std::uint64_t v) {
        bytes(&v, sizeof v);
        sep();
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        bytes(s.data(), s.size());
        sep();
    }
};

json dump_record(const TickRecord& r) {
    json j;
    j["tick"] = r.tick;
    j["agent"] = r.agent;
    j["controller"] = r.controller;
    j["status"] = r.status;
    j["pos"] = json::array({r.state.pos.x, r.state.pos.y});
    j["heading"] = r.state.heading;
    j["vel"] = json::array({r.state.vel.x, r.state.vel.y});
    j["v"] = r.input.v;
    j["omega"] = r.input.omega;
    j["solve_ms"] = r.solve_ms;
    j["obstacle_points"] = r.obstacle_points;
    j["hierarchy"] = r.hierarchy;
    j["staleness_ticks"] = r.staleness_ticks;
    j["min_separation_sq"] = r.min_separation_sq;
    j["min_clearance_m"] = r.min_clearance_m;
    j["centroid_deviation_m"] = r.centroid_deviation_m;
    return j;
}

Vec2 parse_vec2(const json& j, const char* where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ValidationError(std::string(where) + " must be a [x, y] number pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

TickRecord parse_record(const json& j, std::size_t line) {
    static const std::vector<std::string> keys = {
        "tick",        "agent",           "controller",        "status",
        "pos",         "heading",         "vel",               "v",
        "omega",       "solve_ms",        "obstacle_points",   "hierarchy",
        "staleness_ticks", "min_separation_sq", "min_clearance_m", "centroid_deviation_m"};
    const std::string where = "log line " + std::to_string(line);
    for (const std::string& k : keys)
        if (!j.contains(k)) throw ValidationError(where + ": missing key '" + k + "'");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
            throw ValidationError(where + ": unknown key '" + it.key() + "'");
    TickRecord r;
    r.tick = j.at("tick").get<std::int64_t>();
    r.agent = j.at("agent").get<int>();
    r.controller = j.at("controller").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.state.pos = parse_vec2(j.at("pos"), "pos");
    r.state.heading = j.at("heading").get<double>();
    r.state.vel = parse_vec2(j.at("vel"), "vel");
    r.input.v = j.at("v").get<double>();
    r.input.omega = j.at("omega").get<double>();
    r.solve_ms = j.at("solve_ms").get<double>();
    r.obstacle_points = j.at("obstacle_points").get<int>();
    r.hierarchy = j.at("hierarchy").get<int>();
    r.staleness_ticks = j.at("staleness_ticks").get<int>();
    r.min_separation_sq = j.at("min_separation_sq").get<double>();
    r.min_clearance_m = j.at("min_clearance_m").get<double>();
    r.centroid_deviation_m = j.at("centroid_deviation_m").get<double>();
    return r;
}

// Per-tick mean centroid deviation over follower records.
std::map<std::int64_t, double> follower_deviation_by_tick(const EpisodeLog& log) {
    std::map<std::int64_t, std::pair<double, int>> acc;
    for (const TickRecord& r : log.records) {
        if (r.controller == "reactive") continue;
        auto& [sum, n] = acc[r.tick];
        sum += r.centroid_deviation_m;
        ++n;
    }
    std::map<std::int64_t, double> out;
    for (const auto& [tick, sn] : acc) out[tick] = sn.first / sn.second;
    return out;
}

}  // namespace

std::uint64_t log_digest(const EpisodeLog& log) {
    Fnv f;
    f.str(log.scenario_name);
    f.str(log.mode);
    f.u64(log.seed);
    f.f64(log.dt);
    f.i64(static_cast<std::int64_t>(log.reference.size()));
    for (const Vec2& p : log.reference) {
        f.f64(p.x);
        f.f64(p.y);
    }
    for (const TickRecord& r : log.records) {
        f.i64(r.tick);
        f.i64(r.agent);
        f.str(r.controller);
        f.str(r.status);
        f.f64(r.state.pos.x);
        f.f64(r.state.pos.y);
        f.f64(r.state.heading);
        f.f64(r.state.vel.x);
        f.f64(r.state.vel.y);
        f.f64(r.input.v);
        f.f64(r.input.omega);
        // solve_ms deliberately skipped: wall-clock noise
        f.i64(r.obstacle_points);
        f.i64(r.hierarchy);
        f.i64(r.staleness_ticks);
        f.f64(r.min_separation_sq);
        f.f64(r.min_clearance_m);
        f.f64(r.centroid_deviation_m);
    }
    return f.h;
}

EpisodeSummary summarize(const EpisodeLog& log, std::optional<double> budget_ms) {
    EpisodeSummary s;
    s.scenario_name = log.scenario_name;
    s.mode = log.mode;
    s.seed = log.seed;
    s.budget_ms = budget_ms.value_or(0.0);

    std::map<std::int64_t, double> tick_max_ms;
    std::map<int, bool> agent_seen;
    double solve_sum = 0.0;
    int followers = 0;
    for (const TickRecord& r : log.records) {
        s.ticks = std::max(s.ticks, r.tick + 1);
        agent_seen[r.agent] = true;
        solve_sum += r.solve_ms;
        s.max_solve_ms = std::max(s.max_solve_ms, r.solve_ms);
        auto [it, fresh] = tick_max_ms.try_emplace(r.tick, r.solve_ms);
        if (!fresh) it->second = std::max(it->second, r.solve_ms);
        if (r.min_separation_sq >= 0.0 &&
            (s.min_separation_sq < 0.0 || r.min_separation_sq < s.min_separation_sq))
            s.min_separation_sq = r.min_separation_sq;
        if (r.min_clearance_m >= 0.0 &&
            (s.min_clearance_m < 0.0 || r.min_clearance_m < s.min_clearance_m))
            s.min_clearance_m = r.min_clearance_m;
        if (r.controller != "reactive") {
            ++followers;
            s.mean_follower_centroid_deviation_m += r.centroid_deviation_m;
            s.max_follower_centroid_deviation_m =
                std::max(s.max_follower_centroid_deviation_m, r.centroid_deviation_m);
        }
        ++s.status_counts[r.status];
    }
    s.agents = static_cast<int>(agent_seen.size());
    if (!log.records.empty()) s.mean_solve_ms = solve_sum / static_cast<double>(log.records.size());
    if (followers > 0) s.mean_follower_centroid_deviation_m /= followers;
    if (budget_ms && !tick_max_ms.empty()) {
        int under = 0;
        for (const auto& [tick, ms] : tick_max_ms)
            if (ms <= *budget_ms) ++under;
        s.fraction_under_budget = static_cast<double>(under) / static_cast<double>(tick_max_ms.size());
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(log_digest(log)));
    s.digest = hex;
    return s;
}

void save_log(const EpisodeLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write log file: " + path);
    json header;
    header["schema"] = kSchema;
    header["scenario"] = log.scenario_name;
    header["mode"] = log.mode;
    header["seed"] = log.seed;
    header["dt"] = log.dt;
    json ref = json::array();
    for (const Vec2& p : log.reference) ref.push_back(json::array({p.x, p.y}));
    header["reference"] = std::move(ref);
    out << header.dump() << "\n";
    for (const TickRecord& r : log.records) out << dump_record(r).dump() << "\n";
}

EpisodeLog load_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open log file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw SchemaMismatch("log file is empty: " + path);
    json header;
    try {
        header = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("log header is not valid JSON: ") + e.what());
    }
    if (!header.is_object() || header.value("schema", "") != kSchema)
        throw SchemaMismatch("unrecognized log schema in " + path);
    EpisodeLog log;
    log.scenario_name = header.value("scenario", "");
    log.mode = header.value("mode", "");
    log.seed = header.value("seed", std::uint64_t{0});
    log.dt = header.value("dt", 0.1);
    if (header.contains("reference"))
        for (const json& p : header.at("reference"))
            log.reference.push_back(parse_vec2(p, "reference point"));
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("log line " + std::to_string(n) + " is not valid JSON: " + e.what());
        }
        log.records.push_back(parse_record(j, n));
    }
    return log;
}

std::string dump_summary(const EpisodeSummary& s) {
    json j;
    j["scenario"] = s.scenario_name;
    j["mode"] = s.mode;
    j["seed"] = s.seed;
    j["ticks"] = s.ticks;
    j["agents"] = s.agents;
    j["mean_solve_ms"] = s.mean_solve_ms;
    j["max_solve_ms"] = s.max_solve_ms;
    j["budget_ms"] = s.budget_ms;
    j["fraction_under_budget"] = s.fraction_under_budget;
    j["min_separation_sq"] = s.min_separation_sq;
    j["min_clearance_m"] = s.min_clearance_m;
    j["mean_follower_centroid_deviation_m"] = s.mean_follower_centroid_deviation_m;
    j["max_follower_centroid_deviation_m"] = s.max_follower_centroid_deviation_m;
    j["status_counts"] = s.status_counts;
    j["digest"] = s.digest;
    return j.dump(2) + "\n";
}

void save_summary(const EpisodeSummary& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write summary file: " + path);
    out << dump_summary(s);
}

Comparison compare_logs(const EpisodeLog& a, const EpisodeLog& b) {
    const auto dev_a = follower_deviation_by_tick(a);
    const auto dev_b = follower_deviation_by_tick(b);
    if (dev_a.empty() || dev_b.empty())
        throw SchemaMismatch("compare requires follower records in both logs");
    const std::int64_t lo = std::max(dev_a.begin()->first, dev_b.begin()->first);
    const std::int64_t hi = std::min(dev_a.rbegin()->first, dev_b.rbegin()->first);
    if (lo > hi) throw SchemaMismatch("logs cover disjoint tick ranges");
    Comparison c;
    for (std::int64_t t = lo; t <= hi; ++t) {
        const auto ia = dev_a.find(t);
        const auto ib = dev_b.find(t);
        if (ia == dev_a.end() || ib == dev_b.end())
            throw SchemaMismatch("tick " + std::to_string(t) + " missing from one log");
        c.deviation_a.push_back(ia->second);
        c.deviation_b.push_back(ib->second);
        c.mean_a += ia->second;
        c.mean_b += ib->second;
    }
    const auto n = static_cast<double>(c.deviation_a.size());
    c.mean_a /= n;
    c.mean_b /= n;
    c.ratio = c.mean_b > 0.0 ? c.mean_a / c.mean_b : (c.mean_a == 0.0 ? 1.0 : -1.0);
    return c;
}

std::string dump_comparison(const Comparison& c) {
    json j;
    j["mean_a"] = c.mean_a;
    j["mean_b"] = c.mean_b;
    j["ratio_a_over_b"] = c.ratio;
    j["per_tick_a"] = c.deviation_a;
    j["per_tick_b"] = c.deviation_b;
    return j.dump(2) + "\n";
}

Scenario with_follower_controller(Scenario s, const std::string& controller) {
    if (controller != "nmpc" && controller != "vfh")
        throw ValidationError("follower controller must be nmpc or vfh");
    for (AgentSpec& a : s.agents)
        if (!a.leader) a.controller = controller;
    return s;
}

}  // namespace flocknav

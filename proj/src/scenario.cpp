#include "flocknav/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "flocknav/errors.hpp"

namespace flocknav {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ValidationError("unknown key '" + it.key() + "' in " + where);
        }
    }
}

double get_num(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number()) throw ValidationError(std::string("key '") + key + "' must be a number");
    return v.get<double>();
}

int get_int(const json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer()) throw ValidationError(std::string("key '") + key + "' must be an integer");
    return v.get<int>();
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_unsigned() && !v.is_number_integer())
        throw ValidationError(std::string("key '") + key + "' must be a non-negative integer");
    if (v.is_number_integer() && v.get<std::int64_t>() < 0)
        throw ValidationError(std::string("key '") + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

bool get_bool(const json& j, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean()) throw ValidationError(std::string("key '") + key + "' must be a boolean");
    return v.get<bool>();
}

std::string get_str(const json& j, const char* key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_string()) throw ValidationError(std::string("key '") + key + "' must be a string");
    return v.get<std::string>();
}

Vec2 parse_vec2(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ValidationError(where + " must be a [x, y] number pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

json dump_vec2(const Vec2& v) { return json::array({v.x, v.y}); }

Obstacle parse_obstacle(const json& j, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be an object");
    const std::string type = get_str(j, "type", "");
    if (type == "circle") {
        reject_unknown(j, {"type", "center", "radius"}, where);
        CircleObstacle c;
        c.center = parse_vec2(j.at("center"), where + ".center");
        c.radius = get_num(j, "radius", -1.0);
        if (c.radius <= 0.0) throw ValidationError(where + ".radius must be > 0");
        return c;
    }
    if (type == "segment") {
        reject_unknown(j, {"type", "a", "b"}, where);
        SegmentObstacle s;
        s.a = parse_vec2(j.at("a"), where + ".a");
        s.b = parse_vec2(j.at("b"), where + ".b");
        return s;
    }
    if (type == "rect") {
        reject_unknown(j, {"type", "lo", "hi"}, where);
        RectObstacle r;
        r.lo = parse_vec2(j.at("lo"), where + ".lo");
        r.hi = parse_vec2(j.at("hi"), where + ".hi");
        if (r.hi.x <= r.lo.x || r.hi.y <= r.lo.y)
            throw ValidationError(where + " must satisfy lo < hi componentwise");
        return r;
    }
    throw ValidationError(where + ".type must be one of circle|segment|rect");
}

json dump_obstacle(const Obstacle& o) {
    json j;
    if (const auto* c = std::get_if<CircleObstacle>(&o)) {
        j["type"] = "circle";
        j["center"] = dump_vec2(c->center);
        j["radius"] = c->radius;
    } else if (const auto* s = std::get_if<SegmentObstacle>(&o)) {
        j["type"] = "segment";
        j["a"] = dump_vec2(s->a);
        j["b"] = dump_vec2(s->b);
    } else {
        const auto& r = std::get<RectObstacle>(o);
        j["type"] = "rect";
        j["lo"] = dump_vec2(r.lo);
        j["hi"] = dump_vec2(r.hi);
    }
    return j;
}

AgentSpec parse_agent(const json& j, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be an object");
    reject_unknown(j, {"id", "leader", "controller", "pos", "heading"}, where);
    AgentSpec a;
    a.id = get_int(j, "id", -1);
    if (a.id < 0) throw ValidationError(where + ".id must be a non-negative integer");
    a.leader = get_bool(j, "leader", false);
    a.controller = get_str(j, "controller", a.leader ? "reactive" : "nmpc");
    if (a.controller != "reactive" && a.controller != "nmpc" && a.controller != "vfh")
        throw ValidationError(where + ".controller must be one of reactive|nmpc|vfh");
    if (a.leader && a.controller != "reactive")
        throw ValidationError(where + ": leader agents use the reactive controller");
    if (!a.leader && a.controller == "reactive")
        throw ValidationError(where + ": reactive controller is reserved for the leader");
    if (!j.contains("pos")) throw ValidationError(where + " requires pos");
    a.pos = parse_vec2(j.at("pos"), where + ".pos");
    a.heading = get_num(j, "heading", 0.0);
    return a;
}

json dump_agent(const AgentSpec& a) {
    json j;
    j["id"] = a.id;
    j["leader"] = a.leader;
    j["controller"] = a.controller;
    j["pos"] = dump_vec2(a.pos);
    j["heading"] = a.heading;
    return j;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("scenario root must be an object");
    reject_unknown(j,
                   {"name", "dt", "ticks", "seed", "workspace", "input_bounds", "sensor", "flock",
                    "solver", "leader", "vfh", "async", "waypoints", "obstacles", "agents"},
                   "scenario");

    Scenario s;
    s.name = get_str(j, "name", s.name);
    s.dt = get_num(j, "dt", s.dt);
    s.ticks = get_int(j, "ticks", s.ticks);
    s.seed = get_u64(j, "seed", s.seed);
    if (s.dt <= 0.0) throw ValidationError("dt must be > 0");
    if (s.ticks <= 0) throw ValidationError("ticks must be > 0");

    if (j.contains("workspace")) {
        const json& w = j.at("workspace");
        reject_unknown(w, {"x_min", "x_max", "y_min", "y_max"}, "workspace");
        s.workspace.x_min = get_num(w, "x_min", s.workspace.x_min);
        s.workspace.x_max = get_num(w, "x_max", s.workspace.x_max);
        s.workspace.y_min = get_num(w, "y_min", s.workspace.y_min);
        s.workspace.y_max = get_num(w, "y_max", s.workspace.y_max);
        if (s.workspace.x_min >= s.workspace.x_max || s.workspace.y_min >= s.workspace.y_max)
            throw ValidationError("workspace must satisfy min < max per axis");
    }
    if (j.contains("input_bounds")) {
        const json& b = j.at("input_bounds");
        reject_unknown(b, {"v_min", "v_max", "omega_min", "omega_max"}, "input_bounds");
        s.input_bounds.v_min = get_num(b, "v_min", s.input_bounds.v_min);
        s.input_bounds.v_max = get_num(b, "v_max", s.input_bounds.v_max);
        s.input_bounds.omega_min = get_num(b, "omega_min", s.input_bounds.omega_min);
        s.input_bounds.omega_max = get_num(b, "omega_max", s.input_bounds.omega_max);
        if (s.input_bounds.v_min >= s.input_bounds.v_max ||
            s.input_bounds.omega_min >= s.input_bounds.omega_max)
            throw ValidationError("input_bounds must satisfy min < max per channel");
    }
    if (j.contains("sensor")) {
        const json& sj = j.at("sensor");
        reject_unknown(sj, {"beams", "range_max"}, "sensor");
        s.sensor.beams = get_int(sj, "beams", s.sensor.beams);
        s.sensor.range_max = get_num(sj, "range_max", s.sensor.range_max);
        if (s.sensor.beams <= 0) throw ValidationError("sensor.beams must be > 0");
        if (s.sensor.range_max <= 0.0) throw ValidationError("sensor.range_max must be > 0");
    }
    if (j.contains("flock")) {
        const json& f = j.at("flock");
        reject_unknown(f,
                       {"horizon", "sep_horizon", "gamma", "rho_sep", "beta", "q_st", "c", "pi_bar",
                        "d_sep_sq", "sep_margin", "r_s", "r_b", "r_diag", "detection_range",
                        "downsample_factor"},
                       "flock");
        FlockParams& p = s.flock;
        p.horizon = get_int(f, "horizon", p.horizon);
        p.sep_horizon = get_int(f, "sep_horizon", p.sep_horizon);
        p.gamma = get_num(f, "gamma", p.gamma);
        p.rho_sep = get_num(f, "rho_sep", p.rho_sep);
        p.beta = get_num(f, "beta", p.beta);
        p.q_st = get_num(f, "q_st", p.q_st);
        p.c = get_num(f, "c", p.c);
        p.pi_bar = get_int(f, "pi_bar", p.pi_bar);
        p.d_sep_sq = get_num(f, "d_sep_sq", p.d_sep_sq);
        p.sep_margin = get_num(f, "sep_margin", p.sep_margin);
        p.r_s = get_num(f, "r_s", p.r_s);
        p.r_b = get_num(f, "r_b", p.r_b);
        if (f.contains("r_diag")) {
            const Vec2 r = parse_vec2(f.at("r_diag"), "flock.r_diag");
            p.r_diag[0] = r.x;
            p.r_diag[1] = r.y;
        }
        p.detection_range = get_num(f, "detection_range", p.detection_range);
        p.downsample_factor = get_int(f, "downsample_factor", p.downsample_factor);
        if (p.horizon <= 0) throw ValidationError("flock.horizon must be > 0");
        if (p.sep_horizon < 0 || p.sep_horizon > p.horizon)
            throw ValidationError("flock.sep_horizon must lie in [0, horizon]");
        if (p.gamma <= 0.0 || p.gamma > 1.0) throw ValidationError("flock.gamma must lie in (0, 1]");
        if (p.pi_bar < 1) throw ValidationError("flock.pi_bar must be >= 1");
        if (p.d_sep_sq <= 0.0) throw ValidationError("flock.d_sep_sq must be > 0");
        if (p.sep_margin < 0.0) throw ValidationError("flock.sep_margin must be >= 0");
        if (p.downsample_factor <= 0) throw ValidationError("flock.downsample_factor must be > 0");
    }
    if (j.contains("solver")) {
        const json& c = j.at("solver");
        reject_unknown(c,
                       {"epsilon", "delta", "lambda0", "rho", "max_inner_iters", "max_outer_iters",
                        "lbfgs_memory", "time_budget_ms"},
                       "solver");
        SolverConfig& cfg = s.solver;
        cfg.epsilon = get_num(c, "epsilon", cfg.epsilon);
        cfg.delta = get_num(c, "delta", cfg.delta);
        cfg.lambda0 = get_num(c, "lambda0", cfg.lambda0);
        cfg.rho = get_num(c, "rho", cfg.rho);
        cfg.max_inner_iters = get_int(c, "max_inner_iters", cfg.max_inner_iters);
        cfg.max_outer_iters = get_int(c, "max_outer_iters", cfg.max_outer_iters);
        cfg.lbfgs_memory = get_int(c, "lbfgs_memory", cfg.lbfgs_memory);
        if (c.contains("time_budget_ms")) {
            const double b = get_num(c, "time_budget_ms", 0.0);
            cfg.time_budget_ms = b;
        }
        if (cfg.epsilon <= 0.0 || cfg.delta <= 0.0)
            throw ValidationError("solver tolerances must be > 0");
        if (cfg.rho <= 1.0) throw ValidationError("solver.rho must be > 1");
        if (cfg.max_inner_iters <= 0 || cfg.max_outer_iters <= 0)
            throw ValidationError("solver iteration limits must be > 0");
        if (cfg.lbfgs_memory < 0) throw ValidationError("solver.lbfgs_memory must be >= 0");
    }
    if (j.contains("leader")) {
        const json& l = j.at("leader");
        reject_unknown(l,
                       {"k_v", "k_psi", "spacing", "q_p", "q_u", "q_t", "hold_when_lagging",
                        "lag_threshold", "ramp_ticks"},
                       "leader");
        s.gains.k_v = get_num(l, "k_v", s.gains.k_v);
        s.gains.k_psi = get_num(l, "k_psi", s.gains.k_psi);
        s.reference.spacing = get_num(l, "spacing", s.reference.spacing);
        s.reference.q_p = get_num(l, "q_p", s.reference.q_p);
        s.reference.q_u = get_num(l, "q_u", s.reference.q_u);
        s.reference.q_t = get_num(l, "q_t", s.reference.q_t);
        s.reference.hold_when_lagging = get_bool(l, "hold_when_lagging", s.reference.hold_when_lagging);
        s.reference.lag_threshold = get_num(l, "lag_threshold", s.reference.lag_threshold);
        s.reference.ramp_ticks = static_cast<int>(get_num(l, "ramp_ticks", s.reference.ramp_ticks));
        if (s.reference.spacing <= 0.0) throw ValidationError("leader.spacing must be > 0");
        if (s.reference.ramp_ticks < 0) throw ValidationError("leader.ramp_ticks must be >= 0");
    }
    if (j.contains("vfh")) {
        const json& v = j.at("vfh");
        reject_unknown(v, {"sectors", "threshold", "carrot_distance"}, "vfh");
        s.vfh.sectors = get_int(v, "sectors", s.vfh.sectors);
        s.vfh.threshold = get_num(v, "threshold", s.vfh.threshold);
        s.vfh.carrot_distance = get_num(v, "carrot_distance", s.vfh.carrot_distance);
        if (s.vfh.sectors <= 0) throw ValidationError("vfh.sectors must be > 0");
        if (s.vfh.carrot_distance <= 0.0) throw ValidationError("vfh.carrot_distance must be > 0");
    }
    if (j.contains("async")) {
        const json& a = j.at("async");
        reject_unknown(a, {"latency_min_ms", "latency_max_ms"}, "async");
        s.async_mode.latency_min_ms = get_num(a, "latency_min_ms", s.async_mode.latency_min_ms);
        s.async_mode.latency_max_ms = get_num(a, "latency_max_ms", s.async_mode.latency_max_ms);
        if (s.async_mode.latency_min_ms < 0.0 ||
            s.async_mode.latency_max_ms < s.async_mode.latency_min_ms)
            throw ValidationError("async latency interval must satisfy 0 <= min <= max");
    }
    if (j.contains("waypoints")) {
        const json& w = j.at("waypoints");
        if (!w.is_array()) throw ValidationError("waypoints must be an array");
        for (std::size_t i = 0; i < w.size(); ++i)
            s.waypoints.push_back(parse_vec2(w[i], "waypoints[" + std::to_string(i) + "]"));
    }
    if (j.contains("obstacles")) {
        const json& o = j.at("obstacles");
        if (!o.is_array()) throw ValidationError("obstacles must be an array");
        for (std::size_t i = 0; i < o.size(); ++i)
            s.obstacles.push_back(parse_obstacle(o[i], "obstacles[" + std::to_string(i) + "]"));
    }
    if (!j.contains("agents")) throw ValidationError("scenario requires agents");
    {
        const json& a = j.at("agents");
        if (!a.is_array() || a.empty()) throw ValidationError("agents must be a non-empty array");
        std::set<int> ids;
        int leaders = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            AgentSpec spec = parse_agent(a[i], "agents[" + std::to_string(i) + "]");
            if (!ids.insert(spec.id).second)
                throw ValidationError("duplicate agent id " + std::to_string(spec.id));
            if (spec.leader) ++leaders;
            s.agents.push_back(std::move(spec));
        }
        if (leaders != 1) throw ValidationError("scenario requires exactly one leader agent");
    }
    if (s.waypoints.empty()) throw ValidationError("scenario requires waypoints for the leader");
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string dump_scenario(const Scenario& s) {
    json j;
    j["name"] = s.name;
    j["dt"] = s.dt;
    j["ticks"] = s.ticks;
    j["seed"] = s.seed;
    j["workspace"] = {{"x_min", s.workspace.x_min},
                      {"x_max", s.workspace.x_max},
                      {"y_min", s.workspace.y_min},
                      {"y_max", s.workspace.y_max}};
    j["input_bounds"] = {{"v_min", s.input_bounds.v_min},
                         {"v_max", s.input_bounds.v_max},
                         {"omega_min", s.input_bounds.omega_min},
                         {"omega_max", s.input_bounds.omega_max}};
    j["sensor"] = {{"beams", s.sensor.beams}, {"range_max", s.sensor.range_max}};
    j["flock"] = {{"horizon", s.flock.horizon},
                  {"sep_horizon", s.flock.sep_horizon},
                  {"gamma", s.flock.gamma},
                  {"rho_sep", s.flock.rho_sep},
                  {"beta", s.flock.beta},
                  {"q_st", s.flock.q_st},
                  {"c", s.flock.c},
                  {"pi_bar", s.flock.pi_bar},
                  {"d_sep_sq", s.flock.d_sep_sq},
                  {"sep_margin", s.flock.sep_margin},
                  {"r_s", s.flock.r_s},
                  {"r_b", s.flock.r_b},
                  {"r_diag", json::array({s.flock.r_diag[0], s.flock.r_diag[1]})},
                  {"detection_range", s.flock.detection_range},
                  {"downsample_factor", s.flock.downsample_factor}};
    json solver = {{"epsilon", s.solver.epsilon},
                   {"delta", s.solver.delta},
                   {"lambda0", s.solver.lambda0},
                   {"rho", s.solver.rho},
                   {"max_inner_iters", s.solver.max_inner_iters},
                   {"max_outer_iters", s.solver.max_outer_iters},
                   {"lbfgs_memory", s.solver.lbfgs_memory}};
    if (s.solver.time_budget_ms) solver["time_budget_ms"] = *s.solver.time_budget_ms;
    j["solver"] = std::move(solver);
    j["leader"] = {{"k_v", s.gains.k_v},
                   {"k_psi", s.gains.k_psi},
                   {"spacing", s.reference.spacing},
                   {"q_p", s.reference.q_p},
                   {"q_u", s.reference.q_u},
                   {"q_t", s.reference.q_t},
                   {"hold_when_lagging", s.reference.hold_when_lagging},
                   {"lag_threshold", s.reference.lag_threshold},
                   {"ramp_ticks", s.reference.ramp_ticks}};
    j["vfh"] = {{"sectors", s.vfh.sectors},
                {"threshold", s.vfh.threshold},
                {"carrot_distance", s.vfh.carrot_distance}};
    j["async"] = {{"latency_min_ms", s.async_mode.latency_min_ms},
                  {"latency_max_ms", s.async_mode.latency_max_ms}};
    json wps = json::array();
    for (const Vec2& w : s.waypoints) wps.push_back(dump_vec2(w));
    j["waypoints"] = std::move(wps);
    json obs = json::array();
    for (const Obstacle& o : s.obstacles) obs.push_back(dump_obstacle(o));
    j["obstacles"] = std::move(obs);
    json agents = json::array();
    for (const AgentSpec& a : s.agents) agents.push_back(dump_agent(a));
    j["agents"] = std::move(agents);
    return j.dump(2) + "\n";
}

void save_scenario(const Scenario& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write scenario file: " + path);
    out << dump_scenario(s);
}

bool scenario_equal(const Scenario& a, const Scenario& b) {
    return dump_scenario(a) == dump_scenario(b);
}

}  // namespace flocknav

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flocknav/dynamics.hpp"
#include "flocknav/flocking.hpp"
#include "flocknav/leader.hpp"
#include "flocknav/solver.hpp"
#include "flocknav/vfh.hpp"
#include "flocknav/world.hpp"

namespace flocknav {

struct AgentSpec {
    int id = 0;
    bool leader = false;
    std::string controller;  // "reactive" (leader), "nmpc" or "vfh" (followers)
    Vec2 pos{0.0, 0.0};
    double heading = 0.0;
};

struct AsyncParams {
    double latency_min_ms = 2.0;   // simulated solve-to-apply delay range
    double latency_max_ms = 30.0;
};

// Full episode description. Omitted file keys fall back to these defaults;
// unknown keys are rejected.
struct Scenario {
    std::string name = "unnamed";
    double dt = 0.1;
    int ticks = 600;
    std::uint64_t seed = 1;
    StateSet workspace;
    InputSet input_bounds;
    SensorSpec sensor;
    FlockParams flock;
    SolverConfig solver;  // numeric fields only; hooks stay default
    LeaderGains gains;
    ReferenceParams reference;
    VfhParams vfh;
    AsyncParams async_mode;
    std::vector<Vec2> waypoints;
    std::vector<Obstacle> obstacles;
    std::vector<AgentSpec> agents;
};

// Parses and validates a scenario document (see docs/scenario_format.md).
// Raises ParseError on malformed input and ValidationError on contract
// violations (unknown keys, missing leader, bad ranges).
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

// Serializes with sorted keys and round-trip-exact numbers: dump -> parse
// reproduces the scenario, and parse -> dump -> parse is value-identical.
std::string dump_scenario(const Scenario& s);
void save_scenario(const Scenario& s, const std::string& path);

bool scenario_equal(const Scenario& a, const Scenario& b);

}  // namespace flocknav

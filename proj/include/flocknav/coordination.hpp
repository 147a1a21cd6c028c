#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flocknav/dynamics.hpp"
#include "flocknav/flocking.hpp"
#include "flocknav/scenario.hpp"

namespace flocknav {

// Broadcast payload: the sender's latest predicted outputs.
struct PredictionMessage {
    int sender = -1;
    int hierarchy = 0;
    std::vector<OutputSample> outputs;
    std::int64_t stamp = 0;  // tick at publish time
};

// Keeps the latest message per sender.
class Mailbox {
  public:
    void deliver(PredictionMessage msg);
    const PredictionMessage* latest(int sender) const;

  private:
    std::map<int, PredictionMessage> latest_;
};

// Ids of the other agents within detection range of agent `self`.
std::vector<int> neighbors_in_range(int self, std::span<const int> ids,
                                    std::span<const Vec2> positions, double range);

// One agent-tick of the episode log, captured before the world advances.
struct TickRecord {
    std::int64_t tick = 0;
    int agent = -1;
    std::string controller;  // reactive | nmpc | vfh
    std::string status;      // converged | max_iters | budget_exhausted | reactive | vfh |
                             // isolated | solver_failure | idle (async, before the first apply)
    AgentState state;        // pre-advance
    ControlInput input;      // applied over this tick
    double solve_ms = 0.0;   // wall-clock; excluded from log digests
    int obstacle_points = 0;
    int hierarchy = 0;
    int staleness_ticks = 0;          // age of the oldest snapshot used by the last solve
    double min_separation_sq = -1.0;  // squared distance to the nearest other agent; -1 if alone
    double min_clearance_m = -1.0;    // distance to the nearest obstacle boundary; -1 if none
    double centroid_deviation_m = 0.0;  // distance to the all-agent centroid
};

struct EpisodeLog {
    std::string scenario_name;
    std::string mode;  // lockstep | async
    std::uint64_t seed = 0;
    double dt = 0.1;
    std::vector<Vec2> reference;      // leader reference path actually tracked
    std::vector<TickRecord> records;  // tick-major, agent id ascending within a tick
};

// Synchronous engine: every tick all agents publish their latest predictions,
// then solve against the same mailbox snapshot, then the world advances once.
// Two runs of the same scenario produce identical logs (solve_ms aside).
EpisodeLog run_lockstep(const Scenario& s);

// Event-driven engine over simulated time: agents wake on their own staggered
// cycles; nmpc solutions take effect after a seeded per-solve latency while the
// previous input keeps executing. Deterministic for a fixed seed. With
// wall_clock set, solves run against the real clock and the scenario budget,
// trading determinism for genuine budget behavior.
EpisodeLog run_async(const Scenario& s, bool wall_clock = false);

}  // namespace flocknav

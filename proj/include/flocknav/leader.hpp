#pragma once

#include <span>
#include <vector>

#include "flocknav/dynamics.hpp"
#include "flocknav/flocking.hpp"
#include "flocknav/solver.hpp"

namespace flocknav {

struct LeaderGains {
    double k_v = 0.6;    // speed gain on squared distance
    double k_psi = 2.0;  // turn gain on wrapped heading error
};

struct ReferenceParams {
    double spacing = 0.1;  // metres between interpolated reference points
    double q_p = 10.0;     // position tracking weight
    double q_u = 0.1;      // input effort weight
    double q_t = 100.0;    // terminal position weight
    bool hold_when_lagging = false;  // pause the target index when far behind
    double lag_threshold = 1.0;      // metres
    int ramp_ticks = 0;  // launch ramp: point gaps grow linearly to full spacing
};

// Evenly spaced points along the waypoint polyline. Every waypoint is kept;
// a segment remainder shorter than the spacing stays at that segment's end.
std::vector<Vec2> interpolate_waypoints(std::span<const Vec2> waypoints, double spacing);

// Points along the waypoint polyline whose gaps ramp linearly from near zero
// to the full spacing over ramp_ticks points, then stay even. A consumer that
// advances one point per tick therefore accelerates through the launch instead
// of jumping to cruise pace. ramp_ticks <= 0 matches interpolate_waypoints.
std::vector<Vec2> ramped_course(std::span<const Vec2> waypoints, double spacing, int ramp_ticks);

struct ReferenceTrajectory {
    std::vector<Vec2> points;          // optimized positions, ref size incl. start
    std::vector<ControlInput> inputs;  // inputs that produce them
    double cost = 0.0;
    SolveStatus status = SolveStatus::MaxIters;
};

// Smooths the interpolated points into a dynamically feasible trajectory:
// discounted-free tracking of each point plus input effort and a terminal
// weight, subject to the unicycle dynamics and input box.
ReferenceTrajectory optimize_reference(std::span<const Vec2> ref_points, const AgentState& x0,
                                       const InputSet& input_set, double dt,
                                       const ReferenceParams& params, const SolverConfig& config);

// Reactive tracking law: speed from squared distance, turn rate from the
// shortest signed bearing error; both projected into the input set.
ControlInput reactive_control(const Vec2& target, const AgentState& x, const LeaderGains& gains,
                              const InputSet& input_set);

// Constant-input rollout packaged as broadcast outputs.
std::vector<OutputSample> leader_predict(const AgentState& x, const ControlInput& u, int horizon,
                                         double dt);

// Closed-loop rollout of the tracking law along the upcoming reference points,
// one carrot advance per step. This is the course the leader will actually fly,
// so followers coordinating against it see turns before they happen instead of
// extrapolating a momentary turn rate into a circle.
std::vector<OutputSample> leader_plan(const AgentState& x, std::span<const Vec2> reference,
                                      std::size_t target_idx, const LeaderGains& gains,
                                      const InputSet& input_set, int horizon, double dt);

}  // namespace flocknav

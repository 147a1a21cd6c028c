#pragma once

#include <span>
#include <vector>

#include "flocknav/geometry.hpp"

namespace flocknav {

// Unicycle state. heading is kept unwrapped (accumulates across turns);
// vel is the planar velocity realized by the last step.
struct AgentState {
    Vec2 pos{0.0, 0.0};
    double heading = 0.0;
    Vec2 vel{0.0, 0.0};
};

struct ControlInput {
    double v = 0.0;      // forward speed, m/s
    double omega = 0.0;  // turn rate, rad/s
};

// Box bounds on inputs.
struct InputSet {
    double v_min = -0.1;
    double v_max = 1.0;
    double omega_min = -8.0;
    double omega_max = 8.0;
};

// Box bounds on position (workspace).
struct StateSet {
    double x_min = -10.0;
    double x_max = 10.0;
    double y_min = -10.0;
    double y_max = 10.0;
};

// One forward-Euler step: position advances along the pre-step heading,
// the stored velocity is the one that produced the move.
AgentState step(const AgentState& x, const ControlInput& u, double dt);

// Applies step repeatedly; returns the T successor states (x0 excluded).
std::vector<AgentState> rollout(const AgentState& x0, std::span<const ControlInput> inputs,
                                double dt);

ControlInput project_input(const ControlInput& u, const InputSet& set);

bool input_in_set(const ControlInput& u, const InputSet& set, double tol = 0.0);

}  // namespace flocknav

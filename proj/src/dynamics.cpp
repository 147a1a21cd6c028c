#include "flocknav/dynamics.hpp"

#include <algorithm>

namespace flocknav {

AgentState step(const AgentState& x, const ControlInput& u, double dt) {
    const double c = std::cos(x.heading), s = std::sin(x.heading);
    AgentState out;
    out.pos = {x.pos.x + dt * u.v * c, x.pos.y + dt * u.v * s};
    out.heading = x.heading + dt * u.omega;
    out.vel = {u.v * c, u.v * s};
    return out;
}

std::vector<AgentState> rollout(const AgentState& x0, std::span<const ControlInput> inputs,
                                double dt) {
    std::vector<AgentState> states;
    states.reserve(inputs.size());
    AgentState x = x0;
    for (const ControlInput& u : inputs) {
        x = step(x, u, dt);
        states.push_back(x);
    }
    return states;
}

ControlInput project_input(const ControlInput& u, const InputSet& set) {
    return {std::clamp(u.v, set.v_min, set.v_max),
            std::clamp(u.omega, set.omega_min, set.omega_max)};
}

bool input_in_set(const ControlInput& u, const InputSet& set, double tol) {
    return u.v >= set.v_min - tol && u.v <= set.v_max + tol && u.omega >= set.omega_min - tol &&
           u.omega <= set.omega_max + tol;
}

}  // namespace flocknav

#include "flocknav/leader.hpp"

#include <algorithm>
#include <cmath>

#include "flocknav/errors.hpp"

namespace flocknav {

std::vector<Vec2> interpolate_waypoints(std::span<const Vec2> waypoints, double spacing) {
    if (waypoints.empty()) return {};
    if (spacing <= 0.0) throw ValidationError("waypoint spacing must be positive");
    std::vector<Vec2> points{waypoints[0]};
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
        const Vec2 a = waypoints[i], b = waypoints[i + 1];
        const double len = dist(a, b);
        if (len == 0.0) continue;
        const Vec2 dir = (b - a) * (1.0 / len);
        for (int k = 1; static_cast<double>(k) * spacing < len - 1e-12; ++k)
            points.push_back(a + (static_cast<double>(k) * spacing) * dir);
        points.push_back(b);  // remainder shorter than spacing ends at the waypoint
    }
    return points;
}

std::vector<Vec2> ramped_course(std::span<const Vec2> waypoints, double spacing, int ramp_ticks) {
    if (ramp_ticks <= 0) return interpolate_waypoints(waypoints, spacing);
    if (waypoints.empty()) return {};
    if (spacing <= 0.0) throw ValidationError("waypoint spacing must be positive");
    // Arc-length parametrization of the polyline.
    std::vector<double> cum{0.0};
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i)
        cum.push_back(cum.back() + dist(waypoints[i], waypoints[i + 1]));
    const double total = cum.back();
    auto at = [&](double sarc) {
        const auto it = std::upper_bound(cum.begin(), cum.end(), sarc);
        const std::size_t seg = std::min(static_cast<std::size_t>(it - cum.begin()),
                                         waypoints.size() - 1) - 1;
        const double len = cum[seg + 1] - cum[seg];
        const double t = len > 0.0 ? (sarc - cum[seg]) / len : 0.0;
        return waypoints[seg] + t * (waypoints[seg + 1] - waypoints[seg]);
    };
    std::vector<Vec2> points{waypoints[0]};
    double sarc = 0.0;
    for (int k = 0; sarc < total - 1e-12; ++k) {
        const double frac = std::min(1.0, static_cast<double>(k + 1) / ramp_ticks);
        sarc = std::min(total, sarc + spacing * frac);
        points.push_back(at(sarc));
    }
    return points;
}

ReferenceTrajectory optimize_reference(std::span<const Vec2> ref_points, const AgentState& x0,
                                       const InputSet& input_set, double dt,
                                       const ReferenceParams& params, const SolverConfig& config) {
    ReferenceTrajectory out;
    if (ref_points.size() < 2) {
        out.points.assign(ref_points.begin(), ref_points.end());
        out.status = SolveStatus::Converged;
        return out;
    }
    const int steps = static_cast<int>(ref_points.size()) - 1;  // inputs u^0..u^{steps-1}
    const std::size_t n = static_cast<std::size_t>(2 * steps);

    auto roll_states = [&](std::span<const double> u, std::vector<AgentState>& states) {
        states.clear();
        AgentState x = x0;
        for (int k = 0; k < steps; ++k) {
            x = step(x, {u[static_cast<std::size_t>(2 * k)], u[static_cast<std::size_t>(2 * k + 1)]}, dt);
            states.push_back(x);
        }
    };

    ConstrainedSpec spec;
    spec.cost = [&, params](std::span<const double> u) {
        thread_local std::vector<AgentState> states;
        roll_states(u, states);
        double cost = 0.0;
        for (int k = 1; k <= steps; ++k) {
            const double w = k == steps ? params.q_t : params.q_p;
            cost += w * dist_sq(states[static_cast<std::size_t>(k - 1)].pos,
                                ref_points[static_cast<std::size_t>(k)]);
        }
        for (std::size_t i = 0; i < u.size(); ++i) cost += params.q_u * u[i] * u[i];
        return cost;
    };
    spec.grad = [&, params](std::span<const double> u, std::span<double> out_g) {
        thread_local std::vector<AgentState> states;
        roll_states(u, states);
        std::fill(out_g.begin(), out_g.end(), 0.0);
        // Reverse pass over the unicycle rollout.
        double adj_px = 0.0, adj_py = 0.0, adj_psi = 0.0, adj_vx = 0.0, adj_vy = 0.0;
        for (int o = steps; o >= 1; --o) {
            const double w = o == steps ? params.q_t : params.q_p;
            const AgentState& x = states[static_cast<std::size_t>(o - 1)];
            adj_px += 2.0 * w * (x.pos.x - ref_points[static_cast<std::size_t>(o)].x);
            adj_py += 2.0 * w * (x.pos.y - ref_points[static_cast<std::size_t>(o)].y);
            const AgentState& pre = o >= 2 ? states[static_cast<std::size_t>(o - 2)] : x0;
            const double c = std::cos(pre.heading), s = std::sin(pre.heading);
            const double v = u[static_cast<std::size_t>(2 * (o - 1))];
            out_g[static_cast<std::size_t>(2 * (o - 1))] +=
                dt * (c * adj_px + s * adj_py) + c * adj_vx + s * adj_vy;
            out_g[static_cast<std::size_t>(2 * (o - 1) + 1)] += dt * adj_psi;
            adj_psi += v * (dt * (-s * adj_px + c * adj_py) - s * adj_vx + c * adj_vy);
            adj_vx = 0.0;
            adj_vy = 0.0;
        }
        for (std::size_t i = 0; i < u.size(); ++i) out_g[i] += 2.0 * params.q_u * u[i];
    };
    spec.box.lo.resize(n);
    spec.box.hi.resize(n);
    for (int k = 0; k < steps; ++k) {
        spec.box.lo[static_cast<std::size_t>(2 * k)] = input_set.v_min;
        spec.box.hi[static_cast<std::size_t>(2 * k)] = input_set.v_max;
        spec.box.lo[static_cast<std::size_t>(2 * k + 1)] = input_set.omega_min;
        spec.box.hi[static_cast<std::size_t>(2 * k + 1)] = input_set.omega_max;
    }

    // Seed with the course's own speeds and turn rates; from a cold start the
    // landscape has spurious minima once the course grows past a few hundred steps.
    std::vector<double> u0(n, 0.0);
    auto bearing = [&](int k) {
        const Vec2 d = ref_points[static_cast<std::size_t>(k + 1)] - ref_points[static_cast<std::size_t>(k)];
        return std::atan2(d.y, d.x);
    };
    double prev = x0.heading;
    for (int k = 0; k < steps; ++k) {
        // The position update uses the pre-step heading, so u_k's turn sets up
        // the segment driven at step k+1.
        const double want = bearing(std::min(k + 1, steps - 1));
        const double turn = wrap_signed(want - prev);
        const double omega = std::clamp(turn / dt, input_set.omega_min, input_set.omega_max);
        const double v = std::clamp(dist(ref_points[static_cast<std::size_t>(k)],
                                         ref_points[static_cast<std::size_t>(k + 1)]) /
                                        dt,
                                    input_set.v_min, input_set.v_max);
        u0[static_cast<std::size_t>(2 * k)] = v;
        u0[static_cast<std::size_t>(2 * k + 1)] = omega;
        prev += dt * omega;
    }
    OuterResult res = outer_solve(spec, u0, config);

    out.inputs.resize(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k)
        out.inputs[static_cast<std::size_t>(k)] = {res.x[static_cast<std::size_t>(2 * k)],
                                                   res.x[static_cast<std::size_t>(2 * k + 1)]};
    out.points.clear();
    out.points.reserve(ref_points.size());
    out.points.push_back(x0.pos);
    AgentState x = x0;
    for (const ControlInput& u : out.inputs) {
        x = step(x, u, dt);
        out.points.push_back(x.pos);
    }
    out.cost = res.cost;
    out.status = res.status;
    return out;
}

ControlInput reactive_control(const Vec2& target, const AgentState& x, const LeaderGains& gains,
                              const InputSet& input_set) {
    const Vec2 d = target - x.pos;
    const double psi_hat = std::atan2(d.y, d.x);
    ControlInput u;
    u.v = gains.k_v * norm_sq(d);
    u.omega = gains.k_psi * wrap_signed(psi_hat - x.heading);
    return project_input(u, input_set);
}

std::vector<OutputSample> leader_predict(const AgentState& x, const ControlInput& u, int horizon,
                                         double dt) {
    std::vector<OutputSample> outputs;
    outputs.reserve(static_cast<std::size_t>(horizon));
    AgentState s = x;
    for (int k = 0; k < horizon; ++k) {
        s = step(s, u, dt);
        outputs.push_back({s.pos, s.vel});
    }
    return outputs;
}

std::vector<OutputSample> leader_plan(const AgentState& x, std::span<const Vec2> reference,
                                      std::size_t target_idx, const LeaderGains& gains,
                                      const InputSet& input_set, int horizon, double dt) {
    if (reference.empty()) return leader_predict(x, ControlInput{}, horizon, dt);
    std::vector<OutputSample> outputs;
    outputs.reserve(static_cast<std::size_t>(horizon));
    AgentState s = x;
    std::size_t idx = target_idx;
    for (int k = 0; k < horizon; ++k) {
        const Vec2 target = reference[std::min(idx, reference.size() - 1)];
        const ControlInput u = reactive_control(target, s, gains, input_set);
        s = step(s, u, dt);
        outputs.push_back({s.pos, s.vel});
        if (idx + 1 < reference.size()) ++idx;
    }
    return outputs;
}

}  // namespace flocknav

#include "flocknav/nmpc.hpp"

#include <array>
#include <cmath>

namespace flocknav {

namespace {

std::vector<ControlInput> to_inputs(std::span<const double> u) {
    std::vector<ControlInput> inputs(u.size() / 2);
    for (std::size_t k = 0; k < inputs.size(); ++k) inputs[k] = {u[2 * k], u[2 * k + 1]};
    return inputs;
}

void roll(const NmpcProblem& p, std::span<const double> u, std::vector<AgentState>& states) {
    states.clear();
    AgentState x = p.x0;
    for (int k = 0; k < p.horizon(); ++k) {
        x = step(x, ControlInput{u[2 * k], u[2 * k + 1]}, p.dt);
        states.push_back(x);
    }
}

// Pulls per-step cost partials dPhi/dx_o back through the rollout and
// accumulates dPhi/du into grad. partial(o, x_o, out) must ADD the direct
// partial at prediction offset o (1-based) into out.
template <typename PartialFn>
void rollout_adjoint(const NmpcProblem& p, std::span<const double> u,
                     std::span<const AgentState> states, PartialFn&& partial,
                     std::span<double> grad) {
    std::array<double, 5> adj{};  // dPhi/dx at the offset currently processed
    for (int o = p.horizon(); o >= 1; --o) {
        partial(o, states[static_cast<std::size_t>(o - 1)], adj);
        const AgentState& pre = o >= 2 ? states[static_cast<std::size_t>(o - 2)] : p.x0;
        const double c = std::cos(pre.heading), s = std::sin(pre.heading);
        const double v = u[static_cast<std::size_t>(2 * (o - 1))];
        grad[static_cast<std::size_t>(2 * (o - 1))] +=
            p.dt * (c * adj[0] + s * adj[1]) + c * adj[3] + s * adj[4];
        grad[static_cast<std::size_t>(2 * (o - 1) + 1)] += p.dt * adj[2];
        const double adj_psi =
            adj[2] + v * (p.dt * (-s * adj[0] + c * adj[1]) - s * adj[3] + c * adj[4]);
        adj = {adj[0], adj[1], adj_psi, 0.0, 0.0};
    }
}

// Neighbor position paired with prediction offset o (snapshot entry o-1).
const Vec2& neighbor_at(const NmpcProblem::NeighborTraj& nb, int o) {
    return nb.pos[static_cast<std::size_t>(o - 1)];
}

}  // namespace

double nmpc_cost(const NmpcProblem& p, std::span<const double> u) {
    thread_local std::vector<AgentState> states;
    roll(p, u, states);
    const double d_enf = enforced_separation_sq(p.params);

    double cost = 0.0;
    double discount = 1.0;
    for (int k = 0; k < p.horizon(); ++k) {
        const AgentState& x = states[static_cast<std::size_t>(k)];
        const OutputSample& t = p.target[static_cast<std::size_t>(k)];
        cost += discount * ((1.0 - p.q) * dist_sq(x.pos, t.pos) + p.q * dist_sq(x.vel, t.vel));
        const double v = u[static_cast<std::size_t>(2 * k)], w = u[static_cast<std::size_t>(2 * k + 1)];
        cost += p.params.r_diag[0] * v * v + p.params.r_diag[1] * w * w;
        discount *= p.params.gamma;
    }
    for (int o = p.params.sep_horizon + 1; o <= p.horizon() - 1; ++o) {
        const double g = std::pow(p.params.gamma, o);
        const Vec2& pos = states[static_cast<std::size_t>(o - 1)].pos;
        for (const auto& nb : p.neighbors)
            cost += g * p.params.rho_sep * separation_penalty(d_enf, dist_sq(pos, neighbor_at(nb, o)));
    }
    return cost;
}

void nmpc_cost_gradient(const NmpcProblem& p, std::span<const double> u, std::span<double> out) {
    thread_local std::vector<AgentState> states;
    roll(p, u, states);
    const double d_enf = enforced_separation_sq(p.params);
    std::fill(out.begin(), out.end(), 0.0);

    auto partial = [&](int o, const AgentState& x, std::array<double, 5>& adj) {
        const int k = o - 1;
        const double g = std::pow(p.params.gamma, k);
        const OutputSample& t = p.target[static_cast<std::size_t>(k)];
        adj[0] += 2.0 * g * (1.0 - p.q) * (x.pos.x - t.pos.x);
        adj[1] += 2.0 * g * (1.0 - p.q) * (x.pos.y - t.pos.y);
        adj[3] += 2.0 * g * p.q * (x.vel.x - t.vel.x);
        adj[4] += 2.0 * g * p.q * (x.vel.y - t.vel.y);
        if (o >= p.params.sep_horizon + 1 && o <= p.horizon() - 1) {
            const double gs = std::pow(p.params.gamma, o) * p.params.rho_sep;
            for (const auto& nb : p.neighbors) {
                const Vec2& n = neighbor_at(nb, o);
                const double d = dist_sq(x.pos, n);
                if (d < d_enf) {
                    const double coef = -4.0 * gs * (d_enf - d);  // dP/dd * dd/dp chain
                    adj[0] += coef * (x.pos.x - n.x);
                    adj[1] += coef * (x.pos.y - n.y);
                }
            }
        }
    };
    rollout_adjoint(p, u, states, partial, out);

    for (int k = 0; k < p.horizon(); ++k) {
        out[static_cast<std::size_t>(2 * k)] += 2.0 * p.params.r_diag[0] * u[static_cast<std::size_t>(2 * k)];
        out[static_cast<std::size_t>(2 * k + 1)] +=
            2.0 * p.params.r_diag[1] * u[static_cast<std::size_t>(2 * k + 1)];
    }
}

void obstacle_residual(const NmpcProblem& p, std::span<const double> u, std::vector<double>& out) {
    thread_local std::vector<AgentState> states;
    roll(p, u, states);
    const double rs_sq = p.params.r_s * p.params.r_s;
    out.clear();
    out.reserve(states.size() * p.obstacle_points.size());
    for (const AgentState& x : states)
        for (const Vec2& obs : p.obstacle_points) out.push_back(rs_sq - dist_sq(x.pos, obs));
}

void separation_residual(const NmpcProblem& p, std::span<const double> u,
                         std::vector<double>& out) {
    thread_local std::vector<AgentState> states;
    roll(p, u, states);
    const double d_enf = enforced_separation_sq(p.params);
    out.clear();
    out.reserve(p.neighbors.size() * static_cast<std::size_t>(p.params.sep_horizon));
    for (const auto& nb : p.neighbors)
        for (int k = 0; k < p.params.sep_horizon; ++k) {
            const Vec2& pos = states[static_cast<std::size_t>(k)].pos;
            out.push_back(d_enf - dist_sq(pos, neighbor_at(nb, k + 1)));
        }
}

void state_box_residual(const NmpcProblem& p, std::span<const double> u,
                        std::vector<double>& out) {
    thread_local std::vector<AgentState> states;
    roll(p, u, states);
    out.clear();
    out.reserve(states.size() * 4);
    for (const AgentState& x : states) {
        out.push_back(p.state_set.x_min - x.pos.x);
        out.push_back(x.pos.x - p.state_set.x_max);
        out.push_back(p.state_set.y_min - x.pos.y);
        out.push_back(x.pos.y - p.state_set.y_max);
    }
}

void obstacle_violation(const NmpcProblem& p, std::span<const double> u, std::vector<double>& out) {
    obstacle_residual(p, u, out);
    for (double& g : out) g = std::max(0.0, g);
}

void separation_violation(const NmpcProblem& p, std::span<const double> u,
                          std::vector<double>& out) {
    separation_residual(p, u, out);
    for (double& g : out) g = std::max(0.0, g);
}

void state_box_violation(const NmpcProblem& p, std::span<const double> u,
                         std::vector<double>& out) {
    state_box_residual(p, u, out);
    for (double& g : out) g = std::max(0.0, g);
}

void obstacle_residual_grad(const NmpcProblem& p, std::span<const double> u,
                            std::span<const double> coeffs, std::span<double> out) {
    thread_local std::vector<AgentState> states;
    roll(p, u, states);
    const std::size_t m = p.obstacle_points.size();
    auto partial = [&](int o, const AgentState& x, std::array<double, 5>& adj) {
        const std::size_t base = static_cast<std::size_t>(o - 1) * m;
        for (std::size_t i = 0; i < m; ++i) {
            if (coeffs[base + i] == 0.0) continue;
            const Vec2& obs = p.obstacle_points[i];
            const double e = -2.0 * coeffs[base + i];
            adj[0] += e * (x.pos.x - obs.x);
            adj[1] += e * (x.pos.y - obs.y);
        }
    };
    rollout_adjoint(p, u, states, partial, out);
}

void separation_residual_grad(const NmpcProblem& p, std::span<const double> u,
                              std::span<const double> coeffs, std::span<double> out) {
    thread_local std::vector<AgentState> states;
    roll(p, u, states);
    const std::size_t t_sep = static_cast<std::size_t>(p.params.sep_horizon);
    auto partial = [&](int o, const AgentState& x, std::array<double, 5>& adj) {
        if (o > p.params.sep_horizon) return;
        for (std::size_t j = 0; j < p.neighbors.size(); ++j) {
            const double cf = coeffs[j * t_sep + static_cast<std::size_t>(o - 1)];
            if (cf == 0.0) continue;
            const Vec2& n = neighbor_at(p.neighbors[j], o);
            adj[0] += -2.0 * cf * (x.pos.x - n.x);
            adj[1] += -2.0 * cf * (x.pos.y - n.y);
        }
    };
    rollout_adjoint(p, u, states, partial, out);
}

void state_box_residual_grad(const NmpcProblem& p, std::span<const double> u,
                             std::span<const double> coeffs, std::span<double> out) {
    thread_local std::vector<AgentState> states;
    roll(p, u, states);
    auto partial = [&](int o, const AgentState& x, std::array<double, 5>& adj) {
        (void)x;
        const std::size_t base = static_cast<std::size_t>(o - 1) * 4;
        adj[0] += coeffs[base + 1] - coeffs[base + 0];
        adj[1] += coeffs[base + 3] - coeffs[base + 2];
    };
    rollout_adjoint(p, u, states, partial, out);
}

TickWeights compute_tick_weights(const AgentState& x0, int self_id, int self_level,
                                 std::span<const NeighborSnapshot> neighbors,
                                 const FlockParams& params) {
    std::map<int, int> levels{{self_id, self_level}};
    std::map<int, Vec2> current_pos{{self_id, x0.pos}};
    for (const NeighborSnapshot& nb : neighbors) {
        levels[nb.id] = nb.hierarchy;
        current_pos[nb.id] = snapshot_at(nb, 0).pos;
    }

    TickWeights w;
    w.w_p = position_weights(levels);

    std::map<int, Vec2> rel;
    for (const auto& [id, pos] : current_pos) rel[id] = pos - x0.pos;
    w.w_v = normalize_weights(alignment_weights_raw(x0.vel, rel, params.beta));

    for (const auto& [id, pos] : current_pos) w.p_bar_now += w.w_p.at(id) * pos;
    w.q = tradeoff_q(dist_sq(x0.pos, w.p_bar_now), params.c, params.q_st);
    return w;
}

std::optional<NmpcProblem> assemble(const AgentState& x0, const NeighborSnapshot& self_prediction,
                                    std::span<const NeighborSnapshot> neighbors,
                                    const TickWeights& weights,
                                    std::vector<Vec2> obstacle_points, const FlockParams& params,
                                    const InputSet& input_set, const StateSet& state_set,
                                    double dt) {
    if (neighbors.empty()) return std::nullopt;

    NmpcProblem p;
    p.x0 = x0;
    p.params = params;
    p.input_set = input_set;
    p.state_set = state_set;
    p.dt = dt;
    p.q = weights.q;
    p.obstacle_points = std::move(obstacle_points);

    std::vector<NeighborSnapshot> all(neighbors.begin(), neighbors.end());
    all.push_back(self_prediction);
    p.target.reserve(static_cast<std::size_t>(params.horizon));
    for (int k = 0; k < params.horizon; ++k)
        p.target.push_back(weighted_average_output(all, weights.w_p, weights.w_v, k));

    p.neighbors.reserve(neighbors.size());
    for (const NeighborSnapshot& nb : neighbors) {
        NmpcProblem::NeighborTraj traj;
        traj.id = nb.id;
        traj.pos.reserve(static_cast<std::size_t>(params.horizon));
        for (int k = 0; k < params.horizon; ++k) traj.pos.push_back(snapshot_at(nb, k).pos);
        p.neighbors.push_back(std::move(traj));
    }
    return p;
}

ConstrainedSpec make_constrained_spec(const NmpcProblem& p) {
    ConstrainedSpec spec;
    spec.cost = [&p](std::span<const double> u) { return nmpc_cost(p, u); };
    spec.grad = [&p](std::span<const double> u, std::span<double> out) {
        nmpc_cost_gradient(p, u, out);
    };
    spec.box.lo.resize(static_cast<std::size_t>(p.dim()));
    spec.box.hi.resize(static_cast<std::size_t>(p.dim()));
    for (int k = 0; k < p.horizon(); ++k) {
        spec.box.lo[static_cast<std::size_t>(2 * k)] = p.input_set.v_min;
        spec.box.hi[static_cast<std::size_t>(2 * k)] = p.input_set.v_max;
        spec.box.lo[static_cast<std::size_t>(2 * k + 1)] = p.input_set.omega_min;
        spec.box.hi[static_cast<std::size_t>(2 * k + 1)] = p.input_set.omega_max;
    }

    // Multiplier path: workspace box entries first, then hard separation.
    ConstraintPath alm;
    alm.residuals = [&p](std::span<const double> u, std::vector<double>& out) {
        thread_local std::vector<double> sep;
        state_box_residual(p, u, out);
        separation_residual(p, u, sep);
        out.insert(out.end(), sep.begin(), sep.end());
    };
    alm.grad_comb = [&p](std::span<const double> u, std::span<const double> coeffs,
                         std::span<double> out) {
        const std::size_t n_box = static_cast<std::size_t>(4 * p.horizon());
        state_box_residual_grad(p, u, coeffs.subspan(0, n_box), out);
        separation_residual_grad(p, u, coeffs.subspan(n_box), out);
    };
    spec.alm = std::move(alm);

    if (!p.obstacle_points.empty()) {
        ConstraintPath pm;
        pm.residuals = [&p](std::span<const double> u, std::vector<double>& out) {
            obstacle_residual(p, u, out);
        };
        pm.grad_comb = [&p](std::span<const double> u, std::span<const double> coeffs,
                            std::span<double> out) {
            obstacle_residual_grad(p, u, coeffs, out);
        };
        spec.pm = std::move(pm);
    }
    return spec;
}

NmpcSolution solve_tick(const NmpcProblem& p, std::span<const ControlInput> warm_start,
                        const SolverConfig& config) {
    std::vector<double> u0(static_cast<std::size_t>(p.dim()), 0.0);
    if (!warm_start.empty()) {
        const std::size_t t = static_cast<std::size_t>(p.horizon());
        for (std::size_t k = 0; k < t; ++k) {
            const ControlInput& src = warm_start[std::min(k + 1, warm_start.size() - 1)];
            const ControlInput proj = project_input(src, p.input_set);
            u0[2 * k] = proj.v;
            u0[2 * k + 1] = proj.omega;
        }
    }

    const ConstrainedSpec spec = make_constrained_spec(p);
    OuterResult res = outer_solve(spec, u0, config);

    NmpcSolution sol;
    sol.inputs = to_inputs(res.x);
    std::vector<AgentState> states = rollout(p.x0, sol.inputs, p.dt);
    sol.predicted.reserve(states.size());
    for (const AgentState& x : states) sol.predicted.push_back({x.pos, x.vel});
    sol.cost = res.cost;
    sol.infeasibility = res.infeasibility;
    sol.residual = res.residual;
    sol.status = res.status;
    sol.solve_time_ms = res.solve_time_ms;
    sol.outer_iterations = res.outer_iterations;
    sol.inner_iterations = res.inner_iterations;
    return sol;
}

}  // namespace flocknav

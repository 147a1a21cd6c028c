#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "flocknav/dynamics.hpp"
#include "flocknav/flocking.hpp"
#include "flocknav/solver.hpp"

namespace flocknav {

// Per-tick quantities shared between the scan pipeline and the solve: weights,
// the current weighted flock position, and the cohesion/alignment trade-off.
struct TickWeights {
    std::map<int, double> w_p;  // hierarchy position weights, self included
    std::map<int, double> w_v;  // normalized travel-vector weights, self included
    Vec2 p_bar_now{0.0, 0.0};   // weighted flock position at the current step
    double q = 0.0;             // trade-off scalar in (0, q_st]
};

TickWeights compute_tick_weights(const AgentState& x0, int self_id, int self_level,
                                 std::span<const NeighborSnapshot> neighbors,
                                 const FlockParams& params);

// One agent's frozen per-tick optimization problem. The decision vector is the
// input sequence [v_0, w_0, v_1, w_1, ...] of length 2*T; states are recovered
// by rolling the dynamics forward.
struct NmpcProblem {
    AgentState x0;
    FlockParams params;
    InputSet input_set;
    StateSet state_set;
    double dt = 0.1;
    double q = 0.0;                        // trade-off scalar
    std::vector<OutputSample> target;      // weighted average output per step, length T
    struct NeighborTraj {
        int id = -1;
        std::vector<Vec2> pos;  // predicted positions per step, length T
    };
    std::vector<NeighborTraj> neighbors;
    std::vector<Vec2> obstacle_points;  // world frame

    int horizon() const { return params.horizon; }
    int dim() const { return 2 * params.horizon; }
};

// Smooth objective: discounted tracking of the weighted average output, input
// effort, and the soft long-horizon separation penalty.
double nmpc_cost(const NmpcProblem& p, std::span<const double> u);

// Analytic gradient of nmpc_cost via reverse accumulation through the rollout.
void nmpc_cost_gradient(const NmpcProblem& p, std::span<const double> u, std::span<double> out);

// Signed constraint residuals g(u) <= 0, the form the solver paths consume.
// Obstacle clearance: one entry per predicted step and obstacle point,
// r_s^2 - dist^2 (penalty path).
void obstacle_residual(const NmpcProblem& p, std::span<const double> u, std::vector<double>& out);

// Hard separation over the first sep_horizon steps: one entry per neighbor
// and step, d_enforced^2 - dist^2 (multiplier path).
void separation_residual(const NmpcProblem& p, std::span<const double> u,
                         std::vector<double>& out);

// Workspace box per predicted step, four sides each (multiplier path).
void state_box_residual(const NmpcProblem& p, std::span<const double> u,
                        std::vector<double>& out);

// Clamped views max{0, g} of the residuals above: the violation measures
// reported outward and used for infeasibility accounting.
void obstacle_violation(const NmpcProblem& p, std::span<const double> u, std::vector<double>& out);
void separation_violation(const NmpcProblem& p, std::span<const double> u,
                          std::vector<double>& out);
void state_box_violation(const NmpcProblem& p, std::span<const double> u,
                         std::vector<double>& out);

// Gradients of coefficient-weighted residual sums, added into out. Every
// entry with a nonzero coefficient is applied, violated or not.
void obstacle_residual_grad(const NmpcProblem& p, std::span<const double> u,
                            std::span<const double> coeffs, std::span<double> out);
void separation_residual_grad(const NmpcProblem& p, std::span<const double> u,
                              std::span<const double> coeffs, std::span<double> out);
void state_box_residual_grad(const NmpcProblem& p, std::span<const double> u,
                             std::span<const double> coeffs, std::span<double> out);

// Builds the frozen problem for one tick. Neighbor list must exclude the agent
// itself; an empty list returns nullopt (no flock to track, skip the solve).
std::optional<NmpcProblem> assemble(const AgentState& x0, const NeighborSnapshot& self_prediction,
                                    std::span<const NeighborSnapshot> neighbors,
                                    const TickWeights& weights,
                                    std::vector<Vec2> obstacle_points, const FlockParams& params,
                                    const InputSet& input_set, const StateSet& state_set,
                                    double dt);

// Wires the problem into the constrained-solver interface: separation and
// workspace residuals on the multiplier path, obstacle residuals on the
// penalty path.
ConstrainedSpec make_constrained_spec(const NmpcProblem& p);

struct NmpcSolution {
    std::vector<ControlInput> inputs;     // length T, box-feasible
    std::vector<OutputSample> predicted;  // outputs along the returned inputs, length T
    double cost = 0.0;
    double infeasibility = 0.0;
    double residual = 0.0;
    SolveStatus status = SolveStatus::MaxIters;
    double solve_time_ms = 0.0;
    int outer_iterations = 0;
    int inner_iterations = 0;
};

// Solves one tick. warm_start is the previous tick's input sequence; it is
// shifted by one step with the last input repeated, then projected. An empty
// warm start begins from zero inputs.
NmpcSolution solve_tick(const NmpcProblem& p, std::span<const ControlInput> warm_start,
                        const SolverConfig& config);

}  // namespace flocknav

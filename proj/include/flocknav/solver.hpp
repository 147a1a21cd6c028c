#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace flocknav {

// Box set for the decision vector.
struct Box {
    std::vector<double> lo, hi;

    void project(std::span<double> x) const;
    bool contains(std::span<const double> x, double tol = 0.0) const;
};

enum class SolveStatus { Converged, MaxIters, BudgetExhausted };

const char* to_string(SolveStatus s);

using ObjectiveFn = std::function<double(std::span<const double>)>;
using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;

// Writes the signed residuals g_i(x) of the constraints g(x) <= 0 into out
// (resizing it); negative entries mean satisfied with margin.
using ResidualFn = std::function<void(std::span<const double>, std::vector<double>&)>;
// Adds sum_i coeffs[i] * grad g_i(x) into out. Entries with coeffs[i] == 0
// carry no weight and may be skipped; every other entry must be applied,
// violated or not.
using ResidualGradFn =
    std::function<void(std::span<const double>, std::span<const double>, std::span<double>)>;

// One group of inequality constraints g(x) <= 0 handed to the outer loop.
struct ConstraintPath {
    ResidualFn residuals;
    ResidualGradFn grad_comb;
};

// Smooth cost over a box, with two optional constraint paths: `alm` residuals
// get multipliers, `pm` residuals are driven to zero by the shared penalty.
struct ConstrainedSpec {
    ObjectiveFn cost;
    GradientFn grad;
    Box box;
    std::optional<ConstraintPath> alm;
    std::optional<ConstraintPath> pm;
};

struct InnerIterInfo {
    int iter = 0;
    double cost = 0.0;
    double envelope = 0.0;
    double residual = 0.0;
    double step = 0.0;
    std::span<const double> x;
};

struct OuterIterInfo {
    int iter = 0;
    double infeasibility = 0.0;
    double penalty = 0.0;
    double inner_residual = 0.0;
    double cost = 0.0;
};

struct SolverConfig {
    double epsilon = 1e-5;  // fixed-point residual tolerance
    double delta = 1e-4;    // infeasibility tolerance
    double lambda0 = 1e-2;  // initial penalty weight
    double rho = 5.0;       // penalty escalation factor
    int max_inner_iters = 500;
    int max_outer_iters = 30;
    int lbfgs_memory = 10;
    std::optional<double> time_budget_ms;      // nullopt disables the budget
    std::optional<double> initial_lipschitz;   // skips the probe when set
    double shrink_factor = 0.25;   // required per-outer-iteration infeasibility shrink
    double multiplier_max = 1e6;   // multiplier clip
    double penalty_max = 1e12;     // penalty clip
    // Elapsed-ms source for the budget; defaults to the wall clock. Deterministic
    // runs install a frozen source so identical inputs yield identical iterates.
    std::function<double()> now_ms;
    // Test hooks, called after each accepted inner iterate / finished outer iteration.
    std::function<void(const InnerIterInfo&)> inner_trace;
    std::function<void(const OuterIterInfo&)> outer_trace;
};

// Returns a config whose budget clock never advances (budget fires only when
// the budget itself is <= 0). Used where a solve must run to its iteration
// limits regardless of machine speed.
SolverConfig frozen_clock(SolverConfig cfg);

// Returns a config whose budget clock advances quantum_ms per observation.
// The solver reads the clock once per inner iteration, so the time budget
// fires at a reproducible iteration count: deterministic simulation modes get
// real cutoff behavior without wall-clock nondeterminism.
SolverConfig work_clock(SolverConfig cfg, double quantum_ms);

struct InnerResult {
    std::vector<double> x;
    double cost = 0.0;
    double residual = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::MaxIters;
};

struct OuterResult {
    std::vector<double> x;
    double cost = 0.0;           // smooth cost at x, penalty terms excluded
    double infeasibility = 0.0;  // max over max{0, g_i(x)} across both paths
    double residual = 0.0;       // inner residual of the iterate that produced x
    int outer_iterations = 0;
    int inner_iterations = 0;
    SolveStatus status = SolveStatus::MaxIters;
    std::vector<double> multipliers;
    double penalty = 0.0;
    double solve_time_ms = 0.0;
};

// Measures elapsed milliseconds against a configurable source.
class Stopwatch {
  public:
    explicit Stopwatch(const std::function<double()>& now_ms);
    double elapsed_ms() const;
    // last elapsed_ms() result without consulting the clock again; reading a
    // stored timestamp costs nothing, unlike a fresh observation
    double last_ms() const { return last_; }

  private:
    std::function<double()> now_;
    double start_;
    mutable double last_ = 0.0;
};

// Projected forward-backward iteration with limited-memory quasi-Newton
// acceleration; candidate steps are accepted only when they decrease the
// forward-backward envelope. Terminates when ||x - proj(x - a*grad)|| / a
// drops to config.epsilon (max-norm).
InnerResult inner_solve(const ObjectiveFn& f, const GradientFn& grad, const Box& box,
                        std::span<const double> x_init, const SolverConfig& config,
                        const Stopwatch* watch = nullptr);

// Outer loop: repeated inner solves of the augmented cost
//   f(x) + lambda/2 * sum_alm max{0, g_i + mu_i/lambda}^2
//        + lambda/2 * sum_pm  max{0, g_i}^2
// with the clipped first-order multiplier update
// mu <- clip(mu + lambda*g, [0, multiplier_max]) on the alm path (the shift
// keeps the augmented cost differentiable at boundary-active optima, so the
// inner residual can actually reach epsilon there) and penalty escalation
// when the infeasibility fails to shrink by config.shrink_factor. Returns the
// lowest-augmented-cost iterate among those with minimal infeasibility seen.
OuterResult outer_solve(const ConstrainedSpec& spec, std::span<const double> x_init,
                        const SolverConfig& config);

}  // namespace flocknav

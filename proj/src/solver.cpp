#include "flocknav/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>

#include "flocknav/errors.hpp"

namespace flocknav {

namespace {

constexpr double kMinLipschitz = 1e-12;
constexpr double kMaxLipschitz = 1e18;
constexpr double kStepSafety = 0.95;   // step = safety / L
constexpr int kMaxBacktracks = 60;
constexpr int kGrowthStreak = 5;       // successes before the step doubles
constexpr double kMinTau = 1.0 / 1024.0;

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double dot_prod(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm_sq_vec(std::span<const double> v) { return dot_prod(v, v); }

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

struct LbfgsPair {
    std::vector<double> s, y;
    double sy = 0.0;
};

// Two-loop recursion: approximates H * r with H built from the stored pairs.
std::vector<double> lbfgs_apply(const std::deque<LbfgsPair>& mem, std::span<const double> r) {
    std::vector<double> q(r.begin(), r.end());
    std::vector<double> a(mem.size());
    for (std::size_t i = mem.size(); i-- > 0;) {
        a[i] = dot_prod(mem[i].s, q) / mem[i].sy;
        for (std::size_t j = 0; j < q.size(); ++j) q[j] -= a[i] * mem[i].y[j];
    }
    const LbfgsPair& newest = mem.back();
    const double gamma = newest.sy / norm_sq_vec(newest.y);
    for (double& qi : q) qi *= gamma;
    for (std::size_t i = 0; i < mem.size(); ++i) {
        const double b = dot_prod(mem[i].y, q) / mem[i].sy;
        for (std::size_t j = 0; j < q.size(); ++j) q[j] += (a[i] - b) * mem[i].s[j];
    }
    return q;
}

double wall_clock_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

void Box::project(std::span<double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
}

bool Box::contains(std::span<const double> x, double tol) const {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    return true;
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::MaxIters: return "max_iters";
        case SolveStatus::BudgetExhausted: return "budget_exhausted";
    }
    return "unknown";
}

SolverConfig frozen_clock(SolverConfig cfg) {
    cfg.now_ms = [] { return 0.0; };
    return cfg;
}

SolverConfig work_clock(SolverConfig cfg, double quantum_ms) {
    auto ticks = std::make_shared<long long>(0);
    cfg.now_ms = [ticks, quantum_ms] { return quantum_ms * static_cast<double>((*ticks)++); };
    return cfg;
}

Stopwatch::Stopwatch(const std::function<double()>& now_ms)
    : now_(now_ms ? now_ms : std::function<double()>(wall_clock_ms)), start_(now_()) {}

double Stopwatch::elapsed_ms() const {
    last_ = now_() - start_;
    return last_;
}

InnerResult inner_solve(const ObjectiveFn& f, const GradientFn& grad, const Box& box,
                        std::span<const double> x_init, const SolverConfig& config,
                        const Stopwatch* watch) {
    const std::size_t n = x_init.size();
    std::vector<double> x(x_init.begin(), x_init.end());
    box.project(x);

    double fx = f(x);
    std::vector<double> g(n);
    grad(x, g);
    if (!std::isfinite(fx) || !all_finite(g))
        throw NonFiniteCost("objective or gradient non-finite at the initial point");

    double L;
    if (config.initial_lipschitz) {
        L = *config.initial_lipschitz;
    } else {
        // One-sided curvature probe along a small per-coordinate perturbation.
        std::vector<double> x2(x), g2(n);
        double probe_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
            x2[i] += h;
            probe_sq += h * h;
        }
        grad(x2, g2);
        double diff_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) diff_sq += (g2[i] - g[i]) * (g2[i] - g[i]);
        L = probe_sq > 0.0 ? std::sqrt(diff_sq / probe_sq) : 0.0;
        if (!std::isfinite(L)) L = 1.0;
    }
    L = std::clamp(L, kMinLipschitz, kMaxLipschitz);
    double alpha = kStepSafety / L;

    std::deque<LbfgsPair> memory;
    std::vector<double> prev_x, prev_r;
    bool have_prev = false;
    int success_streak = 0;

    std::vector<double> u_fb(n), r_raw(n), r_scaled(n), d_qn, x_cand(n), g_cand(n), u_cand(n);

    InnerResult result;
    result.status = SolveStatus::MaxIters;
    bool stopped = false;

    auto fb_point = [&](std::span<const double> at, std::span<const double> grad_at, double step,
                        std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) out[i] = at[i] - step * grad_at[i];
        box.project(out);
    };

    int iter = 0;
    for (; iter < config.max_inner_iters && !stopped; ++iter) {
        // Deadline guarantee: stop while the next iteration still fits, so a
        // budgeted solve never reports past its budget.
        if (watch && config.time_budget_ms) {
            const double elapsed = watch->elapsed_ms();
            const double per_iter = elapsed / static_cast<double>(std::max(iter, 1));
            if (elapsed + 2.0 * per_iter >= *config.time_budget_ms) {
                result.status = SolveStatus::BudgetExhausted;
                break;
            }
        }

        if (success_streak >= kGrowthStreak) {
            L = std::max(L * 0.5, kMinLipschitz);
            alpha = kStepSafety / L;
            success_streak = 0;
        }

        // Forward-backward step; halve the step until the local quadratic
        // upper bound holds.
        fb_point(x, g, alpha, u_fb);
        int backtracks = 0;
        double fu = f(u_fb);
        while (backtracks < kMaxBacktracks) {
            double gd = 0.0, dd = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double di = u_fb[i] - x[i];
                gd += g[i] * di;
                dd += di * di;
            }
            if (std::isfinite(fu) && fu <= fx + gd + 0.5 * L * dd + 1e-10 * std::max(1.0, std::abs(fx)))
                break;
            L = std::min(L * 2.0, kMaxLipschitz);
            alpha = kStepSafety / L;
            fb_point(x, g, alpha, u_fb);
            fu = f(u_fb);
            ++backtracks;
        }
        success_streak = backtracks == 0 ? success_streak + 1 : 0;

        double r_norm_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            r_raw[i] = x[i] - u_fb[i];
            r_scaled[i] = r_raw[i] / alpha;
            r_norm_sq += r_raw[i] * r_raw[i];
        }
        const double residual = max_abs(r_raw) / alpha;
        double gd_fb = 0.0;
        for (std::size_t i = 0; i < n; ++i) gd_fb += g[i] * (u_fb[i] - x[i]);
        const double fbe = fx + gd_fb + r_norm_sq / (2.0 * alpha);

        if (have_prev) {
            LbfgsPair pair;
            pair.s.resize(n);
            pair.y.resize(n);
            double ss = 0.0, yy = 0.0, sy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                pair.s[i] = x[i] - prev_x[i];
                pair.y[i] = r_scaled[i] - prev_r[i];
                ss += pair.s[i] * pair.s[i];
                yy += pair.y[i] * pair.y[i];
                sy += pair.s[i] * pair.y[i];
            }
            pair.sy = sy;
            if (sy > 1e-12 * std::sqrt(ss * yy) && sy > 0.0) {
                memory.push_back(std::move(pair));
                if (static_cast<int>(memory.size()) > config.lbfgs_memory) memory.pop_front();
            }
        }
        prev_x = x;
        prev_r = r_scaled;
        have_prev = true;

        if (config.inner_trace)
            config.inner_trace({iter, fx, fbe, residual, alpha, std::span<const double>(x)});

        if (residual <= config.epsilon) {
            result.status = SolveStatus::Converged;
            result.residual = residual;
            stopped = true;
            break;
        }

        // Quasi-Newton direction on the scaled residual; empty memory falls
        // back to the plain forward-backward direction.
        if (memory.empty()) {
            d_qn.assign(r_raw.begin(), r_raw.end());
            for (double& v : d_qn) v = -v;
        } else {
            d_qn = lbfgs_apply(memory, r_scaled);
            for (double& v : d_qn) v = -v;
        }

        const double required_drop = (1e-3 / alpha) * r_norm_sq;
        bool accepted = false;
        for (double tau = 1.0; tau >= kMinTau; tau *= 0.5) {
            for (std::size_t i = 0; i < n; ++i)
                x_cand[i] = x[i] - (1.0 - tau) * r_raw[i] + tau * d_qn[i];
            box.project(x_cand);
            const double f_cand = f(x_cand);
            if (!std::isfinite(f_cand)) continue;
            grad(x_cand, g_cand);
            if (!all_finite(g_cand)) continue;
            fb_point(x_cand, g_cand, alpha, u_cand);
            double gd = 0.0, dd = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double di = u_cand[i] - x_cand[i];
                gd += g_cand[i] * di;
                dd += di * di;
            }
            const double fbe_cand = f_cand + gd + dd / (2.0 * alpha);
            if (fbe_cand <= fbe - required_drop) {
                x = x_cand;
                fx = f_cand;
                g = g_cand;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // The plain forward-backward step always decreases the envelope.
            x = u_fb;
            fx = fu;
            grad(x, g);
        }
    }

    // Re-measure the residual at the returned point so every exit path
    // reports an exact value.
    fb_point(x, g, alpha, u_fb);
    for (std::size_t i = 0; i < n; ++i) r_raw[i] = x[i] - u_fb[i];
    result.residual = max_abs(r_raw) / alpha;
    if (result.status != SolveStatus::BudgetExhausted && result.residual <= config.epsilon)
        result.status = SolveStatus::Converged;

    result.x = std::move(x);
    result.cost = fx;
    result.iterations = iter;
    return result;
}

OuterResult outer_solve(const ConstrainedSpec& spec, std::span<const double> x_init,
                        const SolverConfig& config) {
    Stopwatch watch(config.now_ms);

    std::vector<double> x(x_init.begin(), x_init.end());
    spec.box.project(x);

    const bool has_alm = spec.alm.has_value();
    const bool has_pm = spec.pm.has_value();

    std::vector<double> v_alm, v_pm;  // signed residual scratch
    // Infeasibility is the worst positive residual; satisfied-with-margin
    // entries (g < 0) do not count.
    auto eval_infeasibility = [&](std::span<const double> z) {
        double infeas = 0.0;
        if (has_alm) {
            spec.alm->residuals(z, v_alm);
            for (double g : v_alm) infeas = std::max(infeas, g);
        }
        if (has_pm) {
            spec.pm->residuals(z, v_pm);
            for (double g : v_pm) infeas = std::max(infeas, g);
        }
        return infeas;
    };

    OuterResult result;

    if (config.time_budget_ms && *config.time_budget_ms <= 0.0) {
        result.x = x;
        result.cost = spec.cost(x);
        result.infeasibility = eval_infeasibility(x);
        result.residual = std::numeric_limits<double>::infinity();
        result.status = SolveStatus::BudgetExhausted;
        result.penalty = config.lambda0;
        result.solve_time_ms = 0.0;
        return result;
    }

    if (!has_alm && !has_pm) {
        InnerResult inner = inner_solve(spec.cost, spec.grad, spec.box, x, config, &watch);
        result.x = std::move(inner.x);
        result.cost = inner.cost;
        result.infeasibility = 0.0;
        result.residual = inner.residual;
        result.outer_iterations = 1;
        result.inner_iterations = inner.iterations;
        result.status = inner.status;
        result.penalty = config.lambda0;
        result.solve_time_ms = watch.elapsed_ms();
        return result;
    }

    std::vector<double> mu;
    if (has_alm) {
        spec.alm->residuals(x, v_alm);
        mu.assign(v_alm.size(), 0.0);
    }
    double lambda = config.lambda0;

    // Shifted augmented Lagrangian: the kink of max{0, g + mu/lambda} sits at
    // g = -mu/lambda, away from the boundary where active constraints settle,
    // so the inner problem stays differentiable at its optimum.
    std::vector<double> v_f, v_g, coeffs;  // per-call scratch for the closures
    ObjectiveFn aug_f = [&](std::span<const double> z) {
        double val = spec.cost(z);
        if (has_alm) {
            spec.alm->residuals(z, v_f);
            for (std::size_t i = 0; i < v_f.size(); ++i) {
                const double s = std::max(0.0, v_f[i] + mu[i] / lambda);
                val += 0.5 * lambda * s * s;
            }
        }
        if (has_pm) {
            spec.pm->residuals(z, v_f);
            for (double g : v_f) {
                const double w = std::max(0.0, g);
                val += 0.5 * lambda * w * w;
            }
        }
        return val;
    };
    GradientFn aug_g = [&](std::span<const double> z, std::span<double> out) {
        spec.grad(z, out);
        if (has_alm) {
            spec.alm->residuals(z, v_g);
            coeffs.resize(v_g.size());
            for (std::size_t i = 0; i < v_g.size(); ++i)
                coeffs[i] = std::max(0.0, mu[i] + lambda * v_g[i]);
            spec.alm->grad_comb(z, coeffs, out);
        }
        if (has_pm) {
            spec.pm->residuals(z, v_g);
            coeffs.resize(v_g.size());
            for (std::size_t i = 0; i < v_g.size(); ++i)
                coeffs[i] = lambda * std::max(0.0, v_g[i]);
            spec.pm->grad_comb(z, coeffs, out);
        }
    };

    std::vector<double> best_x;
    double best_cost = std::numeric_limits<double>::infinity();  // smooth cost, reported
    double best_aug = std::numeric_limits<double>::infinity();   // augmented cost, selects
    double best_infeas = std::numeric_limits<double>::infinity();
    double best_residual = std::numeric_limits<double>::infinity();
    double prev_infeas = std::numeric_limits<double>::infinity();

    result.status = SolveStatus::MaxIters;
    for (int outer = 0; outer < config.max_outer_iters; ++outer) {
        if (config.time_budget_ms) {
            const double elapsed = watch.elapsed_ms();
            const double per =
                elapsed / static_cast<double>(std::max(1, result.inner_iterations + 1));
            if (elapsed + 2.0 * per >= *config.time_budget_ms) {
                result.status = SolveStatus::BudgetExhausted;
                break;
            }
        }

        InnerResult inner = inner_solve(aug_f, aug_g, spec.box, x, config, &watch);
        x = std::move(inner.x);
        result.inner_iterations += inner.iterations;
        result.outer_iterations = outer + 1;

        const double infeas = eval_infeasibility(x);
        const double cost_raw = spec.cost(x);
        // Strictly more feasible always wins; at equal infeasibility the lower
        // augmented cost (inner.cost) wins.
        if (infeas < best_infeas - 1e-12 ||
            (infeas <= best_infeas + 1e-12 && inner.cost < best_aug)) {
            best_x = x;
            best_aug = inner.cost;
            best_cost = cost_raw;
            best_infeas = std::min(best_infeas, infeas);
            best_residual = inner.residual;
        }
        if (config.outer_trace) config.outer_trace({outer, infeas, lambda, inner.residual, cost_raw});

        if (infeas <= config.delta && inner.status == SolveStatus::Converged) {
            result.status = SolveStatus::Converged;
            break;
        }
        if (inner.status == SolveStatus::BudgetExhausted) {
            result.status = SolveStatus::BudgetExhausted;
            break;
        }

        if (has_alm) {
            // Clipped first-order update on the signed residuals; the lower
            // clip retires multipliers on constraints that have gone inactive.
            spec.alm->residuals(x, v_alm);
            for (std::size_t i = 0; i < mu.size(); ++i)
                mu[i] = std::clamp(mu[i] + lambda * v_alm[i], 0.0, config.multiplier_max);
        }
        if (infeas > config.delta && std::isfinite(prev_infeas) &&
            infeas > config.shrink_factor * prev_infeas)
            lambda = std::min(lambda * config.rho, config.penalty_max);
        prev_infeas = infeas;
    }

    if (best_x.empty()) {  // budget fired before the first inner solve finished
        best_x = x;
        best_cost = spec.cost(x);
        best_infeas = eval_infeasibility(x);
    }
    result.x = std::move(best_x);
    result.cost = best_cost;
    result.infeasibility = best_infeas;
    result.residual = best_residual;
    result.multipliers = std::move(mu);
    result.penalty = lambda;
    result.solve_time_ms = watch.last_ms();
    return result;
}

}  // namespace flocknav

#include "flocknav/coordination.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>

#include "flocknav/errors.hpp"
#include "flocknav/leader.hpp"
#include "flocknav/nmpc.hpp"
#include "flocknav/pointcloud.hpp"
#include "flocknav/vfh.hpp"
#include "flocknav/world.hpp"

namespace flocknav {

void Mailbox::deliver(PredictionMessage msg) { latest_[msg.sender] = std::move(msg); }

const PredictionMessage* Mailbox::latest(int sender) const {
    const auto it = latest_.find(sender);
    return it == latest_.end() ? nullptr : &it->second;
}

std::vector<int> neighbors_in_range(int self, std::span<const int> ids,
                                    std::span<const Vec2> positions, double range) {
    if (ids.size() != positions.size()) throw Error("neighbors_in_range: size mismatch");
    const Vec2* p = nullptr;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == self) {
            p = &positions[i];
            break;
        }
    }
    if (!p) throw Error("neighbors_in_range: unknown agent id");
    std::vector<int> out;
    const double r_sq = range * range;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] != self && dist_sq(positions[i], *p) <= r_sq) out.push_back(ids[i]);
    }
    return out;
}

namespace {

// Modeled cost of one solver inner iteration, used by the deterministic
// work clock. Measured ~0.023 ms on desktop silicon; 0.03 keeps headroom,
// so a solve that fits the modeled budget also fits the real one.
constexpr double kBudgetQuantumMs = 0.03;

double wall_ms_now() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

// Deterministic, platform-independent generator. std::* distributions are
// implementation-defined, so draws are taken by modulo.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::int64_t range(std::int64_t lo, std::int64_t hi) {  // inclusive
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next() % span);
    }
};

// What one sense-decide pass produced; applied immediately in lockstep,
// after the simulated solve latency in async mode.
struct Decision {
    ControlInput input{};
    std::vector<OutputSample> prediction;
    std::vector<ControlInput> warm;
    std::string status;
    double solve_ms = 0.0;
    int obstacle_points = 0;
    int staleness = 0;
    int level = 0;
};

struct AgentRuntime {
    AgentSpec spec;
    AgentState state;
    int level = 0;
    ControlInput applied{};                // input currently driving the body
    std::vector<ControlInput> warm;        // previous solution, warm start
    std::vector<OutputSample> prediction;  // latest computed outputs
    std::size_t target_idx = 0;            // leader course progress
    Rng rng{0};
    std::optional<Decision> pending;  // async: solved but not yet applied

    // last committed decision, echoed into the log
    std::string status = "idle";
    double solve_ms = 0.0;
    int obstacle_points = 0;
    int staleness = 0;
};

class Engine {
  public:
    Engine(const Scenario& s, bool wall_clock) : s_(s) {
        // Deterministic modes meter the budget with a work clock, so cutoffs
        // land on reproducible iteration counts instead of wall-clock times.
        solver_cfg_ = wall_clock ? s.solver : work_clock(s.solver, kBudgetQuantumMs);
        const AgentSpec* leader = nullptr;
        for (const AgentSpec& a : s.agents)
            if (a.leader) leader = &a;
        if (!leader) throw ValidationError("scenario has no leader");

        const std::vector<Vec2> course =
            ramped_course(s.waypoints, s.reference.spacing, s.reference.ramp_ticks);
        AgentState lx0;
        lx0.pos = leader->pos;
        lx0.heading = leader->heading;
        SolverConfig ref_cfg = frozen_clock(s.solver);
        ref_cfg.time_budget_ms.reset();  // the reference solve is offline
        ref_cfg.max_inner_iters = std::max(ref_cfg.max_inner_iters, 2000);
        reference_ = optimize_reference(course, lx0, s.input_bounds, s.dt, s.reference, ref_cfg)
                         .points;

        // The rollout's first points sit on the start pose; a carrot at the
        // robot's own feet has an arbitrary bearing, and the ccw-only heading
        // law turns any negative bearing error into a full counterclockwise
        // lap. Start the carrot at the first point with a usable bearing.
        std::size_t start_idx = 0;
        while (start_idx + 1 < reference_.size() &&
               norm_sq(reference_[start_idx] - lx0.pos) < 0.09)
            ++start_idx;

        for (const AgentSpec& spec : s.agents) {
            AgentRuntime a;
            a.spec = spec;
            a.target_idx = spec.leader ? start_idx : 0;
            a.state.pos = spec.pos;
            a.state.heading = spec.heading;
            a.level = spec.leader ? 0 : s.flock.pi_bar;
            a.prediction = leader_predict(a.state, ControlInput{}, s.flock.horizon, s.dt);
            a.rng = Rng(s.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(spec.id + 1)));
            agents_.push_back(std::move(a));
        }
        std::sort(agents_.begin(), agents_.end(),
                  [](const AgentRuntime& a, const AgentRuntime& b) { return a.spec.id < b.spec.id; });
    }

    EpisodeLog lockstep() {
        EpisodeLog log = make_log("lockstep");
        publish_all(0);
        for (std::int64_t tick = 0; tick < s_.ticks; ++tick) {
            if (tick > 0) publish_all(tick);
            // all agents decide against the same mailbox and world snapshot,
            // so the iteration order cannot leak into the outcome
            for (AgentRuntime& a : agents_) {
                const double t0 = wall_ms_now();
                Decision d = decide(a, tick);
                d.solve_ms = wall_ms_now() - t0;
                commit(a, std::move(d));
            }
            for (AgentRuntime& a : agents_) log.records.push_back(make_record(tick, a));
            for (AgentRuntime& a : agents_) a.state = step(a.state, a.applied, s_.dt);
        }
        return log;
    }

    EpisodeLog async(bool wall_clock) {
        EpisodeLog log = make_log("async");
        publish_all(0);
        const auto dt_us = static_cast<std::int64_t>(std::llround(s_.dt * 1e6));
        const auto lat_lo = static_cast<std::int64_t>(std::llround(s_.async_mode.latency_min_ms * 1e3));
        const auto lat_hi = static_cast<std::int64_t>(std::llround(s_.async_mode.latency_max_ms * 1e3));

        struct Event {
            std::int64_t time_us = 0;
            int priority = 0;  // 0 apply, 1 world advance, 2 wake
            std::int64_t seq = 0;
            int agent = -1;
        };
        const auto later = [](const Event& a, const Event& b) {
            if (a.time_us != b.time_us) return a.time_us > b.time_us;
            if (a.priority != b.priority) return a.priority > b.priority;
            return a.seq > b.seq;
        };
        std::priority_queue<Event, std::vector<Event>, decltype(later)> queue(later);
        std::int64_t seq = 0;
        for (std::int64_t k = 1; k <= s_.ticks; ++k) queue.push({k * dt_us, 1, seq++, -1});
        for (AgentRuntime& a : agents_)
            queue.push({a.rng.range(0, dt_us - 1), 2, seq++, a.spec.id});

        std::int64_t tick = 0;
        while (!queue.empty()) {
            const Event ev = queue.top();
            queue.pop();
            if (ev.priority == 0) {
                AgentRuntime& a = by_id(ev.agent);
                if (a.pending) {
                    commit(a, std::move(*a.pending));
                    a.pending.reset();
                    publish_one(a, tick);
                }
            } else if (ev.priority == 1) {
                for (AgentRuntime& a : agents_) log.records.push_back(make_record(tick, a));
                for (AgentRuntime& a : agents_) a.state = step(a.state, a.applied, s_.dt);
                ++tick;
                if (tick >= s_.ticks) break;
            } else {
                AgentRuntime& a = by_id(ev.agent);
                // one solve in flight at a time; a wake that finds an unapplied
                // solution skips its cycle
                if (!a.pending) {
                    const double t0 = wall_ms_now();
                    Decision d = decide(a, tick);
                    d.solve_ms = wall_ms_now() - t0;
                    const bool instant = a.spec.controller != "nmpc";
                    if (instant) {
                        commit(a, std::move(d));
                        publish_one(a, tick);
                    } else {
                        std::int64_t latency_us = a.rng.range(lat_lo, lat_hi);
                        if (wall_clock)
                            latency_us = static_cast<std::int64_t>(std::llround(d.solve_ms * 1e3));
                        a.pending = std::move(d);
                        queue.push({ev.time_us + latency_us, 0, seq++, a.spec.id});
                    }
                }
                queue.push({ev.time_us + dt_us, 2, seq++, ev.agent});
            }
        }
        return log;
    }

  private:
    EpisodeLog make_log(const char* mode) const {
        EpisodeLog log;
        log.scenario_name = s_.name;
        log.mode = mode;
        log.seed = s_.seed;
        log.dt = s_.dt;
        log.reference = reference_;
        log.records.reserve(static_cast<std::size_t>(s_.ticks) * agents_.size());
        return log;
    }

    AgentRuntime& by_id(int id) {
        for (AgentRuntime& a : agents_)
            if (a.spec.id == id) return a;
        throw Error("unknown agent id");
    }

    void publish_all(std::int64_t tick) {
        for (AgentRuntime& a : agents_) publish_one(a, tick);
    }

    void publish_one(AgentRuntime& a, std::int64_t tick) {
        PredictionMessage msg;
        msg.sender = a.spec.id;
        msg.hierarchy = a.level;
        msg.outputs = a.prediction;
        msg.stamp = tick;
        box_.deliver(std::move(msg));
    }

    std::vector<NeighborSnapshot> collect(const AgentRuntime& a) const {
        std::vector<NeighborSnapshot> out;
        const double det_sq = s_.flock.detection_range * s_.flock.detection_range;
        for (const AgentRuntime& o : agents_) {
            if (o.spec.id == a.spec.id) continue;
            if (dist_sq(o.state.pos, a.state.pos) > det_sq) continue;
            if (const PredictionMessage* m = box_.latest(o.spec.id))
                out.push_back({m->sender, m->hierarchy, m->outputs, m->stamp});
        }
        return out;
    }

    std::vector<CircleObstacle> other_bodies(const AgentRuntime& a) const {
        std::vector<CircleObstacle> out;
        for (const AgentRuntime& o : agents_)
            if (o.spec.id != a.spec.id) out.push_back({o.state.pos, s_.flock.r_b});
        return out;
    }

    Decision decide(AgentRuntime& a, std::int64_t tick) {
        Decision d;
        d.warm = a.warm;
        if (a.spec.controller == "reactive") {
            const Vec2 target = reference_[std::min(a.target_idx, reference_.size() - 1)];
            d.input = reactive_control(target, a.state, s_.gains, s_.input_bounds);
            d.prediction = leader_plan(a.state, reference_, a.target_idx, s_.gains,
                                       s_.input_bounds, s_.flock.horizon, s_.dt);
            d.status = "reactive";
            d.level = 0;
            const bool hold = s_.reference.hold_when_lagging &&
                              dist(a.state.pos, target) > s_.reference.lag_threshold;
            if (!hold && a.target_idx + 1 < reference_.size()) ++a.target_idx;
            return d;
        }

        const std::vector<NeighborSnapshot> snaps = collect(a);
        std::vector<int> levels;
        levels.reserve(snaps.size());
        for (const NeighborSnapshot& sn : snaps) levels.push_back(sn.hierarchy);
        d.level = update_hierarchy(false, levels, s_.flock.pi_bar);
        for (const NeighborSnapshot& sn : snaps)
            d.staleness = std::max<int>(d.staleness, static_cast<int>(tick - sn.stamp));

        if (snaps.empty()) {
            d.input = ControlInput{};
            d.prediction = leader_predict(a.state, d.input, s_.flock.horizon, s_.dt);
            d.status = "isolated";
            return d;
        }

        const Pose pose{a.state.pos, a.state.heading};
        const std::vector<CircleObstacle> bodies = other_bodies(a);
        const Scan2D scan = raycast(pose, s_.obstacles, bodies, s_.sensor);

        if (a.spec.controller == "vfh") {
            d.input = vfh_follower_step(snaps, scan, a.state, s_.vfh, s_.gains, s_.input_bounds);
            d.prediction = leader_predict(a.state, d.input, s_.flock.horizon, s_.dt);
            d.status = "vfh";
            return d;
        }

        const TickWeights weights = compute_tick_weights(a.state, a.spec.id, d.level, snaps, s_.flock);
        std::vector<Vec2> nb_pos;
        nb_pos.reserve(snaps.size());
        for (const NeighborSnapshot& sn : snaps) nb_pos.push_back(snapshot_at(sn, 0).pos);
        // tiny slack so a body's own surface returns never survive as obstacles
        std::vector<Vec2> points = process_scan(scan, pose, weights.p_bar_now, nb_pos,
                                                s_.flock.downsample_factor, s_.flock.r_b + 1e-9);
        d.obstacle_points = static_cast<int>(points.size());

        NeighborSnapshot self_snap;
        self_snap.id = a.spec.id;
        self_snap.hierarchy = d.level;
        self_snap.outputs = a.prediction;
        self_snap.stamp = tick;

        const std::optional<NmpcProblem> problem =
            assemble(a.state, self_snap, snaps, weights, std::move(points), s_.flock,
                     s_.input_bounds, s_.workspace, s_.dt);
        if (!problem) {  // unreachable with snaps nonempty; fail safe anyway
            d.input = ControlInput{};
            d.prediction = leader_predict(a.state, d.input, s_.flock.horizon, s_.dt);
            d.status = "isolated";
            return d;
        }
        if (a.warm.empty()) {
            // No previous solution to shift. Zero inputs sit in a poor basin when
            // the start heading points away from the flock target (the solver
            // settles on creeping backward), so seed with a turn-and-follow
            // rollout toward the target instead.
            AgentState sim = a.state;
            for (const OutputSample& want : problem->target) {
                const Vec2 to = want.pos - sim.pos;
                const double err = wrap_signed(std::atan2(to.y, to.x) - sim.heading);
                const ControlInput u = project_input(
                    {s_.gains.k_v * norm_sq(to), s_.gains.k_psi * err}, s_.input_bounds);
                a.warm.push_back(u);
                sim = step(sim, u, s_.dt);
            }
        }
        try {
            NmpcSolution sol = solve_tick(*problem, a.warm, solver_cfg_);
            d.input = sol.inputs.front();
            d.prediction = std::move(sol.predicted);
            d.warm = std::move(sol.inputs);
            d.status = to_string(sol.status);
            // Stall recovery. The discounted tracking cost admits stationary
            // points well short of the target: facing away, the turn's payoff
            // lies past the horizon's useful weight, so the solver settles on
            // creeping backward; facing the target through an obstacle or a
            // neighbor's separation ring, the penalty gradient cancels the
            // tracking pull and the agent parks on the ring. Spin toward the
            // target in the first case; skirt the blocker in the second.
            const Vec2 to = problem->target.front().pos - a.state.pos;
            const double err = wrap_signed(std::atan2(to.y, to.x) - a.state.heading);
            if (d.input.v <= 0.02 && norm_sq(to) > 1.0) {
                if (std::abs(err) > 1.2) {
                    d.input = project_input({0.0, s_.gains.k_psi * err}, s_.input_bounds);
                    d.prediction = leader_predict(a.state, d.input, s_.flock.horizon, s_.dt);
                    d.warm.clear();
                    d.status = "recovery";
                } else if (const std::optional<Vec2> blk = nearest_blocker(a.state.pos, *problem)) {
                    const Vec2 out = a.state.pos - *blk;
                    Vec2 tang{-out.y, out.x};
                    if (tang.x * to.x + tang.y * to.y < 0.0) tang = Vec2{out.y, -out.x};
                    // sideways plus outward: circle the blocker while backing
                    // off the clearance it stalled at
                    const Vec2 dir = tang * (1.0 / std::max(1e-9, std::sqrt(norm_sq(tang)))) +
                                     out * (0.5 / std::max(1e-9, std::sqrt(norm_sq(out))));
                    const double skew = wrap_signed(std::atan2(dir.y, dir.x) - a.state.heading);
                    // rotate first, then creep: driving mid-turn arcs into
                    // the very blocker being skirted, so gate the speed hard
                    // on alignment
                    const double align = std::max(0.0, std::cos(skew));
                    const double creep = 0.35 * align * align * align;
                    d.input = project_input({creep, s_.gains.k_psi * skew}, s_.input_bounds);
                    d.prediction = leader_predict(a.state, d.input, s_.flock.horizon, s_.dt);
                    d.warm.clear();
                    d.status = "recovery";
                }
            }
        } catch (const NonFiniteCost&) {
            d.input = ControlInput{};
            d.prediction = leader_predict(a.state, d.input, s_.flock.horizon, s_.dt);
            d.warm.clear();
            d.status = "solver_failure";
        }
        return d;
    }

    // Nearest thing the stalled solve is likely pinned against: an obstacle
    // point near the safety ring or a neighbor near the enforced separation
    // ring. Anything farther is not what cancelled the tracking gradient.
    static std::optional<Vec2> nearest_blocker(const Vec2& pos, const NmpcProblem& p) {
        std::optional<Vec2> best;
        double best_d = std::numeric_limits<double>::infinity();
        const double obs_reach = p.params.r_s + 0.35;
        for (const Vec2& pt : p.obstacle_points) {
            const double d = std::sqrt(norm_sq(pt - pos));
            if (d <= obs_reach && d < best_d) { best_d = d; best = pt; }
        }
        const double sep = std::sqrt(p.params.d_sep_sq) + p.params.sep_margin;
        const double nb_reach = sep + 0.35;
        for (const NmpcProblem::NeighborTraj& nb : p.neighbors) {
            if (nb.pos.empty()) continue;
            const double d = std::sqrt(norm_sq(nb.pos.front() - pos));
            // scale so a ring contact compares on the same footing as an
            // obstacle contact
            const double scaled = d - (sep - p.params.r_s);
            if (d <= nb_reach && scaled < best_d) { best_d = scaled; best = nb.pos.front(); }
        }
        return best;
    }

    void commit(AgentRuntime& a, Decision d) {
        a.applied = d.input;
        a.prediction = std::move(d.prediction);
        a.warm = std::move(d.warm);
        a.level = d.level;
        a.status = std::move(d.status);
        a.solve_ms = d.solve_ms;
        a.obstacle_points = d.obstacle_points;
        a.staleness = d.staleness;
    }

    TickRecord make_record(std::int64_t tick, const AgentRuntime& a) const {
        TickRecord r;
        r.tick = tick;
        r.agent = a.spec.id;
        r.controller = a.spec.controller;
        r.status = a.status;
        r.state = a.state;
        r.input = a.applied;
        r.solve_ms = a.solve_ms;
        r.obstacle_points = a.obstacle_points;
        r.hierarchy = a.level;
        r.staleness_ticks = a.staleness;

        double min_sep = -1.0;
        Vec2 centroid{0.0, 0.0};
        for (const AgentRuntime& o : agents_) {
            centroid += o.state.pos;
            if (o.spec.id == a.spec.id) continue;
            const double d_sq = dist_sq(o.state.pos, a.state.pos);
            if (min_sep < 0.0 || d_sq < min_sep) min_sep = d_sq;
        }
        r.min_separation_sq = min_sep;
        centroid = (1.0 / static_cast<double>(agents_.size())) * centroid;
        r.centroid_deviation_m = dist(a.state.pos, centroid);
        r.min_clearance_m = s_.obstacles.empty() ? -1.0 : min_clearance(a.state.pos, s_.obstacles);
        return r;
    }

    const Scenario& s_;
    SolverConfig solver_cfg_;
    std::vector<AgentRuntime> agents_;
    std::vector<Vec2> reference_;
    Mailbox box_;
};

}  // namespace

EpisodeLog run_lockstep(const Scenario& s) {
    Engine e(s, false);
    return e.lockstep();
}

EpisodeLog run_async(const Scenario& s, bool wall_clock) {
    Engine e(s, wall_clock);
    return e.async(wall_clock);
}

}  // namespace flocknav

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "flocknav/geometry.hpp"

namespace flocknav {

// Modified-flocking parameters. Distances named *_sq are squared metres.
struct FlockParams {
    int horizon = 10;      // T, prediction steps
    int sep_horizon = 5;   // T_sep, steps with hard separation
    double gamma = 0.8;    // per-step discount
    double rho_sep = 20.0; // soft separation weight
    double beta = 0.5;     // alignment weight for neighbors behind the travel vector
    double q_st = 0.5;     // static cohesion/alignment trade-off
    double c = 10.0;       // trade-off distance falloff
    int pi_bar = 3;        // hierarchy cap
    double d_sep_sq = 1.44;    // minimum squared pairwise distance
    double sep_margin = 0.0;   // extra metres added to the enforced separation radius
    double r_s = 0.6;          // obstacle safety radius, m
    double r_b = 0.55;         // agent body radius, m
    double r_diag[2] = {0.1, 0.1};  // input effort weights (v, omega)
    double detection_range = 5.0;   // neighbor detection radius, m
    int downsample_factor = 4;      // f_s, beams per kept obstacle point
};

struct OutputSample {
    Vec2 pos{0.0, 0.0};
    Vec2 vel{0.0, 0.0};
};

// Latest broadcast prediction of one agent, as seen by a receiver.
struct NeighborSnapshot {
    int id = -1;
    int hierarchy = 0;
    std::vector<OutputSample> outputs;  // predicted (position, velocity), one per step
    std::int64_t stamp = 0;             // publish tick
};

// Hierarchy level: leaders are 0; followers take 1 + the best neighbor level
// from the previous tick, capped at pi_bar; isolated followers fall back to pi_bar.
int update_hierarchy(bool is_leader, std::span<const int> prev_neighbor_levels, int pi_bar);

// Eq-style hierarchy weights 2^{-level}, normalized over the given map
// (callers include the receiving agent itself).
std::map<int, double> position_weights(const std::map<int, int>& levels);

// Raw travel-vector weights: 1 for agents at or ahead of the travel direction,
// beta for agents behind it. rel_positions are p_j - p_self.
std::map<int, double> alignment_weights_raw(const Vec2& v_self,
                                            const std::map<int, Vec2>& rel_positions,
                                            double beta);

// Normalizes positive weights to sum to 1. Empty or all-zero input is returned as-is.
std::map<int, double> normalize_weights(const std::map<int, double>& weights);

// Cohesion/alignment trade-off q = q_st / (1 + c * dist_sq), in (0, q_st].
double tradeoff_q(double dist_sq, double c, double q_st);

// Weighted average of predicted outputs at step k (0-based). Positions use w_p,
// velocities use w_v. Snapshots shorter than k+1 entries contribute their last
// entry; an empty snapshot raises MissingPrediction.
OutputSample weighted_average_output(std::span<const NeighborSnapshot> snapshots,
                                     const std::map<int, double>& w_p,
                                     const std::map<int, double>& w_v, int k);

// Convenience: the snapshot entry at step k with the hold-last rule applied.
const OutputSample& snapshot_at(const NeighborSnapshot& snap, int k);

// Soft separation penalty on squared distances: (d_sep_sq - d_sq)^2 inside the
// separation radius, 0 outside.
double separation_penalty(double d_sep_sq, double d_sq);

// The squared distance actually enforced: (sqrt(d_sep_sq) + margin)^2.
double enforced_separation_sq(const FlockParams& p);

}  // namespace flocknav

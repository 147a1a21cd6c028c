#include "flocknav/flocking.hpp"

#include <algorithm>
#include <cmath>

#include "flocknav/errors.hpp"

namespace flocknav {

int update_hierarchy(bool is_leader, std::span<const int> prev_neighbor_levels, int pi_bar) {
    if (is_leader) return 0;
    if (prev_neighbor_levels.empty()) return pi_bar;
    const int best = *std::min_element(prev_neighbor_levels.begin(), prev_neighbor_levels.end());
    return std::min(pi_bar, 1 + best);
}

std::map<int, double> position_weights(const std::map<int, int>& levels) {
    std::map<int, double> w;
    double total = 0.0;
    for (const auto& [id, level] : levels) {
        const double raw = std::exp2(-static_cast<double>(level));
        w[id] = raw;
        total += raw;
    }
    for (auto& [id, weight] : w) weight /= total;
    return w;
}

std::map<int, double> alignment_weights_raw(const Vec2& v_self,
                                            const std::map<int, Vec2>& rel_positions,
                                            double beta) {
    std::map<int, double> w;
    for (const auto& [id, rel] : rel_positions) w[id] = dot(v_self, rel) >= 0.0 ? 1.0 : beta;
    return w;
}

std::map<int, double> normalize_weights(const std::map<int, double>& weights) {
    double total = 0.0;
    for (const auto& [id, weight] : weights) total += weight;
    if (total <= 0.0) return weights;
    std::map<int, double> w = weights;
    for (auto& [id, weight] : w) weight /= total;
    return w;
}

double tradeoff_q(double dist_sq, double c, double q_st) {
    return q_st / (1.0 + c * dist_sq);
}

const OutputSample& snapshot_at(const NeighborSnapshot& snap, int k) {
    if (snap.outputs.empty())
        throw MissingPrediction("snapshot from agent " + std::to_string(snap.id) + " is empty");
    const int last = static_cast<int>(snap.outputs.size()) - 1;
    return snap.outputs[static_cast<std::size_t>(std::min(k, last))];
}

OutputSample weighted_average_output(std::span<const NeighborSnapshot> snapshots,
                                     const std::map<int, double>& w_p,
                                     const std::map<int, double>& w_v, int k) {
    OutputSample avg;
    for (const NeighborSnapshot& snap : snapshots) {
        const OutputSample& y = snapshot_at(snap, k);
        if (auto it = w_p.find(snap.id); it != w_p.end()) avg.pos += it->second * y.pos;
        if (auto it = w_v.find(snap.id); it != w_v.end()) avg.vel += it->second * y.vel;
    }
    return avg;
}

double separation_penalty(double d_sep_sq, double d_sq) {
    if (d_sq >= d_sep_sq) return 0.0;
    const double gap = d_sep_sq - d_sq;
    return gap * gap;
}

double enforced_separation_sq(const FlockParams& p) {
    const double r = std::sqrt(p.d_sep_sq) + p.sep_margin;
    return r * r;
}

}  // namespace flocknav

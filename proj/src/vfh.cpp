#include "flocknav/vfh.hpp"

#include <algorithm>
#include <cmath>

#include "flocknav/flocking.hpp"

namespace flocknav {

PolarHistogram build_histogram(const Scan2D& scan, int sectors) {
    PolarHistogram hist;
    hist.sector_width = 2.0 * M_PI / sectors;
    hist.density.assign(static_cast<std::size_t>(sectors), 0.0);
    for (std::size_t b = 0; b < scan.ranges.size(); ++b) {
        const double r = scan.ranges[b];
        if (r > scan.range_max) continue;
        const double angle = wrap_angle(scan.angle_min + static_cast<double>(b) * scan.angle_increment);
        auto sector = static_cast<std::size_t>(angle / hist.sector_width);
        if (sector >= hist.density.size()) sector = hist.density.size() - 1;
        hist.density[sector] += std::max(0.0, scan.range_max - r);
    }
    return hist;
}

double select_direction(const PolarHistogram& hist, double target_bearing, double threshold) {
    const double target = wrap_angle(target_bearing);
    const std::size_t n = hist.density.size();
    auto center = [&](std::size_t s) { return (static_cast<double>(s) + 0.5) * hist.sector_width; };

    std::size_t best = n;  // sentinel: none found yet
    double best_dist = 0.0, best_ccw = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        if (hist.density[s] >= threshold) continue;
        const double ccw = wrap_angle(center(s) - target);
        const double d = std::min(ccw, 2.0 * M_PI - ccw);
        if (best == n || d < best_dist - 1e-12 ||
            (std::abs(d - best_dist) <= 1e-12 && ccw < best_ccw)) {
            best = s;
            best_dist = d;
            best_ccw = ccw;
        }
    }
    if (best == n) {  // everything blocked: take the least dense sector
        best = 0;
        for (std::size_t s = 1; s < n; ++s)
            if (hist.density[s] < hist.density[best]) best = s;
    }
    return center(best);
}

ControlInput vfh_step(const Scan2D& scan, const AgentState& x, const Vec2& target_global,
                      const VfhParams& params, const LeaderGains& gains,
                      const InputSet& input_set) {
    const Vec2 d = target_global - x.pos;
    const double target_bearing = wrap_angle(std::atan2(d.y, d.x) - x.heading);
    const PolarHistogram hist = build_histogram(scan, params.sectors);
    const double dir_body = select_direction(hist, target_bearing, params.threshold);
    const double dir_global = x.heading + dir_body;
    const Vec2 carrot = x.pos + Vec2{std::cos(dir_global), std::sin(dir_global)} * params.carrot_distance;
    return reactive_control(carrot, x, gains, input_set);
}

ControlInput vfh_follower_step(std::span<const NeighborSnapshot> neighbors, const Scan2D& scan,
                               const AgentState& x, const VfhParams& params,
                               const LeaderGains& gains, const InputSet& input_set) {
    if (neighbors.empty()) return {0.0, 0.0};
    std::map<int, int> levels;
    for (const NeighborSnapshot& nb : neighbors) levels[nb.id] = nb.hierarchy;
    const std::map<int, double> w = position_weights(levels);
    Vec2 target{0.0, 0.0};
    for (const NeighborSnapshot& nb : neighbors) target += w.at(nb.id) * snapshot_at(nb, 0).pos;
    return vfh_step(scan, x, target, params, gains, input_set);
}

}  // namespace flocknav

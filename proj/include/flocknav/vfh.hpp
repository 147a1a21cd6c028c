#pragma once

#include <span>
#include <vector>

#include "flocknav/dynamics.hpp"
#include "flocknav/flocking.hpp"
#include "flocknav/leader.hpp"
#include "flocknav/pointcloud.hpp"

namespace flocknav {

struct VfhParams {
    int sectors = 36;
    double threshold = 1.0;        // density below this marks a sector free
    double carrot_distance = 1.0;  // metres to the virtual steering point
};

// Sector occupancy densities over the body frame [0, 2*pi). Each hit beam adds
// range_max - range to its sector; misses add nothing.
struct PolarHistogram {
    std::vector<double> density;
    double sector_width = 0.0;
};

PolarHistogram build_histogram(const Scan2D& scan, int sectors);

// Center bearing of the chosen sector (body frame). Free sectors closest to
// the target bearing win, angular ties preferring the counterclockwise side;
// with no free sector the lowest-density sector is chosen (lowest index on
// ties).
double select_direction(const PolarHistogram& hist, double target_bearing, double threshold);

// One reactive step toward a virtual point carrot_distance along the chosen
// direction.
ControlInput vfh_step(const Scan2D& scan, const AgentState& x, const Vec2& target_global,
                      const VfhParams& params, const LeaderGains& gains,
                      const InputSet& input_set);

// Baseline follower: steers toward the hierarchy-weighted average neighbor
// position. No neighbors means no target, so the input is zero.
ControlInput vfh_follower_step(std::span<const NeighborSnapshot> neighbors, const Scan2D& scan,
                               const AgentState& x, const VfhParams& params,
                               const LeaderGains& gains, const InputSet& input_set);

}  // namespace flocknav

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flocknav/geometry.hpp"

namespace flocknav {

// One planar range scan in the sensing body's frame. Beam b points at
// angle_min + b * angle_increment, counterclockwise from the body's heading.
// Ranges beyond range_max mark beams that hit nothing.
struct Scan2D {
    std::vector<double> ranges;
    double range_max = 5.0;
    double angle_min = 0.0;
    double angle_increment = 0.0;
};

inline Scan2D make_scan(int beams, double range_max) {
    Scan2D s;
    s.ranges.assign(static_cast<std::size_t>(beams), range_max + 1.0);
    s.range_max = range_max;
    s.angle_increment = 2.0 * M_PI / beams;
    return s;
}

// Body-frame point with its originating beam.
struct BodyPoint {
    Vec2 p{0.0, 0.0};
    int beam = 0;
    double range = 0.0;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

struct VoxelSpec {
    double dx = 0.5, dy = 0.5, dz = 0.5;
};

// Converts hit beams to Cartesian body-frame points; no-hit beams are dropped.
std::vector<BodyPoint> scan_to_body_points(const Scan2D& scan);

// Travel-plane normal in the body frame: p_bar - p rotated into the body.
// Returns nullopt when p_bar and p coincide (no travel direction).
std::optional<Vec2> body_normal(const Vec2& p_bar_global, const Vec2& p_global, double heading);

// Keeps points on or ahead of the travel plane: <normal, p> >= 0.
std::vector<BodyPoint> directional_filter(std::span<const BodyPoint> points, const Vec2& normal);

// Splits the ordered list into consecutive groups of group_size (last group may
// be shorter) and keeps the nearest point of each group; range ties keep the
// earlier point.
std::vector<BodyPoint> downsample_2d(std::span<const BodyPoint> points, int group_size);

// Buckets points into voxels floor(p / d) and keeps, per voxel, the point with
// the smallest squared norm; ties keep the lowest input index. Returns kept
// indices in ascending order.
std::vector<std::size_t> voxel_downsample_3d(std::span<const Vec3> points, const VoxelSpec& spec);

// Drops points within exclusion_radius of any given center (same frame).
std::vector<BodyPoint> exclude_neighbors(std::span<const BodyPoint> points,
                                         std::span<const Vec2> centers, double exclusion_radius);

struct Pose {
    Vec2 pos{0.0, 0.0};
    double heading = 0.0;
};

// Full per-tick pipeline: scan -> body points -> directional filter (skipped
// when the normal is degenerate) -> 2D down-sample -> neighbor exclusion ->
// world frame. neighbor_positions are world-frame centers.
std::vector<Vec2> process_scan(const Scan2D& scan, const Pose& pose, const Vec2& p_bar_global,
                               std::span<const Vec2> neighbor_positions, int group_size,
                               double exclusion_radius);

// Plain-text cloud I/O used by tests: one-line header "x y z", then one point
// per row.
void save_cloud(const std::string& path, std::span<const Vec3> points);
std::vector<Vec3> load_cloud(const std::string& path);

}  // namespace flocknav

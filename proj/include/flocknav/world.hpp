#pragma once

#include <span>
#include <variant>
#include <vector>

#include "flocknav/geometry.hpp"
#include "flocknav/pointcloud.hpp"

namespace flocknav {

struct CircleObstacle {
    Vec2 center{0.0, 0.0};
    double radius = 0.0;
};

struct SegmentObstacle {
    Vec2 a{0.0, 0.0};
    Vec2 b{0.0, 0.0};
};

// Axis-aligned rectangle, sensed and measured as its four edges.
struct RectObstacle {
    Vec2 lo{0.0, 0.0};
    Vec2 hi{0.0, 0.0};
};

using Obstacle = std::variant<CircleObstacle, SegmentObstacle, RectObstacle>;

struct SensorSpec {
    int beams = 720;
    double range_max = 5.0;
};

// First hit distance along a ray, or a miss. Distances <= 0 are ignored.
double ray_circle(const Vec2& origin, const Vec2& dir, const CircleObstacle& c);
double ray_segment(const Vec2& origin, const Vec2& dir, const SegmentObstacle& s);

// Simulates one scan: beams sweep counterclockwise starting at the pose
// heading. Beams with no hit within range_max report range_max + 1.
// extra_circles lets callers add other agents' bodies.
Scan2D raycast(const Pose& pose, std::span<const Obstacle> obstacles,
               std::span<const CircleObstacle> extra_circles, const SensorSpec& spec);

// Exact distance from a point to the nearest obstacle boundary.
double min_clearance(const Vec2& p, std::span<const Obstacle> obstacles);

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace flocknav

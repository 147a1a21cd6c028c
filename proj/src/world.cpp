#include "flocknav/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace flocknav {

namespace {

constexpr double kMiss = std::numeric_limits<double>::infinity();
constexpr double kHitEps = 1e-12;  // rejects zero-length self hits

std::array<SegmentObstacle, 4> rect_edges(const RectObstacle& r) {
    const Vec2 bl = r.lo, br{r.hi.x, r.lo.y}, tr = r.hi, tl{r.lo.x, r.hi.y};
    return {SegmentObstacle{bl, br}, SegmentObstacle{br, tr}, SegmentObstacle{tr, tl},
            SegmentObstacle{tl, bl}};
}

double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

}  // namespace

double ray_circle(const Vec2& origin, const Vec2& dir, const CircleObstacle& c) {
    const Vec2 m = origin - c.center;
    const double b = dot(m, dir);
    const double c0 = norm_sq(m) - c.radius * c.radius;
    const double disc = b * b - c0;
    if (disc < 0.0) return kMiss;
    const double root = std::sqrt(disc);
    double t = -b - root;
    if (t <= kHitEps) t = -b + root;  // origin inside or past the near face
    return t > kHitEps ? t : kMiss;
}

double ray_segment(const Vec2& origin, const Vec2& dir, const SegmentObstacle& s) {
    const Vec2 e = s.b - s.a;
    const double denom = cross(dir, e);
    if (std::abs(denom) < 1e-15) return kMiss;  // parallel
    const Vec2 w = s.a - origin;
    const double t = cross(w, e) / denom;
    const double u = cross(w, dir) / denom;
    if (t <= kHitEps || u < 0.0 || u > 1.0) return kMiss;
    return t;
}

namespace {

double ray_obstacle(const Vec2& origin, const Vec2& dir, const Obstacle& obs) {
    return std::visit(
        [&](const auto& shape) -> double {
            using T = std::decay_t<decltype(shape)>;
            if constexpr (std::is_same_v<T, CircleObstacle>) {
                return ray_circle(origin, dir, shape);
            } else if constexpr (std::is_same_v<T, SegmentObstacle>) {
                return ray_segment(origin, dir, shape);
            } else {
                double best = kMiss;
                for (const SegmentObstacle& edge : rect_edges(shape))
                    best = std::min(best, ray_segment(origin, dir, edge));
                return best;
            }
        },
        obs);
}

}  // namespace

Scan2D raycast(const Pose& pose, std::span<const Obstacle> obstacles,
               std::span<const CircleObstacle> extra_circles, const SensorSpec& spec) {
    Scan2D scan = make_scan(spec.beams, spec.range_max);
    for (int b = 0; b < spec.beams; ++b) {
        const double angle = pose.heading + scan.angle_min + b * scan.angle_increment;
        const Vec2 dir{std::cos(angle), std::sin(angle)};
        double best = kMiss;
        for (const Obstacle& obs : obstacles)
            best = std::min(best, ray_obstacle(pose.pos, dir, obs));
        for (const CircleObstacle& c : extra_circles)
            best = std::min(best, ray_circle(pose.pos, dir, c));
        if (best <= spec.range_max) scan.ranges[static_cast<std::size_t>(b)] = best;
    }
    return scan;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 e = b - a;
    const double len_sq = norm_sq(e);
    if (len_sq == 0.0) return dist(p, a);
    const double t = std::clamp(dot(p - a, e) / len_sq, 0.0, 1.0);
    return dist(p, a + t * e);
}

double min_clearance(const Vec2& p, std::span<const Obstacle> obstacles) {
    double best = std::numeric_limits<double>::infinity();
    for (const Obstacle& obs : obstacles) {
        const double d = std::visit(
            [&](const auto& shape) -> double {
                using T = std::decay_t<decltype(shape)>;
                if constexpr (std::is_same_v<T, CircleObstacle>) {
                    return std::abs(dist(p, shape.center) - shape.radius);
                } else if constexpr (std::is_same_v<T, SegmentObstacle>) {
                    return point_segment_distance(p, shape.a, shape.b);
                } else {
                    double d_min = std::numeric_limits<double>::infinity();
                    for (const SegmentObstacle& edge : rect_edges(shape))
                        d_min = std::min(d_min, point_segment_distance(p, edge.a, edge.b));
                    return d_min;
                }
            },
            obs);
        best = std::min(best, d);
    }
    return best;
}

}  // namespace flocknav

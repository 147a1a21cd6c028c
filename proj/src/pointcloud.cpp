#include "flocknav/pointcloud.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <tuple>

#include "flocknav/errors.hpp"

namespace flocknav {

std::vector<BodyPoint> scan_to_body_points(const Scan2D& scan) {
    std::vector<BodyPoint> points;
    points.reserve(scan.ranges.size());
    for (std::size_t b = 0; b < scan.ranges.size(); ++b) {
        const double r = scan.ranges[b];
        if (r > scan.range_max) continue;
        const double angle = scan.angle_min + static_cast<double>(b) * scan.angle_increment;
        points.push_back({{r * std::cos(angle), r * std::sin(angle)}, static_cast<int>(b), r});
    }
    return points;
}

std::optional<Vec2> body_normal(const Vec2& p_bar_global, const Vec2& p_global, double heading) {
    const Vec2 d = p_bar_global - p_global;
    if (norm(d) < 1e-9) return std::nullopt;
    return world_to_body(d, heading);
}

std::vector<BodyPoint> directional_filter(std::span<const BodyPoint> points, const Vec2& normal) {
    std::vector<BodyPoint> kept;
    kept.reserve(points.size());
    for (const BodyPoint& pt : points)
        if (dot(normal, pt.p) >= 0.0) kept.push_back(pt);
    return kept;
}

std::vector<BodyPoint> downsample_2d(std::span<const BodyPoint> points, int group_size) {
    std::vector<BodyPoint> kept;
    if (group_size < 1) group_size = 1;
    for (std::size_t start = 0; start < points.size(); start += static_cast<std::size_t>(group_size)) {
        const std::size_t end =
            std::min(points.size(), start + static_cast<std::size_t>(group_size));
        std::size_t best = start;
        for (std::size_t i = start + 1; i < end; ++i)
            if (points[i].range < points[best].range) best = i;
        kept.push_back(points[best]);
    }
    return kept;
}

std::vector<std::size_t> voxel_downsample_3d(std::span<const Vec3> points, const VoxelSpec& spec) {
    using Key = std::tuple<long long, long long, long long>;
    std::map<Key, std::size_t> survivor;  // voxel -> index of current best point
    auto norm3_sq = [](const Vec3& p) { return p.x * p.x + p.y * p.y + p.z * p.z; };
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3& p = points[i];
        const Key key{static_cast<long long>(std::floor(p.x / spec.dx)),
                      static_cast<long long>(std::floor(p.y / spec.dy)),
                      static_cast<long long>(std::floor(p.z / spec.dz))};
        auto [it, inserted] = survivor.try_emplace(key, i);
        if (!inserted && norm3_sq(p) < norm3_sq(points[it->second])) it->second = i;
    }
    std::vector<std::size_t> kept;
    kept.reserve(survivor.size());
    for (const auto& [key, idx] : survivor) kept.push_back(idx);
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::vector<BodyPoint> exclude_neighbors(std::span<const BodyPoint> points,
                                         std::span<const Vec2> centers, double exclusion_radius) {
    std::vector<BodyPoint> kept;
    kept.reserve(points.size());
    const double radius_sq = exclusion_radius * exclusion_radius;
    for (const BodyPoint& pt : points) {
        bool near_neighbor = false;
        for (const Vec2& c : centers) {
            if (dist_sq(pt.p, c) <= radius_sq) {
                near_neighbor = true;
                break;
            }
        }
        if (!near_neighbor) kept.push_back(pt);
    }
    return kept;
}

std::vector<Vec2> process_scan(const Scan2D& scan, const Pose& pose, const Vec2& p_bar_global,
                               std::span<const Vec2> neighbor_positions, int group_size,
                               double exclusion_radius) {
    std::vector<BodyPoint> points = scan_to_body_points(scan);
    if (const auto normal = body_normal(p_bar_global, pose.pos, pose.heading))
        points = directional_filter(points, *normal);
    points = downsample_2d(points, group_size);

    std::vector<Vec2> body_centers;
    body_centers.reserve(neighbor_positions.size());
    for (const Vec2& c : neighbor_positions)
        body_centers.push_back(world_to_body(c - pose.pos, pose.heading));
    points = exclude_neighbors(points, body_centers, exclusion_radius);

    std::vector<Vec2> world;
    world.reserve(points.size());
    for (const BodyPoint& pt : points) world.push_back(pose.pos + body_to_world(pt.p, pose.heading));
    return world;
}

void save_cloud(const std::string& path, std::span<const Vec3> points) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open cloud file for writing: " + path);
    out << "x y z\n";
    out.precision(17);
    for (const Vec3& p : points) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
}

std::vector<Vec3> load_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open cloud file: " + path);
    std::string header;
    std::getline(in, header);
    std::vector<Vec3> points;
    Vec3 p;
    while (in >> p.x >> p.y >> p.z) points.push_back(p);
    return points;
}

}  // namespace flocknav

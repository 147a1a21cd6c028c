#pragma once

#include <cmath>

namespace flocknav {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm_sq(const Vec2& v) { return v.x * v.x + v.y * v.y; }
inline double norm(const Vec2& v) { return std::sqrt(norm_sq(v)); }
inline double dist_sq(const Vec2& a, const Vec2& b) { return norm_sq(a - b); }
inline double dist(const Vec2& a, const Vec2& b) { return norm(a - b); }

// Rotates a world-frame vector into the frame of a body with heading psi.
inline Vec2 world_to_body(const Vec2& v, double psi) {
    const double c = std::cos(psi), s = std::sin(psi);
    return {c * v.x + s * v.y, -s * v.x + c * v.y};
}

// Rotates a body-frame vector into the world frame for a body with heading psi.
inline Vec2 body_to_world(const Vec2& v, double psi) {
    const double c = std::cos(psi), s = std::sin(psi);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Maps any angle into [0, 2*pi).
inline double wrap_angle(double theta) {
    const double two_pi = 2.0 * M_PI;
    double w = theta - two_pi * std::floor(theta / two_pi);
    if (w >= two_pi) w = 0.0;  // guards against floor rounding at the seam
    return w;
}

// Shortest signed turn, in (-pi, pi].
inline double wrap_signed(double theta) {
    const double w = wrap_angle(theta);
    return w > M_PI ? w - 2.0 * M_PI : w;
}

}  // namespace flocknav

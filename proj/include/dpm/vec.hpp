#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>

namespace dpm {

constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}
    explicit constexpr Vec3(double s) : x(s), y(s), z(s) {}

    constexpr Vec3 operator+(const Vec3& b) const { return {x + b.x, y + b.y, z + b.z}; }
    constexpr Vec3 operator-(const Vec3& b) const { return {x - b.x, y - b.y, z - b.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    // componentwise product, used for RGB throughput
    constexpr Vec3 operator*(const Vec3& b) const { return {x * b.x, y * b.y, z * b.z}; }
    constexpr Vec3 operator/(const Vec3& b) const { return {x / b.x, y / b.y, z / b.z}; }

    Vec3& operator+=(const Vec3& b) { x += b.x; y += b.y; z += b.z; return *this; }
    Vec3& operator-=(const Vec3& b) { x -= b.x; y -= b.y; z -= b.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    Vec3& operator*=(const Vec3& b) { x *= b.x; y *= b.y; z *= b.z; return *this; }
    Vec3& operator/=(double s) { x /= s; y /= s; z /= s; return *this; }

    constexpr bool operator==(const Vec3& b) const { return x == b.x && y == b.y && z == b.z; }

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    double length_squared() const { return x * x + y * y + z * z; }
    double length() const { return std::sqrt(length_squared()); }
    double max_component() const { return x > y ? (x > z ? x : z) : (y > z ? y : z); }
    double min_component() const { return x < y ? (x < z ? x : z) : (y < z ? y : z); }
    bool all_finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
    bool all_nonnegative() const { return x >= 0.0 && y >= 0.0 && z >= 0.0; }
};

/// RGB triples share the vector representation; x/y/z read as r/g/b.
using Rgb = Vec3;

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline Vec3 normalize(const Vec3& v) { return v / v.length(); }

inline Vec3 min(const Vec3& a, const Vec3& b) {
    return {a.x < b.x ? a.x : b.x, a.y < b.y ? a.y : b.y, a.z < b.z ? a.z : b.z};
}

inline Vec3 max(const Vec3& a, const Vec3& b) {
    return {a.x > b.x ? a.x : b.x, a.y > b.y ? a.y : b.y, a.z > b.z ? a.z : b.z};
}

inline Vec3 clamp01(const Vec3& v) {
    auto c = [](double t) { return t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t); };
    return {c(v.x), c(v.y), c(v.z)};
}

/// Mirror reflection of a direction `d` traveling into a surface with normal `n`.
inline Vec3 reflect(const Vec3& d, const Vec3& n) { return d - 2.0 * dot(d, n) * n; }

inline std::ostream& operator<<(std::ostream& os, const Vec3& v) {
    return os << v.x << ' ' << v.y << ' ' << v.z;
}

struct Vec2 {
    double x = 0.0, y = 0.0;
};

}  // namespace dpm

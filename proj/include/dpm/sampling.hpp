#pragma once

#include "dpm/rng.hpp"
#include "dpm/vec.hpp"

namespace dpm {

/// Uniform point on the unit disk (concentric map keeps stratification; plain
/// polar is fine here and easier to reason about for the uniformity test).
inline Vec2 sample_disk(RngStream& rng) {
    double r = std::sqrt(rng.next_double());
    double phi = rng.uniform(0.0, 2.0 * kPi);
    return {r * std::cos(phi), r * std::sin(phi)};
}

/// Cosine-weighted direction in the upper hemisphere (+z), pdf = cos(theta)/pi.
inline Vec3 sample_cosine_hemisphere(RngStream& rng) {
    Vec2 d = sample_disk(rng);
    double z2 = 1.0 - d.x * d.x - d.y * d.y;
    return {d.x, d.y, std::sqrt(z2 > 0.0 ? z2 : 0.0)};
}

/// Uniform point on the rectangle corner + u*edge_u + v*edge_v, pdf 1/area.
inline Vec3 sample_rect(const Vec3& corner, const Vec3& edge_u, const Vec3& edge_v, RngStream& rng) {
    return corner + rng.next_double() * edge_u + rng.next_double() * edge_v;
}

/// Uniform point on a triangle, pdf 1/area.
inline Vec3 sample_triangle(const Vec3& a, const Vec3& b, const Vec3& c, RngStream& rng) {
    double su = std::sqrt(rng.next_double());
    double v = rng.next_double();
    return (1.0 - su) * a + su * (1.0 - v) * b + su * v * c;
}

}  // namespace dpm

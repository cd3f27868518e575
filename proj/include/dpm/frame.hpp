#pragma once

#include <stdexcept>

#include "dpm/rng.hpp"
#include "dpm/vec.hpp"

namespace dpm {

/// Local coordinate frame of a shading point: right-handed orthonormal basis
/// {tangent, bitangent, normal} anchored at origin. The tangent direction is
/// sampled uniformly in the tangent plane and then kept, so any consumer of a
/// recorded frame reproduces identical local coordinates.
struct Frame {
    Vec3 origin;
    Vec3 normal;
    Vec3 tangent;
    Vec3 bitangent;
};

inline Frame build_frame(const Vec3& position, const Vec3& normal, RngStream& rng) {
    double len = normal.length();
    if (!(len > 1e-12)) throw std::invalid_argument("build_frame: zero-length normal");
    Vec3 n = normal / len;

    // Any helper axis not parallel to n, then rotate the seed tangent by a
    // uniform angle around n.
    Vec3 helper = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    Vec3 t0 = normalize(cross(helper, n));
    Vec3 b0 = cross(n, t0);
    double phi = rng.uniform(0.0, 2.0 * kPi);
    Vec3 tangent = std::cos(phi) * t0 + std::sin(phi) * b0;
    Vec3 bitangent = cross(n, tangent);
    return Frame{position, n, tangent, bitangent};
}

/// Deterministic frame from an explicit tangent (e.g. one recorded in a
/// ground-truth image). The tangent is re-orthogonalized against the normal.
inline Frame frame_from_tangent(const Vec3& position, const Vec3& normal, const Vec3& tangent) {
    Vec3 n = normalize(normal);
    Vec3 t = tangent - dot(tangent, n) * n;
    double len = t.length();
    if (!(len > 1e-12)) throw std::invalid_argument("frame_from_tangent: tangent parallel to normal");
    t = t / len;
    return Frame{position, n, t, cross(n, t)};
}

/// Point into frame coordinates (translation + rotation).
inline Vec3 to_local(const Frame& f, const Vec3& p) {
    Vec3 d = p - f.origin;
    return {dot(d, f.tangent), dot(d, f.bitangent), dot(d, f.normal)};
}

/// Direction into frame coordinates (rotation only).
inline Vec3 to_local_dir(const Frame& f, const Vec3& d) {
    return {dot(d, f.tangent), dot(d, f.bitangent), dot(d, f.normal)};
}

inline Vec3 from_local(const Frame& f, const Vec3& p) {
    return f.origin + p.x * f.tangent + p.y * f.bitangent + p.z * f.normal;
}

inline Vec3 from_local_dir(const Frame& f, const Vec3& d) {
    return d.x * f.tangent + d.y * f.bitangent + d.z * f.normal;
}

}  // namespace dpm

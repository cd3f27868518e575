#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "dpm/vec.hpp"

namespace dpm {

constexpr double kRayEpsilon = 1e-4;  // minimum t for a valid hit, scene units
constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit length
};

struct Aabb {
    Vec3 lo{kInfinity, kInfinity, kInfinity};
    Vec3 hi{-kInfinity, -kInfinity, -kInfinity};

    void grow(const Vec3& p) { lo = min(lo, p); hi = max(hi, p); }
    void grow(const Aabb& b) { lo = min(lo, b.lo); hi = max(hi, b.hi); }
    Vec3 center() const { return 0.5 * (lo + hi); }
    bool contains(const Vec3& p, double eps = 1e-9) const {
        return p.x >= lo.x - eps && p.y >= lo.y - eps && p.z >= lo.z - eps &&
               p.x <= hi.x + eps && p.y <= hi.y + eps && p.z <= hi.z + eps;
    }

    // Slab test against [tmin, tmax]; updates nothing, only answers.
    bool hit(const Ray& r, double tmin, double tmax) const {
        for (int a = 0; a < 3; ++a) {
            double inv = 1.0 / r.dir[a];
            double t0 = (lo[a] - r.origin[a]) * inv;
            double t1 = (hi[a] - r.origin[a]) * inv;
            if (inv < 0.0) std::swap(t0, t1);
            tmin = t0 > tmin ? t0 : tmin;
            tmax = t1 < tmax ? t1 : tmax;
            if (tmax < tmin) return false;
        }
        return true;
    }
};

/// Ray/sphere. Returns smallest t > tmin or infinity.
inline double intersect_sphere(const Ray& r, const Vec3& center, double radius, double tmin) {
    Vec3 oc = r.origin - center;
    double b = dot(oc, r.dir);
    double c = oc.length_squared() - radius * radius;
    double disc = b * b - c;
    if (disc < 0.0) return kInfinity;
    double s = std::sqrt(disc);
    double t = -b - s;
    if (t > tmin) return t;
    t = -b + s;
    if (t > tmin) return t;
    return kInfinity;
}

/// Ray/axis-aligned box. Returns entry (or exit when inside) t > tmin.
inline double intersect_box(const Ray& r, const Aabb& box, double tmin) {
    double t0 = -kInfinity, t1 = kInfinity;
    for (int a = 0; a < 3; ++a) {
        double inv = 1.0 / r.dir[a];
        double ta = (box.lo[a] - r.origin[a]) * inv;
        double tb = (box.hi[a] - r.origin[a]) * inv;
        if (inv < 0.0) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t1 < t0) return kInfinity;
    }
    if (t0 > tmin) return t0;
    if (t1 > tmin) return t1;
    return kInfinity;
}

inline Vec3 box_normal(const Aabb& box, const Vec3& p) {
    // Face with the smallest distance to p wins.
    double best = kInfinity;
    Vec3 n{1, 0, 0};
    for (int a = 0; a < 3; ++a) {
        double dlo = std::abs(p[a] - box.lo[a]);
        double dhi = std::abs(p[a] - box.hi[a]);
        if (dlo < best) { best = dlo; n = {}; n[a] = -1.0; }
        if (dhi < best) { best = dhi; n = {}; n[a] = 1.0; }
    }
    return n;
}

/// Ray/parallelogram (corner + u*eu + v*ev, u,v in [0,1]).
inline double intersect_rect(const Ray& r, const Vec3& corner, const Vec3& eu, const Vec3& ev,
                             const Vec3& unit_n, double tmin) {
    double denom = dot(r.dir, unit_n);
    if (std::abs(denom) < 1e-12) return kInfinity;
    double t = dot(corner - r.origin, unit_n) / denom;
    if (t <= tmin) return kInfinity;
    Vec3 p = r.origin + t * r.dir - corner;
    double uu = dot(eu, eu), vv = dot(ev, ev), uv = dot(eu, ev);
    double pu = dot(p, eu), pv = dot(p, ev);
    double det = uu * vv - uv * uv;
    if (std::abs(det) < 1e-18) return kInfinity;
    double u = (pu * vv - pv * uv) / det;
    double v = (pv * uu - pu * uv) / det;
    if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) return kInfinity;
    return t;
}

/// Moller-Trumbore. Returns t or infinity; barycentrics not needed here.
inline double intersect_triangle(const Ray& r, const Vec3& a, const Vec3& b, const Vec3& c,
                                 double tmin) {
    Vec3 e1 = b - a, e2 = c - a;
    Vec3 pv = cross(r.dir, e2);
    double det = dot(e1, pv);
    if (std::abs(det) < 1e-14) return kInfinity;
    double inv_det = 1.0 / det;
    Vec3 tv = r.origin - a;
    double u = dot(tv, pv) * inv_det;
    if (u < 0.0 || u > 1.0) return kInfinity;
    Vec3 qv = cross(tv, e1);
    double v = dot(r.dir, qv) * inv_det;
    if (v < 0.0 || u + v > 1.0) return kInfinity;
    double t = dot(e2, qv) * inv_det;
    return t > tmin ? t : kInfinity;
}

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
};

/// Flat median-split BVH over a triangle mesh. Built once, queried read-only.
class MeshBvh {
public:
    MeshBvh() = default;

    explicit MeshBvh(const TriMesh& mesh) : mesh_(&mesh) {
        size_t n = mesh.triangles.size();
        tri_order_.resize(n);
        std::vector<Aabb> tri_bounds(n);
        std::vector<Vec3> centroids(n);
        for (size_t i = 0; i < n; ++i) {
            tri_order_[i] = static_cast<std::uint32_t>(i);
            const auto& t = mesh.triangles[i];
            Aabb b;
            b.grow(mesh.vertices[t[0]]);
            b.grow(mesh.vertices[t[1]]);
            b.grow(mesh.vertices[t[2]]);
            tri_bounds[i] = b;
            centroids[i] = b.center();
        }
        nodes_.reserve(2 * n);
        build(0, n, tri_bounds, centroids);
    }

    const Aabb& bounds() const { return nodes_.empty() ? empty_ : nodes_[0].box; }

    /// Nearest triangle hit with t in (tmin, t_best). Returns triangle index or -1.
    int intersect(const Ray& r, double tmin, double& t_best) const {
        if (nodes_.empty()) return -1;
        int hit = -1;
        std::uint32_t stack[64];
        int sp = 0;
        stack[sp++] = 0;
        while (sp) {
            const Node& node = nodes_[stack[--sp]];
            if (!node.box.hit(r, tmin, t_best)) continue;
            if (node.count > 0) {
                for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                    std::uint32_t tri = tri_order_[i];
                    const auto& tv = mesh_->triangles[tri];
                    double t = intersect_triangle(r, mesh_->vertices[tv[0]], mesh_->vertices[tv[1]],
                                                  mesh_->vertices[tv[2]], tmin);
                    if (t < t_best) { t_best = t; hit = static_cast<int>(tri); }
                }
            } else {
                // inner node: left child is adjacent, right child index stored
                stack[sp++] = node.first;
                stack[sp++] = static_cast<std::uint32_t>(&node - nodes_.data()) + 1;
            }
        }
        return hit;
    }

private:
    struct Node {
        Aabb box;
        std::uint32_t first = 0;  // leaf: offset into tri_order_; inner: left child
        std::uint32_t count = 0;  // 0 for inner nodes
    };

    std::uint32_t build(size_t lo, size_t hi, const std::vector<Aabb>& tri_bounds,
                        const std::vector<Vec3>& centroids) {
        Node node;
        for (size_t i = lo; i < hi; ++i) node.box.grow(tri_bounds[tri_order_[i]]);
        std::uint32_t idx = static_cast<std::uint32_t>(nodes_.size());
        nodes_.push_back(node);
        size_t n = hi - lo;
        if (n <= 4) {
            nodes_[idx].first = static_cast<std::uint32_t>(lo);
            nodes_[idx].count = static_cast<std::uint32_t>(n);
            return idx;
        }
        Vec3 extent = node.box.hi - node.box.lo;
        int axis = extent.x > extent.y ? (extent.x > extent.z ? 0 : 2)
                                       : (extent.y > extent.z ? 1 : 2);
        size_t mid = lo + n / 2;
        std::nth_element(tri_order_.begin() + lo, tri_order_.begin() + mid, tri_order_.begin() + hi,
                         [&](std::uint32_t a, std::uint32_t b) {
                             double ca = centroids[a][axis], cb = centroids[b][axis];
                             return ca < cb || (ca == cb && a < b);
                         });
        build(lo, mid, tri_bounds, centroids);  // left child lands at idx + 1
        std::uint32_t right = build(mid, hi, tri_bounds, centroids);
        nodes_[idx].first = right;
        nodes_[idx].count = 0;
        return idx;
    }

    const TriMesh* mesh_ = nullptr;
    std::vector<std::uint32_t> tri_order_;
    std::vector<Node> nodes_;
    Aabb empty_;
};

inline Vec3 triangle_normal(const TriMesh& mesh, int tri) {
    const auto& t = mesh.triangles[tri];
    return normalize(cross(mesh.vertices[t[1]] - mesh.vertices[t[0]],
                           mesh.vertices[t[2]] - mesh.vertices[t[0]]));
}

}  // namespace dpm

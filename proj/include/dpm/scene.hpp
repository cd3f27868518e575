#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpm/geometry.hpp"
#include "dpm/vec.hpp"

namespace dpm {

enum class MaterialKind { Diffuse, Mirror, Dielectric };

struct Material {
    MaterialKind kind = MaterialKind::Diffuse;
    Rgb albedo{0.5, 0.5, 0.5};  // diffuse only
    double ior = 1.5;           // dielectric only

    static Material diffuse(const Rgb& albedo) { return {MaterialKind::Diffuse, albedo, 1.5}; }
    static Material mirror() { return {MaterialKind::Mirror, Rgb{0, 0, 0}, 1.5}; }
    static Material dielectric(double ior) { return {MaterialKind::Dielectric, Rgb{0, 0, 0}, ior}; }
    bool is_specular() const { return kind != MaterialKind::Diffuse; }
};

/// Rectangular Lambertian emitter. Emits from the side faced by
/// normalize(edge_u x edge_v) with total radiant power `power` (watts, RGB).
struct AreaLight {
    Vec3 corner;
    Vec3 edge_u;
    Vec3 edge_v;
    Rgb power;

    Vec3 normal() const { return normalize(cross(edge_u, edge_v)); }
    double area() const { return cross(edge_u, edge_v).length(); }
};

enum class PrimitiveKind { Sphere, Box, Rect, Mesh };

struct Primitive {
    PrimitiveKind kind = PrimitiveKind::Sphere;
    Material material;

    // sphere
    Vec3 center;
    double radius = 1.0;
    // box
    Aabb box;
    // rect
    Vec3 corner, edge_u, edge_v;
    // mesh
    std::shared_ptr<TriMesh> mesh;
    std::shared_ptr<MeshBvh> bvh;

    Aabb bounds() const {
        Aabb b;
        switch (kind) {
            case PrimitiveKind::Sphere:
                b.grow(center - Vec3{radius, radius, radius});
                b.grow(center + Vec3{radius, radius, radius});
                break;
            case PrimitiveKind::Box:
                b = box;
                break;
            case PrimitiveKind::Rect:
                b.grow(corner);
                b.grow(corner + edge_u);
                b.grow(corner + edge_v);
                b.grow(corner + edge_u + edge_v);
                break;
            case PrimitiveKind::Mesh:
                b = bvh->bounds();
                break;
        }
        return b;
    }
};

struct Camera {
    Vec3 origin{0, 1, 3};
    Vec3 lookat{0, 1, 0};
    Vec3 up{0, 1, 0};
    double fov_deg = 60.0;  // vertical

    Ray primary_ray(int px, int py, int width, int height) const {
        Vec3 fwd = normalize(lookat - origin);
        Vec3 right = normalize(cross(fwd, up));
        Vec3 cam_up = cross(right, fwd);
        double half_h = std::tan(0.5 * fov_deg * kPi / 180.0);
        double half_w = half_h * static_cast<double>(width) / height;
        double sx = ((px + 0.5) / width * 2.0 - 1.0) * half_w;
        double sy = (1.0 - (py + 0.5) / height * 2.0) * half_h;
        return Ray{origin, normalize(fwd + sx * right + sy * cam_up)};
    }
};

struct Intersection {
    double t = kInfinity;
    Vec3 position;
    Vec3 normal;  // unit, oriented against the incident ray
    const Material* material = nullptr;
    int primitive = -1;
    bool front_face = true;  // the unflipped geometric normal faced the ray
};

struct Scene {
    std::vector<Primitive> primitives;
    std::vector<AreaLight> lights;
    Camera camera;

    Aabb bounds() const {
        Aabb b;
        for (const auto& p : primitives) b.grow(p.bounds());
        for (const auto& l : lights) {
            b.grow(l.corner);
            b.grow(l.corner + l.edge_u + l.edge_v);
        }
        return b;
    }

    void validate() const {
        if (lights.empty()) throw std::invalid_argument("scene: at least one light required");
        for (const auto& l : lights) {
            if (!(l.area() > 0.0)) throw std::invalid_argument("scene: light with zero area");
            if (!l.power.all_nonnegative()) throw std::invalid_argument("scene: negative light power");
        }
        for (const auto& p : primitives) {
            if (p.kind == PrimitiveKind::Mesh && (!p.mesh || p.mesh->triangles.empty()))
                throw std::invalid_argument("scene: empty mesh primitive");
            if (p.material.kind == MaterialKind::Diffuse) {
                const Rgb& a = p.material.albedo;
                if (!(a.all_nonnegative() && a.max_component() <= 1.0))
                    throw std::invalid_argument("scene: diffuse albedo outside [0,1]");
            }
        }
    }
};

/// Nearest hit with t > kRayEpsilon, or nullopt-like miss (t == infinity).
inline bool intersect(const Scene& scene, const Ray& ray, Intersection& out) {
    double best = kInfinity;
    int best_prim = -1;
    int best_tri = -1;
    for (size_t i = 0; i < scene.primitives.size(); ++i) {
        const Primitive& p = scene.primitives[i];
        double t = kInfinity;
        int tri = -1;
        switch (p.kind) {
            case PrimitiveKind::Sphere:
                t = intersect_sphere(ray, p.center, p.radius, kRayEpsilon);
                break;
            case PrimitiveKind::Box:
                t = intersect_box(ray, p.box, kRayEpsilon);
                break;
            case PrimitiveKind::Rect: {
                Vec3 n = normalize(cross(p.edge_u, p.edge_v));
                t = intersect_rect(ray, p.corner, p.edge_u, p.edge_v, n, kRayEpsilon);
                break;
            }
            case PrimitiveKind::Mesh: {
                double tb = best;
                tri = p.bvh->intersect(ray, kRayEpsilon, tb);
                if (tri >= 0) t = tb;
                break;
            }
        }
        if (t < best) {
            best = t;
            best_prim = static_cast<int>(i);
            best_tri = tri;
        }
    }
    if (best_prim < 0) return false;

    const Primitive& p = scene.primitives[best_prim];
    out.t = best;
    out.position = ray.origin + best * ray.dir;
    out.material = &p.material;
    out.primitive = best_prim;
    switch (p.kind) {
        case PrimitiveKind::Sphere:
            out.normal = normalize(out.position - p.center);
            break;
        case PrimitiveKind::Box:
            out.normal = box_normal(p.box, out.position);
            break;
        case PrimitiveKind::Rect:
            out.normal = normalize(cross(p.edge_u, p.edge_v));
            break;
        case PrimitiveKind::Mesh:
            out.normal = triangle_normal(*p.mesh, best_tri);
            break;
    }
    // two-sided surfaces: geometric normal faces the incoming ray
    out.front_face = dot(out.normal, ray.dir) <= 0.0;
    if (!out.front_face) out.normal = -out.normal;
    return true;
}

/// Sum of light powers; conservation tests compare stored flux against this.
inline Rgb total_emitted_power(const Scene& scene) {
    Rgb sum{0, 0, 0};
    for (const auto& l : scene.lights) sum += l.power;
    return sum;
}

}  // namespace dpm

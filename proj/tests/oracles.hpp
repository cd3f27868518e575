// Independent oracles used by the unit and acceptance suites. Everything here
// recomputes expected values through a route disjoint from the code under
// test: direct quadrature, rejection sampling, or exhaustive enumeration.
#pragma once

#include "dpm/dpm.hpp"

namespace oracles {

using namespace dpm;

/// Rectangular Lambertian emitter over a diffuse floor at y = 0. The light
/// points straight down; nearly every emitted photon lands on the floor.
struct FlatFloor {
    Scene scene;
    AreaLight light;
    Rgb floor_albedo;
};

inline FlatFloor make_flat_floor(double light_side = 0.2, double light_height = 0.3,
                                 double floor_half = 2.0, Rgb albedo = {0.8, 0.8, 0.8},
                                 Rgb power = {10, 10, 10}) {
    FlatFloor f;
    f.floor_albedo = albedo;
    Primitive floor;
    floor.kind = PrimitiveKind::Rect;
    floor.corner = {-floor_half, 0, -floor_half};
    floor.edge_u = {2 * floor_half, 0, 0};
    floor.edge_v = {0, 0, 2 * floor_half};
    floor.material = Material::diffuse(albedo);
    f.scene.primitives.push_back(floor);

    AreaLight l;
    // edge_u x edge_v points down (-y): emission toward the floor
    l.corner = {-0.5 * light_side, light_height, -0.5 * light_side};
    l.edge_u = {0, 0, light_side};
    l.edge_v = {light_side, 0, 0};
    l.power = power;
    f.scene.lights.push_back(l);
    f.light = l;

    f.scene.camera.origin = {0, 1.5, 1.5};
    f.scene.camera.lookat = {0, 0, 0};
    return f;
}

/// E(x) = integral over the light of L_e cos(theta_l) cos(theta_x) / d^2 dA,
/// L_e = P / (pi A): composite Simpson on a regular grid. Converges far below
/// the Monte Carlo noise of the estimators it checks.
inline Rgb quadrature_irradiance(const AreaLight& light, const Vec3& point, const Vec3& normal,
                                 int subdivisions = 128) {
    int n = subdivisions;  // even
    Vec3 ln = light.normal();
    double area = light.area();
    Rgb emitted_radiance = light.power / (kPi * area);
    auto integrand = [&](double u, double v) {
        Vec3 y = light.corner + u * light.edge_u + v * light.edge_v;
        Vec3 d = point - y;
        double dist2 = d.length_squared();
        double dist = std::sqrt(dist2);
        Vec3 w = d / dist;
        double cos_l = dot(ln, w);
        double cos_x = -dot(normal, w);
        if (cos_l <= 0.0 || cos_x <= 0.0) return 0.0;
        return cos_l * cos_x / dist2;
    };
    auto weight = [&](int i) { return i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0); };
    double acc = 0.0;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            acc += weight(i) * weight(j) * integrand(static_cast<double>(i) / n,
                                                     static_cast<double>(j) / n);
    acc *= area / (9.0 * n * n);
    return emitted_radiance * acc;
}

/// Closed box with six diffuse walls, a small light inside, no objects.
inline Scene make_furnace(Rgb wall_albedo = {1, 1, 1}, Rgb power = {6, 6, 6}) {
    Scene s;
    const double h = 1.0, H = 2.0;
    auto wall = [&](Vec3 c, Vec3 eu, Vec3 ev) {
        Primitive p;
        p.kind = PrimitiveKind::Rect;
        p.corner = c;
        p.edge_u = eu;
        p.edge_v = ev;
        p.material = Material::diffuse(wall_albedo);
        return p;
    };
    s.primitives.push_back(wall({-h, 0, -h}, {2 * h, 0, 0}, {0, 0, 2 * h}));
    s.primitives.push_back(wall({-h, H, -h}, {2 * h, 0, 0}, {0, 0, 2 * h}));
    s.primitives.push_back(wall({-h, 0, -h}, {2 * h, 0, 0}, {0, H, 0}));
    s.primitives.push_back(wall({-h, 0, h}, {2 * h, 0, 0}, {0, H, 0}));
    s.primitives.push_back(wall({-h, 0, -h}, {0, 0, 2 * h}, {0, H, 0}));
    s.primitives.push_back(wall({h, 0, -h}, {0, 0, 2 * h}, {0, H, 0}));
    AreaLight l;
    l.corner = {-0.1, 1.2, -0.1};
    l.edge_u = {0, 0, 0.2};
    l.edge_v = {0.2, 0, 0};
    l.power = power;
    s.lights.push_back(l);
    s.camera.origin = {0, 1, 0.9};
    s.camera.lookat = {0, 0.6, 0};
    return s;
}

/// Uniform random photon cloud for estimator and network tests.
inline PhotonDump random_cloud(size_t n, RngStream& rng, double extent = 1.0,
                               std::uint64_t n_paths = 1000) {
    PhotonDump dump;
    dump.n_paths = n_paths;
    dump.photons.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        Photon p;
        p.position = {rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                      rng.uniform(-extent, extent)};
        Vec3 d{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, -0.05)};
        p.dir = normalize(d);
        p.flux = {rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
        p.flags = photon_flags::pack(rng.next_double() < 0.5, 1 + (i % 4), true);
        dump.photons.push_back(p);
    }
    return dump;
}

inline ShadingPoint make_point(const Vec3& pos, const Vec3& normal, const Rgb& albedo,
                               std::uint64_t seed) {
    RngStream rng(seed, 0x5ade);
    return ShadingPoint{pos, normal, albedo, build_frame(pos, normal, rng)};
}

/// Random rotation matrix via a random unit axis and angle.
struct Rigid {
    Vec3 col0, col1, col2;  // rotation columns
    Vec3 translation;

    Vec3 rotate(const Vec3& v) const { return v.x * col0 + v.y * col1 + v.z * col2; }
    Vec3 apply(const Vec3& v) const { return rotate(v) + translation; }
};

inline Rigid random_rigid(RngStream& rng, double translate_extent = 5.0) {
    Vec3 axis = normalize(Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    double angle = rng.uniform(0, 2 * kPi);
    double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    Rigid r;
    r.col0 = {t * axis.x * axis.x + c, t * axis.x * axis.y + s * axis.z,
              t * axis.x * axis.z - s * axis.y};
    r.col1 = {t * axis.x * axis.y - s * axis.z, t * axis.y * axis.y + c,
              t * axis.y * axis.z + s * axis.x};
    r.col2 = {t * axis.x * axis.z + s * axis.y, t * axis.y * axis.z - s * axis.x,
              t * axis.z * axis.z + c};
    r.translation = {rng.uniform(-translate_extent, translate_extent),
                     rng.uniform(-translate_extent, translate_extent),
                     rng.uniform(-translate_extent, translate_extent)};
    return r;
}

/// Scene-level brute-force nearest hit that never touches the BVH path:
/// analytic primitives directly, meshes triangle by triangle.
inline bool brute_force_intersect(const Scene& scene, const Ray& ray, Intersection& out) {
    double best = kInfinity;
    int best_prim = -1;
    Vec3 best_normal;
    for (size_t i = 0; i < scene.primitives.size(); ++i) {
        const Primitive& p = scene.primitives[i];
        double t = kInfinity;
        Vec3 n;
        switch (p.kind) {
            case PrimitiveKind::Sphere:
                t = intersect_sphere(ray, p.center, p.radius, kRayEpsilon);
                if (t < kInfinity) n = normalize(ray.origin + t * ray.dir - p.center);
                break;
            case PrimitiveKind::Box:
                t = intersect_box(ray, p.box, kRayEpsilon);
                if (t < kInfinity) n = box_normal(p.box, ray.origin + t * ray.dir);
                break;
            case PrimitiveKind::Rect: {
                Vec3 rn = normalize(cross(p.edge_u, p.edge_v));
                t = intersect_rect(ray, p.corner, p.edge_u, p.edge_v, rn, kRayEpsilon);
                n = rn;
                break;
            }
            case PrimitiveKind::Mesh:
                for (size_t tri = 0; tri < p.mesh->triangles.size(); ++tri) {
                    const auto& tv = p.mesh->triangles[tri];
                    double tt = intersect_triangle(ray, p.mesh->vertices[tv[0]],
                                                   p.mesh->vertices[tv[1]],
                                                   p.mesh->vertices[tv[2]], kRayEpsilon);
                    if (tt < t) {
                        t = tt;
                        n = triangle_normal(*p.mesh, static_cast<int>(tri));
                    }
                }
                break;
        }
        if (t < best) {
            best = t;
            best_prim = static_cast<int>(i);
            best_normal = n;
        }
    }
    if (best_prim < 0) return false;
    out.t = best;
    out.position = ray.origin + best * ray.dir;
    out.primitive = best_prim;
    out.material = &scene.primitives[best_prim].material;
    out.front_face = dot(best_normal, ray.dir) <= 0.0;
    out.normal = out.front_face ? best_normal : -best_normal;
    return true;
}

}  // namespace oracles

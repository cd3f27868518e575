#pragma once

#include <cmath>
#include <map>

#include "dpm/frame.hpp"
#include "dpm/rng.hpp"
#include "dpm/sampling.hpp"
#include "dpm/scene.hpp"

namespace dpm {

struct SceneGenConfig {
    int min_objects = 1;
    int max_objects = 16;
    int min_lights = 1;   // light count distribution is a tunable, see README
    int max_lights = 4;
    double room_half = 2.0;   // room spans [-h, h] in x/z
    double room_height = 3.0; // y in [0, height]
};

namespace detail {

/// Icosphere with per-vertex low-frequency radial displacement, standing in
/// for the bump-mapped primitives of the training corpus.
inline TriMesh displaced_icosphere(RngStream& rng, int subdivisions, double bumpiness) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.vertices = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& v : m.vertices) v = normalize(v);
    m.triangles = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t a, std::uint32_t b) {
            auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            std::uint32_t idx = static_cast<std::uint32_t>(m.vertices.size());
            m.vertices.push_back(normalize(0.5 * (m.vertices[a] + m.vertices[b])));
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<std::uint32_t, 3>> next;
        next.reserve(m.triangles.size() * 4);
        for (const auto& t : m.triangles) {
            std::uint32_t ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.triangles = std::move(next);
    }

    // low-frequency displacement: a few random spherical lobes
    struct Lobe { Vec3 dir; double amp, sharp; };
    std::vector<Lobe> lobes;
    int n_lobes = 3 + static_cast<int>(rng.next_below(4));
    for (int i = 0; i < n_lobes; ++i) {
        Vec3 d = sample_cosine_hemisphere(rng);
        if (rng.next_double() < 0.5) d.z = -d.z;
        lobes.push_back({normalize(d), rng.uniform(-bumpiness, bumpiness), rng.uniform(1.0, 4.0)});
    }
    for (auto& v : m.vertices) {
        double disp = 0.0;
        for (const auto& l : lobes) {
            double c = dot(v, l.dir);
            disp += l.amp * std::pow(0.5 * (c + 1.0), l.sharp);
        }
        v = v * (1.0 + disp);
    }
    return m;
}

inline Material random_material(RngStream& rng) {
    double u = rng.next_double();
    if (u < 0.5) {
        return Material::diffuse({rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9)});
    }
    if (u < 0.75) return Material::mirror();
    return Material::dielectric(rng.uniform(1.3, 1.7));
}

inline Primitive make_wall(const Vec3& corner, const Vec3& eu, const Vec3& ev, const Rgb& albedo) {
    Primitive p;
    p.kind = PrimitiveKind::Rect;
    p.corner = corner;
    p.edge_u = eu;
    p.edge_v = ev;
    p.material = Material::diffuse(albedo);
    return p;
}

}  // namespace detail

/// Procedural training/evaluation scene: a diffuse box room, 1..16 perturbed
/// primitives on a jittered grid, 1..4 tilted area lights near the ceiling.
/// Deterministic in (seed, config). With two or more objects the object set
/// always mixes at least one specular and one diffuse material.
inline Scene generate_scene(std::uint64_t seed, const SceneGenConfig& cfg = {}) {
    RngStream rng(seed, stream::kSceneGen);
    Scene scene;
    const double h = cfg.room_half;
    const double H = cfg.room_height;

    auto wall_albedo = [&rng]() -> Rgb {
        return {rng.uniform(0.4, 0.85), rng.uniform(0.4, 0.85), rng.uniform(0.4, 0.85)};
    };
    using detail::make_wall;
    // floor, ceiling, four walls; normals irrelevant (two-sided)
    scene.primitives.push_back(make_wall({-h, 0, -h}, {2 * h, 0, 0}, {0, 0, 2 * h}, wall_albedo()));
    scene.primitives.push_back(make_wall({-h, H, -h}, {2 * h, 0, 0}, {0, 0, 2 * h}, wall_albedo()));
    scene.primitives.push_back(make_wall({-h, 0, -h}, {2 * h, 0, 0}, {0, H, 0}, wall_albedo()));
    scene.primitives.push_back(make_wall({-h, 0, h}, {2 * h, 0, 0}, {0, H, 0}, wall_albedo()));
    scene.primitives.push_back(make_wall({-h, 0, -h}, {0, 0, 2 * h}, {0, H, 0}, wall_albedo()));
    scene.primitives.push_back(make_wall({h, 0, -h}, {0, 0, 2 * h}, {0, H, 0}, wall_albedo()));

    int n_objects = cfg.min_objects + static_cast<int>(rng.next_below(
        static_cast<std::uint32_t>(cfg.max_objects - cfg.min_objects + 1)));

    // jittered grid placement on the floor plan
    int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_objects))));
    std::vector<int> cells(grid * grid);
    for (int i = 0; i < grid * grid; ++i) cells[i] = i;
    for (int i = grid * grid - 1; i > 0; --i) {
        int j = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(i + 1)));
        std::swap(cells[i], cells[j]);
    }

    std::vector<Material> materials(n_objects);
    for (;;) {
        for (auto& m : materials) m = detail::random_material(rng);
        if (n_objects < 2) break;
        bool any_spec = false, any_diff = false;
        for (const auto& m : materials) (m.is_specular() ? any_spec : any_diff) = true;
        if (any_spec && any_diff) break;  // resample until both kinds present
    }

    double cell = 2.0 * h / grid;
    for (int i = 0; i < n_objects; ++i) {
        int cx = cells[i] % grid, cz = cells[i] / grid;
        double x = -h + (cx + rng.uniform(0.3, 0.7)) * cell;
        double z = -h + (cz + rng.uniform(0.3, 0.7)) * cell;
        double size = rng.uniform(0.15, 0.45) * cell;

        Primitive p;
        p.material = materials[i];
        double shape = rng.next_double();
        if (shape < 0.3) {
            p.kind = PrimitiveKind::Sphere;
            p.center = {x, size, z};
            p.radius = size;
        } else if (shape < 0.55) {
            p.kind = PrimitiveKind::Box;
            double hy = rng.uniform(0.5, 1.8) * size;
            p.box.lo = {x - size, 0, z - size};
            p.box.hi = {x + size, 2 * hy, z + size};
        } else {
            p.kind = PrimitiveKind::Mesh;
            auto mesh = std::make_shared<TriMesh>(
                detail::displaced_icosphere(rng, 2, rng.uniform(0.05, 0.3)));
            double lift = size * rng.uniform(0.9, 1.4);
            for (auto& v : mesh->vertices) v = Vec3{x, lift, z} + size * v;
            p.mesh = mesh;
            p.bvh = std::make_shared<MeshBvh>(*mesh);
        }
        scene.primitives.push_back(p);
    }

    int n_lights = cfg.min_lights + static_cast<int>(rng.next_below(
        static_cast<std::uint32_t>(cfg.max_lights - cfg.min_lights + 1)));
    for (int i = 0; i < n_lights; ++i) {
        double side = rng.uniform(0.2, 0.6);
        Vec3 center{rng.uniform(-0.6 * h, 0.6 * h), rng.uniform(0.72 * H, 0.95 * H),
                    rng.uniform(-0.6 * h, 0.6 * h)};
        // random rotation: random downward-leaning normal, random in-plane spin
        Vec3 n = sample_cosine_hemisphere(rng);
        n = normalize(Vec3{n.x, -std::max(n.z, 0.35), n.y});
        Frame f = build_frame(center, n, rng);
        AreaLight l;
        l.edge_u = side * f.tangent;
        l.edge_v = side * f.bitangent;
        l.corner = center - 0.5 * l.edge_u - 0.5 * l.edge_v;
        double watts = rng.uniform(8.0, 30.0);
        Rgb tint{rng.uniform(0.7, 1.0), rng.uniform(0.7, 1.0), rng.uniform(0.7, 1.0)};
        l.power = watts * tint;
        // emit from the downward face
        if (l.normal().y > 0.0) std::swap(l.edge_u, l.edge_v);
        scene.lights.push_back(l);
    }

    scene.camera.origin = {rng.uniform(-0.4 * h, 0.4 * h), rng.uniform(0.45 * H, 0.75 * H),
                           h * rng.uniform(0.8, 0.95)};
    scene.camera.lookat = {0.0, rng.uniform(0.15 * H, 0.4 * H), 0.0};
    scene.camera.up = {0, 1, 0};
    scene.camera.fov_deg = rng.uniform(55.0, 75.0);

    scene.validate();
    return scene;
}

}  // namespace dpm

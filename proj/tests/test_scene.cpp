#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

using namespace dpm;

TEST_CASE("ray from sphere center hits at t == radius") {
    Scene s;
    Primitive p;
    p.kind = PrimitiveKind::Sphere;
    p.center = {0, 0, 0};
    p.radius = 2.5;
    p.material = Material::diffuse({0.5, 0.5, 0.5});
    s.primitives.push_back(p);

    Intersection hit;
    REQUIRE(intersect(s, Ray{{0, 0, 0}, {0, 0, 1}}, hit));
    CHECK(hit.t == Catch::Approx(2.5).epsilon(1e-12));
    // inside the sphere the oriented normal faces back toward the center
    CHECK(dot(hit.normal, Vec3{0, 0, 1}) < 0.0);
}

TEST_CASE("ray parallel to a plane misses") {
    Scene s;
    Primitive p;
    p.kind = PrimitiveKind::Rect;
    p.corner = {-1, 0, -1};
    p.edge_u = {2, 0, 0};
    p.edge_v = {0, 0, 2};
    p.material = Material::diffuse({0.5, 0.5, 0.5});
    s.primitives.push_back(p);

    Intersection hit;
    CHECK_FALSE(intersect(s, Ray{{0, 1, 0}, {1, 0, 0}}, hit));
}

TEST_CASE("intersect matches the brute-force primitive loop on random rays") {
    Scene scene = generate_scene(1234);
    RngStream rng(99, 0);
    Aabb bounds = scene.bounds();
    Vec3 span = bounds.hi - bounds.lo;
    int hits = 0;
    for (int i = 0; i < 10000; ++i) {
        Vec3 origin = bounds.lo + Vec3{rng.next_double() * span.x, rng.next_double() * span.y,
                                       rng.next_double() * span.z};
        Vec3 dir = normalize(
            Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)} + Vec3{1e-9, 0, 0});
        Ray ray{origin, dir};
        Intersection a, b;
        bool ha = intersect(scene, ray, a);
        bool hb = oracles::brute_force_intersect(scene, ray, b);
        REQUIRE(ha == hb);
        if (ha) {
            ++hits;
            REQUIRE(a.t == Catch::Approx(b.t).epsilon(1e-9));
            REQUIRE(a.primitive == b.primitive);
        }
    }
    CHECK(hits > 5000);  // a closed room: most interior rays hit something
}

TEST_CASE("intersections expose unit normals oriented against the ray") {
    Scene scene = generate_scene(777);
    RngStream rng(5, 5);
    Aabb bounds = scene.bounds();
    Vec3 span = bounds.hi - bounds.lo;
    for (int i = 0; i < 3000; ++i) {
        Vec3 origin = bounds.lo + Vec3{rng.next_double() * span.x, rng.next_double() * span.y,
                                       rng.next_double() * span.z};
        Vec3 dir = normalize(Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)} +
                             Vec3{0, 1e-9, 0});
        Intersection hit;
        if (!intersect(scene, Ray{origin, dir}, hit)) continue;
        REQUIRE(std::abs(hit.normal.length() - 1.0) < 1e-9);
        REQUIRE(dot(hit.normal, dir) <= 0.0);
        REQUIRE(hit.t > 0.0);
    }
}

TEST_CASE("generate_scene is deterministic in the seed") {
    Scene a = generate_scene(321);
    Scene b = generate_scene(321);
    std::ostringstream sa, sb;
    write_scene(sa, a);
    write_scene(sb, b);
    CHECK(sa.str() == sb.str());
}

TEST_CASE("generate_scene object counts stay in 1..16 and materials mix") {
    const size_t walls = 6;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Scene s = generate_scene(seed);
        REQUIRE(s.primitives.size() >= walls + 1);
        REQUIRE(s.primitives.size() <= walls + 16);
        size_t objects = s.primitives.size() - walls;
        if (objects >= 2) {
            bool any_spec = false, any_diff = false;
            for (size_t i = walls; i < s.primitives.size(); ++i)
                (s.primitives[i].material.is_specular() ? any_spec : any_diff) = true;
            REQUIRE(any_spec);
            REQUIRE(any_diff);
        }
        REQUIRE(s.lights.size() >= 1);
        REQUIRE(s.lights.size() <= 4);
        REQUIRE_NOTHROW(s.validate());
        // everything inside the room bounds
        Aabb bounds = s.bounds();
        for (const auto& p : s.primitives) {
            Aabb pb = p.bounds();
            REQUIRE(bounds.contains(pb.lo, 1e-6));
            REQUIRE(bounds.contains(pb.hi, 1e-6));
        }
    }
}

TEST_CASE("scene text files round-trip") {
    Scene a = generate_scene(4242);
    std::ostringstream first;
    write_scene(first, a);
    std::istringstream input(first.str());
    Scene b = read_scene(input);
    std::ostringstream second;
    write_scene(second, b);
    CHECK(first.str() == second.str());
}

TEST_CASE("scene validation rejects broken inputs") {
    Scene s;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);  // no lights

    s = oracles::make_flat_floor().scene;
    s.lights[0].edge_u = {0, 0, 0};  // zero area
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    s = oracles::make_flat_floor().scene;
    s.primitives[0].material.albedo = {1.5, 0, 0};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

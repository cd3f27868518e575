#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

using namespace dpm;

namespace {

/// Synthetic in-memory training scene: a slab of photons over the z=0 plane
/// and grid shading points whose "ground truth" is the cone-kernel estimate.
/// The kernel net can represent that target, so losses must fall.
TrainScene make_synthetic_scene(std::uint64_t seed, size_t n_photons, int grid) {
    RngStream rng(seed, 0xfeed);
    PhotonDump dump;
    dump.n_paths = 4000;
    for (size_t i = 0; i < n_photons; ++i) {
        Photon p;
        p.position = {rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0};
        Vec3 d{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), -1.0};
        p.dir = normalize(d);
        double intensity = 0.2 + 3.0 * std::exp(-8.0 * p.position.length_squared());
        p.flux = {intensity, intensity * 0.8, intensity * 0.6};
        p.flags = photon_flags::pack(false, 1, true);
        dump.photons.push_back(p);
    }

    GtImage gt(grid, grid);
    PhotonMap map(dump);
    for (int y = 0; y < grid; ++y)
        for (int x = 0; x < grid; ++x) {
            GtPixel& px = gt.at(x, y);
            px.valid = true;
            px.position = {-0.8 + 1.6 * x / (grid - 1.0), -0.8 + 1.6 * y / (grid - 1.0), 0.0};
            px.normal = {0, 0, 1};
            px.albedo = {0.8, 0.8, 0.8};
            RngStream frng(seed, 100 + y * grid + x);
            px.tangent = build_frame(px.position, px.normal, frng).tangent;
            ShadingPoint sp = shading_point_from_pixel(px);
            px.radiance = pm_estimate(map, sp, 32, Kernel::Cone);
        }
    return make_train_scene(std::move(dump), std::move(gt));
}

}  // namespace

TEST_CASE("mu-law fixed points and derived value") {
    CHECK(mu_law_scalar(0.0) == 0.0);
    CHECK(mu_law_scalar(1.0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(mu_law_scalar(1.0 / 5000.0) ==
          Catch::Approx(std::log(2.0) / std::log(5001.0)).margin(1e-12));
    CHECK(mu_law_scalar(1.0 / 5000.0) == Catch::Approx(0.08138).margin(1e-5));
    // negative inputs clamp to zero
    CHECK(mu_law_scalar(-0.5) == 0.0);
}

TEST_CASE("mapped L2 loss basics") {
    CHECK(mapped_l2_loss({0.3, 0.1, 0.7}, {0.3, 0.1, 0.7}) == 0.0);
    CHECK(mapped_l2_loss({0, 0, 0}, {1, 1, 1}) == Catch::Approx(1.0).margin(1e-12));
    Rgb a{0.2, 0.05, 0.9}, b{0.4, 0.3, 0.05};
    CHECK(mapped_l2_loss(a, b) == mapped_l2_loss(b, a));
}

TEST_CASE("training reduces the loss on a learnable synthetic target", "[slow]") {
    std::vector<TrainScene> scenes;
    scenes.push_back(make_synthetic_scene(1, 3000, 24));

    TrainConfig cfg;
    cfg.K = 32;
    cfg.epochs = 50;
    cfg.batch = 64;
    cfg.steps_per_epoch = 4;
    cfg.lr = 2e-3;
    cfg.seed = 5;
    cfg.threads = 2;
    cfg.subsample_min = 1.0;  // keep the target's neighborhood structure fixed

    TrainResult result = train(scenes, cfg);
    REQUIRE(result.log.size() == 50);
    double initial = result.log.front().loss;
    double final_loss = result.log.back().loss;
    INFO("initial " << initial << " final " << final_loss);
    CHECK(final_loss < initial);

    // the trained net beats the constant-one net on held-out points
    TrainScene held_out = make_synthetic_scene(2, 3000, 16);
    KernelNet ones = make_constant_net(cfg.K, 1.0);
    NetWorkspace ws;
    double trained_loss = 0.0, ones_loss = 0.0;
    size_t n = 0;
    for (std::uint32_t idx : held_out.valid_pixels) {
        ShadingPoint sp = shading_point_from_pixel(held_out.gt.pixels[idx]);
        Neighborhood nb = held_out.map->knn(sp.position, cfg.K);
        Rgb gt = held_out.gt.pixels[idx].radiance;
        trained_loss += mapped_l2_loss(learned_estimate(result.net, *held_out.map, sp, nb, ws), gt);
        ones_loss += mapped_l2_loss(learned_estimate(ones, *held_out.map, sp, nb, ws), gt);
        ++n;
    }
    trained_loss /= n;
    ones_loss /= n;
    INFO("trained " << trained_loss << " constant-one " << ones_loss);
    CHECK(trained_loss < ones_loss);
}

TEST_CASE("training is bit-reproducible and thread-count independent", "[slow]") {
    std::vector<TrainScene> scenes;
    scenes.push_back(make_synthetic_scene(3, 1500, 12));

    TrainConfig cfg;
    cfg.K = 16;
    cfg.epochs = 4;
    cfg.batch = 24;
    cfg.steps_per_epoch = 3;
    cfg.lr = 1e-3;
    cfg.seed = 11;
    cfg.threads = 1;

    TrainResult a = train(scenes, cfg);
    TrainResult b = train(scenes, cfg);
    cfg.threads = 3;
    TrainResult c = train(scenes, cfg);

    auto params_equal = [](const KernelNet& x, const KernelNet& y) {
        return flatten_params(x) == flatten_params(y);
    };
    CHECK(params_equal(a.net, b.net));
    CHECK(params_equal(a.net, c.net));
    for (size_t e = 0; e < a.log.size(); ++e) {
        REQUIRE(a.log[e].loss == b.log[e].loss);
        REQUIRE(a.log[e].loss == c.log[e].loss);
    }
}

TEST_CASE("the direct baseline trains and stays permutation invariant") {
    std::vector<TrainScene> scenes;
    scenes.push_back(make_synthetic_scene(4, 1200, 10));

    TrainConfig cfg;
    cfg.K = 16;
    cfg.epochs = 2;
    cfg.batch = 16;
    cfg.steps_per_epoch = 2;
    cfg.seed = 13;

    TrainResult direct = train_direct_baseline(scenes, cfg);
    CHECK(direct.net.direct);
    CHECK(direct.net.predictor[2].out == 3);
    REQUIRE(direct.log.size() == 2);
}

TEST_CASE("training on an empty dataset is rejected") {
    std::vector<TrainScene> scenes;
    TrainConfig cfg;
    CHECK_THROWS_AS(train(scenes, cfg), std::invalid_argument);
}

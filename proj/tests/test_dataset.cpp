#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"

using namespace dpm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

DatasetConfig tiny_config(std::uint64_t seed) {
    DatasetConfig cfg;
    cfg.n_scenes = 2;
    cfg.resolution = 16;
    cfg.photon_paths = 20000;
    cfg.photon_cap = 8000;
    cfg.gt_iterations = 4;
    cfg.gt_paths_per_iter = 4000;
    cfg.seed = seed;
    cfg.threads = 2;
    return cfg;
}

}  // namespace

TEST_CASE("build_dataset completes scenes and is byte-deterministic", "[slow]") {
    std::string dir_a = "/tmp/dpm_test_ds_a";
    std::string dir_b = "/tmp/dpm_test_ds_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    std::ostringstream log;
    DatasetManifest ma = build_dataset(dir_a, tiny_config(77), log);
    DatasetManifest mb = build_dataset(dir_b, tiny_config(77), log);
    REQUIRE(ma.entries.size() == 2);
    REQUIRE(mb.entries.size() == 2);

    CHECK(slurp(dir_a + "/manifest.txt") == slurp(dir_b + "/manifest.txt"));
    for (int i = 0; i < 2; ++i) {
        std::string scene_dir = "/scene_000" + std::to_string(i);
        CHECK(slurp(dir_a + scene_dir + "/scene.txt") == slurp(dir_b + scene_dir + "/scene.txt"));
        CHECK(slurp(dir_a + scene_dir + "/photons.phd") == slurp(dir_b + scene_dir + "/photons.phd"));
        CHECK(slurp(dir_a + scene_dir + "/gt.gti") == slurp(dir_b + scene_dir + "/gt.gti"));
    }

    // manifest reload matches
    DatasetManifest loaded = load_manifest(dir_a);
    REQUIRE(loaded.entries.size() == ma.entries.size());
    CHECK(loaded.config.resolution == 16);
    CHECK(loaded.entries[0].photon_count == ma.entries[0].photon_count);

    // ground-truth radiances are non-negative and finite
    for (const auto& e : loaded.entries) {
        GtImage gt = load_gt_image(dir_a + "/scene_000" + std::to_string(e.index) + "/gt.gti");
        for (const auto& px : gt.pixels) {
            if (!px.valid) continue;
            REQUIRE(px.radiance.all_nonnegative());
            REQUIRE(px.radiance.all_finite());
        }
    }
    fs::remove_all(dir_b);

    SECTION("sampled batches satisfy the input invariants") {
        std::vector<TrainScene> scenes = load_train_scenes(dir_a, {0, 1});
        RngStream rng(5, stream::kBatch);
        BatchConfig bc;
        bc.K = 64;
        bc.batch = 256;
        BatchStats stats;
        std::vector<TrainSample> batch = sample_batch(scenes, bc, rng, &stats);
        REQUIRE(batch.size() == 256);
        for (const auto& s : batch) {
            REQUIRE(s.input.k >= 1);
            REQUIRE(s.input.k <= 64);
            REQUIRE(s.input.r > 0.0);
            for (size_t i = 0; i < s.input.k; ++i) {
                const double* row = &s.input.rows[i * NetInput::kChannels];
                Vec3 lp{row[0], row[1], row[2]};
                REQUIRE(lp.length() <= 1.0 + 1e-9);
                for (int c = 0; c < NetInput::kChannels; ++c) {
                    REQUIRE(row[c] >= -1.0 - 1e-12);
                    REQUIRE(row[c] <= 1.0 + 1e-12);
                }
            }
            REQUIRE(s.gt.all_nonnegative());
            REQUIRE(s.scale.all_finite());
        }
    }

    SECTION("batches are deterministic at fixed seed, including full-keep") {
        std::vector<TrainScene> scenes = load_train_scenes(dir_a, {0, 1});
        BatchConfig bc;
        bc.K = 32;
        bc.batch = 64;
        bc.subsample_min = 1.0;
        bc.subsample_max = 1.0;
        RngStream r1(9, stream::kBatch), r2(9, stream::kBatch);
        std::vector<TrainSample> a = sample_batch(scenes, bc, r1);
        std::vector<TrainSample> b = sample_batch(scenes, bc, r2);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i].input.rows == b[i].input.rows);
            REQUIRE(a[i].gt == b[i].gt);
        }
    }

    SECTION("smaller keep fractions widen the bandwidth distribution") {
        std::vector<TrainScene> scenes = load_train_scenes(dir_a, {0, 1});
        auto mean_r = [&](double fraction, std::uint64_t seed) {
            BatchConfig bc;
            bc.K = 32;
            bc.batch = 400;
            bc.subsample_min = fraction;
            bc.subsample_max = fraction;
            RngStream rng(seed, stream::kBatch);
            std::vector<TrainSample> batch = sample_batch(scenes, bc, rng);
            double acc = 0.0;
            for (const auto& s : batch) acc += s.input.r;
            return acc / batch.size();
        };
        CHECK(mean_r(0.25, 21) > mean_r(1.0, 21));
    }
}

TEST_CASE("subsample_paths keeps whole paths and rescales N") {
    RngStream rng(31, 0);
    Scene scene = generate_scene(abs(42));
    TraceConfig tc;
    tc.n_paths = 20000;
    tc.seed = 3;
    PhotonDump dump = trace_photons(scene, tc);
    REQUIRE(!dump.photons.empty());

    RngStream sub_rng(7, 1);
    PhotonDump thin = subsample_paths(dump, 0.4, sub_rng);
    CHECK(thin.n_paths < dump.n_paths);
    CHECK(thin.n_paths > dump.n_paths / 4);
    CHECK(thin.photons.size() < dump.photons.size());

    // whole paths survive: every kept run starts with a path-start marker and
    // matches a contiguous run in the original dump
    REQUIRE(!thin.photons.empty());
    CHECK(thin.photons.front().path_start());

    // determinism
    RngStream sub_rng2(7, 1);
    PhotonDump thin2 = subsample_paths(dump, 0.4, sub_rng2);
    REQUIRE(thin2.photons.size() == thin.photons.size());
    CHECK(thin2.n_paths == thin.n_paths);

    // fraction 1 is the identity
    RngStream sub_rng3(7, 1);
    PhotonDump full = subsample_paths(dump, 1.0, sub_rng3);
    CHECK(full.photons.size() == dump.photons.size());
    CHECK(full.n_paths == dump.n_paths);
}

TEST_CASE("scenes-only datasets write scene files without photons") {
    std::string dir = "/tmp/dpm_test_ds_scenes_only";
    fs::remove_all(dir);
    DatasetConfig cfg;
    cfg.n_scenes = 3;
    cfg.scenes_only = true;
    cfg.seed = 5;
    std::ostringstream log;
    DatasetManifest m = build_dataset(dir, cfg, log);
    REQUIRE(m.entries.size() == 3);
    CHECK(fs::exists(dir + "/scene_0000/scene.txt"));
    CHECK_FALSE(fs::exists(dir + "/scene_0000/photons.phd"));
    Scene s = load_scene(dir + "/scene_0002/scene.txt");
    CHECK_NOTHROW(s.validate());
    fs::remove_all(dir);
}

TEST_CASE("manifest text round-trips") {
    DatasetManifest m;
    m.config = tiny_config(123);
    m.entries.push_back({0, 555, 20000, 7777, 250});
    m.entries.push_back({1, 556, 20000, 8888, 251});
    std::ostringstream os;
    write_manifest(os, m);
    std::istringstream is(os.str());
    DatasetManifest back = read_manifest(is);
    std::ostringstream os2;
    write_manifest(os2, back);
    CHECK(os.str() == os2.str());
}

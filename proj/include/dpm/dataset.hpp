#pragma once

#include <filesystem>
#include <memory>

#include "dpm/net.hpp"
#include "dpm/scene_gen.hpp"
#include "dpm/scene_io.hpp"

namespace dpm {

struct DatasetConfig {
    int n_scenes = 20;
    int resolution = 128;
    std::uint64_t photon_paths = 400000;   // paths traced for the stored dump
    std::uint64_t photon_cap = 200000;     // stored photons thinned down to ~this
    int gt_iterations = 100;
    std::uint64_t gt_paths_per_iter = 100000;  // gt budget = iterations * this
    StoreFilter filter = StoreFilter::IndirectOnly;
    std::uint64_t seed = 0;
    int threads = 1;
    SceneGenConfig scene_gen;
    bool scenes_only = false;  // write scene files, skip photons + ground truth
};

struct DatasetEntry {
    int index = 0;
    std::uint64_t scene_seed = 0;
    std::uint64_t n_paths = 0;
    std::uint64_t photon_count = 0;
    std::uint64_t valid_pixels = 0;
};

struct DatasetManifest {
    DatasetConfig config;
    std::vector<DatasetEntry> entries;
};

namespace detail {

inline std::string scene_dir_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%04d", index);
    return buf;
}

}  // namespace detail

inline void write_manifest(std::ostream& os, const DatasetManifest& m) {
    os << "dpm dataset v1\n";
    os << "seed " << m.config.seed << "\n";
    os << "scenes " << m.config.n_scenes << "\n";
    os << "resolution " << m.config.resolution << "\n";
    os << "photon_paths " << m.config.photon_paths << "\n";
    os << "photon_cap " << m.config.photon_cap << "\n";
    os << "gt_iterations " << m.config.gt_iterations << "\n";
    os << "gt_paths_per_iter " << m.config.gt_paths_per_iter << "\n";
    os << "filter " << store_filter_name(m.config.filter) << "\n";
    os << "scenes_only " << (m.config.scenes_only ? 1 : 0) << "\n";
    for (const auto& e : m.entries)
        os << "scene " << e.index << " seed " << e.scene_seed << " n_paths " << e.n_paths
           << " photons " << e.photon_count << " valid_pixels " << e.valid_pixels << "\n";
}

inline DatasetManifest read_manifest(std::istream& is) {
    DatasetManifest m;
    std::string line;
    if (!std::getline(is, line) || line != "dpm dataset v1")
        throw std::runtime_error("manifest: bad header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "seed") ss >> m.config.seed;
        else if (key == "scenes") ss >> m.config.n_scenes;
        else if (key == "resolution") ss >> m.config.resolution;
        else if (key == "photon_paths") ss >> m.config.photon_paths;
        else if (key == "photon_cap") ss >> m.config.photon_cap;
        else if (key == "gt_iterations") ss >> m.config.gt_iterations;
        else if (key == "gt_paths_per_iter") ss >> m.config.gt_paths_per_iter;
        else if (key == "filter") {
            std::string f;
            ss >> f;
            m.config.filter = parse_store_filter(f);
        } else if (key == "scenes_only") {
            int v = 0;
            ss >> v;
            m.config.scenes_only = v != 0;
        } else if (key == "scene") {
            DatasetEntry e;
            std::string tag;
            ss >> e.index >> tag >> e.scene_seed >> tag >> e.n_paths >> tag >> e.photon_count
               >> tag >> e.valid_pixels;
            m.entries.push_back(e);
        } else {
            throw std::runtime_error("manifest: unknown key " + key);
        }
    }
    return m;
}

/// Generates scenes, traces their photon dumps, and computes PPM ground truth
/// into `out_dir`. Any per-scene failure aborts that scene with a logged
/// reason; the manifest lists only completed scenes. Byte-deterministic for a
/// fixed config (including thread count independence).
inline DatasetManifest build_dataset(const std::string& out_dir, const DatasetConfig& cfg,
                                     std::ostream& log) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    DatasetManifest manifest;
    manifest.config = cfg;

    for (int i = 0; i < cfg.n_scenes; ++i) {
        std::uint64_t scene_seed = mix_seed(cfg.seed, 1000 + i);
        std::string dir = out_dir + "/" + detail::scene_dir_name(i);
        try {
            Scene scene = generate_scene(scene_seed, cfg.scene_gen);
            fs::create_directories(dir);
            save_scene(dir + "/scene.txt", scene);

            DatasetEntry entry;
            entry.index = i;
            entry.scene_seed = scene_seed;

            if (!cfg.scenes_only) {
                TraceConfig tc;
                tc.n_paths = cfg.photon_paths;
                tc.filter = cfg.filter;
                tc.seed = mix_seed(scene_seed, 7);
                tc.threads = cfg.threads;
                PhotonDump dump = trace_photons(scene, tc);
                if (cfg.photon_cap > 0 && dump.photons.size() > cfg.photon_cap) {
                    RngStream thin_rng(mix_seed(scene_seed, 11), stream::kBatch);
                    double fraction =
                        static_cast<double>(cfg.photon_cap) / static_cast<double>(dump.photons.size());
                    dump = subsample_paths(dump, fraction, thin_rng);
                }
                if (dump.photons.empty())
                    throw std::runtime_error("no photons stored under filter");
                dump.scene_id = static_cast<std::uint32_t>(i);
                save_photon_dump(dir + "/photons.phd", dump);

                PpmConfig pc;
                pc.iterations = cfg.gt_iterations;
                pc.paths_per_iter = cfg.gt_paths_per_iter;
                pc.filter = cfg.filter;
                GtImage gt = ground_truth_image(scene, cfg.resolution, cfg.resolution, pc,
                                                scene_seed, cfg.threads);
                if (gt.valid_count() == 0) throw std::runtime_error("no valid shading points");
                save_gt_image(dir + "/gt.gti", gt);

                entry.n_paths = dump.n_paths;
                entry.photon_count = dump.photons.size();
                entry.valid_pixels = gt.valid_count();
            }
            manifest.entries.push_back(entry);
            log << "scene " << i << " ok photons=" << entry.photon_count
                << " valid=" << entry.valid_pixels << "\n";
        } catch (const std::exception& e) {
            log << "scene " << i << " skipped: " << e.what() << "\n";
            std::error_code ec;
            fs::remove_all(dir, ec);
        }
    }

    std::ofstream mf(out_dir + "/manifest.txt");
    if (!mf) throw std::runtime_error("cannot write manifest in " + out_dir);
    write_manifest(mf, manifest);
    return manifest;
}

inline DatasetManifest load_manifest(const std::string& dir) {
    std::ifstream is(dir + "/manifest.txt");
    if (!is) throw std::runtime_error("cannot open manifest in " + dir);
    return read_manifest(is);
}

// ---------------------------------------------------------------------------
// In-memory training view of a dataset
// ---------------------------------------------------------------------------

/// One scene loaded for sampling: the photon map over the full dump plus
/// per-photon path ids, so batches can thin paths at query time without
/// rebuilding the tree.
struct TrainScene {
    std::shared_ptr<const PhotonDump> dump;
    std::unique_ptr<PhotonMap> map;
    GtImage gt;
    std::vector<std::uint32_t> path_of;  // per photon: visible-path ordinal
    std::uint32_t visible_paths = 0;
    std::vector<std::uint32_t> valid_pixels;
};

inline TrainScene make_train_scene(PhotonDump dump, GtImage gt) {
    TrainScene s;
    s.dump = std::make_shared<const PhotonDump>(std::move(dump));
    s.gt = std::move(gt);
    s.path_of.resize(s.dump->photons.size());
    std::uint32_t path = 0;
    for (size_t i = 0; i < s.dump->photons.size(); ++i) {
        if (s.dump->photons[i].path_start() && i > 0) ++path;
        s.path_of[i] = path;
    }
    s.visible_paths = s.dump->photons.empty() ? 0 : path + 1;
    for (std::uint32_t i = 0; i < s.gt.pixels.size(); ++i)
        if (s.gt.pixels[i].valid) s.valid_pixels.push_back(i);
    s.map = std::make_unique<PhotonMap>(s.dump);
    return s;
}

inline TrainScene load_train_scene(const std::string& scene_dir) {
    return make_train_scene(load_photon_dump(scene_dir + "/photons.phd"),
                            load_gt_image(scene_dir + "/gt.gti"));
}

inline std::vector<TrainScene> load_train_scenes(const std::string& dir,
                                                 const std::vector<int>& indices) {
    std::vector<TrainScene> scenes;
    scenes.reserve(indices.size());
    for (int idx : indices) scenes.push_back(load_train_scene(dir + "/" + detail::scene_dir_name(idx)));
    return scenes;
}

// ---------------------------------------------------------------------------
// Batch sampling
// ---------------------------------------------------------------------------

struct TrainSample {
    NetInput input;
    Vec3 scale;  // rho / (pi^2 * N * r^2), per channel
    Rgb gt;
};

struct BatchConfig {
    size_t K = 500;
    size_t batch = 256;
    double subsample_min = 0.25;  // photon-count range, as path-keep fractions
    double subsample_max = 1.0;
};

struct BatchStats {
    std::uint64_t skipped = 0;  // points without a single usable photon
};

namespace detail {

inline double unit_from_key(std::uint64_t key) {
    return static_cast<double>(key >> 11) * 0x1.0p-53;
}

/// Number of kept paths under per-path thinning with this salt/fraction;
/// paths that stored no photons participate via their ordinals too.
inline std::uint64_t count_kept_paths(std::uint64_t n_paths, std::uint64_t salt, double fraction) {
    std::uint64_t kept = 0;
    for (std::uint64_t p = 0; p < n_paths; ++p)
        if (unit_from_key(mix_seed(salt, p)) < fraction) ++kept;
    return kept;
}

}  // namespace detail

/// Draws one training sample: a scene, a path-thinned view of its photon dump
/// (emulating fewer emitted photons, hence a wider bandwidth), and a random
/// valid shading point. Returns false when the drawn point has no usable
/// photon (caller counts and redraws).
inline bool draw_sample(const std::vector<TrainScene>& scenes, const BatchConfig& cfg,
                        RngStream& rng, TrainSample& out) {
    const TrainScene& sc = scenes[rng.next_below(static_cast<std::uint32_t>(scenes.size()))];
    double fraction = rng.uniform(cfg.subsample_min, cfg.subsample_max);
    std::uint64_t salt = rng.next_u64();
    std::uint32_t pixel = sc.valid_pixels[rng.next_below(static_cast<std::uint32_t>(sc.valid_pixels.size()))];

    const GtPixel& px = sc.gt.pixels[pixel];
    ShadingPoint sp = shading_point_from_pixel(px);

    Neighborhood nb;
    std::uint64_t n_eff;
    if (fraction >= 1.0) {
        nb = sc.map->knn(sp.position, cfg.K);
        n_eff = sc.dump->n_paths;
    } else {
        nb = sc.map->knn_if(sp.position, cfg.K, [&](std::uint32_t ph) {
            return detail::unit_from_key(mix_seed(salt, sc.path_of[ph])) < fraction;
        });
        n_eff = detail::count_kept_paths(sc.dump->n_paths, salt, fraction);
    }
    if (nb.photons.empty() || !(nb.r > 0.0) || n_eff == 0) return false;
    std::vector<NeighborRef> valid = filter_backfacing(nb, *sc.map, sp.normal);
    if (valid.empty()) return false;

    out.input = preprocess(sp, valid, *sc.map, nb.r);
    double norm = kPi * kPi * static_cast<double>(n_eff) * nb.r * nb.r;
    out.scale = sp.albedo / norm;
    out.gt = px.radiance;
    return true;
}

/// A batch of (NetInput, ground truth) pairs; skipped draws are counted and
/// replaced (up to a cap) so batches keep their nominal size.
inline std::vector<TrainSample> sample_batch(const std::vector<TrainScene>& scenes,
                                             const BatchConfig& cfg, RngStream& rng,
                                             BatchStats* stats = nullptr) {
    if (scenes.empty()) throw std::invalid_argument("sample_batch: empty dataset");
    std::vector<TrainSample> batch;
    batch.reserve(cfg.batch);
    size_t attempts = 0;
    const size_t max_attempts = cfg.batch * 4;
    while (batch.size() < cfg.batch && attempts < max_attempts) {
        ++attempts;
        TrainSample s;
        if (draw_sample(scenes, cfg, rng, s)) {
            batch.push_back(std::move(s));
        } else if (stats) {
            ++stats->skipped;
        }
    }
    return batch;
}

}  // namespace dpm

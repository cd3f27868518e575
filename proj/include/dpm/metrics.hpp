#pragma once

#include <iomanip>
#include <map>

#include "dpm/dataset.hpp"
#include "dpm/image.hpp"

namespace dpm {

struct MethodSpec {
    enum class Kind { Pm, Ppm, Learned, GroundTruth };
    Kind kind = Kind::Pm;
    size_t K = 500;
    Kernel kernel = Kernel::Uniform;
    std::string model_path;
    std::string name;
};

/// "pm-50", "pm-500", "ppm", "learned:model.dpmw", "gt".
inline MethodSpec parse_method(const std::string& s) {
    MethodSpec m;
    m.name = s;
    if (s == "ppm") {
        m.kind = MethodSpec::Kind::Ppm;
        return m;
    }
    if (s == "gt") {
        m.kind = MethodSpec::Kind::GroundTruth;
        return m;
    }
    if (s.rfind("pm-", 0) == 0) {
        m.kind = MethodSpec::Kind::Pm;
        m.K = static_cast<size_t>(std::stoul(s.substr(3)));
        if (m.K < 1) throw std::invalid_argument("method: K must be >= 1");
        return m;
    }
    if (s.rfind("learned:", 0) == 0) {
        m.kind = MethodSpec::Kind::Learned;
        m.model_path = s.substr(8);
        if (m.model_path.empty()) throw std::invalid_argument("method: learned needs a model path");
        return m;
    }
    throw std::invalid_argument("unknown method: " + s);
}

// ---------------------------------------------------------------------------
// Per-method estimate images over the shading points of a ground-truth image
// ---------------------------------------------------------------------------

inline RadianceImage estimate_image_pm(const PhotonMap& map, const GtImage& gt, size_t K,
                                       Kernel kernel, int threads) {
    RadianceImage img(gt.width, gt.height);
    detail::parallel_over(gt.pixels.size(), threads, [&](size_t i) {
        if (!gt.pixels[i].valid) return;
        ShadingPoint sp = shading_point_from_pixel(gt.pixels[i]);
        img.pixels[i] = pm_estimate(map, sp, map.knn(sp.position, K), kernel);
    });
    return img;
}

inline RadianceImage estimate_image_learned(const KernelNet& net, const PhotonMap& map,
                                            const GtImage& gt, int threads,
                                            EstimateStats* stats = nullptr) {
    RadianceImage img(gt.width, gt.height);
    std::atomic<std::uint64_t> fallbacks{0};
    detail::parallel_over(gt.pixels.size(), threads, [&](size_t i) {
        if (!gt.pixels[i].valid) return;
        thread_local NetWorkspace ws;
        EstimateStats local;
        ShadingPoint sp = shading_point_from_pixel(gt.pixels[i]);
        img.pixels[i] =
            learned_estimate(net, map, sp, map.knn(sp.position, net.K), ws, &local);
        if (local.degenerate_fallbacks) fallbacks += local.degenerate_fallbacks;
    });
    if (stats) stats->degenerate_fallbacks += fallbacks.load();
    return img;
}

/// Splits one dump into per-iteration sub-dumps by path ordinal, preserving
/// the total emitted-path count, so PPM consumes exactly the same photon
/// information as the one-shot estimators.
inline std::vector<PhotonDump> split_dump_for_ppm(const PhotonDump& dump, int iterations) {
    std::vector<PhotonDump> chunks(iterations);
    std::uint64_t base = dump.n_paths / iterations;
    std::uint64_t rem = dump.n_paths % iterations;
    for (int c = 0; c < iterations; ++c) {
        chunks[c].n_paths = base + (static_cast<std::uint64_t>(c) < rem ? 1 : 0);
        if (chunks[c].n_paths == 0) chunks[c].n_paths = 1;
        chunks[c].seed = dump.seed;
        chunks[c].scene_id = dump.scene_id;
    }
    std::uint32_t path = static_cast<std::uint32_t>(-1);
    for (const Photon& p : dump.photons) {
        if (p.path_start()) ++path;
        chunks[path % iterations].photons.push_back(p);
    }
    return chunks;
}

struct PpmEvalConfig {
    int iterations = 10;
    size_t init_knn = 50;
    double alpha = 2.0 / 3.0;
};

inline RadianceImage estimate_image_ppm(const PhotonDump& dump, const GtImage& gt,
                                        const PpmEvalConfig& cfg, int threads) {
    RadianceImage img(gt.width, gt.height);
    std::vector<size_t> valid;
    for (size_t i = 0; i < gt.pixels.size(); ++i)
        if (gt.pixels[i].valid) valid.push_back(i);
    if (valid.empty()) return img;

    std::vector<ShadingPoint> points(valid.size());
    std::vector<PpmState> states(valid.size());
    for (size_t i = 0; i < valid.size(); ++i)
        points[i] = shading_point_from_pixel(gt.pixels[valid[i]]);

    std::vector<PhotonDump> chunks = split_dump_for_ppm(dump, cfg.iterations);
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        if (chunks[iter].photons.empty()) {
            for (auto& st : states) st.emitted += chunks[iter].n_paths;
            continue;
        }
        PhotonMap map(chunks[iter]);
        detail::parallel_over(valid.size(), threads, [&](size_t i) {
            std::vector<std::uint32_t> scratch;
            if (states[i].r2 <= 0.0) {
                Neighborhood nb = map.knn(points[i].position, cfg.init_knn);
                double r = nb.r > 0.0 ? nb.r : 1e-3;
                states[i].r2 = r * r;
                states[i].alpha = cfg.alpha;
            }
            ppm_refine(states[i], points[i], map, scratch);
        });
    }
    for (size_t i = 0; i < valid.size(); ++i)
        img.pixels[valid[i]] = ppm_radiance(states[i], points[i]);
    return img;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct ImageMetrics {
    double rmse_raw = 0.0;
    double rmse_mapped = 0.0;
    double psnr_mapped = 0.0;  // peak 1.0 in the mu-law domain
    size_t points = 0;
};

/// RMSE over valid shading points, identical mask for every method.
inline ImageMetrics compare_to_gt(const RadianceImage& est, const GtImage& gt,
                                  double mu = 5000.0) {
    ImageMetrics m;
    double se_raw = 0.0, se_mapped = 0.0;
    for (size_t i = 0; i < gt.pixels.size(); ++i) {
        if (!gt.pixels[i].valid) continue;
        ++m.points;
        Rgb d = est.pixels[i] - gt.pixels[i].radiance;
        se_raw += (d.x * d.x + d.y * d.y + d.z * d.z) / 3.0;
        Rgb dm = mu_law(est.pixels[i], mu) - mu_law(gt.pixels[i].radiance, mu);
        se_mapped += (dm.x * dm.x + dm.y * dm.y + dm.z * dm.z) / 3.0;
    }
    if (m.points == 0) return m;
    double mse_raw = se_raw / m.points;
    double mse_mapped = se_mapped / m.points;
    m.rmse_raw = std::sqrt(mse_raw);
    m.rmse_mapped = std::sqrt(mse_mapped);
    m.psnr_mapped = mse_mapped > 0.0 ? -10.0 * std::log10(mse_mapped) : 999.0;
    return m;
}

struct ReportRow {
    int scene = 0;
    std::string method;
    std::uint64_t photons = 0;  // M, valid photons available to the method
    size_t K = 0;
    ImageMetrics metrics;
    double wall_ms = 0.0;
};

struct MetricsReport {
    std::vector<ReportRow> rows;
    std::vector<std::string> errors;  // per-scene failures; the run continues
};

struct EvalConfig {
    std::uint64_t paths = 100000;  // eval trace budget per scene
    StoreFilter filter = StoreFilter::IndirectOnly;
    PpmEvalConfig ppm;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Quantitative protocol: per scene, trace one eval dump (so every method
/// sees exactly M stored photons) and compare per-shading-point estimates
/// against the stored ground truth.
inline MetricsReport evaluate(const std::string& dataset_dir, const std::vector<int>& scene_indices,
                              const std::vector<MethodSpec>& methods, const EvalConfig& cfg) {
    MetricsReport report;
    std::map<std::string, KernelNet> model_cache;

    for (int idx : scene_indices) {
        std::string dir = dataset_dir + "/" + detail::scene_dir_name(idx);
        Scene scene;
        GtImage gt;
        try {
            scene = load_scene(dir + "/scene.txt");
            gt = load_gt_image(dir + "/gt.gti");
            if (gt.valid_count() == 0) throw std::runtime_error("ground truth has no valid pixels");
        } catch (const std::exception& e) {
            report.errors.push_back("scene " + std::to_string(idx) + ": " + e.what());
            continue;
        }

        TraceConfig tc;
        tc.n_paths = cfg.paths;
        tc.filter = cfg.filter;
        tc.seed = mix_seed(cfg.seed, 0xe7a1 + idx);
        tc.threads = cfg.threads;
        PhotonDump dump = trace_photons(scene, tc);
        if (dump.photons.empty()) {
            report.errors.push_back("scene " + std::to_string(idx) + ": eval dump stored no photons");
            continue;
        }
        PhotonMap map(dump);

        for (const MethodSpec& method : methods) {
            auto t0 = std::chrono::steady_clock::now();
            RadianceImage est;
            size_t K = method.K;
            try {
                switch (method.kind) {
                    case MethodSpec::Kind::Pm:
                        est = estimate_image_pm(map, gt, method.K, method.kernel, cfg.threads);
                        break;
                    case MethodSpec::Kind::Learned: {
                        auto it = model_cache.find(method.model_path);
                        if (it == model_cache.end())
                            it = model_cache.emplace(method.model_path,
                                                     load_model(method.model_path)).first;
                        K = it->second.K;
                        est = estimate_image_learned(it->second, map, gt, cfg.threads);
                        break;
                    }
                    case MethodSpec::Kind::Ppm:
                        K = 0;
                        est = estimate_image_ppm(dump, gt, cfg.ppm, cfg.threads);
                        break;
                    case MethodSpec::Kind::GroundTruth:
                        K = 0;
                        est = RadianceImage(gt.width, gt.height);
                        for (size_t i = 0; i < gt.pixels.size(); ++i)
                            if (gt.pixels[i].valid) est.pixels[i] = gt.pixels[i].radiance;
                        break;
                }
            } catch (const std::exception& e) {
                report.errors.push_back("scene " + std::to_string(idx) + " method " + method.name +
                                        ": " + e.what());
                continue;
            }
            ReportRow row;
            row.scene = idx;
            row.method = method.name;
            row.photons = dump.photons.size();
            row.K = K;
            row.metrics = compare_to_gt(est, gt);
            row.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0).count();
            report.rows.push_back(row);
        }
    }
    return report;
}

inline void write_report_tsv(std::ostream& os, const MetricsReport& report) {
    os << "scene\tmethod\tphotons\tK\tpoints\trmse_raw\trmse_mapped\tpsnr_mapped\twall_ms\n";
    for (const auto& r : report.rows) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%d\t%s\t%llu\t%zu\t%zu\t%.9g\t%.9g\t%.6g\t%.1f\n",
                      r.scene, r.method.c_str(), static_cast<unsigned long long>(r.photons), r.K,
                      r.metrics.points, r.metrics.rmse_raw, r.metrics.rmse_mapped,
                      r.metrics.psnr_mapped, r.wall_ms);
        os << buf;
    }
    for (const auto& e : report.errors) os << "# error\t" << e << "\n";
}

inline void write_report_text(std::ostream& os, const MetricsReport& report) {
    os << std::left << std::setw(7) << "scene" << std::setw(24) << "method" << std::right
       << std::setw(10) << "photons" << std::setw(6) << "K" << std::setw(9) << "points"
       << std::setw(13) << "rmse" << std::setw(13) << "rmse(mu)" << std::setw(10) << "psnr"
       << std::setw(10) << "wall ms" << "\n";
    for (const auto& r : report.rows) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%-7d%-24s%10llu%6zu%9zu%13.6f%13.6f%10.2f%10.0f\n",
                      r.scene, r.method.c_str(), static_cast<unsigned long long>(r.photons), r.K,
                      r.metrics.points, r.metrics.rmse_raw, r.metrics.rmse_mapped,
                      r.metrics.psnr_mapped, r.wall_ms);
        os << buf;
    }
    for (const auto& e : report.errors) os << "error: " << e << "\n";
}

}  // namespace dpm

#pragma once

#include <atomic>
#include <thread>

#include "dpm/photon.hpp"
#include "dpm/rng.hpp"
#include "dpm/sampling.hpp"
#include "dpm/scene.hpp"

namespace dpm {

enum class StoreFilter { All, IndirectOnly, LsOnly };

inline StoreFilter parse_store_filter(const std::string& s) {
    if (s == "all") return StoreFilter::All;
    if (s == "indirect" || s == "indirect-only") return StoreFilter::IndirectOnly;
    if (s == "ls" || s == "ls-only") return StoreFilter::LsOnly;
    throw std::invalid_argument("unknown store filter: " + s);
}

inline const char* store_filter_name(StoreFilter f) {
    switch (f) {
        case StoreFilter::All: return "all";
        case StoreFilter::IndirectOnly: return "indirect-only";
        case StoreFilter::LsOnly: return "ls-only";
    }
    return "?";
}

struct TraceConfig {
    std::uint64_t n_paths = 100000;
    int max_bounces = 5;  // at most five stored photons per path
    StoreFilter filter = StoreFilter::All;
    std::uint64_t seed = 0;
    int threads = 1;
};

namespace detail {

// Deterministic orthonormal basis for bounce sampling (no rng involved, so
// the path stream stays identical across store filters).
inline void bounce_basis(const Vec3& n, Vec3& t, Vec3& b) {
    Vec3 helper = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    t = normalize(cross(helper, n));
    b = cross(n, t);
}

struct LightPicker {
    std::vector<double> cdf;  // cumulative selection probability by mean power
    std::vector<double> prob;

    explicit LightPicker(const Scene& scene) {
        double total = 0.0;
        for (const auto& l : scene.lights) total += (l.power.x + l.power.y + l.power.z) / 3.0;
        double acc = 0.0;
        for (const auto& l : scene.lights) {
            double w = (l.power.x + l.power.y + l.power.z) / 3.0;
            double p = total > 0.0 ? w / total : 1.0 / scene.lights.size();
            prob.push_back(p);
            acc += p;
            cdf.push_back(acc);
        }
        cdf.back() = 1.0;
    }

    int pick(double u) const {
        for (size_t i = 0; i < cdf.size(); ++i)
            if (u <= cdf[i]) return static_cast<int>(i);
        return static_cast<int>(cdf.size()) - 1;
    }
};

constexpr int kRouletteStartBounce = 3;
constexpr double kRouletteMin = 0.1;
constexpr double kRouletteMax = 0.95;

inline double roulette_probability(double throughput_max) {
    double p = throughput_max;
    if (p < kRouletteMin) p = kRouletteMin;
    if (p > kRouletteMax) p = kRouletteMax;
    return p;
}

/// Traces one photon path, appending stored photons to `out`.
inline void trace_one_path(const Scene& scene, const LightPicker& picker, int max_bounces,
                           StoreFilter filter, RngStream& rng, std::vector<Photon>& out) {
    int li = picker.pick(rng.next_double());
    const AreaLight& light = scene.lights[li];
    Vec3 pos = sample_rect(light.corner, light.edge_u, light.edge_v, rng);
    Vec3 ln = light.normal();
    Vec3 lt, lb;
    bounce_basis(ln, lt, lb);
    Vec3 local = sample_cosine_hemisphere(rng);
    Vec3 dir = local.x * lt + local.y * lb + local.z * ln;

    Rgb flux = light.power / picker.prob[li];
    Ray ray{pos, dir};
    bool specular_before = false;
    bool first_store = true;

    for (int bounce = 1; bounce <= max_bounces; ++bounce) {
        Intersection hit;
        if (!intersect(scene, ray, hit)) return;

        if (hit.material->kind == MaterialKind::Diffuse) {
            bool store = true;
            if (filter == StoreFilter::IndirectOnly) store = bounce >= 2;
            else if (filter == StoreFilter::LsOnly) store = specular_before;
            if (store) {
                out.push_back(Photon{hit.position, ray.dir, flux,
                                     photon_flags::pack(specular_before, bounce, first_store)});
                first_store = false;
            }
            if (bounce == max_bounces) return;
            Rgb next_flux = flux * hit.material->albedo;
            if (bounce >= kRouletteStartBounce) {
                double p = roulette_probability(hit.material->albedo.max_component());
                if (rng.next_double() >= p) return;
                next_flux /= p;
            }
            flux = next_flux;
            Vec3 t, b;
            bounce_basis(hit.normal, t, b);
            Vec3 d = sample_cosine_hemisphere(rng);
            ray = Ray{hit.position, d.x * t + d.y * b + d.z * hit.normal};
        } else {
            // specular interaction: unit throughput, direction change only
            if (bounce == max_bounces) return;
            specular_before = true;
            if (bounce >= kRouletteStartBounce) {
                double p = roulette_probability(1.0);
                if (rng.next_double() >= p) return;
                flux /= p;
            }
            if (hit.material->kind == MaterialKind::Mirror) {
                ray = Ray{hit.position, reflect(ray.dir, hit.normal)};
            } else {
                // dielectric: Fresnel-weighted choice of reflect vs refract
                bool entering = hit.front_face;
                double ior = hit.material->ior;
                double eta = entering ? 1.0 / ior : ior;
                double cos_i = -dot(ray.dir, hit.normal);
                double sin2_t = eta * eta * (1.0 - cos_i * cos_i);
                if (sin2_t >= 1.0) {
                    ray = Ray{hit.position, reflect(ray.dir, hit.normal)};
                } else {
                    double cos_t = std::sqrt(1.0 - sin2_t);
                    double r0 = (ior - 1.0) / (ior + 1.0);
                    r0 *= r0;
                    double cos_x = entering ? cos_i : cos_t;
                    double fresnel = r0 + (1.0 - r0) * std::pow(1.0 - cos_x, 5.0);
                    if (rng.next_double() < fresnel) {
                        ray = Ray{hit.position, reflect(ray.dir, hit.normal)};
                    } else {
                        Vec3 refr = eta * ray.dir + (eta * cos_i - cos_t) * hit.normal;
                        ray = Ray{hit.position, normalize(refr)};
                    }
                }
            }
        }
    }
}

constexpr std::uint64_t kTraceChunkPaths = 8192;

}  // namespace detail

/// Emits `n_paths` photon paths and stores photons at diffuse hits passing the
/// filter. Work is split into fixed-size chunks with one RngStream per chunk
/// and the chunks concatenated in order, so the result is byte-stable for any
/// thread count.
inline PhotonDump trace_photons(const Scene& scene, const TraceConfig& cfg) {
    if (scene.lights.empty()) throw std::invalid_argument("trace_photons: scene has no lights");
    if (cfg.n_paths < 1) throw std::invalid_argument("trace_photons: n_paths must be >= 1");
    if (cfg.max_bounces < 1) throw std::invalid_argument("trace_photons: max_bounces must be >= 1");

    detail::LightPicker picker(scene);
    std::uint64_t n_chunks =
        (cfg.n_paths + detail::kTraceChunkPaths - 1) / detail::kTraceChunkPaths;
    std::vector<std::vector<Photon>> chunk_photons(n_chunks);

    auto run_chunk = [&](std::uint64_t ci) {
        std::uint64_t begin = ci * detail::kTraceChunkPaths;
        std::uint64_t end = std::min(begin + detail::kTraceChunkPaths, cfg.n_paths);
        RngStream rng(cfg.seed, stream::id(stream::kTraceChunk, ci));
        auto& out = chunk_photons[ci];
        for (std::uint64_t p = begin; p < end; ++p)
            detail::trace_one_path(scene, picker, cfg.max_bounces, cfg.filter, rng, out);
    };

    int threads = cfg.threads > 0 ? cfg.threads : 1;
    if (threads <= 1 || n_chunks <= 1) {
        for (std::uint64_t ci = 0; ci < n_chunks; ++ci) run_chunk(ci);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (;;) {
                    std::uint64_t ci = next.fetch_add(1);
                    if (ci >= n_chunks) return;
                    run_chunk(ci);
                }
            });
        for (auto& t : pool) t.join();
    }

    PhotonDump dump;
    dump.n_paths = cfg.n_paths;
    dump.seed = cfg.seed;
    size_t total = 0;
    for (const auto& c : chunk_photons) total += c.size();
    dump.photons.reserve(total);
    for (auto& c : chunk_photons)
        dump.photons.insert(dump.photons.end(), c.begin(), c.end());
    return dump;
}

}  // namespace dpm

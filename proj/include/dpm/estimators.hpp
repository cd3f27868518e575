#pragma once

#include <functional>
#include <optional>

#include "dpm/frame.hpp"
#include "dpm/parallel.hpp"
#include "dpm/photon_map.hpp"
#include "dpm/scene.hpp"
#include "dpm/tracer.hpp"

namespace dpm {

/// Diffuse query site. The frame's tangent is drawn once (randomly) and then
/// recorded so every estimator sees identical local coordinates.
struct ShadingPoint {
    Vec3 position;
    Vec3 normal;
    Rgb albedo;
    Frame frame;
};

enum class Kernel { Uniform, Cone, Epanechnikov };

inline Kernel parse_kernel(const std::string& s) {
    if (s == "uniform") return Kernel::Uniform;
    if (s == "cone") return Kernel::Cone;
    if (s == "epanechnikov") return Kernel::Epanechnikov;
    throw std::invalid_argument("unknown kernel: " + s);
}

/// Radially symmetric 2D kernels, each integrating to 1 over the disk of
/// radius r.
inline double kernel_value(Kernel k, double distance, double r) {
    double inv_area = 1.0 / (kPi * r * r);
    switch (k) {
        case Kernel::Uniform:
            return inv_area;
        case Kernel::Cone:
            return 3.0 * (1.0 - distance / r) * inv_area;
        case Kernel::Epanechnikov:
            return 2.0 * (1.0 - (distance * distance) / (r * r)) * inv_area;
    }
    return 0.0;
}

/// Keeps only photons arriving from the front side (travel direction against
/// the surface normal). Shared by the classical and the learned estimators so
/// their inputs stay directly comparable.
inline std::vector<NeighborRef> filter_backfacing(const Neighborhood& nb, const PhotonMap& map,
                                                  const Vec3& normal) {
    std::vector<NeighborRef> valid;
    valid.reserve(nb.photons.size());
    for (const NeighborRef& ref : nb.photons)
        if (dot(map.photon(ref.index).dir, normal) < 0.0) valid.push_back(ref);
    return valid;
}

/// Classical kernel density estimate over a precomputed neighborhood:
/// L = (rho/pi) * (1/N) * sum k_r(d_i) * flux_i.
inline Rgb pm_estimate(const PhotonMap& map, const ShadingPoint& sp, const Neighborhood& nb,
                       Kernel kernel) {
    if (nb.photons.empty()) return Rgb{0, 0, 0};
    double r = nb.r;
    if (!(r > 0.0)) return Rgb{0, 0, 0};
    Rgb sum{0, 0, 0};
    for (const NeighborRef& ref : nb.photons) {
        const Photon& ph = map.photon(ref.index);
        if (dot(ph.dir, sp.normal) >= 0.0) continue;  // zero weight from behind
        sum += kernel_value(kernel, ref.distance, r) * ph.flux;
    }
    return (sp.albedo / kPi) * sum / static_cast<double>(map.n_paths());
}

inline Rgb pm_estimate(const PhotonMap& map, const ShadingPoint& sp, size_t K, Kernel kernel) {
    return pm_estimate(map, sp, map.knn(sp.position, K), kernel);
}

// ---------------------------------------------------------------------------
// Progressive photon mapping at fixed shading points (ground truth + baseline)
// ---------------------------------------------------------------------------

struct PpmState {
    double r2 = 0.0;          // current gather radius squared; never increases
    double n_acc = 0.0;       // accumulated photon count (alpha-weighted)
    Rgb tau{0, 0, 0};         // accumulated flux, radius-corrected
    double alpha = 2.0 / 3.0;
    std::uint64_t emitted = 0;  // total emitted paths over all iterations
};

struct PpmConfig {
    double alpha = 2.0 / 3.0;
    int iterations = 100;
    std::uint64_t paths_per_iter = 100000;
    size_t init_knn = 50;          // K used to pick the initial radius
    double init_radius_scale = 1.0;
    int max_bounces = 5;
    StoreFilter filter = StoreFilter::All;
};

/// One PPM iteration at one point: gather the new dump's photons inside the
/// current radius, shrink, and accumulate flux with the matching correction.
inline void ppm_refine(PpmState& state, const ShadingPoint& sp, const PhotonMap& map,
                       std::vector<std::uint32_t>& scratch) {
    map.gather(sp.position, std::sqrt(state.r2), scratch);
    double gathered = 0.0;
    Rgb flux{0, 0, 0};
    for (std::uint32_t idx : scratch) {
        const Photon& ph = map.photon(idx);
        if (dot(ph.dir, sp.normal) >= 0.0) continue;
        gathered += 1.0;
        flux += ph.flux;
    }
    if (gathered > 0.0) {
        double ratio = (state.n_acc + state.alpha * gathered) / (state.n_acc + gathered);
        state.r2 *= ratio;
        state.tau = (state.tau + flux) * ratio;
        state.n_acc += state.alpha * gathered;
    }
    state.emitted += map.n_paths();
}

/// L = (rho/pi) * tau / (pi * R^2 * emitted paths).
inline Rgb ppm_radiance(const PpmState& state, const ShadingPoint& sp) {
    if (state.emitted == 0 || !(state.r2 > 0.0)) return Rgb{0, 0, 0};
    return (sp.albedo / kPi) * state.tau /
           (kPi * state.r2 * static_cast<double>(state.emitted));
}

// ---------------------------------------------------------------------------
// Shading-point images and ground truth
// ---------------------------------------------------------------------------

struct GtPixel {
    bool valid = false;
    Vec3 position;
    Vec3 normal;
    Rgb albedo;
    Vec3 tangent;   // recorded random tangent of the shading frame
    Rgb radiance;   // reference (or estimated) reflected radiance
};

struct GtImage {
    int width = 0, height = 0;
    std::vector<GtPixel> pixels;

    GtImage() = default;
    GtImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h) {}
    GtPixel& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    const GtPixel& at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }

    size_t valid_count() const {
        size_t n = 0;
        for (const auto& p : pixels) n += p.valid ? 1 : 0;
        return n;
    }
};

inline ShadingPoint shading_point_from_pixel(const GtPixel& px) {
    return ShadingPoint{px.position, px.normal, px.albedo,
                        frame_from_tangent(px.position, px.normal, px.tangent)};
}

/// Follows a camera ray through specular interactions to the first diffuse
/// hit. Dielectric branches are chosen by Fresnel probability from `rng`, so
/// the result is deterministic per (scene, seed, pixel).
inline std::optional<GtPixel> find_shading_point(const Scene& scene, Ray ray, RngStream& rng,
                                                 int max_chain = 16) {
    for (int i = 0; i < max_chain; ++i) {
        Intersection hit;
        if (!intersect(scene, ray, hit)) return std::nullopt;
        if (hit.material->kind == MaterialKind::Diffuse) {
            GtPixel px;
            px.valid = true;
            px.position = hit.position;
            px.normal = hit.normal;
            px.albedo = hit.material->albedo;
            px.tangent = build_frame(hit.position, hit.normal, rng).tangent;
            return px;
        }
        if (hit.material->kind == MaterialKind::Mirror) {
            ray = Ray{hit.position, reflect(ray.dir, hit.normal)};
            continue;
        }
        // dielectric
        double ior = hit.material->ior;
        double eta = hit.front_face ? 1.0 / ior : ior;
        double cos_i = -dot(ray.dir, hit.normal);
        double sin2_t = eta * eta * (1.0 - cos_i * cos_i);
        if (sin2_t >= 1.0) {
            ray = Ray{hit.position, reflect(ray.dir, hit.normal)};
            continue;
        }
        double cos_t = std::sqrt(1.0 - sin2_t);
        double r0 = (ior - 1.0) / (ior + 1.0);
        r0 *= r0;
        double cos_x = hit.front_face ? cos_i : cos_t;
        double fresnel = r0 + (1.0 - r0) * std::pow(1.0 - cos_x, 5.0);
        if (rng.next_double() < fresnel)
            ray = Ray{hit.position, reflect(ray.dir, hit.normal)};
        else
            ray = Ray{hit.position, normalize(eta * ray.dir + (eta * cos_i - cos_t) * hit.normal)};
    }
    return std::nullopt;
}

/// One shading point per pixel (where a diffuse hit exists), radiance left 0.
inline GtImage make_shading_image(const Scene& scene, int width, int height, std::uint64_t seed) {
    GtImage img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            RngStream rng(seed, stream::id(stream::kPixel, static_cast<std::uint64_t>(y) * width + x));
            Ray ray = scene.camera.primary_ray(x, y, width, height);
            if (auto px = find_shading_point(scene, ray, rng)) img.at(x, y) = *px;
        }
    return img;
}

/// Reference radiance per valid pixel via progressive photon mapping: fresh
/// photon passes with per-point shrinking radii until the path budget is
/// exhausted. Deterministic in seed, independent of thread count.
inline GtImage ground_truth_image(const Scene& scene, int width, int height, const PpmConfig& cfg,
                                  std::uint64_t seed, int threads = 1) {
    GtImage img = make_shading_image(scene, width, height, seed);

    std::vector<size_t> valid;
    for (size_t i = 0; i < img.pixels.size(); ++i)
        if (img.pixels[i].valid) valid.push_back(i);
    if (valid.empty()) return img;

    std::vector<ShadingPoint> points(valid.size());
    std::vector<PpmState> states(valid.size());
    for (size_t i = 0; i < valid.size(); ++i)
        points[i] = shading_point_from_pixel(img.pixels[valid[i]]);

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        TraceConfig tc;
        tc.n_paths = cfg.paths_per_iter;
        tc.max_bounces = cfg.max_bounces;
        tc.filter = cfg.filter;
        tc.seed = mix_seed(seed, 0xeece5 + iter);
        tc.threads = threads;
        PhotonDump dump = trace_photons(scene, tc);
        if (dump.photons.empty()) {
            for (auto& st : states) st.emitted += dump.n_paths;
            continue;
        }
        PhotonMap map(dump);
        detail::parallel_over(valid.size(), threads, [&](size_t i) {
            std::vector<std::uint32_t> scratch;
            if (iter == 0) {
                Neighborhood nb = map.knn(points[i].position, cfg.init_knn);
                double r = nb.r * cfg.init_radius_scale;
                if (!(r > 0.0)) r = 1e-3;
                states[i].r2 = r * r;
                states[i].alpha = cfg.alpha;
            }
            ppm_refine(states[i], points[i], map, scratch);
        });
    }

    for (size_t i = 0; i < valid.size(); ++i)
        img.pixels[valid[i]].radiance = ppm_radiance(states[i], points[i]);
    return img;
}

// .gti: little-endian; header {magic "GTI1", width u32, height u32}, per pixel
// {valid u8, 3*f64 position, 3*f64 normal, 3*f64 albedo, 3*f64 tangent,
//  3*f64 radiance}.
inline void write_gt_image(std::ostream& os, const GtImage& img) {
    os.write("GTI1", 4);
    detail::write_raw(os, static_cast<std::uint32_t>(img.width));
    detail::write_raw(os, static_cast<std::uint32_t>(img.height));
    auto put3 = [&os](const Vec3& v) {
        detail::write_raw(os, v.x);
        detail::write_raw(os, v.y);
        detail::write_raw(os, v.z);
    };
    for (const GtPixel& p : img.pixels) {
        detail::write_raw(os, static_cast<std::uint8_t>(p.valid ? 1 : 0));
        put3(p.position);
        put3(p.normal);
        put3(p.albedo);
        put3(p.tangent);
        put3(p.radiance);
    }
}

inline void save_gt_image(const std::string& path, const GtImage& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write gt image: " + path);
    write_gt_image(os, img);
    if (!os) throw std::runtime_error("short write on gt image: " + path);
}

inline GtImage read_gt_image(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "GTI1", 4) != 0) throw std::runtime_error("gt image: bad magic");
    std::uint32_t w = 0, h = 0;
    detail::read_raw(is, w);
    detail::read_raw(is, h);
    GtImage img(static_cast<int>(w), static_cast<int>(h));
    auto get3 = [&is](Vec3& v) {
        detail::read_raw(is, v.x);
        detail::read_raw(is, v.y);
        detail::read_raw(is, v.z);
    };
    for (GtPixel& p : img.pixels) {
        std::uint8_t valid = 0;
        detail::read_raw(is, valid);
        p.valid = valid != 0;
        get3(p.position);
        get3(p.normal);
        get3(p.albedo);
        get3(p.tangent);
        get3(p.radiance);
    }
    if (!is) throw std::runtime_error("gt image: truncated file");
    return img;
}

inline GtImage load_gt_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open gt image: " + path);
    return read_gt_image(is);
}

}  // namespace dpm

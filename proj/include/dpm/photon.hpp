#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpm/rng.hpp"
#include "dpm/vec.hpp"

namespace dpm {

// flags byte layout: bit0 = path hit a specular surface before this store,
// bits1..5 = bounce count at store (clamped to 31), bit6 = first store of
// its path. The path-start bit lets a loaded dump be thinned path-by-path.
namespace photon_flags {
constexpr std::uint8_t kSpecularBefore = 0x01;
constexpr std::uint8_t kPathStart = 0x40;

inline std::uint8_t pack(bool specular_before, int bounce, bool path_start) {
    std::uint8_t b = bounce < 0 ? 0 : (bounce > 31 ? 31 : static_cast<std::uint8_t>(bounce));
    return static_cast<std::uint8_t>((specular_before ? kSpecularBefore : 0) |
                                     (static_cast<std::uint8_t>(b) << 1) |
                                     (path_start ? kPathStart : 0));
}
}  // namespace photon_flags

struct Photon {
    Vec3 position;   // store location on a diffuse surface
    Vec3 dir;        // unit direction of travel (points toward the surface)
    Rgb flux;        // path contribution / sampling pdf, excludes the 1/N factor
    std::uint8_t flags = 0;

    bool specular_before() const { return flags & photon_flags::kSpecularBefore; }
    int bounce() const { return (flags >> 1) & 0x1f; }
    bool path_start() const { return flags & photon_flags::kPathStart; }
};

struct PhotonDump {
    std::vector<Photon> photons;
    std::uint64_t n_paths = 0;  // emitted photon paths, the N of the density estimate
    std::uint64_t seed = 0;
    std::uint32_t scene_id = 0;
};

namespace detail {

template <typename T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace detail

// .phd: little-endian; header {magic "PHD1", version u32, N u64, count u64},
// then per photon {3*f64 position, 3*f64 direction, 3*f64 flux, u8 flags}.
constexpr std::uint32_t kPhdVersion = 1;

inline void write_photon_dump(std::ostream& os, const PhotonDump& dump) {
    os.write("PHD1", 4);
    detail::write_raw(os, kPhdVersion);
    detail::write_raw(os, dump.n_paths);
    std::uint64_t count = dump.photons.size();
    detail::write_raw(os, count);
    for (const Photon& p : dump.photons) {
        detail::write_raw(os, p.position.x);
        detail::write_raw(os, p.position.y);
        detail::write_raw(os, p.position.z);
        detail::write_raw(os, p.dir.x);
        detail::write_raw(os, p.dir.y);
        detail::write_raw(os, p.dir.z);
        detail::write_raw(os, p.flux.x);
        detail::write_raw(os, p.flux.y);
        detail::write_raw(os, p.flux.z);
        detail::write_raw(os, p.flags);
    }
}

inline void save_photon_dump(const std::string& path, const PhotonDump& dump) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write photon dump: " + path);
    write_photon_dump(os, dump);
    if (!os) throw std::runtime_error("short write on photon dump: " + path);
}

inline PhotonDump read_photon_dump(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "PHD1", 4) != 0)
        throw std::runtime_error("photon dump: bad magic");
    std::uint32_t version = 0;
    detail::read_raw(is, version);
    if (version != kPhdVersion) throw std::runtime_error("photon dump: unsupported version");
    PhotonDump dump;
    std::uint64_t count = 0;
    detail::read_raw(is, dump.n_paths);
    detail::read_raw(is, count);
    dump.photons.resize(count);
    for (Photon& p : dump.photons) {
        detail::read_raw(is, p.position.x);
        detail::read_raw(is, p.position.y);
        detail::read_raw(is, p.position.z);
        detail::read_raw(is, p.dir.x);
        detail::read_raw(is, p.dir.y);
        detail::read_raw(is, p.dir.z);
        detail::read_raw(is, p.flux.x);
        detail::read_raw(is, p.flux.y);
        detail::read_raw(is, p.flux.z);
        detail::read_raw(is, p.flags);
    }
    if (!is) throw std::runtime_error("photon dump: truncated file");
    return dump;
}

inline PhotonDump load_photon_dump(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open photon dump: " + path);
    return read_photon_dump(is);
}

/// Path-level thinning: keeps each whole path with probability `fraction` and
/// counts kept paths (including the ones that stored nothing) as the new N,
/// so the 1/N semantics of the density estimate stay exact. Deterministic in
/// the rng state.
inline PhotonDump subsample_paths(const PhotonDump& dump, double fraction, RngStream& rng) {
    if (fraction >= 1.0) return dump;
    if (fraction < 0.0) throw std::invalid_argument("subsample_paths: negative fraction");
    PhotonDump out;
    out.seed = dump.seed;
    out.scene_id = dump.scene_id;
    std::uint64_t visible_paths = 0;
    std::uint64_t kept_paths = 0;
    bool keep_current = false;
    for (const Photon& p : dump.photons) {
        if (p.path_start()) {
            ++visible_paths;
            keep_current = rng.next_double() < fraction;
            if (keep_current) ++kept_paths;
        }
        if (keep_current) out.photons.push_back(p);
    }
    // paths that stored no photon still count toward N
    std::uint64_t invisible = dump.n_paths > visible_paths ? dump.n_paths - visible_paths : 0;
    for (std::uint64_t i = 0; i < invisible; ++i)
        if (rng.next_double() < fraction) ++kept_paths;
    out.n_paths = kept_paths > 0 ? kept_paths : 1;
    return out;
}

}  // namespace dpm

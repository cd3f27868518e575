#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpm/train.hpp"
#include "dpm/vec.hpp"

namespace dpm {

/// Linear-radiance raster, row 0 at the top.
struct RadianceImage {
    int width = 0, height = 0;
    std::vector<Rgb> pixels;

    RadianceImage() = default;
    RadianceImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h) {}
    Rgb& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    const Rgb& at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
};

// ---------------------------------------------------------------------------
// PFM: raw linear HDR, little-endian, rows bottom-to-top per convention.
// ---------------------------------------------------------------------------

inline void write_pfm(std::ostream& os, const RadianceImage& img) {
    os << "PF\n" << img.width << " " << img.height << "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y)
        for (int x = 0; x < img.width; ++x) {
            const Rgb& p = img.at(x, y);
            float rgb[3] = {static_cast<float>(p.x), static_cast<float>(p.y),
                            static_cast<float>(p.z)};
            os.write(reinterpret_cast<const char*>(rgb), sizeof(rgb));
        }
}

inline void save_pfm(const std::string& path, const RadianceImage& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write image: " + path);
    write_pfm(os, img);
    if (!os) throw std::runtime_error("short write on image: " + path);
}

inline RadianceImage read_pfm(std::istream& is) {
    std::string magic;
    is >> magic;
    if (magic != "PF") throw std::runtime_error("pfm: only 3-channel PF supported");
    int w = 0, h = 0;
    double scale = 0.0;
    is >> w >> h >> scale;
    is.get();  // single whitespace after the header
    if (w <= 0 || h <= 0) throw std::runtime_error("pfm: bad dimensions");
    if (scale >= 0.0) throw std::runtime_error("pfm: big-endian files not supported");
    RadianceImage img(w, h);
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x) {
            float rgb[3];
            is.read(reinterpret_cast<char*>(rgb), sizeof(rgb));
            img.at(x, y) = Rgb{rgb[0], rgb[1], rgb[2]};
        }
    if (!is) throw std::runtime_error("pfm: truncated file");
    return img;
}

inline RadianceImage load_pfm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open image: " + path);
    return read_pfm(is);
}

// ---------------------------------------------------------------------------
// PNG: 8-bit RGB after mu-law compression, zlib-deflated scanlines.
// ---------------------------------------------------------------------------

namespace detail {

inline void png_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void png_chunk(std::ostream& os, const char type[4],
                      const std::vector<std::uint8_t>& data) {
    std::vector<std::uint8_t> head;
    png_be32(head, static_cast<std::uint32_t>(data.size()));
    os.write(reinterpret_cast<const char*>(head.data()), 4);
    os.write(type, 4);
    if (!data.empty()) os.write(reinterpret_cast<const char*>(data.data()), data.size());
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    std::vector<std::uint8_t> tail;
    png_be32(tail, crc);
    os.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace detail

/// Tone-mapped quantization used for PNG output: round(255 * mu_law(v)).
inline std::uint8_t quantize_mu_law(double v, double mu = 5000.0) {
    double t = mu_law_scalar(v, mu);
    double q = std::nearbyint(255.0 * t);
    if (q < 0.0) q = 0.0;
    if (q > 255.0) q = 255.0;
    return static_cast<std::uint8_t>(q);
}

inline void write_png(std::ostream& os, const RadianceImage& img, double mu = 5000.0) {
    static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    os.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<std::uint8_t> ihdr;
    detail::png_be32(ihdr, static_cast<std::uint32_t>(img.width));
    detail::png_be32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // truecolor
    ihdr.push_back(0);   // deflate
    ihdr.push_back(0);   // adaptive filtering (we emit filter 0 rows)
    ihdr.push_back(0);   // no interlace
    detail::png_chunk(os, "IHDR", ihdr);

    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<size_t>(img.height) * (1 + 3 * img.width));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < img.width; ++x) {
            const Rgb& p = img.at(x, y);
            raw.push_back(quantize_mu_law(p.x, mu));
            raw.push_back(quantize_mu_law(p.y, mu));
            raw.push_back(quantize_mu_law(p.z, mu));
        }
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> idat(bound);
    if (compress2(idat.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw std::runtime_error("png: deflate failed");
    idat.resize(bound);
    detail::png_chunk(os, "IDAT", idat);
    detail::png_chunk(os, "IEND", {});
}

inline void save_png(const std::string& path, const RadianceImage& img, double mu = 5000.0) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write image: " + path);
    write_png(os, img, mu);
    if (!os) throw std::runtime_error("short write on image: " + path);
}

/// Dispatch on extension: .pfm stores raw HDR floats, .png tone-maps.
inline void write_image(const std::string& path, const RadianceImage& img) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "pfm") save_pfm(path, img);
    else if (ext == "png") save_png(path, img);
    else throw std::invalid_argument("write_image: unsupported format ." + ext);
}

}  // namespace dpm

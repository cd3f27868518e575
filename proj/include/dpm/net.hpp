#pragma once

#include <array>
#include <cstring>
#include <fstream>

#include "dpm/estimators.hpp"
#include "dpm/photon_map.hpp"

namespace dpm {

/// Eq.-style HDR compression of photon contributions: t_a(u) maps [0, inf)
/// to [0, 1), then the affine step rescales to [-1, 1).
inline double map_contribution_scalar(double u, double a = 0.01) {
    if (u < 0.0) throw std::invalid_argument("map_contribution: negative input");
    double x = std::log(u + a) - std::log(a);
    double t = x / (x + 1.0);
    return 2.0 * t - 1.0;
}

inline Rgb map_contribution(const Rgb& u, double a = 0.01) {
    return {map_contribution_scalar(u.x, a), map_contribution_scalar(u.y, a),
            map_contribution_scalar(u.z, a)};
}

/// Per-photon input rows for the kernel network. Nine channels per row:
/// local position / bandwidth (3), local direction (3), mapped contribution
/// (3). Row order carries no meaning. The raw fluxes ride along for the
/// weighted sum of the estimate.
struct NetInput {
    size_t k = 0;
    double r = 0.0;
    std::vector<double> rows;      // k x 9, row-major, all channels in [-1, 1]
    std::vector<double> flux;      // k x 3 raw (unmapped) flux
    std::vector<std::uint32_t> photon_index;  // back-references into the dump

    static constexpr int kChannels = 9;
};

/// Builds network input from the front-facing photons of a neighborhood.
/// `valid` must already be filtered (see filter_backfacing); `r` is the raw
/// K-NN bandwidth, which may exceed the distance of the last valid photon.
inline NetInput preprocess(const ShadingPoint& sp, const std::vector<NeighborRef>& valid,
                           const PhotonMap& map, double r) {
    if (valid.empty()) throw std::invalid_argument("preprocess: needs at least one photon");
    if (!(r > 0.0)) throw std::invalid_argument("preprocess: degenerate bandwidth");
    NetInput in;
    in.k = valid.size();
    in.r = r;
    in.rows.resize(in.k * NetInput::kChannels);
    in.flux.resize(in.k * 3);
    in.photon_index.resize(in.k);
    for (size_t i = 0; i < valid.size(); ++i) {
        const Photon& ph = map.photon(valid[i].index);
        Vec3 lp = to_local(sp.frame, ph.position) / r;
        Vec3 ld = to_local_dir(sp.frame, ph.dir);
        Rgb mc = map_contribution(ph.flux);
        double* row = &in.rows[i * NetInput::kChannels];
        row[0] = lp.x; row[1] = lp.y; row[2] = lp.z;
        row[3] = ld.x; row[4] = ld.y; row[5] = ld.z;
        row[6] = mc.x; row[7] = mc.y; row[8] = mc.z;
        in.flux[i * 3 + 0] = ph.flux.x;
        in.flux[i * 3 + 1] = ph.flux.y;
        in.flux[i * 3 + 2] = ph.flux.z;
        in.photon_index[i] = valid[i].index;
    }
    return in;
}

struct DenseLayer {
    int out = 0, in = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;  // out

    void resize(int out_, int in_) {
        out = out_;
        in = in_;
        w.assign(static_cast<size_t>(out) * in, 0.0);
        b.assign(out, 0.0);
    }
};

/// Six fully connected layers total: a per-photon feature extractor
/// (9 -> 32 -> 32 -> 32, ReLU each) and a kernel predictor over the
/// concatenation [feature 32 | max-pool 32 | avg-pool 32 | count 1]
/// (97 -> 64 -> 32 -> 1, ReLU on the hidden layers, linear output).
/// The direct-estimation variant replaces the predictor with a head on the
/// pooled context alone ([pool 64 | count 1] -> 64 -> 32 -> 3).
struct KernelNet {
    static constexpr int kFeat = 32;
    static constexpr int kCtx = 2 * kFeat;

    std::uint32_t K = 500;  // neighbor count the net was trained for
    bool direct = false;
    std::array<DenseLayer, 3> extractor;
    std::array<DenseLayer, 3> predictor;

    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& l : extractor) n += l.w.size() + l.b.size();
        for (const auto& l : predictor) n += l.w.size() + l.b.size();
        return n;
    }
};

inline void init_shapes(KernelNet& net) {
    net.extractor[0].resize(KernelNet::kFeat, NetInput::kChannels);
    net.extractor[1].resize(KernelNet::kFeat, KernelNet::kFeat);
    net.extractor[2].resize(KernelNet::kFeat, KernelNet::kFeat);
    if (!net.direct) {
        net.predictor[0].resize(64, KernelNet::kFeat + KernelNet::kCtx + 1);
        net.predictor[1].resize(32, 64);
        net.predictor[2].resize(1, 32);
    } else {
        net.predictor[0].resize(64, KernelNet::kCtx + 1);
        net.predictor[1].resize(32, 64);
        net.predictor[2].resize(3, 32);
    }
}

/// Fan-balanced uniform init in [-b, b], b = sqrt(6 / (fan_in + fan_out)).
inline KernelNet make_kernel_net(std::uint32_t K, std::uint64_t seed, bool direct = false) {
    KernelNet net;
    net.K = K;
    net.direct = direct;
    init_shapes(net);
    RngStream rng(seed, stream::kNetInit);
    auto fill = [&rng](DenseLayer& l) {
        double bound = std::sqrt(6.0 / (l.in + l.out));
        for (auto& v : l.w) v = rng.uniform(-bound, bound);
        for (auto& v : l.b) v = 0.0;
    };
    for (auto& l : net.extractor) fill(l);
    for (auto& l : net.predictor) fill(l);
    return net;
}

/// All-zero weights with a constant final bias: predicts `value` for every
/// photon, which reduces the learned estimate to uniform-kernel PM.
inline KernelNet make_constant_net(std::uint32_t K, double value = 1.0) {
    KernelNet net;
    net.K = K;
    init_shapes(net);
    net.predictor[2].b[0] = value;
    return net;
}

namespace detail {

inline void dense_forward(const DenseLayer& l, const double* x, double* y) {
    for (int o = 0; o < l.out; ++o) {
        const double* wr = &l.w[static_cast<size_t>(o) * l.in];
        double acc = l.b[o];
        for (int i = 0; i < l.in; ++i) acc += wr[i] * x[i];
        y[o] = acc;
    }
}

inline void relu_inplace(double* x, int n) {
    for (int i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

}  // namespace detail

/// Reusable forward buffers; one per thread when evaluating in parallel.
struct NetWorkspace {
    std::vector<double> features;  // k x 32
    std::vector<double> scratch_a, scratch_b, scratch_in;
    std::array<double, KernelNet::kCtx> context;
};

/// Per-row kernel weights (or, for the direct variant, one RGB triple stored
/// in weights[0..2]). Pure function of (net, input).
inline void forward(const KernelNet& net, const NetInput& in, std::vector<double>& weights,
                    NetWorkspace& ws) {
    const size_t k = in.k;
    const int F = KernelNet::kFeat;
    ws.features.resize(k * F);
    ws.scratch_a.resize(64);
    ws.scratch_b.resize(64);

    double h1[KernelNet::kFeat], h2[KernelNet::kFeat];
    for (size_t i = 0; i < k; ++i) {
        detail::dense_forward(net.extractor[0], &in.rows[i * NetInput::kChannels], h1);
        detail::relu_inplace(h1, F);
        detail::dense_forward(net.extractor[1], h1, h2);
        detail::relu_inplace(h2, F);
        detail::dense_forward(net.extractor[2], h2, &ws.features[i * F]);
        detail::relu_inplace(&ws.features[i * F], F);
    }

    // channelwise max + average pooling over photons
    for (int c = 0; c < F; ++c) {
        double mx = ws.features[c], av = 0.0;
        for (size_t i = 0; i < k; ++i) {
            double v = ws.features[i * F + c];
            if (v > mx) mx = v;
            av += v;
        }
        ws.context[c] = mx;
        ws.context[F + c] = av / static_cast<double>(k);
    }

    double count_channel = static_cast<double>(k) / static_cast<double>(net.K);

    if (net.direct) {
        ws.scratch_in.resize(KernelNet::kCtx + 1);
        std::memcpy(ws.scratch_in.data(), ws.context.data(), sizeof(double) * KernelNet::kCtx);
        ws.scratch_in[KernelNet::kCtx] = count_channel;
        detail::dense_forward(net.predictor[0], ws.scratch_in.data(), ws.scratch_a.data());
        detail::relu_inplace(ws.scratch_a.data(), 64);
        detail::dense_forward(net.predictor[1], ws.scratch_a.data(), ws.scratch_b.data());
        detail::relu_inplace(ws.scratch_b.data(), 32);
        weights.resize(3);
        detail::dense_forward(net.predictor[2], ws.scratch_b.data(), weights.data());
        return;
    }

    weights.resize(k);
    ws.scratch_in.resize(F + KernelNet::kCtx + 1);
    std::memcpy(&ws.scratch_in[F], ws.context.data(), sizeof(double) * KernelNet::kCtx);
    ws.scratch_in[F + KernelNet::kCtx] = count_channel;
    for (size_t i = 0; i < k; ++i) {
        std::memcpy(ws.scratch_in.data(), &ws.features[i * F], sizeof(double) * F);
        detail::dense_forward(net.predictor[0], ws.scratch_in.data(), ws.scratch_a.data());
        detail::relu_inplace(ws.scratch_a.data(), 64);
        detail::dense_forward(net.predictor[1], ws.scratch_a.data(), ws.scratch_b.data());
        detail::relu_inplace(ws.scratch_b.data(), 32);
        double w;
        detail::dense_forward(net.predictor[2], ws.scratch_b.data(), &w);
        weights[i] = w;
    }
}

inline std::vector<double> forward(const KernelNet& net, const NetInput& in) {
    NetWorkspace ws;
    std::vector<double> weights;
    forward(net, in, weights, ws);
    return weights;
}

struct EstimateStats {
    std::uint64_t degenerate_fallbacks = 0;
};

/// Learned radiance estimate over a precomputed neighborhood:
/// L = (rho/pi) * (1/(N pi r^2)) * sum w_i * flux_i, raw fluxes.
inline Rgb learned_estimate(const KernelNet& net, const PhotonMap& map, const ShadingPoint& sp,
                            const Neighborhood& nb, NetWorkspace& ws,
                            EstimateStats* stats = nullptr) {
    if (nb.photons.empty()) return Rgb{0, 0, 0};
    if (!(nb.r > 0.0)) {
        // all gathered photons coincide with the query: no usable bandwidth
        if (stats) ++stats->degenerate_fallbacks;
        return pm_estimate(map, sp, nb, Kernel::Uniform);
    }
    std::vector<NeighborRef> valid = filter_backfacing(nb, map, sp.normal);
    if (valid.empty()) return Rgb{0, 0, 0};
    NetInput in = preprocess(sp, valid, map, nb.r);
    std::vector<double> weights;
    forward(net, in, weights, ws);

    if (net.direct) {
        Rgb s{weights[0], weights[1], weights[2]};
        double norm = kPi * nb.r * nb.r * static_cast<double>(map.n_paths());
        return (sp.albedo / kPi) * s / norm;
    }

    Rgb sum{0, 0, 0};
    for (size_t i = 0; i < in.k; ++i)
        sum += weights[i] * Rgb{in.flux[i * 3], in.flux[i * 3 + 1], in.flux[i * 3 + 2]};
    double norm = kPi * nb.r * nb.r * static_cast<double>(map.n_paths());
    return (sp.albedo / kPi) * sum / norm;
}

inline Rgb learned_estimate(const KernelNet& net, const PhotonMap& map, const ShadingPoint& sp,
                            size_t K, EstimateStats* stats = nullptr) {
    NetWorkspace ws;
    return learned_estimate(net, map, sp, map.knn(sp.position, K), ws, stats);
}

// ---------------------------------------------------------------------------
// Model file: {magic "DPMW", version u32, kind u32, K u32, layer count u32,
// per layer {out u32, in u32}, then f32 parameters in layer order (weights
// row-major, then biases)}.
// ---------------------------------------------------------------------------

constexpr std::uint32_t kModelVersion = 1;

inline void write_model(std::ostream& os, const KernelNet& net) {
    os.write("DPMW", 4);
    detail::write_raw(os, kModelVersion);
    detail::write_raw(os, static_cast<std::uint32_t>(net.direct ? 1 : 0));
    detail::write_raw(os, net.K);
    detail::write_raw(os, static_cast<std::uint32_t>(6));
    auto layers = {&net.extractor[0], &net.extractor[1], &net.extractor[2],
                   &net.predictor[0], &net.predictor[1], &net.predictor[2]};
    for (const DenseLayer* l : layers) {
        detail::write_raw(os, static_cast<std::uint32_t>(l->out));
        detail::write_raw(os, static_cast<std::uint32_t>(l->in));
    }
    for (const DenseLayer* l : layers) {
        for (double v : l->w) detail::write_raw(os, static_cast<float>(v));
        for (double v : l->b) detail::write_raw(os, static_cast<float>(v));
    }
}

inline void save_model(const std::string& path, const KernelNet& net) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write model: " + path);
    write_model(os, net);
    if (!os) throw std::runtime_error("short write on model: " + path);
}

inline KernelNet read_model(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DPMW", 4) != 0) throw std::runtime_error("model: bad magic");
    std::uint32_t version = 0, kind = 0, K = 0, n_layers = 0;
    detail::read_raw(is, version);
    if (version != kModelVersion) throw std::runtime_error("model: unsupported version");
    detail::read_raw(is, kind);
    detail::read_raw(is, K);
    detail::read_raw(is, n_layers);
    if (n_layers != 6) throw std::runtime_error("model: unexpected layer count");

    KernelNet net;
    net.K = K;
    net.direct = kind == 1;
    init_shapes(net);
    auto layers = {&net.extractor[0], &net.extractor[1], &net.extractor[2],
                   &net.predictor[0], &net.predictor[1], &net.predictor[2]};
    for (DenseLayer* l : layers) {
        std::uint32_t out = 0, in = 0;
        detail::read_raw(is, out);
        detail::read_raw(is, in);
        if (static_cast<int>(out) != l->out || static_cast<int>(in) != l->in)
            throw std::runtime_error("model: layer shape mismatch");
    }
    for (DenseLayer* l : layers) {
        for (auto& v : l->w) {
            float f = 0;
            detail::read_raw(is, f);
            v = f;
        }
        for (auto& v : l->b) {
            float f = 0;
            detail::read_raw(is, f);
            v = f;
        }
    }
    if (!is) throw std::runtime_error("model: truncated file");
    return net;
}

inline KernelNet load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open model: " + path);
    return read_model(is);
}

}  // namespace dpm

#pragma once

#include <cassert>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "dpm/net.hpp"
#include "dpm/vec.hpp"

namespace dpm {

/// Dense row-major matrix for tape values and gradients.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return v.size(); }
};

/// Reverse-mode tape over the primitive ops of the kernel-prediction pipeline:
/// affine layers, ReLU, channelwise max/average pooling, context
/// concatenation, the flux-weighted sum, the mu-law compressor, and the L2
/// loss. Backward visits ops in exact reverse order and accumulates
/// gradients additively.
class Tape {
public:
    int input(Mat m) {
        values_.push_back(std::move(m));
        ops_.push_back({OpKind::Input, -1, -1, -1, static_cast<int>(values_.size()) - 1});
        return ops_.back().out;
    }

    /// y = x * W^T + b (b broadcast over rows).
    int linear(int x, int w, int b) {
        const Mat& X = values_[x];
        const Mat& W = values_[w];
        const Mat& B = values_[b];
        if (X.cols != W.cols) throw std::logic_error("tape linear: shape mismatch");
        if (B.cols != W.rows || B.rows != 1) throw std::logic_error("tape linear: bias mismatch");
        Mat Y(X.rows, W.rows);
        for (int r = 0; r < X.rows; ++r) {
            const double* xr = &X.v[static_cast<size_t>(r) * X.cols];
            double* yr = &Y.v[static_cast<size_t>(r) * Y.cols];
            for (int o = 0; o < W.rows; ++o) {
                const double* wr = &W.v[static_cast<size_t>(o) * W.cols];
                double acc = B.v[o];
                for (int i = 0; i < X.cols; ++i) acc += xr[i] * wr[i];
                yr[o] = acc;
            }
        }
        return push(OpKind::Linear, std::move(Y), x, w, b);
    }

    int relu(int x) {
        Mat Y = values_[x];
        for (auto& t : Y.v) t = t > 0.0 ? t : 0.0;
        return push(OpKind::Relu, std::move(Y), x);
    }

    /// Channelwise max over rows; ties route to the first arg-max row.
    int maxpool(int x) {
        const Mat& X = values_[x];
        Mat Y(1, X.cols);
        std::vector<int> arg(X.cols, 0);
        for (int c = 0; c < X.cols; ++c) {
            double best = X.at(0, c);
            int bi = 0;
            for (int r = 1; r < X.rows; ++r)
                if (X.at(r, c) > best) { best = X.at(r, c); bi = r; }
            Y.v[c] = best;
            arg[c] = bi;
        }
        int id = push(OpKind::MaxPool, std::move(Y), x);
        ops_.back().arg = std::move(arg);
        return id;
    }

    int avgpool(int x) {
        const Mat& X = values_[x];
        Mat Y(1, X.cols);
        for (int c = 0; c < X.cols; ++c) {
            double acc = 0.0;
            for (int r = 0; r < X.rows; ++r) acc += X.at(r, c);
            Y.v[c] = acc / X.rows;
        }
        return push(OpKind::AvgPool, std::move(Y), x);
    }

    /// [per_row | mx | av | count]; mx/av broadcast over rows, the count
    /// channel is a constant. per_row == -1 builds the 1-row context-only
    /// variant for the direct-estimation head.
    int concat_context(int per_row, int mx, int av, double count_channel) {
        const Mat& M = values_[mx];
        const Mat& A = values_[av];
        int rows = per_row >= 0 ? values_[per_row].rows : 1;
        int pcols = per_row >= 0 ? values_[per_row].cols : 0;
        Mat Y(rows, pcols + M.cols + A.cols + 1);
        for (int r = 0; r < rows; ++r) {
            double* yr = &Y.v[static_cast<size_t>(r) * Y.cols];
            if (per_row >= 0) {
                const Mat& P = values_[per_row];
                std::memcpy(yr, &P.v[static_cast<size_t>(r) * P.cols], sizeof(double) * pcols);
            }
            std::memcpy(yr + pcols, M.v.data(), sizeof(double) * M.cols);
            std::memcpy(yr + pcols + M.cols, A.v.data(), sizeof(double) * A.cols);
            yr[pcols + M.cols + A.cols] = count_channel;
        }
        return push(OpKind::ConcatContext, std::move(Y), per_row, mx, av);
    }

    /// out_c = scale_c * sum_i w_i * flux[i][c]; w is k x 1, flux constant.
    int weighted_sum(int w, Mat flux, const Vec3& scale) {
        const Mat& W = values_[w];
        if (W.cols != 1 || flux.rows != W.rows || flux.cols != 3)
            throw std::logic_error("tape weighted_sum: shape mismatch");
        Mat Y(1, 3);
        for (int c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (int i = 0; i < W.rows; ++i) acc += W.v[i] * flux.at(i, c);
            Y.v[c] = acc * scale[c];
        }
        int id = push(OpKind::WeightedSum, std::move(Y), w);
        ops_.back().constant = std::move(flux);
        ops_.back().scale = scale;
        return id;
    }

    /// out_c = scale_c * x_c, 1 x 3.
    int scale3(int x, const Vec3& scale) {
        const Mat& X = values_[x];
        Mat Y(1, 3);
        for (int c = 0; c < 3; ++c) Y.v[c] = X.v[c] * scale[c];
        int id = push(OpKind::Scale3, std::move(Y), x);
        ops_.back().scale = scale;
        return id;
    }

    /// p(v) = log(1 + mu*v) / log(1 + mu), negatives clamped to 0 (and
    /// counted, since unconstrained kernels can push estimates below zero).
    int mu_law(int x, double mu) {
        const Mat& X = values_[x];
        Mat Y(X.rows, X.cols);
        double denom = std::log1p(mu);
        for (size_t i = 0; i < X.v.size(); ++i) {
            double v = X.v[i];
            if (v < 0.0) { ++clamp_events; v = 0.0; }
            Y.v[i] = std::log1p(mu * v) / denom;
        }
        int id = push(OpKind::MuLaw, std::move(Y), x);
        ops_.back().mu = mu;
        return id;
    }

    /// Mean over channels of (x - target)^2; scalar output.
    int l2_mean(int x, Mat target) {
        const Mat& X = values_[x];
        if (X.rows != target.rows || X.cols != target.cols)
            throw std::logic_error("tape l2_mean: shape mismatch");
        double acc = 0.0;
        for (size_t i = 0; i < X.v.size(); ++i) {
            double d = X.v[i] - target.v[i];
            acc += d * d;
        }
        Mat Y(1, 1);
        Y.v[0] = acc / static_cast<double>(X.v.size());
        int id = push(OpKind::L2Mean, std::move(Y), x);
        ops_.back().constant = std::move(target);
        return id;
    }

    const Mat& value(int id) const { return values_[id]; }
    double scalar(int id) const { return values_[id].v[0]; }

    /// Gradients of node `loss` w.r.t. every node, accumulated in reverse
    /// op order. Must follow a recorded forward pass.
    void backward(int loss) {
        if (ops_.empty() || loss < 0 || loss >= static_cast<int>(values_.size()))
            throw std::logic_error("tape backward: no forward recorded");
        grads_.assign(values_.size(), Mat());
        for (size_t i = 0; i < values_.size(); ++i)
            grads_[i] = Mat(values_[i].rows, values_[i].cols);
        grads_[loss].v[0] = 1.0;

        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
            const TapeOp& op = *it;
            const Mat& gy = grads_[op.out];
            switch (op.kind) {
                case OpKind::Input:
                    break;
                case OpKind::Linear: {
                    const Mat& X = values_[op.a];
                    const Mat& W = values_[op.b];
                    Mat& gx = grads_[op.a];
                    Mat& gw = grads_[op.b];
                    Mat& gb = grads_[op.c];
                    for (int r = 0; r < X.rows; ++r) {
                        const double* gyr = &gy.v[static_cast<size_t>(r) * gy.cols];
                        const double* xr = &X.v[static_cast<size_t>(r) * X.cols];
                        double* gxr = &gx.v[static_cast<size_t>(r) * gx.cols];
                        for (int o = 0; o < W.rows; ++o) {
                            double g = gyr[o];
                            if (g == 0.0) continue;
                            const double* wr = &W.v[static_cast<size_t>(o) * W.cols];
                            double* gwr = &gw.v[static_cast<size_t>(o) * W.cols];
                            for (int i = 0; i < X.cols; ++i) {
                                gxr[i] += g * wr[i];
                                gwr[i] += g * xr[i];
                            }
                            gb.v[o] += g;
                        }
                    }
                    break;
                }
                case OpKind::Relu: {
                    const Mat& X = values_[op.a];
                    Mat& gx = grads_[op.a];
                    for (size_t i = 0; i < X.v.size(); ++i)
                        if (X.v[i] > 0.0) gx.v[i] += gy.v[i];
                    break;
                }
                case OpKind::MaxPool: {
                    Mat& gx = grads_[op.a];
                    for (int c = 0; c < gy.cols; ++c) gx.at(op.arg[c], c) += gy.v[c];
                    break;
                }
                case OpKind::AvgPool: {
                    Mat& gx = grads_[op.a];
                    double inv = 1.0 / gx.rows;
                    for (int c = 0; c < gy.cols; ++c) {
                        double g = gy.v[c] * inv;
                        for (int r = 0; r < gx.rows; ++r) gx.at(r, c) += g;
                    }
                    break;
                }
                case OpKind::ConcatContext: {
                    int pcols = op.a >= 0 ? values_[op.a].cols : 0;
                    Mat& gm = grads_[op.b];
                    Mat& ga = grads_[op.c];
                    for (int r = 0; r < gy.rows; ++r) {
                        const double* gyr = &gy.v[static_cast<size_t>(r) * gy.cols];
                        if (op.a >= 0) {
                            Mat& gp = grads_[op.a];
                            double* gpr = &gp.v[static_cast<size_t>(r) * gp.cols];
                            for (int i = 0; i < pcols; ++i) gpr[i] += gyr[i];
                        }
                        for (int i = 0; i < gm.cols; ++i) gm.v[i] += gyr[pcols + i];
                        for (int i = 0; i < ga.cols; ++i) ga.v[i] += gyr[pcols + gm.cols + i];
                        // count channel is constant, no gradient
                    }
                    break;
                }
                case OpKind::WeightedSum: {
                    Mat& gw = grads_[op.a];
                    const Mat& flux = op.constant;
                    for (int i = 0; i < gw.rows; ++i) {
                        double acc = 0.0;
                        for (int c = 0; c < 3; ++c) acc += op.scale[c] * flux.at(i, c) * gy.v[c];
                        gw.v[i] += acc;
                    }
                    break;
                }
                case OpKind::Scale3: {
                    Mat& gx = grads_[op.a];
                    for (int c = 0; c < 3; ++c) gx.v[c] += op.scale[c] * gy.v[c];
                    break;
                }
                case OpKind::MuLaw: {
                    const Mat& X = values_[op.a];
                    Mat& gx = grads_[op.a];
                    double denom = std::log1p(op.mu);
                    for (size_t i = 0; i < X.v.size(); ++i)
                        if (X.v[i] > 0.0)
                            gx.v[i] += gy.v[i] * op.mu / ((1.0 + op.mu * X.v[i]) * denom);
                    break;
                }
                case OpKind::L2Mean: {
                    const Mat& X = values_[op.a];
                    Mat& gx = grads_[op.a];
                    double g = gy.v[0] * 2.0 / static_cast<double>(X.v.size());
                    for (size_t i = 0; i < X.v.size(); ++i)
                        gx.v[i] += g * (X.v[i] - op.constant.v[i]);
                    break;
                }
            }
        }
    }

    const Mat& grad(int id) const {
        if (grads_.empty()) throw std::logic_error("tape grad: backward not run");
        return grads_[id];
    }

    void reset() {
        values_.clear();
        grads_.clear();
        ops_.clear();
    }

    std::uint64_t clamp_events = 0;

private:
    enum class OpKind {
        Input, Linear, Relu, MaxPool, AvgPool, ConcatContext, WeightedSum, Scale3, MuLaw, L2Mean
    };

    struct TapeOp {
        OpKind kind;
        int a = -1, b = -1, c = -1;
        int out = -1;
        std::vector<int> arg;
        Vec3 scale;
        Mat constant;
        double mu = 0.0;
    };

    int push(OpKind kind, Mat&& y, int a, int b = -1, int c = -1) {
        values_.push_back(std::move(y));
        ops_.push_back({kind, a, b, c, static_cast<int>(values_.size()) - 1});
        return ops_.back().out;
    }

    std::vector<Mat> values_;
    std::vector<Mat> grads_;
    std::vector<TapeOp> ops_;
};

// ---------------------------------------------------------------------------
// Network forward on the tape
// ---------------------------------------------------------------------------

/// Leaf node ids of all trainable parameters, in canonical flatten order.
struct ParamNodes {
    std::array<int, 6> w;
    std::array<int, 6> b;
};

inline Mat to_mat_w(const DenseLayer& l) {
    Mat m(l.out, l.in);
    m.v = l.w;
    return m;
}

inline Mat to_mat_b(const DenseLayer& l) {
    Mat m(1, l.out);
    m.v = l.b;
    return m;
}

inline ParamNodes record_params(Tape& tape, const KernelNet& net) {
    ParamNodes ids;
    const DenseLayer* layers[6] = {&net.extractor[0], &net.extractor[1], &net.extractor[2],
                                   &net.predictor[0], &net.predictor[1], &net.predictor[2]};
    for (int i = 0; i < 6; ++i) {
        ids.w[i] = tape.input(to_mat_w(*layers[i]));
        ids.b[i] = tape.input(to_mat_b(*layers[i]));
    }
    return ids;
}

/// Records the full forward pass and returns the node holding the predicted
/// radiance (1 x 3, before tone mapping). `scale` carries rho/(pi^2 N r^2).
inline int record_radiance(Tape& tape, const ParamNodes& ids, bool direct, std::uint32_t K,
                           const NetInput& in, const Vec3& scale) {
    Mat X(static_cast<int>(in.k), NetInput::kChannels);
    X.v = in.rows;
    int x = tape.input(std::move(X));
    int f = x;
    for (int l = 0; l < 3; ++l) f = tape.relu(tape.linear(f, ids.w[l], ids.b[l]));
    int mx = tape.maxpool(f);
    int av = tape.avgpool(f);
    double count_channel = static_cast<double>(in.k) / static_cast<double>(K);

    if (direct) {
        int ctx = tape.concat_context(-1, mx, av, count_channel);
        int h = tape.relu(tape.linear(ctx, ids.w[3], ids.b[3]));
        h = tape.relu(tape.linear(h, ids.w[4], ids.b[4]));
        int s = tape.linear(h, ids.w[5], ids.b[5]);  // 1 x 3
        return tape.scale3(s, scale);
    }

    int cat = tape.concat_context(f, mx, av, count_channel);
    int h = tape.relu(tape.linear(cat, ids.w[3], ids.b[3]));
    h = tape.relu(tape.linear(h, ids.w[4], ids.b[4]));
    int w = tape.linear(h, ids.w[5], ids.b[5]);  // k x 1
    Mat flux(static_cast<int>(in.k), 3);
    flux.v = in.flux;
    return tape.weighted_sum(w, std::move(flux), scale);
}

/// mu-law L2 between predicted radiance and a ground-truth target.
inline int record_loss(Tape& tape, int radiance_node, const Rgb& gt, double mu) {
    int mapped = tape.mu_law(radiance_node, mu);
    Mat target(1, 3);
    double denom = std::log1p(mu);
    target.v[0] = std::log1p(mu * std::max(gt.x, 0.0)) / denom;
    target.v[1] = std::log1p(mu * std::max(gt.y, 0.0)) / denom;
    target.v[2] = std::log1p(mu * std::max(gt.z, 0.0)) / denom;
    return tape.l2_mean(mapped, std::move(target));
}

// ---------------------------------------------------------------------------
// Flat parameter views (optimizer + finite differences)
// ---------------------------------------------------------------------------

inline std::vector<double> flatten_params(const KernelNet& net) {
    std::vector<double> flat;
    flat.reserve(net.parameter_count());
    const DenseLayer* layers[6] = {&net.extractor[0], &net.extractor[1], &net.extractor[2],
                                   &net.predictor[0], &net.predictor[1], &net.predictor[2]};
    for (const DenseLayer* l : layers) {
        flat.insert(flat.end(), l->w.begin(), l->w.end());
        flat.insert(flat.end(), l->b.begin(), l->b.end());
    }
    return flat;
}

inline void unflatten_params(KernelNet& net, const std::vector<double>& flat) {
    DenseLayer* layers[6] = {&net.extractor[0], &net.extractor[1], &net.extractor[2],
                             &net.predictor[0], &net.predictor[1], &net.predictor[2]};
    size_t pos = 0;
    for (DenseLayer* l : layers) {
        std::copy(flat.begin() + pos, flat.begin() + pos + l->w.size(), l->w.begin());
        pos += l->w.size();
        std::copy(flat.begin() + pos, flat.begin() + pos + l->b.size(), l->b.begin());
        pos += l->b.size();
    }
    if (pos != flat.size()) throw std::logic_error("unflatten_params: size mismatch");
}

/// Copies per-leaf gradients into canonical flatten order, adding into `out`.
inline void accumulate_param_grads(const Tape& tape, const ParamNodes& ids,
                                   std::vector<double>& out) {
    size_t pos = 0;
    for (int i = 0; i < 6; ++i) {
        const Mat& gw = tape.grad(ids.w[i]);
        for (double g : gw.v) out[pos++] += g;
        const Mat& gb = tape.grad(ids.b[i]);
        for (double g : gb.v) out[pos++] += g;
    }
}

}  // namespace dpm

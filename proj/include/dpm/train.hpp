#pragma once

#include <chrono>

#include "dpm/autodiff.hpp"
#include "dpm/dataset.hpp"
#include "dpm/parallel.hpp"

namespace dpm {

/// mu-law tone compression used by the training loss; negative inputs are
/// clamped to 0 (unconstrained kernels can slightly undershoot) and counted
/// through Tape::clamp_events on the tape path.
inline double mu_law_scalar(double v, double mu = 5000.0) {
    if (v < 0.0) v = 0.0;
    return std::log1p(mu * v) / std::log1p(mu);
}

inline Rgb mu_law(const Rgb& v, double mu = 5000.0) {
    return {mu_law_scalar(v.x, mu), mu_law_scalar(v.y, mu), mu_law_scalar(v.z, mu)};
}

/// Mean over channels of the squared mu-law difference.
inline double mapped_l2_loss(const Rgb& pred, const Rgb& gt, double mu = 5000.0) {
    Rgb d = mu_law(pred, mu) - mu_law(gt, mu);
    return (d.x * d.x + d.y * d.y + d.z * d.z) / 3.0;
}

struct AdamState {
    std::vector<double> m, v;
    std::int64_t step = 0;
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamState(size_t n, double lr_ = 1e-4) : m(n, 0.0), v(n, 0.0), lr(lr_) {}

    void update(std::vector<double>& params, const std::vector<double>& grad) {
        ++step;
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            double mhat = m[i] / c1;
            double vhat = v[i] / c2;
            params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
};

/// Loss of one sample, recorded on a fresh tape. Returns the loss node.
inline int record_sample_loss(Tape& tape, const KernelNet& net, const ParamNodes& ids,
                              const TrainSample& sample, double mu) {
    int radiance = record_radiance(tape, ids, net.direct, net.K, sample.input, sample.scale);
    return record_loss(tape, radiance, sample.gt, mu);
}

inline double sample_loss(const KernelNet& net, const TrainSample& sample, double mu) {
    Tape tape;
    ParamNodes ids = record_params(tape, net);
    int loss = record_sample_loss(tape, net, ids, sample, mu);
    return tape.scalar(loss);
}

inline double batch_loss(const KernelNet& net, const std::vector<TrainSample>& batch, double mu) {
    double acc = 0.0;
    for (const auto& s : batch) acc += sample_loss(net, s, mu);
    return batch.empty() ? 0.0 : acc / batch.size();
}

struct BatchGradient {
    std::vector<double> grad;  // d(mean loss)/d(theta), flatten order
    double loss = 0.0;         // mean loss
    std::uint64_t clamp_events = 0;
};

/// Mean-loss gradient over a batch. Samples are processed in fixed chunks and
/// the chunk results reduced in chunk order, so the result is bit-identical
/// for any thread count.
inline BatchGradient batch_gradient(const KernelNet& net, const std::vector<TrainSample>& batch,
                                    double mu, int threads = 1) {
    constexpr size_t kChunk = 16;
    size_t n = batch.size();
    size_t n_chunks = (n + kChunk - 1) / kChunk;
    size_t n_params = net.parameter_count();

    std::vector<std::vector<double>> chunk_grads(n_chunks);
    std::vector<double> chunk_loss(n_chunks, 0.0);
    std::vector<std::uint64_t> chunk_clamps(n_chunks, 0);

    detail::parallel_over(n_chunks, threads, [&](size_t ci) {
        std::vector<double> acc(n_params, 0.0);
        Tape tape;
        for (size_t s = ci * kChunk; s < std::min(n, (ci + 1) * kChunk); ++s) {
            tape.reset();
            ParamNodes ids = record_params(tape, net);
            int loss = record_sample_loss(tape, net, ids, batch[s], mu);
            chunk_loss[ci] += tape.scalar(loss);
            tape.backward(loss);
            accumulate_param_grads(tape, ids, acc);
        }
        chunk_clamps[ci] = tape.clamp_events;
        chunk_grads[ci] = std::move(acc);
    });

    BatchGradient out;
    out.grad.assign(n_params, 0.0);
    for (size_t ci = 0; ci < n_chunks; ++ci) {
        for (size_t i = 0; i < n_params; ++i) out.grad[i] += chunk_grads[ci][i];
        out.loss += chunk_loss[ci];
        out.clamp_events += chunk_clamps[ci];
    }
    if (n > 0) {
        double inv = 1.0 / static_cast<double>(n);
        for (auto& g : out.grad) g *= inv;
        out.loss *= inv;
    }
    return out;
}

struct TrainConfig {
    std::uint32_t K = 500;
    int epochs = 500;
    size_t batch = 256;
    int steps_per_epoch = 0;  // 0: one pass over all shading points per epoch
    double lr = 1e-4;
    double mu = 5000.0;
    double subsample_min = 0.25;
    double subsample_max = 1.0;
    std::uint64_t seed = 0;
    int threads = 1;
    bool direct = false;  // direct-estimation ablation head
    int checkpoint_every = 0;
    std::string checkpoint_stem;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    std::uint64_t clamp_events = 0;
    std::uint64_t skipped = 0;
    double wall_ms = 0.0;
};

struct TrainResult {
    KernelNet net;
    std::vector<EpochRecord> log;
};

/// Adam training of the kernel-prediction network (or its direct-estimation
/// ablation). Deterministic in (dataset, config); thread count only changes
/// wall time.
inline TrainResult train(const std::vector<TrainScene>& scenes, const TrainConfig& cfg,
                         std::ostream* log_stream = nullptr) {
    if (scenes.empty()) throw std::invalid_argument("train: empty dataset");
    size_t total_points = 0;
    for (const auto& s : scenes) total_points += s.valid_pixels.size();
    if (total_points == 0) throw std::invalid_argument("train: no valid shading points");

    TrainResult result;
    result.net = make_kernel_net(cfg.K, mix_seed(cfg.seed, 0x11e7), cfg.direct);
    std::vector<double> params = flatten_params(result.net);
    AdamState adam(params.size(), cfg.lr);

    BatchConfig bc;
    bc.K = cfg.K;
    bc.batch = cfg.batch;
    bc.subsample_min = cfg.subsample_min;
    bc.subsample_max = cfg.subsample_max;

    int steps = cfg.steps_per_epoch > 0
                    ? cfg.steps_per_epoch
                    : static_cast<int>((total_points + cfg.batch - 1) / cfg.batch);

    RngStream rng(cfg.seed, stream::kTraining);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        double epoch_loss = 0.0;
        std::uint64_t clamps = 0;
        BatchStats stats;
        int counted = 0;
        for (int step = 0; step < steps; ++step) {
            std::vector<TrainSample> batch = sample_batch(scenes, bc, rng, &stats);
            if (batch.empty()) continue;
            unflatten_params(result.net, params);
            BatchGradient bg = batch_gradient(result.net, batch, cfg.mu, cfg.threads);
            adam.update(params, bg.grad);
            epoch_loss += bg.loss;
            clamps += bg.clamp_events;
            ++counted;
        }
        unflatten_params(result.net, params);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = counted > 0 ? epoch_loss / counted : 0.0;
        rec.clamp_events = clamps;
        rec.skipped = stats.skipped;
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(rec);
        if (log_stream)
            (*log_stream) << "epoch " << rec.epoch << " loss " << rec.loss << " clamped "
                          << rec.clamp_events << " skipped " << rec.skipped << " wall_ms "
                          << rec.wall_ms << "\n"
                          << std::flush;

        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_stem.empty() &&
            (epoch + 1) % cfg.checkpoint_every == 0) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "_ep%04d.dpmw", epoch + 1);
            save_model(cfg.checkpoint_stem + buf, result.net);
        }
    }
    return result;
}

/// The ablation baseline trains identically with the direct head.
inline TrainResult train_direct_baseline(const std::vector<TrainScene>& scenes, TrainConfig cfg,
                                         std::ostream* log_stream = nullptr) {
    cfg.direct = true;
    return train(scenes, cfg, log_stream);
}

}  // namespace dpm

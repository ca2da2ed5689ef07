#include "hopmix/train.hpp"

#include <cmath>
#include <numeric>

namespace hopmix {

void TrainConfig::validate() const {
    if (lr < 0.0) throw ConfigError("TrainConfig: learning rate must be non-negative");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw ConfigError("TrainConfig: betas must lie in [0, 1)");
    }
    if (batch_size == 0) throw ConfigError("TrainConfig: batch size must be positive");
}

void adam_step(std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, AdamState& state,
               const TrainConfig& cfg) {
    std::size_t total = 0;
    for (const auto& p : params) total += p.size();
    if (state.m.empty()) {
        state.m.assign(total, 0.0);
        state.v.assign(total, 0.0);
    }
    if (state.m.size() != total || params.size() != grads.size()) {
        throw DimensionError("adam_step: parameter layout changed mid-run");
    }
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    std::size_t off = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i];
        auto g = grads[i];
        if (p.size() != g.size()) throw DimensionError("adam_step: grad/param size mismatch");
        for (std::size_t j = 0; j < p.size(); ++j) {
            double& m = state.m[off + j];
            double& v = state.v[off + j];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g[j];
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g[j] * g[j];
            p[j] -= cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps);
        }
        off += p.size();
    }
}

std::vector<std::span<double>> parameter_views(MixerNet& net) {
    std::vector<std::span<double>> views;
    views.push_back(net.patch_embed.flat());
    for (auto& b : net.blocks) {
        views.push_back(b.w1.flat());
        if (b.mode == WeightMode::Free) views.push_back(b.w2.flat());
        if (b.mode == WeightMode::Asymmetric) views.push_back(b.w2_tilde.flat());
        views.push_back(b.w3.flat());
        if (b.mode == WeightMode::Free) views.push_back(b.w4.flat());
        if (b.mode == WeightMode::Asymmetric) views.push_back(b.w4_tilde.flat());
        if (b.bias) {
            views.push_back(b.bias->b1);
            views.push_back(b.bias->b2);
            views.push_back(b.bias->b3);
            views.push_back(b.bias->b4);
        }
    }
    views.push_back(net.head_w.flat());
    views.push_back(net.head_b);
    return views;
}

std::vector<std::span<const double>> gradient_views(const MixerNet& net,
                                                    const MixerGrads& grads) {
    std::vector<std::span<const double>> views;
    views.push_back(grads.patch_embed.flat());
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
        const auto& b = net.blocks[i];
        const auto& g = grads.blocks[i];
        views.push_back(g.w1.flat());
        if (b.mode == WeightMode::Free) views.push_back(g.w2.flat());
        if (b.mode == WeightMode::Asymmetric) views.push_back(g.w2_tilde.flat());
        views.push_back(g.w3.flat());
        if (b.mode == WeightMode::Free) views.push_back(g.w4.flat());
        if (b.mode == WeightMode::Asymmetric) views.push_back(g.w4_tilde.flat());
        if (b.bias) {
            views.push_back(g.bias.b1);
            views.push_back(g.bias.b2);
            views.push_back(g.bias.b3);
            views.push_back(g.bias.b4);
        }
    }
    views.push_back(grads.head_w.flat());
    views.push_back(grads.head_b);
    return views;
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < n; i += batch_size) {
        batches.emplace_back(order.begin() + i,
                             order.begin() + std::min(n, i + batch_size));
    }
    return batches;
}

}  // namespace

TrainResult train_classifier(MixerNet& net, const ClassificationDataset& data,
                             const TrainConfig& cfg) {
    cfg.validate();
    net.validate();
    if (data.inputs.empty()) throw ConfigError("train_classifier: empty dataset");
    const double lambda = cfg.loss == LossKind::CrossEntropyFrobenius ? cfg.lambda : 0.0;

    Rng rng(cfg.seed);
    AdamState adam;
    TrainResult result;

    {
        BackwardResult pre = mixer_backward(net, data.inputs, data.labels, lambda);
        result.curve.push_back({0, pre.loss, evaluate_accuracy(net, data)});
    }

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (const auto& batch : make_batches(data.inputs.size(), cfg.batch_size, rng)) {
            std::vector<Matrix2D> inputs;
            std::vector<int> labels;
            inputs.reserve(batch.size());
            labels.reserve(batch.size());
            for (std::size_t idx : batch) {
                inputs.push_back(data.inputs[idx]);
                labels.push_back(data.labels[idx]);
            }
            BackwardResult bw;
            try {
                bw = mixer_backward(net, inputs, labels, lambda);
            } catch (const NumericError& e) {
                throw NumericError("train_classifier: diverged at epoch " +
                                   std::to_string(epoch) + ": " + e.what());
            }
            epoch_loss += bw.loss * static_cast<double>(batch.size());
            seen += batch.size();
            auto params = parameter_views(net);
            auto grads = gradient_views(net, bw.grads);
            adam_step(params, grads, adam, cfg);
        }
        const double metric = evaluate_accuracy(net, data);
        result.curve.push_back({epoch, epoch_loss / static_cast<double>(seen), metric});
        result.final_metric = metric;
    }
    if (cfg.epochs == 0) result.final_metric = result.curve.front().metric;
    return result;
}

TrainResult train_denoiser(HierarchicalNet& net, const DenoiseDataset& data,
                           const TrainConfig& cfg, const DenoiseUnroll& unroll) {
    cfg.validate();
    net.validate();
    if (data.noisy.empty()) throw ConfigError("train_denoiser: empty dataset");
    if (!net.symmetric()) throw ConfigError("train_denoiser: symmetric interactions required");

    Rng rng(cfg.seed);
    AdamState adam;
    TrainResult result;
    result.curve.push_back({0, 0.0, evaluate_denoiser(net, data, unroll).mse});
    result.curve.front().loss = result.curve.front().metric;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (const auto& batch : make_batches(data.noisy.size(), cfg.batch_size, rng)) {
            DenoiseGrads acc{Matrix2D(net.n_s, net.n_vs), Matrix2D(net.n_c, net.n_vc)};
            double batch_loss = 0.0;
            for (std::size_t idx : batch) {
                DenoiseBackwardResult bw =
                    denoise_backward(net, data.noisy[idx], data.clean[idx], unroll);
                batch_loss += bw.loss;
                acc.xi_sv += bw.grads.xi_sv;
                acc.xi_cv += bw.grads.xi_cv;
            }
            const double inv = 1.0 / static_cast<double>(batch.size());
            batch_loss *= inv;
            acc.xi_sv *= inv;
            acc.xi_cv *= inv;
            if (!std::isfinite(batch_loss)) {
                throw NumericError("train_denoiser: diverged at epoch " + std::to_string(epoch));
            }
            epoch_loss += batch_loss * static_cast<double>(batch.size());
            seen += batch.size();

            std::vector<std::span<double>> params{net.xi_sv.flat(), net.xi_cv.flat()};
            std::vector<std::span<const double>> grads{acc.xi_sv.flat(), acc.xi_cv.flat()};
            adam_step(params, grads, adam, cfg);
        }
        const double metric = evaluate_denoiser(net, data, unroll).mse;
        result.curve.push_back({epoch, epoch_loss / static_cast<double>(seen), metric});
        result.final_metric = metric;
    }
    if (cfg.epochs == 0) result.final_metric = result.curve.front().metric;
    return result;
}

DenoiseEval evaluate_denoiser(const HierarchicalNet& net, const DenoiseDataset& data,
                              const DenoiseUnroll& unroll) {
    DenoiseEval eval;
    std::size_t improved = 0;
    for (std::size_t i = 0; i < data.noisy.size(); ++i) {
        const Matrix2D out = denoise_unrolled(net, data.noisy[i], unroll);
        double out_mse = 0.0, in_mse = 0.0;
        const double inv = 1.0 / static_cast<double>(out.size());
        for (std::size_t j = 0; j < out.size(); ++j) {
            const double ro = out.flat()[j] - data.clean[i].flat()[j];
            const double ri = data.noisy[i].flat()[j] - data.clean[i].flat()[j];
            out_mse += ro * ro * inv;
            in_mse += ri * ri * inv;
        }
        eval.mse += out_mse;
        eval.input_mse += in_mse;
        if (out_mse < in_mse) ++improved;
    }
    const double n = static_cast<double>(data.noisy.size());
    eval.mse /= n;
    eval.input_mse /= n;
    eval.improved_fraction = static_cast<double>(improved) / n;
    return eval;
}

}  // namespace hopmix

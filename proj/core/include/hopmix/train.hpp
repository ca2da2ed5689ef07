#pragma once

#include <cstdint>
#include <vector>

#include "hopmix/autodiff.hpp"

namespace hopmix {

enum class LossKind { Mse, CrossEntropyFrobenius };

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    LossKind loss = LossKind::CrossEntropyFrobenius;
    double lambda = 0.0;  // Frobenius penalty weight
    std::uint64_t seed = 0;

    void validate() const;
};

struct CurvePoint {
    std::size_t epoch = 0;  // 0 is the untrained model
    double loss = 0.0;
    double metric = 0.0;  // accuracy (classification) or evaluation MSE (denoising)
};

struct TrainResult {
    std::vector<CurvePoint> curve;
    double final_metric = 0.0;
};

// First-moment/second-moment buffers over the flattened parameter list.
struct AdamState {
    Vector m, v;
    std::size_t t = 0;
};

// One Adam update; params and grads are aligned flat views.
void adam_step(std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, AdamState& state,
               const TrainConfig& cfg);

// Aligned flat views over stored parameters (symmetric blocks expose only
// w1/w3; asymmetric additionally the tilde parts).
std::vector<std::span<double>> parameter_views(MixerNet& net);
std::vector<std::span<const double>> gradient_views(const MixerNet& net, const MixerGrads& grads);

// Shuffled mini-batch Adam; deterministic replay under equal seed. Curve
// point 0 records the untrained model. Throws NumericError naming the epoch
// if the loss goes non-finite.
TrainResult train_classifier(MixerNet& net, const ClassificationDataset& data,
                             const TrainConfig& cfg);

TrainResult train_denoiser(HierarchicalNet& net, const DenoiseDataset& data,
                           const TrainConfig& cfg, const DenoiseUnroll& unroll);

struct DenoiseEval {
    double mse = 0.0;            // mean MSE of outputs against clean targets
    double input_mse = 0.0;      // mean MSE of the noisy inputs themselves
    double improved_fraction = 0.0;  // samples where the output beats the input
};
DenoiseEval evaluate_denoiser(const HierarchicalNet& net, const DenoiseDataset& data,
                              const DenoiseUnroll& unroll);

}  // namespace hopmix

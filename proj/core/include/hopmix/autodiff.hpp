#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hopmix/datasets.hpp"
#include "hopmix/mixer.hpp"

namespace hopmix {

enum class MixerVariant { Vanilla, Parallel };

const char* mixer_variant_name(MixerVariant v);
MixerVariant mixer_variant_from_name(const std::string& name);

// Classifier: per-token linear embedding, a stack of mixing layers, global
// average pooling over tokens, linear head.
struct MixerNet {
    MixerVariant variant = MixerVariant::Parallel;
    Matrix2D patch_embed;  // (d_in x n_channels)
    std::vector<MixerBlock> blocks;
    Matrix2D head_w;  // (n_channels x n_classes)
    Vector head_b;    // (n_classes)
    std::size_t n_classes = 0;

    std::size_t n_tokens() const { return blocks.empty() ? 0 : blocks.front().n_tokens; }
    std::size_t n_channels() const { return patch_embed.cols(); }
    void validate() const;
};

struct MixerNetOptions {
    MixerBlockOptions block;
    std::size_t n_blocks = 2;
    double embed_scale = 1.0;
    double head_scale = 1.0;
};

MixerNet make_mixer_net(MixerVariant variant, WeightMode mode, std::size_t n_tokens,
                        std::size_t d_in, std::size_t n_channels, std::size_t n_classes,
                        Rng& rng, const MixerNetOptions& opts = {});

// Logits for one sample, sample shape (n_tokens x d_in).
Vector mixer_forward(const MixerNet& net, const Matrix2D& input);
int mixer_predict(const MixerNet& net, const Matrix2D& input);

// Per-parameter gradients, shape-identical to the parameters. Stored-only
// matrices: symmetric blocks carry gradients in w1/w3 (both usage sites
// accumulated through w2 = w1^T), asymmetric blocks additionally in tildes.
struct BlockGrads {
    Matrix2D w1, w2, w3, w4, w2_tilde, w4_tilde;
    MixerBiases bias;  // empty vectors when the block has no bias
};

struct MixerGrads {
    Matrix2D patch_embed;
    std::vector<BlockGrads> blocks;
    Matrix2D head_w;
    Vector head_b;

    static MixerGrads zeros_like(const MixerNet& net);
    void scale(double s);
    void accumulate(const MixerGrads& other);
};

// Mean cross-entropy over the batch plus lambda * sum ||W~||_F^2, with exact
// reverse-mode gradients for every parameter. Throws NumericError naming the
// block index if an activation goes non-finite.
struct BackwardResult {
    double loss = 0.0;
    double cross_entropy = 0.0;
    MixerGrads grads;
};
BackwardResult mixer_backward(const MixerNet& net, const std::vector<Matrix2D>& inputs,
                              const std::vector<int>& labels, double lambda);

// lambda-weighted regularizer target: sum of squared Frobenius norms of all
// symmetry-breaking parts. Requires every block to be in asymmetric mode.
double frobenius_penalty(const MixerNet& net);

// Evaluation with the last block applied k times instead of once.
double evaluate_accuracy(const MixerNet& net, const ClassificationDataset& data,
                         std::size_t last_block_iters = 1);

// --- Denoiser training (three-layer net, Euler-unrolled dynamics) ---------

struct DenoiseUnroll {
    double dt = 0.1;
    std::size_t steps = 25;
};

struct DenoiseGrads {
    Matrix2D xi_sv;
    Matrix2D xi_cv;
};

// MSE between the unrolled visible state and the clean target, with exact
// gradients w.r.t. both interaction matrices. Symmetric nets only.
struct DenoiseBackwardResult {
    double loss = 0.0;
    DenoiseGrads grads;
};
DenoiseBackwardResult denoise_backward(const HierarchicalNet& net, const Matrix2D& noisy,
                                       const Matrix2D& clean, const DenoiseUnroll& unroll);

Matrix2D denoise_unrolled(const HierarchicalNet& net, const Matrix2D& noisy,
                          const DenoiseUnroll& unroll);

}  // namespace hopmix

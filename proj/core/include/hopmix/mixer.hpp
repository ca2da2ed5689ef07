#pragma once

#include <optional>
#include <vector>

#include "hopmix/hopfield.hpp"
#include "hopmix/lagrangian.hpp"
#include "hopmix/matrix.hpp"
#include "hopmix/rng.hpp"

namespace hopmix {

enum class WeightMode { Free, Symmetric, Asymmetric };
enum class NormMode { JointAxes, ChannelOnly };

const char* weight_mode_name(WeightMode m);
const char* norm_mode_name(NormMode m);
WeightMode weight_mode_from_name(const std::string& name);
NormMode norm_mode_from_name(const std::string& name);

// Optional bias vectors, one per linear map. Kept out of the default
// configuration: the Hopfield correspondence has none.
struct MixerBiases {
    Vector b1;  // (d_token),   token hidden
    Vector b2;  // (n_tokens),  token output
    Vector b3;  // (d_channel), channel hidden
    Vector b4;  // (n_channels) channel output
};

// One discrete mixing layer acting on a (n_tokens x n_channels) grid.
//
//   Free:      w1..w4 independent.
//   Symmetric: w2 = w1^T and w4 = w3^T, enforced by storing only w1, w3.
//   Asymmetric: w2 = w1^T + w2_tilde, w4 = w3^T + w4_tilde.
struct MixerBlock {
    std::size_t n_tokens = 0;
    std::size_t n_channels = 0;
    std::size_t d_token = 0;    // token-mixing hidden width (N_s)
    std::size_t d_channel = 0;  // channel-mixing hidden width (N_c)
    WeightMode mode = WeightMode::Symmetric;
    Matrix2D w1;        // (d_token x n_tokens)
    Matrix2D w2;        // (n_tokens x d_token), Free mode only
    Matrix2D w3;        // (n_channels x d_channel)
    Matrix2D w4;        // (d_channel x n_channels), Free mode only
    Matrix2D w2_tilde;  // (n_tokens x d_token), Asymmetric mode only
    Matrix2D w4_tilde;  // (d_channel x n_channels), Asymmetric mode only
    int n_iter = 1;
    LagrangianSpec activation_s = LagrangianSpec::gelu_primitive();
    LagrangianSpec activation_c = LagrangianSpec::gelu_primitive();
    NormMode norm = NormMode::JointAxes;
    double eps = 1e-6;
    std::optional<MixerBiases> bias;

    // Token-output and channel-output matrices with the mode coupling applied.
    Matrix2D effective_w2() const;
    Matrix2D effective_w4() const;
    void validate() const;
};

struct MixerBlockOptions {
    // Hidden widths default to (0.5, 4.0) x n_channels, scaled by h_r.
    double token_ratio = 0.5;
    double channel_ratio = 4.0;
    double h_r = 1.0;
    // Entries drawn N(0, scale/sqrt(fan_in)) per map.
    double init_scale = 1.0;
    int n_iter = 1;
    NormMode norm = NormMode::JointAxes;
    double eps = 1e-6;
};

MixerBlock make_mixer_block(WeightMode mode, std::size_t n_tokens, std::size_t n_channels,
                            Rng& rng, const MixerBlockOptions& opts = {});

// Layer normalization over both axes at once: centers by the grand mean and
// divides by the joint norm sqrt(sum (x - mean)^2 + eps).
Matrix2D symmetric_layernorm(const Matrix2D& x, double eps);
// Ordinary per-token layer normalization over the channel axis.
Matrix2D channel_layernorm(const Matrix2D& x, double eps);
Matrix2D apply_norm(const Matrix2D& x, NormMode mode, double eps);

// Serial update: token mixing on LN(x), then channel mixing on LN of the
// intermediate. This is the classic mixing layer.
Matrix2D vanilla_block(const Matrix2D& x, const MixerBlock& block);

// Parallel update: both mixing paths read the same normalized input,
//   x' = x + W2 gs(W1 LN(x)) + gc(LN(x) W3) W4.
Matrix2D parallel_block(const Matrix2D& x, const MixerBlock& block);

enum class BlockStyle { Serial, Parallel };

// n_iter applications of the block's update rule.
Matrix2D block_forward(const Matrix2D& x, const MixerBlock& block,
                       BlockStyle style = BlockStyle::Parallel);

// k successive single applications; element 0 is the input, element i the
// state after i updates.
std::vector<Matrix2D> iterate_block(const Matrix2D& x, const MixerBlock& block, std::size_t k,
                                    BlockStyle style = BlockStyle::Parallel);

// Pseudo energy of the block as a function of the visible grid alone, with
// the hidden states eliminated adiabatically:
//   E(x) = <x, LN(x)> - sqrt(S + eps) - L_s(W1 LN(x)) - L_c(LN(x) W3)
//          + (1/2) <LN(x), W2t gs> + (1/2) <LN(x), gc W4t>.
// A true Lyapunov function of the continuous flow only when the tilde parts
// vanish. Defined for joint-axes normalization and bias-free blocks.
double block_energy(const Matrix2D& x, const MixerBlock& block);

// Right-hand side of the continuous visible-only flow the pseudo energy is
// evaluated along: W2 gs(W1 LN(x)) + gc(LN(x) W3) W4 - decay * x.
Matrix2D reduced_flow_rhs(const Matrix2D& x, const MixerBlock& block, double decay = 1.0);

// Views a three-layer net as its discrete mixing layer (W1 = xi_sv,
// W3 = xi_cv^T, tilde parts from the asym blocks). Requires a centered-norm
// visible Lagrangian.
MixerBlock to_mixer_block(const HierarchicalNet& net);

}  // namespace hopmix

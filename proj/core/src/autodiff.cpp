#include "hopmix/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace hopmix {

const char* mixer_variant_name(MixerVariant v) {
    return v == MixerVariant::Vanilla ? "vanilla" : "parallel";
}

MixerVariant mixer_variant_from_name(const std::string& name) {
    if (name == "vanilla") return MixerVariant::Vanilla;
    if (name == "parallel") return MixerVariant::Parallel;
    throw ConfigError("unknown mixer variant '" + name + "'");
}

void MixerNet::validate() const {
    if (blocks.empty()) throw ConfigError("MixerNet: needs at least one block");
    if (n_classes == 0) throw ConfigError("MixerNet: n_classes must be positive");
    const std::size_t channels = patch_embed.cols();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].validate();
        if (blocks[i].n_channels != channels || blocks[i].n_tokens != blocks[0].n_tokens) {
            throw DimensionError("MixerNet: block " + std::to_string(i) +
                                 " grid does not chain with the embedding");
        }
    }
    if (head_w.rows() != channels || head_w.cols() != n_classes || head_b.size() != n_classes) {
        throw DimensionError("MixerNet: head shape " + shape_str(head_w) +
                             " does not match channels/classes");
    }
}

MixerNet make_mixer_net(MixerVariant variant, WeightMode mode, std::size_t n_tokens,
                        std::size_t d_in, std::size_t n_channels, std::size_t n_classes,
                        Rng& rng, const MixerNetOptions& opts) {
    MixerNet net;
    net.variant = variant;
    net.n_classes = n_classes;
    net.patch_embed = rng.normal_matrix(d_in, n_channels,
                                        opts.embed_scale / std::sqrt(static_cast<double>(d_in)));
    for (std::size_t i = 0; i < opts.n_blocks; ++i) {
        net.blocks.push_back(make_mixer_block(mode, n_tokens, n_channels, rng, opts.block));
    }
    net.head_w = rng.normal_matrix(n_channels, n_classes,
                                   opts.head_scale / std::sqrt(static_cast<double>(n_channels)));
    net.head_b = Vector(n_classes, 0.0);
    net.validate();
    return net;
}

namespace {

Matrix2D activation_grid(const LagrangianSpec& spec, const Matrix2D& x) {
    Matrix2D out(x.rows(), x.cols());
    lagrangian_activation(spec, x.flat(), out.flat());
    return out;
}

// out += (Jacobian of the normalization at x)^T upstream
void norm_vjp(NormMode mode, double eps, const Matrix2D& x, const Matrix2D& upstream,
              Matrix2D& out) {
    if (mode == NormMode::JointAxes) {
        lagrangian_hessian_apply(LagrangianSpec::centered_norm(eps), x.flat(), upstream.flat(),
                                 out.flat());
    } else {
        const LagrangianSpec spec =
            LagrangianSpec::layer_norm(1.0, {}, eps, static_cast<double>(x.cols()));
        for (std::size_t i = 0; i < x.rows(); ++i) {
            lagrangian_hessian_apply(spec, x.flat().subspan(i * x.cols(), x.cols()),
                                     upstream.flat().subspan(i * x.cols(), x.cols()),
                                     out.flat().subspan(i * x.cols(), x.cols()));
        }
    }
}

// out += H(pre) * upstream for the activation Lagrangian
void act_vjp(const LagrangianSpec& spec, const Matrix2D& pre, const Matrix2D& upstream,
             Matrix2D& out) {
    lagrangian_hessian_apply(spec, pre.flat(), upstream.flat(), out.flat());
}

void add_row_bias(Matrix2D& m, const Vector& b) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += b[i];
}

void add_col_bias(Matrix2D& m, const Vector& b) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += b[j];
}

void accumulate_row_sums(const Matrix2D& m, Vector& out) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out[i] += m(i, j);
}

void accumulate_col_sums(const Matrix2D& m, Vector& out) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out[j] += m(i, j);
}

// Intermediates of one application of a block.
struct BlockIterCache {
    Matrix2D x_in;
    Matrix2D n1;
    Matrix2D s_pre, s_act;
    Matrix2D y;   // serial only: state after the token half
    Matrix2D n2;  // serial only
    Matrix2D c_pre, c_act;
    Matrix2D x_out;
};

// Effective output-side matrices, materialized once per block per pass.
struct BlockMats {
    Matrix2D w2;
    Matrix2D w4;
};

BlockIterCache apply_block_cached(const Matrix2D& x, const MixerBlock& b, const BlockMats& mats,
                                  bool serial) {
    BlockIterCache c;
    c.x_in = x;
    c.n1 = apply_norm(x, b.norm, b.eps);
    c.s_pre = matmul(b.w1, c.n1);
    if (b.bias) add_row_bias(c.s_pre, b.bias->b1);
    c.s_act = activation_grid(b.activation_s, c.s_pre);
    Matrix2D token = matmul(mats.w2, c.s_act);
    if (b.bias) add_row_bias(token, b.bias->b2);

    if (serial) {
        c.y = x;
        c.y += token;
        c.n2 = apply_norm(c.y, b.norm, b.eps);
        c.c_pre = matmul(c.n2, b.w3);
    } else {
        c.c_pre = matmul(c.n1, b.w3);
    }
    if (b.bias) add_col_bias(c.c_pre, b.bias->b3);
    c.c_act = activation_grid(b.activation_c, c.c_pre);
    Matrix2D channel = matmul(c.c_act, mats.w4);
    if (b.bias) add_col_bias(channel, b.bias->b4);

    if (serial) {
        c.x_out = c.y;
        c.x_out += channel;
    } else {
        c.x_out = x;
        c.x_out += token;
        c.x_out += channel;
    }
    return c;
}

// Reverse pass through one application. Returns the gradient w.r.t. x_in and
// accumulates parameter gradients.
Matrix2D block_backward_iter(const BlockIterCache& c, const MixerBlock& b, const BlockMats& mats,
                             bool serial, const Matrix2D& g_out, BlockGrads& grads) {
    Matrix2D g_y = g_out;  // serial: gradient w.r.t. y; parallel: w.r.t. x via skip

    // Channel path.
    Matrix2D d_c_act = matmul_nt(g_out, mats.w4);
    Matrix2D d_w4 = matmul_tn(c.c_act, g_out);
    Matrix2D d_c_pre(c.c_pre.rows(), c.c_pre.cols());
    act_vjp(b.activation_c, c.c_pre, d_c_act, d_c_pre);
    const Matrix2D& c_src = serial ? c.n2 : c.n1;
    Matrix2D d_w3 = matmul_tn(c_src, d_c_pre);
    Matrix2D d_n_c = matmul_nt(d_c_pre, b.w3);
    if (b.bias) {
        accumulate_col_sums(g_out, grads.bias.b4);
        accumulate_col_sums(d_c_pre, grads.bias.b3);
    }

    Matrix2D g_token_out;  // gradient reaching the token half's output
    if (serial) {
        // y receives: skip of g_out plus the channel norm pullback.
        norm_vjp(b.norm, b.eps, c.y, d_n_c, g_y);
        g_token_out = g_y;
    } else {
        g_token_out = g_out;
    }

    // Token path.
    Matrix2D d_s_act = matmul_tn(mats.w2, g_token_out);
    Matrix2D d_w2 = matmul_nt(g_token_out, c.s_act);
    Matrix2D d_s_pre(c.s_pre.rows(), c.s_pre.cols());
    act_vjp(b.activation_s, c.s_pre, d_s_act, d_s_pre);
    Matrix2D d_w1 = matmul_nt(d_s_pre, c.n1);
    Matrix2D d_n_t = matmul_tn(b.w1, d_s_pre);
    if (b.bias) {
        accumulate_row_sums(g_token_out, grads.bias.b2);
        accumulate_row_sums(d_s_pre, grads.bias.b1);
    }

    // Gradient w.r.t. the block input: skip connection plus norm pullbacks.
    Matrix2D g_x = serial ? g_y : g_out;
    if (!serial) d_n_t += d_n_c;  // both paths read n1
    norm_vjp(b.norm, b.eps, c.x_in, d_n_t, g_x);

    // Fold the effective-matrix gradients into the stored parameters.
    grads.w1 += d_w1;
    grads.w3 += d_w3;
    switch (b.mode) {
        case WeightMode::Free:
            grads.w2 += d_w2;
            grads.w4 += d_w4;
            break;
        case WeightMode::Symmetric:
            // w2 = w1^T contributes the transposed gradient to w1.
            grads.w1 += transpose(d_w2);
            grads.w3 += transpose(d_w4);
            break;
        case WeightMode::Asymmetric:
            grads.w1 += transpose(d_w2);
            grads.w3 += transpose(d_w4);
            grads.w2_tilde += d_w2;
            grads.w4_tilde += d_w4;
            break;
    }
    return g_x;
}

struct ForwardCache {
    Matrix2D embedded;
    std::vector<std::vector<BlockIterCache>> blocks;
    Vector pooled;
    Vector logits;
};

ForwardCache forward_cached(const MixerNet& net, const Matrix2D& input,
                            const std::vector<BlockMats>& mats, std::size_t last_block_iters) {
    if (input.rows() != net.n_tokens() || input.cols() != net.patch_embed.rows()) {
        throw DimensionError("mixer forward: input shape " + shape_str(input) +
                             " does not match (" + std::to_string(net.n_tokens()) + "x" +
                             std::to_string(net.patch_embed.rows()) + ")");
    }
    const bool serial = net.variant == MixerVariant::Vanilla;
    ForwardCache cache;
    cache.embedded = matmul(input, net.patch_embed);
    Matrix2D x = cache.embedded;
    cache.blocks.resize(net.blocks.size());
    for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
        const MixerBlock& b = net.blocks[bi];
        std::size_t iters = static_cast<std::size_t>(b.n_iter);
        if (bi + 1 == net.blocks.size() && last_block_iters > 0) iters = last_block_iters;
        for (std::size_t it = 0; it < iters; ++it) {
            cache.blocks[bi].push_back(apply_block_cached(x, b, mats[bi], serial));
            x = cache.blocks[bi].back().x_out;
            if (!all_finite(x)) {
                throw NumericError("mixer forward: non-finite activation in block " +
                                   std::to_string(bi));
            }
        }
    }
    cache.pooled = Vector(net.n_channels(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) cache.pooled[j] += x(i, j);
    const double inv_tokens = 1.0 / static_cast<double>(x.rows());
    for (auto& v : cache.pooled) v *= inv_tokens;

    cache.logits = Vector(net.n_classes, 0.0);
    for (std::size_t k = 0; k < net.n_classes; ++k) {
        double s = net.head_b[k];
        for (std::size_t j = 0; j < net.n_channels(); ++j) s += cache.pooled[j] * net.head_w(j, k);
        cache.logits[k] = s;
    }
    return cache;
}

std::vector<BlockMats> materialize_mats(const MixerNet& net) {
    std::vector<BlockMats> mats;
    mats.reserve(net.blocks.size());
    for (const auto& b : net.blocks) mats.push_back({b.effective_w2(), b.effective_w4()});
    return mats;
}

Vector softmax(const Vector& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    Vector p(logits.size());
    double z = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        p[k] = std::exp(logits[k] - m);
        z += p[k];
    }
    for (auto& v : p) v /= z;
    return p;
}

}  // namespace

Vector mixer_forward(const MixerNet& net, const Matrix2D& input) {
    net.validate();
    return forward_cached(net, input, materialize_mats(net), 0).logits;
}

int mixer_predict(const MixerNet& net, const Matrix2D& input) {
    const Vector logits = mixer_forward(net, input);
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

MixerGrads MixerGrads::zeros_like(const MixerNet& net) {
    MixerGrads g;
    g.patch_embed = Matrix2D(net.patch_embed.rows(), net.patch_embed.cols());
    for (const auto& b : net.blocks) {
        BlockGrads bg;
        bg.w1 = Matrix2D(b.w1.rows(), b.w1.cols());
        bg.w3 = Matrix2D(b.w3.rows(), b.w3.cols());
        if (b.mode == WeightMode::Free) {
            bg.w2 = Matrix2D(b.w2.rows(), b.w2.cols());
            bg.w4 = Matrix2D(b.w4.rows(), b.w4.cols());
        }
        if (b.mode == WeightMode::Asymmetric) {
            bg.w2_tilde = Matrix2D(b.w2_tilde.rows(), b.w2_tilde.cols());
            bg.w4_tilde = Matrix2D(b.w4_tilde.rows(), b.w4_tilde.cols());
        }
        if (b.bias) {
            bg.bias.b1.assign(b.bias->b1.size(), 0.0);
            bg.bias.b2.assign(b.bias->b2.size(), 0.0);
            bg.bias.b3.assign(b.bias->b3.size(), 0.0);
            bg.bias.b4.assign(b.bias->b4.size(), 0.0);
        }
        g.blocks.push_back(std::move(bg));
    }
    g.head_w = Matrix2D(net.head_w.rows(), net.head_w.cols());
    g.head_b = Vector(net.head_b.size(), 0.0);
    return g;
}

void MixerGrads::scale(double s) {
    auto scale_mat = [s](Matrix2D& m) {
        if (!m.empty()) m *= s;
    };
    auto scale_vec = [s](Vector& v) {
        for (auto& x : v) x *= s;
    };
    scale_mat(patch_embed);
    for (auto& b : blocks) {
        scale_mat(b.w1);
        scale_mat(b.w2);
        scale_mat(b.w3);
        scale_mat(b.w4);
        scale_mat(b.w2_tilde);
        scale_mat(b.w4_tilde);
        scale_vec(b.bias.b1);
        scale_vec(b.bias.b2);
        scale_vec(b.bias.b3);
        scale_vec(b.bias.b4);
    }
    scale_mat(head_w);
    scale_vec(head_b);
}

void MixerGrads::accumulate(const MixerGrads& other) {
    auto add_mat = [](Matrix2D& a, const Matrix2D& b) {
        if (!b.empty()) a += b;
    };
    auto add_vec = [](Vector& a, const Vector& b) {
        for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
    };
    add_mat(patch_embed, other.patch_embed);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        add_mat(blocks[i].w1, other.blocks[i].w1);
        add_mat(blocks[i].w2, other.blocks[i].w2);
        add_mat(blocks[i].w3, other.blocks[i].w3);
        add_mat(blocks[i].w4, other.blocks[i].w4);
        add_mat(blocks[i].w2_tilde, other.blocks[i].w2_tilde);
        add_mat(blocks[i].w4_tilde, other.blocks[i].w4_tilde);
        add_vec(blocks[i].bias.b1, other.blocks[i].bias.b1);
        add_vec(blocks[i].bias.b2, other.blocks[i].bias.b2);
        add_vec(blocks[i].bias.b3, other.blocks[i].bias.b3);
        add_vec(blocks[i].bias.b4, other.blocks[i].bias.b4);
    }
    add_mat(head_w, other.head_w);
    add_vec(head_b, other.head_b);
}

double frobenius_penalty(const MixerNet& net) {
    double p = 0.0;
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
        const MixerBlock& b = net.blocks[i];
        if (b.mode != WeightMode::Asymmetric) {
            throw ConfigError("frobenius_penalty: block " + std::to_string(i) +
                              " is not in asymmetric mode");
        }
        p += frobenius_norm_sq(b.w2_tilde) + frobenius_norm_sq(b.w4_tilde);
    }
    return p;
}

BackwardResult mixer_backward(const MixerNet& net, const std::vector<Matrix2D>& inputs,
                              const std::vector<int>& labels, double lambda) {
    net.validate();
    if (inputs.size() != labels.size() || inputs.empty()) {
        throw DimensionError("mixer_backward: batch of " + std::to_string(inputs.size()) +
                             " inputs vs " + std::to_string(labels.size()) + " labels");
    }
    const bool serial = net.variant == MixerVariant::Vanilla;
    const std::vector<BlockMats> mats = materialize_mats(net);

    BackwardResult res;
    res.grads = MixerGrads::zeros_like(net);
    const double inv_batch = 1.0 / static_cast<double>(inputs.size());

    for (std::size_t s = 0; s < inputs.size(); ++s) {
        ForwardCache cache = forward_cached(net, inputs[s], mats, 0);
        const Vector p = softmax(cache.logits);
        const int label = labels[s];
        if (label < 0 || static_cast<std::size_t>(label) >= net.n_classes) {
            throw ConfigError("mixer_backward: label " + std::to_string(label) + " out of range");
        }
        res.cross_entropy += -std::log(std::max(p[label], 1e-300)) * inv_batch;

        // d loss / d logits = (softmax - onehot) / batch
        Vector d_logits(p);
        d_logits[label] -= 1.0;
        for (auto& v : d_logits) v *= inv_batch;

        for (std::size_t j = 0; j < net.n_channels(); ++j)
            for (std::size_t k = 0; k < net.n_classes; ++k)
                res.grads.head_w(j, k) += cache.pooled[j] * d_logits[k];
        for (std::size_t k = 0; k < net.n_classes; ++k) res.grads.head_b[k] += d_logits[k];

        Vector d_pooled(net.n_channels(), 0.0);
        for (std::size_t j = 0; j < net.n_channels(); ++j)
            for (std::size_t k = 0; k < net.n_classes; ++k)
                d_pooled[j] += net.head_w(j, k) * d_logits[k];

        const std::size_t tokens = net.n_tokens();
        Matrix2D g(tokens, net.n_channels());
        const double inv_tokens = 1.0 / static_cast<double>(tokens);
        for (std::size_t i = 0; i < tokens; ++i)
            for (std::size_t j = 0; j < net.n_channels(); ++j) g(i, j) = d_pooled[j] * inv_tokens;

        for (std::size_t bi = net.blocks.size(); bi-- > 0;) {
            auto& iters = cache.blocks[bi];
            for (std::size_t it = iters.size(); it-- > 0;) {
                g = block_backward_iter(iters[it], net.blocks[bi], mats[bi], serial, g,
                                        res.grads.blocks[bi]);
            }
        }
        res.grads.patch_embed += matmul_tn(inputs[s], g);
    }

    res.loss = res.cross_entropy;
    if (lambda != 0.0) {
        double pen = 0.0;
        for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
            const MixerBlock& b = net.blocks[bi];
            if (b.mode != WeightMode::Asymmetric) continue;
            pen += frobenius_norm_sq(b.w2_tilde) + frobenius_norm_sq(b.w4_tilde);
            BlockGrads& bg = res.grads.blocks[bi];
            for (std::size_t i = 0; i < b.w2_tilde.size(); ++i)
                bg.w2_tilde.flat()[i] += 2.0 * lambda * b.w2_tilde.flat()[i];
            for (std::size_t i = 0; i < b.w4_tilde.size(); ++i)
                bg.w4_tilde.flat()[i] += 2.0 * lambda * b.w4_tilde.flat()[i];
        }
        res.loss += lambda * pen;
    }
    if (!std::isfinite(res.loss)) throw NumericError("mixer_backward: non-finite loss");
    return res;
}

double evaluate_accuracy(const MixerNet& net, const ClassificationDataset& data,
                         std::size_t last_block_iters) {
    net.validate();
    const std::vector<BlockMats> mats = materialize_mats(net);
    std::size_t correct = 0;
    for (std::size_t s = 0; s < data.inputs.size(); ++s) {
        ForwardCache cache = forward_cached(net, data.inputs[s], mats, last_block_iters);
        const int pred = static_cast<int>(
            std::max_element(cache.logits.begin(), cache.logits.end()) - cache.logits.begin());
        if (pred == data.labels[s]) ++correct;
    }
    return data.inputs.empty() ? 0.0 : static_cast<double>(correct) / data.inputs.size();
}

// --- Denoiser -------------------------------------------------------------

namespace {

struct DenoiseStepCache {
    Matrix2D xs, xv, xc;  // state entering the step
    Matrix2D gv, rs, rc;  // activations at that state
};

}  // namespace

Matrix2D denoise_unrolled(const HierarchicalNet& net, const Matrix2D& noisy,
                          const DenoiseUnroll& unroll) {
    net.validate();
    HierarchicalState s = zero_state(net);
    s.xv = noisy;
    const double u = unroll.dt / net.tau_s;
    const double w = unroll.dt / net.tau_v;
    const double q = unroll.dt / net.tau_c;
    for (std::size_t k = 0; k < unroll.steps; ++k) {
        const Matrix2D gv = activation_grid(net.lagr_v, s.xv);
        const Matrix2D rs = activation_grid(net.lagr_s, s.xs);
        const Matrix2D rc = activation_grid(net.lagr_c, s.xc);
        Matrix2D xs_next = s.xs * (1.0 - u) + matmul(net.xi_sv, gv) * u;
        Matrix2D xv_next = s.xv * (1.0 - w * net.visible_decay) +
                           (matmul_tn(net.xi_sv, rs) + matmul(rc, net.xi_cv)) * w;
        Matrix2D xc_next = s.xc * (1.0 - q) + matmul_nt(gv, net.xi_cv) * q;
        s.xs = std::move(xs_next);
        s.xv = std::move(xv_next);
        s.xc = std::move(xc_next);
        if (!all_finite(s.xv)) {
            throw NumericError("denoise_unrolled: state diverged at step " + std::to_string(k));
        }
    }
    return s.xv;
}

DenoiseBackwardResult denoise_backward(const HierarchicalNet& net, const Matrix2D& noisy,
                                       const Matrix2D& clean, const DenoiseUnroll& unroll) {
    net.validate();
    if (!net.symmetric()) {
        throw ConfigError("denoise_backward: symmetric interactions required");
    }
    if (!noisy.same_shape(clean)) {
        throw DimensionError("denoise_backward: noisy " + shape_str(noisy) + " vs clean " +
                             shape_str(clean));
    }
    const double u = unroll.dt / net.tau_s;
    const double w = unroll.dt / net.tau_v;
    const double q = unroll.dt / net.tau_c;
    const double alpha = net.visible_decay;

    std::vector<DenoiseStepCache> steps;
    steps.reserve(unroll.steps);
    HierarchicalState s = zero_state(net);
    s.xv = noisy;
    for (std::size_t k = 0; k < unroll.steps; ++k) {
        DenoiseStepCache c;
        c.xs = s.xs;
        c.xv = s.xv;
        c.xc = s.xc;
        c.gv = activation_grid(net.lagr_v, s.xv);
        c.rs = activation_grid(net.lagr_s, s.xs);
        c.rc = activation_grid(net.lagr_c, s.xc);
        Matrix2D xs_next = c.xs * (1.0 - u) + matmul(net.xi_sv, c.gv) * u;
        Matrix2D xv_next =
            c.xv * (1.0 - w * alpha) + (matmul_tn(net.xi_sv, c.rs) + matmul(c.rc, net.xi_cv)) * w;
        Matrix2D xc_next = c.xc * (1.0 - q) + matmul_nt(c.gv, net.xi_cv) * q;
        s.xs = std::move(xs_next);
        s.xv = std::move(xv_next);
        s.xc = std::move(xc_next);
        if (!all_finite(s.xv)) {
            throw NumericError("denoise_backward: state diverged at step " + std::to_string(k));
        }
        steps.push_back(std::move(c));
    }

    DenoiseBackwardResult res;
    res.grads.xi_sv = Matrix2D(net.n_s, net.n_vs);
    res.grads.xi_cv = Matrix2D(net.n_c, net.n_vc);

    const double inv_n = 1.0 / static_cast<double>(s.xv.size());
    Matrix2D d_xv(net.n_vs, net.n_vc);
    for (std::size_t i = 0; i < s.xv.size(); ++i) {
        const double r = s.xv.flat()[i] - clean.flat()[i];
        res.loss += r * r * inv_n;
        d_xv.flat()[i] = 2.0 * r * inv_n;
    }
    Matrix2D d_xs(net.n_s, net.n_vc);
    Matrix2D d_xc(net.n_vs, net.n_c);

    for (std::size_t k = unroll.steps; k-- > 0;) {
        const DenoiseStepCache& c = steps[k];
        // Parameter gradients from this step's update.
        res.grads.xi_sv += matmul_nt(d_xs, c.gv) * u;        // from u * xi_sv gv
        res.grads.xi_sv += matmul_nt(c.rs, d_xv) * w;        // from w * xi_sv^T rs
        res.grads.xi_cv += matmul_tn(d_xc, c.gv) * q;        // from q * gv xi_cv^T
        res.grads.xi_cv += matmul_tn(c.rc, d_xv) * w;        // from w * rc xi_cv

        // State adjoints.
        Matrix2D d_rs = matmul(net.xi_sv, d_xv) * w;
        Matrix2D d_rc = matmul_nt(d_xv, net.xi_cv) * w;
        Matrix2D d_gv = matmul_tn(net.xi_sv, d_xs) * u + matmul(d_xc, net.xi_cv) * q;

        Matrix2D d_xs_prev = d_xs * (1.0 - u);
        act_vjp(net.lagr_s, c.xs, d_rs, d_xs_prev);
        Matrix2D d_xc_prev = d_xc * (1.0 - q);
        act_vjp(net.lagr_c, c.xc, d_rc, d_xc_prev);
        Matrix2D d_xv_prev = d_xv * (1.0 - w * alpha);
        act_vjp(net.lagr_v, c.xv, d_gv, d_xv_prev);

        d_xs = std::move(d_xs_prev);
        d_xc = std::move(d_xc_prev);
        d_xv = std::move(d_xv_prev);
    }
    return res;
}

}  // namespace hopmix

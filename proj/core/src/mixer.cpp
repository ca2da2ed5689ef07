#include "hopmix/mixer.hpp"

#include <cmath>
#include <string>

namespace hopmix {

const char* weight_mode_name(WeightMode m) {
    switch (m) {
        case WeightMode::Free: return "free";
        case WeightMode::Symmetric: return "symmetric";
        case WeightMode::Asymmetric: return "asymmetric";
    }
    return "?";
}

const char* norm_mode_name(NormMode m) {
    return m == NormMode::JointAxes ? "joint_axes" : "channel_only";
}

WeightMode weight_mode_from_name(const std::string& name) {
    if (name == "free") return WeightMode::Free;
    if (name == "symmetric") return WeightMode::Symmetric;
    if (name == "asymmetric") return WeightMode::Asymmetric;
    throw ConfigError("unknown weight mode '" + name + "'");
}

NormMode norm_mode_from_name(const std::string& name) {
    if (name == "joint_axes") return NormMode::JointAxes;
    if (name == "channel_only") return NormMode::ChannelOnly;
    throw ConfigError("unknown norm mode '" + name + "'");
}

Matrix2D MixerBlock::effective_w2() const {
    switch (mode) {
        case WeightMode::Free: return w2;
        case WeightMode::Symmetric: return transpose(w1);
        case WeightMode::Asymmetric: {
            Matrix2D m = transpose(w1);
            m += w2_tilde;
            return m;
        }
    }
    throw ConfigError("MixerBlock: unknown mode");
}

Matrix2D MixerBlock::effective_w4() const {
    switch (mode) {
        case WeightMode::Free: return w4;
        case WeightMode::Symmetric: return transpose(w3);
        case WeightMode::Asymmetric: {
            Matrix2D m = transpose(w3);
            m += w4_tilde;
            return m;
        }
    }
    throw ConfigError("MixerBlock: unknown mode");
}

void MixerBlock::validate() const {
    if (n_tokens == 0 || n_channels == 0 || d_token == 0 || d_channel == 0) {
        throw DimensionError("MixerBlock: all dimensions must be positive");
    }
    auto expect = [](const Matrix2D& m, std::size_t r, std::size_t c, const char* name) {
        if (m.rows() != r || m.cols() != c) {
            throw DimensionError(std::string("MixerBlock: ") + name + " shape " + shape_str(m) +
                                 " does not match (" + std::to_string(r) + "x" +
                                 std::to_string(c) + ")");
        }
    };
    expect(w1, d_token, n_tokens, "w1");
    expect(w3, n_channels, d_channel, "w3");
    if (mode == WeightMode::Free) {
        expect(w2, n_tokens, d_token, "w2");
        expect(w4, d_channel, n_channels, "w4");
    }
    if (mode == WeightMode::Asymmetric) {
        expect(w2_tilde, n_tokens, d_token, "w2_tilde");
        expect(w4_tilde, d_channel, n_channels, "w4_tilde");
    }
    if (n_iter < 1) throw ConfigError("MixerBlock: n_iter must be >= 1");
    if (bias) {
        if (bias->b1.size() != d_token || bias->b2.size() != n_tokens ||
            bias->b3.size() != d_channel || bias->b4.size() != n_channels) {
            throw DimensionError("MixerBlock: bias lengths do not match block dimensions");
        }
    }
}

MixerBlock make_mixer_block(WeightMode mode, std::size_t n_tokens, std::size_t n_channels,
                            Rng& rng, const MixerBlockOptions& opts) {
    MixerBlock b;
    b.mode = mode;
    b.n_tokens = n_tokens;
    b.n_channels = n_channels;
    b.d_token = std::max<std::size_t>(
        1, static_cast<std::size_t>(opts.token_ratio * static_cast<double>(n_channels) * opts.h_r));
    b.d_channel = std::max<std::size_t>(
        1, static_cast<std::size_t>(opts.channel_ratio * static_cast<double>(n_channels) * opts.h_r));
    b.n_iter = opts.n_iter;
    b.norm = opts.norm;
    b.eps = opts.eps;

    auto init = [&](std::size_t rows, std::size_t cols, std::size_t fan_in) {
        return rng.normal_matrix(rows, cols, opts.init_scale / std::sqrt(static_cast<double>(fan_in)));
    };
    b.w1 = init(b.d_token, n_tokens, n_tokens);
    b.w3 = init(n_channels, b.d_channel, n_channels);
    if (mode == WeightMode::Free) {
        b.w2 = init(n_tokens, b.d_token, b.d_token);
        b.w4 = init(b.d_channel, n_channels, b.d_channel);
    }
    if (mode == WeightMode::Asymmetric) {
        b.w2_tilde = Matrix2D(n_tokens, b.d_token);
        b.w4_tilde = Matrix2D(b.d_channel, n_channels);
    }
    return b;
}

Matrix2D symmetric_layernorm(const Matrix2D& x, double eps) {
    Matrix2D out(x.rows(), x.cols());
    lagrangian_activation(LagrangianSpec::centered_norm(eps), x.flat(), out.flat());
    return out;
}

Matrix2D channel_layernorm(const Matrix2D& x, double eps) {
    Matrix2D out(x.rows(), x.cols());
    const LagrangianSpec spec =
        LagrangianSpec::layer_norm(1.0, {}, eps, static_cast<double>(x.cols()));
    for (std::size_t i = 0; i < x.rows(); ++i) {
        lagrangian_activation(spec, x.flat().subspan(i * x.cols(), x.cols()),
                              out.flat().subspan(i * x.cols(), x.cols()));
    }
    return out;
}

Matrix2D apply_norm(const Matrix2D& x, NormMode mode, double eps) {
    return mode == NormMode::JointAxes ? symmetric_layernorm(x, eps) : channel_layernorm(x, eps);
}

namespace {

void check_input(const Matrix2D& x, const MixerBlock& b, const char* op) {
    b.validate();
    if (x.rows() != b.n_tokens || x.cols() != b.n_channels) {
        throw DimensionError(std::string(op) + ": input shape " + shape_str(x) +
                             " does not match block grid (" + std::to_string(b.n_tokens) + "x" +
                             std::to_string(b.n_channels) + ")");
    }
}

Matrix2D activation_grid(const LagrangianSpec& spec, const Matrix2D& x) {
    Matrix2D out(x.rows(), x.cols());
    lagrangian_activation(spec, x.flat(), out.flat());
    return out;
}

void add_row_bias(Matrix2D& m, const Vector& b) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += b[i];
}

void add_col_bias(Matrix2D& m, const Vector& b) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += b[j];
}

// Both mixing contributions evaluated on one normalized input.
struct MixTerms {
    Matrix2D token;    // W2 gs(W1 n + b1) + b2
    Matrix2D channel;  // gc(n W3 + b3) W4 + b4
};

MixTerms mix_terms(const Matrix2D& n, const MixerBlock& b) {
    Matrix2D s_pre = matmul(b.w1, n);
    if (b.bias) add_row_bias(s_pre, b.bias->b1);
    Matrix2D token = matmul(b.effective_w2(), activation_grid(b.activation_s, s_pre));
    if (b.bias) add_row_bias(token, b.bias->b2);

    Matrix2D c_pre = matmul(n, b.w3);
    if (b.bias) add_col_bias(c_pre, b.bias->b3);
    Matrix2D channel = matmul(activation_grid(b.activation_c, c_pre), b.effective_w4());
    if (b.bias) add_col_bias(channel, b.bias->b4);
    return MixTerms{std::move(token), std::move(channel)};
}

}  // namespace

Matrix2D vanilla_block(const Matrix2D& x, const MixerBlock& b) {
    check_input(x, b, "vanilla_block");
    // Token mixing first, then channel mixing on the updated state.
    Matrix2D n1 = apply_norm(x, b.norm, b.eps);
    Matrix2D s_pre = matmul(b.w1, n1);
    if (b.bias) add_row_bias(s_pre, b.bias->b1);
    Matrix2D y = matmul(b.effective_w2(), activation_grid(b.activation_s, s_pre));
    if (b.bias) add_row_bias(y, b.bias->b2);
    y += x;

    Matrix2D n2 = apply_norm(y, b.norm, b.eps);
    Matrix2D c_pre = matmul(n2, b.w3);
    if (b.bias) add_col_bias(c_pre, b.bias->b3);
    Matrix2D out = matmul(activation_grid(b.activation_c, c_pre), b.effective_w4());
    if (b.bias) add_col_bias(out, b.bias->b4);
    out += y;
    return out;
}

Matrix2D parallel_block(const Matrix2D& x, const MixerBlock& b) {
    check_input(x, b, "parallel_block");
    const Matrix2D n = apply_norm(x, b.norm, b.eps);
    MixTerms t = mix_terms(n, b);
    Matrix2D out = x;
    out += t.token;
    out += t.channel;
    return out;
}

Matrix2D block_forward(const Matrix2D& x, const MixerBlock& b, BlockStyle style) {
    Matrix2D state = x;
    for (int i = 0; i < b.n_iter; ++i) {
        state = style == BlockStyle::Parallel ? parallel_block(state, b) : vanilla_block(state, b);
    }
    return state;
}

std::vector<Matrix2D> iterate_block(const Matrix2D& x, const MixerBlock& b, std::size_t k,
                                    BlockStyle style) {
    if (k == 0) throw ConfigError("iterate_block: k must be >= 1");
    std::vector<Matrix2D> states;
    states.reserve(k + 1);
    states.push_back(x);
    for (std::size_t i = 0; i < k; ++i) {
        states.push_back(style == BlockStyle::Parallel ? parallel_block(states.back(), b)
                                                       : vanilla_block(states.back(), b));
    }
    return states;
}

double block_energy(const Matrix2D& x, const MixerBlock& b) {
    check_input(x, b, "block_energy");
    if (b.norm != NormMode::JointAxes) {
        throw ConfigError("block_energy: defined for joint-axes normalization only");
    }
    if (b.bias) {
        throw ConfigError("block_energy: defined for bias-free blocks only");
    }
    const LagrangianSpec visible = LagrangianSpec::centered_norm(b.eps);
    const Matrix2D gv = symmetric_layernorm(x, b.eps);
    const Matrix2D xs = matmul(b.w1, gv);
    const Matrix2D xc = matmul(gv, b.w3);

    double e = dot(x, gv) - lagrangian_value(visible, x.flat());
    e -= lagrangian_value(b.activation_s, xs.flat());
    e -= lagrangian_value(b.activation_c, xc.flat());
    if (b.mode == WeightMode::Asymmetric) {
        const Matrix2D gs = activation_grid(b.activation_s, xs);
        const Matrix2D gc = activation_grid(b.activation_c, xc);
        e += 0.5 * dot(gv, matmul(b.w2_tilde, gs));
        e += 0.5 * dot(gv, matmul(gc, b.w4_tilde));
    }
    return e;
}

Matrix2D reduced_flow_rhs(const Matrix2D& x, const MixerBlock& b, double decay) {
    check_input(x, b, "reduced_flow_rhs");
    const Matrix2D n = apply_norm(x, b.norm, b.eps);
    MixTerms t = mix_terms(n, b);
    Matrix2D out = std::move(t.token);
    out += t.channel;
    if (decay != 0.0) {
        for (std::size_t i = 0; i < out.size(); ++i) out.flat()[i] -= decay * x.flat()[i];
    }
    return out;
}

MixerBlock to_mixer_block(const HierarchicalNet& net) {
    net.validate();
    if (net.lagr_v.kind != LagrangianKind::CenteredNorm) {
        throw ConfigError("to_mixer_block: visible Lagrangian must be the centered norm");
    }
    MixerBlock b;
    b.n_tokens = net.n_vs;
    b.n_channels = net.n_vc;
    b.d_token = net.n_s;
    b.d_channel = net.n_c;
    b.w1 = net.xi_sv;
    b.w3 = transpose(net.xi_cv);
    b.activation_s = net.lagr_s;
    b.activation_c = net.lagr_c;
    b.eps = net.lagr_v.eps;
    if (net.symmetric()) {
        b.mode = WeightMode::Symmetric;
    } else {
        b.mode = WeightMode::Asymmetric;
        b.w2_tilde = net.asym_vs ? *net.asym_vs : Matrix2D(net.n_vs, net.n_s);
        b.w4_tilde = net.asym_vc ? transpose(*net.asym_vc) : Matrix2D(net.n_c, net.n_vc);
    }
    b.validate();
    return b;
}

}  // namespace hopmix

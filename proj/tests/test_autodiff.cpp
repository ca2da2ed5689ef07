#include <cmath>

#include "doctest.h"
#include "hopmix/autodiff.hpp"
#include "hopmix/finite_diff.hpp"
#include "hopmix/train.hpp"

using namespace hopmix;

namespace {

ClassificationDataset tiny_dataset(Rng& rng, std::size_t n, std::size_t tokens, std::size_t d_in) {
    TokenPatternSpec spec;
    spec.n_samples = n;
    spec.n_tokens = tokens;
    spec.d_in = d_in;
    return make_token_pattern_dataset(spec, rng);
}

MixerNet toy_net(WeightMode mode, NormMode norm, MixerVariant variant, Rng& rng,
                 std::size_t tokens = 3, std::size_t d_in = 4, std::size_t channels = 4) {
    MixerNetOptions opts;
    opts.n_blocks = 2;
    opts.block.norm = norm;
    opts.block.init_scale = 0.7;
    return make_mixer_net(variant, mode, tokens, d_in, channels, 2, rng, opts);
}

// Loss as a pure function of the flattened parameter vector, for finite
// differences over every parameter.
double loss_at(MixerNet net, const std::vector<Matrix2D>& inputs, const std::vector<int>& labels,
               double lambda, const Vector& theta) {
    auto views = parameter_views(net);
    std::size_t off = 0;
    for (auto& span : views) {
        for (auto& v : span) v = theta[off++];
    }
    REQUIRE(off == theta.size());
    return mixer_backward(net, inputs, labels, lambda).loss;
}

Vector flatten_params(MixerNet& net) {
    Vector theta;
    for (auto& span : parameter_views(net))
        theta.insert(theta.end(), span.begin(), span.end());
    return theta;
}

Vector flatten_grads(const MixerNet& net, const MixerGrads& grads) {
    Vector flat;
    MixerNet& mutable_net = const_cast<MixerNet&>(net);
    auto views = gradient_views(mutable_net, grads);
    for (auto& span : views) flat.insert(flat.end(), span.begin(), span.end());
    return flat;
}

}  // namespace

TEST_CASE("gradients match finite differences in every mode and norm") {
    Rng rng(61);
    const ClassificationDataset data = tiny_dataset(rng, 6, 3, 4);
    const double lambda = 0.05;

    for (WeightMode mode : {WeightMode::Free, WeightMode::Symmetric, WeightMode::Asymmetric}) {
        for (NormMode norm : {NormMode::JointAxes, NormMode::ChannelOnly}) {
            for (MixerVariant variant : {MixerVariant::Parallel, MixerVariant::Vanilla}) {
                MixerNet net = toy_net(mode, norm, variant, rng);
                if (mode == WeightMode::Asymmetric) {
                    for (auto& b : net.blocks) {
                        b.w2_tilde = rng.normal_matrix(b.n_tokens, b.d_token, 0.2);
                        b.w4_tilde = rng.normal_matrix(b.d_channel, b.n_channels, 0.2);
                    }
                }
                const double use_lambda = mode == WeightMode::Asymmetric ? lambda : 0.0;
                const BackwardResult bw =
                    mixer_backward(net, data.inputs, data.labels, use_lambda);
                const Vector analytic = flatten_grads(net, bw.grads);
                const Vector theta = flatten_params(net);
                const Vector fd = finite_diff_grad(
                    [&](const Vector& t) {
                        return loss_at(net, data.inputs, data.labels, use_lambda, t);
                    },
                    theta);
                REQUIRE(analytic.size() == fd.size());
                double worst = 0.0;
                for (std::size_t i = 0; i < fd.size(); ++i) {
                    worst = std::max(worst, std::abs(analytic[i] - fd[i]) /
                                                std::max(1e-3, std::abs(fd[i])));
                }
                INFO("mode ", weight_mode_name(mode), " norm ", norm_mode_name(norm), " variant ",
                     mixer_variant_name(variant));
                CHECK(worst < 1e-4);
            }
        }
    }
}

TEST_CASE("symmetric gradient is the tied sum of free-mode gradients") {
    Rng rng(62);
    const ClassificationDataset data = tiny_dataset(rng, 5, 3, 4);
    MixerNet sym = toy_net(WeightMode::Symmetric, NormMode::JointAxes, MixerVariant::Parallel, rng);

    // Free-mode copy evaluated at the tied weights w2 = w1^T, w4 = w3^T.
    MixerNet free = sym;
    for (auto& b : free.blocks) {
        b.mode = WeightMode::Free;
        b.w2 = transpose(b.w1);
        b.w4 = transpose(b.w3);
    }
    const BackwardResult bw_sym = mixer_backward(sym, data.inputs, data.labels, 0.0);
    const BackwardResult bw_free = mixer_backward(free, data.inputs, data.labels, 0.0);
    for (std::size_t i = 0; i < sym.blocks.size(); ++i) {
        const Matrix2D expected_w1 = bw_free.grads.blocks[i].w1 +
                                     transpose(bw_free.grads.blocks[i].w2);
        const Matrix2D expected_w3 = bw_free.grads.blocks[i].w3 +
                                     transpose(bw_free.grads.blocks[i].w4);
        CHECK(max_abs_diff(bw_sym.grads.blocks[i].w1, expected_w1) < 1e-10);
        CHECK(max_abs_diff(bw_sym.grads.blocks[i].w3, expected_w3) < 1e-10);
    }
}

TEST_CASE("frobenius penalty: hand values, loop oracle, mode error") {
    Rng rng(63);
    MixerNet net = toy_net(WeightMode::Asymmetric, NormMode::JointAxes, MixerVariant::Parallel, rng);
    for (auto& b : net.blocks) {
        b.w2_tilde.fill(0.0);
        b.w4_tilde.fill(0.0);
    }
    CHECK(frobenius_penalty(net) == 0.0);

    net.blocks[0].w2_tilde(0, 0) = 3.0;
    net.blocks[0].w2_tilde(0, 1) = 4.0;
    CHECK(frobenius_penalty(net) == 25.0);

    for (auto& b : net.blocks) {
        b.w2_tilde = rng.normal_matrix(b.n_tokens, b.d_token);
        b.w4_tilde = rng.normal_matrix(b.d_channel, b.n_channels);
    }
    double oracle = 0.0;
    for (const auto& b : net.blocks) {
        for (double v : b.w2_tilde.flat()) oracle += v * v;
        for (double v : b.w4_tilde.flat()) oracle += v * v;
    }
    CHECK(std::abs(frobenius_penalty(net) - oracle) < 1e-12);

    MixerNet sym = toy_net(WeightMode::Symmetric, NormMode::JointAxes, MixerVariant::Parallel, rng);
    CHECK_THROWS_AS(frobenius_penalty(sym), ConfigError);
}

TEST_CASE("training with lr=0 leaves parameters unchanged and the curve flat") {
    Rng rng(64);
    const ClassificationDataset data = tiny_dataset(rng, 16, 3, 4);
    MixerNet net = toy_net(WeightMode::Symmetric, NormMode::JointAxes, MixerVariant::Parallel, rng);
    const Vector before = flatten_params(net);

    TrainConfig cfg;
    cfg.lr = 0.0;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 7;
    const TrainResult result = train_classifier(net, data, cfg);
    const Vector after = flatten_params(net);
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
    // Batch summation order differs between the full-set point and the epoch
    // means, so flatness holds to rounding, not bitwise.
    for (const auto& p : result.curve)
        CHECK(std::abs(p.loss - result.curve.front().loss) < 1e-12);
}

TEST_CASE("training is bitwise deterministic under equal seeds") {
    Rng rng_a(65), rng_b(65);
    const ClassificationDataset data_a = tiny_dataset(rng_a, 24, 3, 4);
    const ClassificationDataset data_b = tiny_dataset(rng_b, 24, 3, 4);
    MixerNet net_a = toy_net(WeightMode::Free, NormMode::JointAxes, MixerVariant::Parallel, rng_a);
    MixerNet net_b = toy_net(WeightMode::Free, NormMode::JointAxes, MixerVariant::Parallel, rng_b);

    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.epochs = 4;
    cfg.batch_size = 8;
    cfg.seed = 99;
    const TrainResult a = train_classifier(net_a, data_a, cfg);
    const TrainResult b = train_classifier(net_b, data_b, cfg);
    REQUIRE(a.curve.size() == b.curve.size());
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
        CHECK(a.curve[i].loss == b.curve[i].loss);
        CHECK(a.curve[i].metric == b.curve[i].metric);
    }
    const Vector pa = flatten_params(net_a), pb = flatten_params(net_b);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);
}

TEST_CASE("symmetric training keeps the tie exact at every epoch") {
    Rng rng(66);
    const ClassificationDataset data = tiny_dataset(rng, 16, 3, 4);
    MixerNet net = toy_net(WeightMode::Symmetric, NormMode::JointAxes, MixerVariant::Parallel, rng);
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    for (int epoch = 0; epoch < 4; ++epoch) {
        cfg.seed = 100 + epoch;
        train_classifier(net, data, cfg);
        for (const auto& b : net.blocks) {
            CHECK(max_abs_diff(b.effective_w2(), transpose(b.w1)) == 0.0);
            CHECK(max_abs_diff(b.effective_w4(), transpose(b.w3)) == 0.0);
        }
    }
}

TEST_CASE("evaluate: oracle weights, chance level, manual confusion count") {
    // Two constant-sign samples, pass-through blocks, a head that reads the
    // pooled sign: accuracy 1.
    Rng rng(67);
    MixerNet net = toy_net(WeightMode::Free, NormMode::JointAxes, MixerVariant::Parallel, rng, 2,
                           3, 3);
    net.patch_embed = Matrix2D::identity(3);
    for (auto& b : net.blocks) {
        b.w1.fill(0.0);
        b.w2.fill(0.0);
        b.w3.fill(0.0);
        b.w4.fill(0.0);
    }
    net.head_w = Matrix2D::from_rows({{1, -1}, {1, -1}, {1, -1}});
    net.head_b = {0.0, 0.0};
    ClassificationDataset sep;
    sep.n_classes = 2;
    sep.n_tokens = 2;
    sep.d_in = 3;
    sep.inputs = {Matrix2D(2, 3, 1.0), Matrix2D(2, 3, -1.0)};
    sep.labels = {0, 1};
    CHECK(evaluate_accuracy(net, sep) == 1.0);

    // Chance level for a fresh random net on balanced data.
    Rng rng2(68);
    const ClassificationDataset balanced = tiny_dataset(rng2, 200, 3, 4);
    MixerNet fresh = toy_net(WeightMode::Free, NormMode::JointAxes, MixerVariant::Parallel, rng2);
    const double acc = evaluate_accuracy(fresh, balanced);
    CHECK(acc > 0.35);
    CHECK(acc < 0.65);

    // Manual confusion count on ten samples.
    ClassificationDataset ten;
    ten.n_classes = 2;
    ten.n_tokens = 3;
    ten.d_in = 4;
    Rng rng3(69);
    std::size_t correct = 0;
    for (int i = 0; i < 10; ++i) {
        ten.inputs.push_back(rng3.normal_matrix(3, 4));
        ten.labels.push_back(i % 2);
    }
    for (int i = 0; i < 10; ++i) {
        if (mixer_predict(fresh, ten.inputs[i]) == ten.labels[i]) ++correct;
    }
    CHECK(evaluate_accuracy(fresh, ten) == static_cast<double>(correct) / 10.0);
}

TEST_CASE("denoiser gradients: zero case and finite differences") {
    HierarchicalNet net;
    net.n_s = 3;
    net.n_vs = 3;
    net.n_vc = 2;
    net.n_c = 4;
    net.xi_sv = Matrix2D(3, 3);
    net.xi_cv = Matrix2D(4, 2);
    DenoiseUnroll unroll{0.1, 8};

    // Zero weights, zero input, zero target: loss and gradients all vanish.
    const DenoiseBackwardResult zero =
        denoise_backward(net, Matrix2D(3, 2), Matrix2D(3, 2), unroll);
    CHECK(zero.loss == 0.0);
    CHECK(max_abs(zero.grads.xi_sv) == 0.0);
    CHECK(max_abs(zero.grads.xi_cv) == 0.0);

    Rng rng(70);
    net.xi_sv = rng.normal_matrix(3, 3, 0.5);
    net.xi_cv = rng.normal_matrix(4, 2, 0.5);
    const Matrix2D noisy = rng.normal_matrix(3, 2);
    const Matrix2D clean = rng.normal_matrix(3, 2);
    const DenoiseBackwardResult bw = denoise_backward(net, noisy, clean, unroll);

    auto loss_with = [&](const HierarchicalNet& n) {
        const Matrix2D out = denoise_unrolled(n, noisy, unroll);
        double loss = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double r = out.flat()[i] - clean.flat()[i];
            loss += r * r / static_cast<double>(out.size());
        }
        return loss;
    };
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < net.xi_sv.size(); ++i) {
        HierarchicalNet p = net, m = net;
        p.xi_sv.flat()[i] += h;
        m.xi_sv.flat()[i] -= h;
        const double fd = (loss_with(p) - loss_with(m)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - bw.grads.xi_sv.flat()[i]) /
                                    std::max(1e-3, std::abs(fd)));
    }
    for (std::size_t i = 0; i < net.xi_cv.size(); ++i) {
        HierarchicalNet p = net, m = net;
        p.xi_cv.flat()[i] += h;
        m.xi_cv.flat()[i] -= h;
        const double fd = (loss_with(p) - loss_with(m)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - bw.grads.xi_cv.flat()[i]) /
                                    std::max(1e-3, std::abs(fd)));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("denoiser training reduces the loss on a small task") {
    Rng rng(71);
    GlyphSpec gspec;
    gspec.n_samples = 32;
    gspec.sigma = 0.3;
    const DenoiseDataset data = make_glyph_dataset(gspec, rng);

    HierarchicalNet net;
    net.n_s = 16;
    net.n_vs = 8;
    net.n_vc = 8;
    net.n_c = 16;
    net.xi_sv = rng.normal_matrix(16, 8, 0.2);
    net.xi_cv = rng.normal_matrix(16, 8, 0.2);

    TrainConfig cfg;
    cfg.lr = 5e-3;
    cfg.epochs = 8;
    cfg.batch_size = 8;
    cfg.seed = 5;
    cfg.loss = LossKind::Mse;
    DenoiseUnroll unroll{0.2, 15};
    const TrainResult result = train_denoiser(net, data, cfg, unroll);
    CHECK(result.curve.back().metric < result.curve.front().metric);
}

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "hopmix/io.hpp"
#include "hopmix/mixer.hpp"
#include "hopmix/rng.hpp"
#include "hopmix/symmetry.hpp"

using namespace hopmix;

namespace {

// Test-local gelu so the block oracles do not share code with the library.
double ref_gelu(double z) { return 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0))); }

Matrix2D ref_joint_norm(const Matrix2D& x, double eps) {
    double mean = 0.0;
    for (double v : x.flat()) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x.flat()) ss += (v - mean) * (v - mean);
    const double denom = std::sqrt(ss + eps);
    Matrix2D out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out.flat()[i] = (x.flat()[i] - mean) / denom;
    return out;
}

// Straight-line script of the parallel update rule.
Matrix2D ref_parallel_block(const Matrix2D& x, const Matrix2D& w1, const Matrix2D& w2,
                            const Matrix2D& w3, const Matrix2D& w4, double eps) {
    const Matrix2D n = ref_joint_norm(x, eps);
    Matrix2D out = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t I = 0; I < x.cols(); ++I) {
            double token = 0.0;
            for (std::size_t a = 0; a < w1.rows(); ++a) {
                double pre = 0.0;
                for (std::size_t j = 0; j < x.rows(); ++j) pre += w1(a, j) * n(j, I);
                token += w2(i, a) * ref_gelu(pre);
            }
            double channel = 0.0;
            for (std::size_t b = 0; b < w4.rows(); ++b) {
                double pre = 0.0;
                for (std::size_t J = 0; J < x.cols(); ++J) pre += n(i, J) * w3(J, b);
                channel += ref_gelu(pre) * w4(b, I);
            }
            out(i, I) += token + channel;
        }
    }
    return out;
}

// Serial script: token half first, channel half on the updated grid.
Matrix2D ref_vanilla_block(const Matrix2D& x, const Matrix2D& w1, const Matrix2D& w2,
                           const Matrix2D& w3, const Matrix2D& w4, double eps) {
    const Matrix2D n1 = ref_joint_norm(x, eps);
    Matrix2D y = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t I = 0; I < x.cols(); ++I) {
            double token = 0.0;
            for (std::size_t a = 0; a < w1.rows(); ++a) {
                double pre = 0.0;
                for (std::size_t j = 0; j < x.rows(); ++j) pre += w1(a, j) * n1(j, I);
                token += w2(i, a) * ref_gelu(pre);
            }
            y(i, I) += token;
        }
    const Matrix2D n2 = ref_joint_norm(y, eps);
    Matrix2D out = y;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t I = 0; I < x.cols(); ++I) {
            double channel = 0.0;
            for (std::size_t b = 0; b < w4.rows(); ++b) {
                double pre = 0.0;
                for (std::size_t J = 0; J < x.cols(); ++J) pre += n2(i, J) * w3(J, b);
                channel += ref_gelu(pre) * w4(b, I);
            }
            out(i, I) += channel;
        }
    return out;
}

MixerBlock free_block(Rng& rng, std::size_t tokens, std::size_t channels, double scale = 0.5) {
    MixerBlockOptions opts;
    opts.init_scale = scale;
    return make_mixer_block(WeightMode::Free, tokens, channels, rng, opts);
}

}  // namespace

TEST_CASE("symmetric layernorm: hand case, constant grid, oracle reduction") {
    const Matrix2D x = Matrix2D::from_rows({{1, -1}, {0, 0}});
    const Matrix2D y = symmetric_layernorm(x, 0.0);
    CHECK(std::abs(y(0, 0) - 1.0 / std::sqrt(2.0)) < 1e-15);
    CHECK(std::abs(y(0, 1) + 1.0 / std::sqrt(2.0)) < 1e-15);
    CHECK(y(1, 0) == 0.0);
    CHECK(y(1, 1) == 0.0);

    const Matrix2D flat = symmetric_layernorm(Matrix2D(3, 4, 7.5), 1e-6);
    CHECK(max_abs(flat) == 0.0);

    Rng rng(41);
    const Matrix2D r = rng.normal_matrix(3, 4);
    CHECK(max_abs_diff(symmetric_layernorm(r, 1e-6), ref_joint_norm(r, 1e-6)) < 1e-12);
}

TEST_CASE("symmetric layernorm output has zero grand mean and unit norm") {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix2D x = rng.normal_matrix(4, 5);
        const Matrix2D y = symmetric_layernorm(x, 0.0);
        double mean = 0.0, ss = 0.0;
        for (double v : y.flat()) {
            mean += v;
            ss += v * v;
        }
        mean /= static_cast<double>(y.size());
        CHECK(std::abs(mean) < 1e-12);
        CHECK(std::abs(std::sqrt(ss) - 1.0) < 1e-10);
    }
}

TEST_CASE("constant grid at eps=0 is singular") {
    CHECK_THROWS_AS(symmetric_layernorm(Matrix2D(2, 2, 3.0), 0.0), NumericError);
}

TEST_CASE("parallel block: zero weights are the identity for any n_iter") {
    Rng rng(43);
    MixerBlock b = free_block(rng, 3, 4);
    b.w1.fill(0.0);
    b.w2.fill(0.0);
    b.w3.fill(0.0);
    b.w4.fill(0.0);
    b.n_iter = 5;
    const Matrix2D x = rng.normal_matrix(3, 4);
    CHECK(max_abs_diff(parallel_block(x, b), x) == 0.0);
    CHECK(max_abs_diff(block_forward(x, b), x) == 0.0);
}

TEST_CASE("vanilla block: zero weights and constant input are identities") {
    Rng rng(44);
    MixerBlock b = free_block(rng, 3, 4);
    b.w1.fill(0.0);
    b.w2.fill(0.0);
    b.w3.fill(0.0);
    b.w4.fill(0.0);
    const Matrix2D x = rng.normal_matrix(3, 4);
    CHECK(max_abs_diff(vanilla_block(x, b), x) == 0.0);

    MixerBlock live = free_block(rng, 3, 4);
    const Matrix2D constant(3, 4, 1.25);
    CHECK(max_abs_diff(vanilla_block(constant, live), constant) == 0.0);
    CHECK(max_abs_diff(parallel_block(constant, live), constant) == 0.0);
}

TEST_CASE("parallel block matches the scripted update rule") {
    Rng rng(45);
    for (int trial = 0; trial < 50; ++trial) {
        MixerBlock b = free_block(rng, 2 + trial % 3, 3 + trial % 2);
        const Matrix2D x = rng.normal_matrix(b.n_tokens, b.n_channels);
        const Matrix2D expected = ref_parallel_block(x, b.w1, b.w2, b.w3, b.w4, b.eps);
        CHECK(max_abs_diff(parallel_block(x, b), expected) < 1e-10);
    }
}

TEST_CASE("vanilla block matches the scripted serial rule") {
    Rng rng(46);
    for (int trial = 0; trial < 20; ++trial) {
        MixerBlock b = free_block(rng, 2, 3);
        const Matrix2D x = rng.normal_matrix(2, 3);
        const Matrix2D expected = ref_vanilla_block(x, b.w1, b.w2, b.w3, b.w4, b.eps);
        CHECK(max_abs_diff(vanilla_block(x, b), expected) < 1e-10);
    }
}

TEST_CASE("symmetric mode equals asymmetric mode with zero tildes, exactly") {
    Rng rng(47);
    MixerBlock sym = make_mixer_block(WeightMode::Symmetric, 3, 4, rng, {});
    MixerBlock asym = sym;
    asym.mode = WeightMode::Asymmetric;
    asym.w2_tilde = Matrix2D(sym.n_tokens, sym.d_token);
    asym.w4_tilde = Matrix2D(sym.d_channel, sym.n_channels);
    const Matrix2D x = rng.normal_matrix(3, 4);
    const Matrix2D a = parallel_block(x, sym);
    const Matrix2D b = parallel_block(x, asym);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.flat()[i] == b.flat()[i]);
}

TEST_CASE("symmetric tying is structural: w2 tracks any mutation of w1") {
    Rng rng(48);
    MixerBlock b = make_mixer_block(WeightMode::Symmetric, 3, 4, rng, {});
    b.w1(0, 1) = 17.0;
    b.w1(1, 2) = -4.0;
    const Matrix2D w2 = b.effective_w2();
    CHECK(w2(1, 0) == 17.0);
    CHECK(w2(2, 1) == -4.0);
    CHECK(max_abs_diff(w2, transpose(b.w1)) == 0.0);
}

TEST_CASE("parallel and serial updates differ, except when one path is dead") {
    Rng rng(49);
    MixerBlock b = free_block(rng, 3, 4);
    const Matrix2D x = rng.normal_matrix(3, 4);
    CHECK(max_abs_diff(parallel_block(x, b), vanilla_block(x, b)) > 1e-6);

    MixerBlock token_only = b;
    token_only.w3.fill(0.0);
    token_only.w4.fill(0.0);
    CHECK(max_abs_diff(parallel_block(x, token_only), vanilla_block(x, token_only)) < 1e-12);

    MixerBlock channel_only = b;
    channel_only.w1.fill(0.0);
    channel_only.w2.fill(0.0);
    CHECK(max_abs_diff(parallel_block(x, channel_only), vanilla_block(x, channel_only)) < 1e-12);
}

TEST_CASE("joint-axes parallel block is equivariant under constant shifts") {
    Rng rng(50);
    MixerBlock b = free_block(rng, 3, 4);
    const Matrix2D x = rng.normal_matrix(3, 4);
    const double shift = 2.75;
    Matrix2D shifted = x;
    for (auto& v : shifted.storage()) v += shift;
    const Matrix2D a = parallel_block(shifted, b);
    Matrix2D expected = parallel_block(x, b);
    for (auto& v : expected.storage()) v += shift;
    CHECK(max_abs_diff(a, expected) < 1e-12);
}

TEST_CASE("iterate block: k=1 is one application, zero weights are constant") {
    Rng rng(51);
    MixerBlock b = free_block(rng, 3, 4);
    const Matrix2D x = rng.normal_matrix(3, 4);
    const auto states = iterate_block(x, b, 1);
    REQUIRE(states.size() == 2);
    CHECK(max_abs_diff(states[1], parallel_block(x, b)) == 0.0);

    MixerBlock zero = b;
    zero.w1.fill(0.0);
    zero.w2.fill(0.0);
    zero.w3.fill(0.0);
    zero.w4.fill(0.0);
    const auto frozen = iterate_block(x, zero, 4);
    for (const auto& s : frozen) CHECK(max_abs_diff(s, x) == 0.0);
}

TEST_CASE("block energy: zero-weight collapse and adiabatic consistency") {
    Rng rng(52);
    MixerBlock zero = make_mixer_block(WeightMode::Symmetric, 2, 1, rng, {});
    zero.w1.fill(0.0);
    zero.w3.fill(0.0);
    zero.eps = 1e-3;
    const Matrix2D x = rng.normal_matrix(2, 1);
    const Matrix2D ln = symmetric_layernorm(x, zero.eps);
    double expected = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) expected += x.flat()[i] * ln.flat()[i];
    double mean = (x(0, 0) + x(1, 0)) / 2.0;
    const double ss = (x(0, 0) - mean) * (x(0, 0) - mean) + (x(1, 0) - mean) * (x(1, 0) - mean);
    expected -= std::sqrt(ss + zero.eps);
    CHECK(std::abs(block_energy(x, zero) - expected) < 1e-14);

    // Cross-module: with no symmetry breaking, the pseudo energy equals the
    // canonical three-layer energy at the adiabatic fixed point.
    for (int trial = 0; trial < 50; ++trial) {
        HierarchicalNet net;
        net.n_s = 4;
        net.n_vs = 3;
        net.n_vc = 2;
        net.n_c = 5;
        net.xi_sv = rng.normal_matrix(4, 3, 0.6);
        net.xi_cv = rng.normal_matrix(5, 2, 0.6);
        net.lagr_s = LagrangianSpec::gelu_primitive();
        net.lagr_c = LagrangianSpec::gelu_primitive();
        net.lagr_v = LagrangianSpec::centered_norm(1e-6);
        const Matrix2D xv = rng.normal_matrix(3, 2);
        const AdiabaticPoint fix = adiabatic_fixed_point(net, xv);
        const double via_block = block_energy(xv, to_mixer_block(net));
        const double via_net =
            energy_three_layer(net, HierarchicalState{fix.xs, xv, fix.xc});
        CHECK(std::abs(via_block - via_net) < 1e-10);
    }
}

TEST_CASE("pseudo energy is non-increasing along the symmetric continuous flow") {
    Rng rng(53);
    for (int trial = 0; trial < 3; ++trial) {
        MixerBlockOptions opts;
        opts.init_scale = 0.6;
        MixerBlock b = make_mixer_block(WeightMode::Symmetric, 3, 4, rng, opts);
        b.eps = 1e-6;
        IntegrateOptions io;
        io.method = Integrator::Euler;
        io.dt = 1e-3;
        io.steps = 3000;
        const ReducedRun run = integrate_reduced(b, rng.normal_matrix(3, 4), io);
        CHECK(run.trace.max_energy_increase() <= 1e-6);
    }
}

TEST_CASE("block energy rejects undefined configurations") {
    Rng rng(54);
    MixerBlock b = make_mixer_block(WeightMode::Symmetric, 2, 1, rng, {});
    b.norm = NormMode::ChannelOnly;
    CHECK_THROWS_AS(block_energy(rng.normal_matrix(2, 1), b), ConfigError);
}

TEST_CASE("channel-only layernorm normalizes each token row") {
    Rng rng(55);
    const Matrix2D x = rng.normal_matrix(3, 8);
    const Matrix2D y = channel_layernorm(x, 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        double mean = 0.0, ss = 0.0;
        for (std::size_t j = 0; j < 8; ++j) mean += y(i, j);
        mean /= 8.0;
        CHECK(std::abs(mean) < 1e-12);
        for (std::size_t j = 0; j < 8; ++j) ss += y(i, j) * y(i, j);
        // standard layer norm: mean square of the row is 1
        CHECK(std::abs(ss / 8.0 - 1.0) < 1e-10);
    }
}

TEST_CASE("block checkpoints round-trip byte-identically") {
    Rng rng(56);
    MixerBlock b = make_mixer_block(WeightMode::Asymmetric, 3, 4, rng, {});
    b.w2_tilde = rng.normal_matrix(b.n_tokens, b.d_token, 0.1);
    b.w4_tilde = rng.normal_matrix(b.d_channel, b.n_channels, 0.1);
    const std::string dir = "test_block_ckpt_tmp";
    save_block_weights(dir, b);
    const MixerBlock loaded = load_block_weights(dir);
    CHECK(loaded.mode == b.mode);
    CHECK(loaded.n_iter == b.n_iter);
    CHECK(max_abs_diff(loaded.w1, b.w1) == 0.0);
    CHECK(max_abs_diff(loaded.w3, b.w3) == 0.0);
    CHECK(max_abs_diff(loaded.w2_tilde, b.w2_tilde) == 0.0);
    CHECK(max_abs_diff(loaded.w4_tilde, b.w4_tilde) == 0.0);

    const Matrix2D x = rng.normal_matrix(3, 4);
    CHECK(max_abs_diff(parallel_block(x, loaded), parallel_block(x, b)) == 0.0);
    std::filesystem::remove_all(dir);
}

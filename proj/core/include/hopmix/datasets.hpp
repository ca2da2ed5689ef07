#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hopmix/matrix.hpp"
#include "hopmix/rng.hpp"

namespace hopmix {

// Classification samples are (n_tokens x d_in) grids.
struct ClassificationDataset {
    std::vector<Matrix2D> inputs;
    std::vector<int> labels;
    std::size_t n_classes = 0;
    std::size_t n_tokens = 0;
    std::size_t d_in = 0;
};

// Two classes distinguished only by where fixed channel patterns sit along
// the token axis; the two layouts share the same token-sum, so pooling
// without token mixing cannot separate them.
struct TokenPatternSpec {
    std::size_t n_samples = 256;
    std::size_t n_tokens = 4;
    std::size_t d_in = 8;
    double noise = 0.35;
    double pattern_scale = 1.0;
};

ClassificationDataset make_token_pattern_dataset(const TokenPatternSpec& spec, Rng& rng);

// Train/test splits sharing one pattern draw.
struct ClassificationSplits {
    ClassificationDataset train;
    ClassificationDataset test;
};
ClassificationSplits make_token_pattern_splits(const TokenPatternSpec& spec, std::size_t n_test,
                                               Rng& rng);

struct DenoiseDataset {
    std::vector<Matrix2D> noisy;
    std::vector<Matrix2D> clean;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

// 8x8 binary glyphs corrupted by additive Gaussian noise.
struct GlyphSpec {
    std::size_t n_samples = 256;
    double sigma = 0.3;
};

// The clean glyph alphabet (deterministic, values in {0,1}).
std::vector<Matrix2D> glyph_alphabet();
DenoiseDataset make_glyph_dataset(const GlyphSpec& spec, Rng& rng);

// Binary f64 tensor files with a JSON shape manifest.
void save_classification_dataset(const std::string& dir, const ClassificationDataset& data);
ClassificationDataset load_classification_dataset(const std::string& dir);
void save_denoise_dataset(const std::string& dir, const DenoiseDataset& data);
DenoiseDataset load_denoise_dataset(const std::string& dir);

}  // namespace hopmix

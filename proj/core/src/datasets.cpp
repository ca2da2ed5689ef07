#include "hopmix/datasets.hpp"

#include <filesystem>

#include "hopmix/io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hopmix {

namespace {

ClassificationDataset draw_token_pattern_samples(const TokenPatternSpec& spec,
                                                 const Matrix2D& pattern_a,
                                                 const Matrix2D& pattern_b, std::size_t n,
                                                 Rng& rng) {
    ClassificationDataset data;
    data.n_classes = 2;
    data.n_tokens = spec.n_tokens;
    data.d_in = spec.d_in;
    data.inputs.reserve(n);
    data.labels.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const int label = static_cast<int>(rng.below(2));
        Matrix2D x(spec.n_tokens, spec.d_in);
        for (std::size_t t = 0; t < spec.n_tokens; ++t) {
            const bool use_a = (t % 2 == 0) == (label == 0);
            const Matrix2D& p = use_a ? pattern_a : pattern_b;
            for (std::size_t j = 0; j < spec.d_in; ++j) {
                x(t, j) = p(0, j) + spec.noise * rng.normal();
            }
        }
        data.inputs.push_back(std::move(x));
        data.labels.push_back(label);
    }
    return data;
}

}  // namespace

ClassificationDataset make_token_pattern_dataset(const TokenPatternSpec& spec, Rng& rng) {
    if (spec.n_tokens < 2) throw ConfigError("token pattern dataset: needs at least 2 tokens");
    // Two fixed channel patterns; class 0 lays them out ABAB..., class 1
    // BABA.... Both layouts have the same token sum, so the classes are
    // indistinguishable after pooling alone.
    const Matrix2D pattern_a = rng.normal_matrix(1, spec.d_in, spec.pattern_scale);
    const Matrix2D pattern_b = rng.normal_matrix(1, spec.d_in, spec.pattern_scale);
    return draw_token_pattern_samples(spec, pattern_a, pattern_b, spec.n_samples, rng);
}

ClassificationSplits make_token_pattern_splits(const TokenPatternSpec& spec, std::size_t n_test,
                                               Rng& rng) {
    if (spec.n_tokens < 2) throw ConfigError("token pattern dataset: needs at least 2 tokens");
    const Matrix2D pattern_a = rng.normal_matrix(1, spec.d_in, spec.pattern_scale);
    const Matrix2D pattern_b = rng.normal_matrix(1, spec.d_in, spec.pattern_scale);
    ClassificationSplits splits;
    splits.train = draw_token_pattern_samples(spec, pattern_a, pattern_b, spec.n_samples, rng);
    splits.test = draw_token_pattern_samples(spec, pattern_a, pattern_b, n_test, rng);
    return splits;
}

std::vector<Matrix2D> glyph_alphabet() {
    // 8x8 binary glyphs: cross, box, diagonals, horizontal stripes, vertical
    // stripes, checkerboard.
    auto from_bits = [](const char* const rows[8]) {
        Matrix2D g(8, 8);
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) g(i, j) = rows[i][j] == '#' ? 1.0 : 0.0;
        return g;
    };
    static const char* const cross[8] = {"...##...", "...##...", "...##...", "########",
                                         "########", "...##...", "...##...", "...##..."};
    static const char* const box[8] = {"########", "#......#", "#......#", "#......#",
                                       "#......#", "#......#", "#......#", "########"};
    static const char* const diag[8] = {"#......#", ".#....#.", "..#..#..", "...##...",
                                        "...##...", "..#..#..", ".#....#.", "#......#"};
    static const char* const hstripes[8] = {"########", "........", "########", "........",
                                            "########", "........", "########", "........"};
    static const char* const vstripes[8] = {"#.#.#.#.", "#.#.#.#.", "#.#.#.#.", "#.#.#.#.",
                                            "#.#.#.#.", "#.#.#.#.", "#.#.#.#.", "#.#.#.#."};
    static const char* const checker[8] = {"##..##..", "##..##..", "..##..##", "..##..##",
                                           "##..##..", "##..##..", "..##..##", "..##..##"};
    return {from_bits(cross), from_bits(box),      from_bits(diag),
            from_bits(hstripes), from_bits(vstripes), from_bits(checker)};
}

DenoiseDataset make_glyph_dataset(const GlyphSpec& spec, Rng& rng) {
    const std::vector<Matrix2D> glyphs = glyph_alphabet();
    DenoiseDataset data;
    data.rows = 8;
    data.cols = 8;
    data.noisy.reserve(spec.n_samples);
    data.clean.reserve(spec.n_samples);
    for (std::size_t s = 0; s < spec.n_samples; ++s) {
        const Matrix2D& g = glyphs[rng.below(glyphs.size())];
        Matrix2D noisy = g;
        for (auto& v : noisy.storage()) v += spec.sigma * rng.normal();
        data.clean.push_back(g);
        data.noisy.push_back(std::move(noisy));
    }
    return data;
}

namespace {

void write_tensor(const fs::path& path, const std::vector<Matrix2D>& tensors) {
    std::vector<double> flat;
    for (const auto& m : tensors) flat.insert(flat.end(), m.flat().begin(), m.flat().end());
    write_f64_blob(path.string(), flat);
}

std::vector<Matrix2D> read_tensor(const fs::path& path, std::size_t n, std::size_t rows,
                                  std::size_t cols) {
    const std::vector<double> flat = read_f64_blob(path.string(), n * rows * cols);
    std::vector<Matrix2D> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.emplace_back(rows, cols,
                         std::vector<double>(flat.begin() + i * rows * cols,
                                             flat.begin() + (i + 1) * rows * cols));
    }
    return out;
}

}  // namespace

void save_classification_dataset(const std::string& dir, const ClassificationDataset& data) {
    fs::create_directories(dir);
    json j;
    j["type"] = "classification";
    j["n_samples"] = data.inputs.size();
    j["n_tokens"] = data.n_tokens;
    j["d_in"] = data.d_in;
    j["n_classes"] = data.n_classes;
    write_text_file((fs::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
    write_tensor(fs::path(dir) / "inputs.bin", data.inputs);
    std::vector<double> labels(data.labels.begin(), data.labels.end());
    write_f64_blob((fs::path(dir) / "labels.bin").string(), labels);
}

ClassificationDataset load_classification_dataset(const std::string& dir) {
    const json j = json::parse(read_text_file((fs::path(dir) / "manifest.json").string()));
    if (j.at("type").get<std::string>() != "classification") {
        throw ConfigError("load_classification_dataset: " + dir + " is not a classification set");
    }
    ClassificationDataset data;
    const auto n = j.at("n_samples").get<std::size_t>();
    data.n_tokens = j.at("n_tokens").get<std::size_t>();
    data.d_in = j.at("d_in").get<std::size_t>();
    data.n_classes = j.at("n_classes").get<std::size_t>();
    data.inputs = read_tensor(fs::path(dir) / "inputs.bin", n, data.n_tokens, data.d_in);
    const std::vector<double> labels = read_f64_blob((fs::path(dir) / "labels.bin").string(), n);
    data.labels.assign(labels.begin(), labels.end());
    return data;
}

void save_denoise_dataset(const std::string& dir, const DenoiseDataset& data) {
    fs::create_directories(dir);
    json j;
    j["type"] = "denoise";
    j["n_samples"] = data.noisy.size();
    j["rows"] = data.rows;
    j["cols"] = data.cols;
    write_text_file((fs::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
    write_tensor(fs::path(dir) / "noisy.bin", data.noisy);
    write_tensor(fs::path(dir) / "clean.bin", data.clean);
}

DenoiseDataset load_denoise_dataset(const std::string& dir) {
    const json j = json::parse(read_text_file((fs::path(dir) / "manifest.json").string()));
    if (j.at("type").get<std::string>() != "denoise") {
        throw ConfigError("load_denoise_dataset: " + dir + " is not a denoise set");
    }
    DenoiseDataset data;
    const auto n = j.at("n_samples").get<std::size_t>();
    data.rows = j.at("rows").get<std::size_t>();
    data.cols = j.at("cols").get<std::size_t>();
    data.noisy = read_tensor(fs::path(dir) / "noisy.bin", n, data.rows, data.cols);
    data.clean = read_tensor(fs::path(dir) / "clean.bin", n, data.rows, data.cols);
    return data;
}

}  // namespace hopmix

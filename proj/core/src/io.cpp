#include "hopmix/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hopmix {

const char* version() { return "0.1.0"; }

std::string version_string() { return std::string("hopmix ") + version(); }

void write_f64_blob(const std::string& path, std::span<const double> data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericError("write_f64_blob: cannot open " + path);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!out) throw NumericError("write_f64_blob: short write to " + path);
}

std::vector<double> read_f64_blob(const std::string& path, std::size_t expected_count) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw NumericError("read_f64_blob: cannot open " + path);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != expected_count * sizeof(double)) {
        throw DimensionError("read_f64_blob: " + path + " holds " +
                             std::to_string(bytes / sizeof(double)) + " doubles, expected " +
                             std::to_string(expected_count));
    }
    std::vector<double> data(expected_count);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw NumericError("read_f64_blob: short read from " + path);
    return data;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericError("write_text_file: cannot open " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NumericError("read_text_file: cannot open " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_trace_csv(const std::string& path, const EnergyTrace& trace) {
    std::string out = "t,energy\n";
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        out += format_double(trace.times[i]);
        out += ',';
        out += format_double(trace.energies[i]);
        out += '\n';
    }
    write_text_file(path, out);
}

void write_landscape_csv(const std::string& path, const std::vector<LandscapePoint>& points) {
    std::string out = "x1,x2,E\n";
    for (const auto& p : points) {
        out += format_double(p.x1);
        out += ',';
        out += format_double(p.x2);
        out += ',';
        out += format_double(p.energy);
        out += '\n';
    }
    write_text_file(path, out);
}

void write_curve_csv(const std::string& path,
                     const std::vector<std::tuple<std::size_t, double, double>>& rows,
                     const std::string& header) {
    std::string out = header + "\n";
    for (const auto& [a, b, c] : rows) {
        out += std::to_string(a);
        out += ',';
        out += format_double(b);
        out += ',';
        out += format_double(c);
        out += '\n';
    }
    write_text_file(path, out);
}

namespace {

void write_matrix_blob(const fs::path& dir, const char* name, const Matrix2D& m) {
    write_f64_blob((dir / (std::string(name) + ".bin")).string(), m.flat());
}

Matrix2D read_matrix_blob(const fs::path& dir, const char* name, std::size_t rows,
                          std::size_t cols) {
    return Matrix2D(rows, cols,
                    read_f64_blob((dir / (std::string(name) + ".bin")).string(), rows * cols));
}

json block_manifest(const MixerBlock& b) {
    json j;
    j["mode"] = weight_mode_name(b.mode);
    j["dims"] = {{"n_tokens", b.n_tokens},
                 {"n_channels", b.n_channels},
                 {"d_token", b.d_token},
                 {"d_channel", b.d_channel}};
    j["n_iter"] = b.n_iter;
    j["eps"] = b.eps;
    j["norm"] = norm_mode_name(b.norm);
    j["activation_s"] = lagrangian_kind_name(b.activation_s.kind);
    j["activation_c"] = lagrangian_kind_name(b.activation_c.kind);
    j["bias"] = b.bias.has_value();
    return j;
}

LagrangianSpec spec_from_kind_name(const std::string& name) {
    if (name == "relu_squared") return LagrangianSpec::relu_squared();
    if (name == "gelu_primitive") return LagrangianSpec::gelu_primitive();
    if (name == "centered_norm") return LagrangianSpec::centered_norm();
    throw ConfigError("checkpoint: unsupported activation kind '" + name + "'");
}

void write_block_dir(const fs::path& dir, const MixerBlock& b) {
    fs::create_directories(dir);
    write_text_file((dir / "manifest.json").string(), block_manifest(b).dump(2) + "\n");
    write_matrix_blob(dir, "W1", b.w1);
    write_matrix_blob(dir, "W3", b.w3);
    if (b.mode == WeightMode::Free) {
        write_matrix_blob(dir, "W2", b.w2);
        write_matrix_blob(dir, "W4", b.w4);
    }
    if (b.mode == WeightMode::Asymmetric) {
        write_matrix_blob(dir, "W2t", b.w2_tilde);
        write_matrix_blob(dir, "W4t", b.w4_tilde);
    }
}

MixerBlock read_block_dir(const fs::path& dir) {
    const json j = json::parse(read_text_file((dir / "manifest.json").string()));
    MixerBlock b;
    b.mode = weight_mode_from_name(j.at("mode").get<std::string>());
    const json& dims = j.at("dims");
    b.n_tokens = dims.at("n_tokens").get<std::size_t>();
    b.n_channels = dims.at("n_channels").get<std::size_t>();
    b.d_token = dims.at("d_token").get<std::size_t>();
    b.d_channel = dims.at("d_channel").get<std::size_t>();
    b.n_iter = j.at("n_iter").get<int>();
    b.eps = j.at("eps").get<double>();
    b.norm = norm_mode_from_name(j.at("norm").get<std::string>());
    b.activation_s = spec_from_kind_name(j.at("activation_s").get<std::string>());
    b.activation_c = spec_from_kind_name(j.at("activation_c").get<std::string>());
    if (j.at("bias").get<bool>()) {
        throw ConfigError("checkpoint: bias blocks not supported by the block format");
    }
    b.w1 = read_matrix_blob(dir, "W1", b.d_token, b.n_tokens);
    b.w3 = read_matrix_blob(dir, "W3", b.n_channels, b.d_channel);
    if (b.mode == WeightMode::Free) {
        b.w2 = read_matrix_blob(dir, "W2", b.n_tokens, b.d_token);
        b.w4 = read_matrix_blob(dir, "W4", b.d_channel, b.n_channels);
    }
    if (b.mode == WeightMode::Asymmetric) {
        b.w2_tilde = read_matrix_blob(dir, "W2t", b.n_tokens, b.d_token);
        b.w4_tilde = read_matrix_blob(dir, "W4t", b.d_channel, b.n_channels);
    }
    b.validate();
    return b;
}

}  // namespace

void save_block_weights(const std::string& dir, const MixerBlock& block) {
    block.validate();
    if (block.bias) {
        throw ConfigError("save_block_weights: bias blocks not supported by the block format");
    }
    write_block_dir(dir, block);
}

MixerBlock load_block_weights(const std::string& dir) { return read_block_dir(dir); }

void save_mixer_checkpoint(const std::string& dir, const MixerNet& net) {
    net.validate();
    fs::create_directories(dir);
    json j;
    j["format"] = "hopmix-mixer-checkpoint";
    j["version"] = version();
    j["variant"] = mixer_variant_name(net.variant);
    j["n_blocks"] = net.blocks.size();
    j["n_classes"] = net.n_classes;
    j["d_in"] = net.patch_embed.rows();
    j["n_channels"] = net.patch_embed.cols();
    write_text_file((fs::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
    write_matrix_blob(dir, "embed", net.patch_embed);
    write_matrix_blob(dir, "head_w", net.head_w);
    write_f64_blob((fs::path(dir) / "head_b.bin").string(), net.head_b);
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
        write_block_dir(fs::path(dir) / ("block" + std::to_string(i)), net.blocks[i]);
    }
}

MixerNet load_mixer_checkpoint(const std::string& dir) {
    const json j = json::parse(read_text_file((fs::path(dir) / "manifest.json").string()));
    if (j.at("format").get<std::string>() != "hopmix-mixer-checkpoint") {
        throw ConfigError("load_mixer_checkpoint: " + dir + " is not a mixer checkpoint");
    }
    MixerNet net;
    net.variant = mixer_variant_from_name(j.at("variant").get<std::string>());
    net.n_classes = j.at("n_classes").get<std::size_t>();
    const auto d_in = j.at("d_in").get<std::size_t>();
    const auto n_channels = j.at("n_channels").get<std::size_t>();
    net.patch_embed = read_matrix_blob(dir, "embed", d_in, n_channels);
    net.head_w = read_matrix_blob(dir, "head_w", n_channels, net.n_classes);
    net.head_b = read_f64_blob((fs::path(dir) / "head_b.bin").string(), net.n_classes);
    const auto n_blocks = j.at("n_blocks").get<std::size_t>();
    for (std::size_t i = 0; i < n_blocks; ++i) {
        net.blocks.push_back(read_block_dir(fs::path(dir) / ("block" + std::to_string(i))));
    }
    net.validate();
    return net;
}

}  // namespace hopmix

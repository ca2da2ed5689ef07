#pragma once

#include <span>
#include <string>
#include <vector>

#include "hopmix/autodiff.hpp"
#include "hopmix/hopfield.hpp"
#include "hopmix/matrix.hpp"
#include "hopmix/mixer.hpp"

namespace hopmix {

const char* version();         // e.g. "0.1.0"
std::string version_string();  // e.g. "hopmix 0.1.0"

// Raw little-endian float64 blobs, row-major. The on-disk weight format.
void write_f64_blob(const std::string& path, std::span<const double> data);
std::vector<double> read_f64_blob(const std::string& path, std::size_t expected_count);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Doubles are printed with %.17g so re-runs are byte-identical.
std::string format_double(double v);

void write_trace_csv(const std::string& path, const EnergyTrace& trace);

struct LandscapePoint {
    double x1, x2, energy;
};
void write_landscape_csv(const std::string& path, const std::vector<LandscapePoint>& points);

void write_curve_csv(const std::string& path,
                     const std::vector<std::tuple<std::size_t, double, double>>& rows,
                     const std::string& header);

// Checkpoint directories: manifest.json plus one blob per stored matrix
// (W1/W2/W3/W4/W2t/W4t at block level).
void save_block_weights(const std::string& dir, const MixerBlock& block);
MixerBlock load_block_weights(const std::string& dir);

void save_mixer_checkpoint(const std::string& dir, const MixerNet& net);
MixerNet load_mixer_checkpoint(const std::string& dir);

}  // namespace hopmix

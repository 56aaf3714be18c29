#pragma once

#include <filesystem>
#include <stdexcept>

#include "brp/grid.hpp"

namespace brp {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit RGB PNG; values land on the 0..255 scale.
RgbImage read_rgb_png(const std::filesystem::path& path);
/// Values are rounded and clamped to 0..255.
void write_rgb_png(const std::filesystem::path& path, const RgbImage& img);

/// Single-channel 16-bit PNG (8-bit files are accepted on read).
InstanceMap read_instance_png(const std::filesystem::path& path);
/// Throws if a label exceeds 65535.
void write_instance_png(const std::filesystem::path& path, const InstanceMap& m);

/// Probability map container: "BRPF", u32 height, u32 width, then
/// height*width float32 values, all little-endian.
void write_prob_map(const std::filesystem::path& path, const ProbMap& map);
ProbMap read_prob_map(const std::filesystem::path& path);

/// Grayscale 8-bit PNG of a [0,1] map, for debugging.
void write_gray_png(const std::filesystem::path& path, const ProbMap& map);

}  // namespace brp

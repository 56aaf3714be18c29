#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "brp/grid.hpp"

namespace brp {

struct Sample {
  std::string stem;
  RgbImage image;
  InstanceMap instances;
};

// ---------------------------------------------------------------------------
// Colour normalisation

/// Per-channel mean / standard deviation of an image in some colour space.
struct ColorStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};
};

/// RGB (0..255) to the decorrelated log-LMS l-alpha-beta space and back.
RgbImage rgb_to_lab(const RgbImage& rgb);
RgbImage lab_to_rgb(const RgbImage& lab);

ColorStats channel_stats(const RgbImage& img);
/// Pooled per-channel statistics over several images.
ColorStats channel_stats(const std::vector<RgbImage>& images);

/// Reinhard colour transfer: match l-alpha-beta channel statistics to the
/// reference, then clamp to 0..255. A zero-variance source channel is only
/// shifted to the reference mean.
RgbImage stain_normalize(const RgbImage& img, const ColorStats& reference_lab);
RgbImage stain_normalize(const RgbImage& img, const RgbImage& reference);

/// (x - mean) / std per channel.
RgbImage zscore_normalize(const RgbImage& img, const std::array<double, 3>& mean,
                          const std::array<double, 3>& std);

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentConfig {
  int crop_size = 256;
  double hflip_prob = 0.5;
  double vflip_prob = 0.5;
  /// Multiplicative per-channel gain drawn from [1 - j, 1 + j].
  double color_jitter = 0.1;
  /// Additive brightness offset drawn from [-b, b] on the 0..255 scale.
  double brightness_jitter = 10.0;
  double jitter_prob = 0.5;
  double blur_prob = 0.2;
  double blur_sigma_min = 0.5;
  double blur_sigma_max = 1.5;
  double elastic_prob = 0.3;
  double elastic_alpha = 30.0;
  double elastic_sigma = 6.0;

  void validate() const;
  /// Every random transform disabled.
  static AugmentConfig none(int crop_size);
};

/// Geometric transforms (crop, flips, elastic) hit image and labels alike,
/// labels with nearest interpolation; photometric ones touch the image only.
/// The result depends only on the inputs and the generator state.
Sample augment(const Sample& sample, const AugmentConfig& cfg, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Synthetic nuclei

struct SynthConfig {
  int height = 128;
  int width = 128;
  /// Expected nuclei per 10'000 pixels.
  double density = 6.0;
  /// Chance that a new nucleus is placed overlapping an existing one.
  double overlap_prob = 0.3;
  double min_radius = 4.0;
  double max_radius = 8.0;
  std::uint64_t seed = 1;
};

struct SyntheticDataset {
  std::vector<Sample> samples;
  /// Nuclei placed per image, recorded by the generator.
  std::vector<int> placed;
};

/// Textured ellipses on a textured background. Overlapping nuclei occlude
/// earlier ones and stay distinct instances.
SyntheticDataset synth_generate(int n_images, const SynthConfig& cfg);

// ---------------------------------------------------------------------------
// Dataset directories: images/<stem>.png (8-bit RGB), labels/<stem>.png (16-bit)

std::vector<Sample> load_dataset(const std::filesystem::path& dir);
/// Images only (from dir/images or dir itself); instance maps are left empty.
std::vector<Sample> load_images(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);

/// Label maps keyed by stem from `dir/labels` (or `dir` itself when it has no labels/).
std::vector<std::pair<std::string, InstanceMap>> load_label_dir(const std::filesystem::path& dir);
void save_predictions(const std::filesystem::path& dir, const std::vector<std::string>& stems,
                      const std::vector<InstanceMap>& predictions);

}  // namespace brp

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "brp/checkpoint.hpp"
#include "brp/data.hpp"
#include "brp/losses.hpp"
#include "brp/patching.hpp"
#include "brp/proposals.hpp"
#include "brp/refine.hpp"
#include "brp/tafe.hpp"

namespace brp {

enum class Stage2Loss { kFocal, kCrossEntropy };
const char* to_string(Stage2Loss l);
Stage2Loss parse_stage2_loss(const std::string& s);

struct Stage1Config {
  int epochs = 600;
  double lr0 = 3e-4;
  int first_period = 40;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 4;
  /// Share of the training images held out for checkpoint selection.
  double val_fraction = 0.2;
  /// Width of the boundary ring in the training targets.
  int boundary_width = 2;
  /// Normalise colour to the lexicographically first training image.
  bool stain_normalize = true;
  TafeConfig tafe;
  LossConfig loss;
  PostprocParams postproc;
  AugmentConfig augment;
};

struct Stage2Config {
  int epochs = 10;
  double lr0 = 3e-4;
  double weight_decay = 1e-4;
  int batch_size = 8;
  double tau = 0.5;
  Stage2Loss loss = Stage2Loss::kFocal;
  RefineNetConfig refine;
  PatchParams patch;
};

struct TrainConfig {
  Stage1Config stage1;
  Stage2Config stage2;
  std::uint64_t seed = 0;

  /// Published hyper-parameters with the full-size networks.
  static TrainConfig full_scale();
  /// Tiny networks, 20 + 5 epochs, for CPU runs on 128 x 128 synthetic data.
  static TrainConfig desk_scale();

  void validate() const;
};

/// Flat "section.key" -> value form; every field appears.
KeyValues to_key_values(const TrainConfig& cfg);
/// Overrides the fields named in `kv`; unknown keys throw std::invalid_argument.
void apply_key_values(TrainConfig& cfg, const KeyValues& kv);

/// Parses "key = value" lines; '#' starts a comment, "[section]" headers
/// prefix the keys below them.
KeyValues parse_key_value_text(const std::string& text);
std::string format_key_values(const KeyValues& kv);

/// desk_scale() overridden by the file's entries.
TrainConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const TrainConfig& cfg);

}  // namespace brp

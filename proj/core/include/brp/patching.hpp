#pragma once

#include <filesystem>
#include <vector>

#include "brp/grid.hpp"

namespace brp {

enum class SizeClass { kSmall, kLarge };

const char* to_string(SizeClass c);

struct PatchParams {
  int margin = 12;
  int s_small = 48;
  int s_large = 176;
  int mask_dilation = 2;
  /// Slide the window back inside the image where it fits.
  bool shift_into_image = true;

  void validate() const;
  int target_side(SizeClass c) const { return c == SizeClass::kSmall ? s_small : s_large; }
};

inline constexpr int kPatchChannels = 5;  // R, G, B, seg, bnd

/// One proposal cropped, masked and resized for the refinement networks.
struct PatchRecord {
  int proposal_id = 0;
  Window window;
  SizeClass size_class = SizeClass::kSmall;
  int side = 0;  // S, the resized edge length
  double scale = 1.0;  // window.side / S
  std::vector<float> input;  // channel-major 5 x S x S

  float at(int channel, int row, int col) const {
    return input[(static_cast<std::size_t>(channel) * side + static_cast<std::size_t>(row)) * side +
                 static_cast<std::size_t>(col)];
  }
  ProbMap channel(int c) const;
};

/// Square window of side max(h, w) + 2*margin centred on the proposal's box.
Window crop_window(const Proposal& proposal, int image_height, int image_width, int margin,
                   bool shift_into_image = true);

/// Small iff side <= s_small.
SizeClass classify_size(int side, const PatchParams& params);

/// Zeroes both maps outside the proposal dilated by `mask_dilation` (Chebyshev).
ProbabilityPair mask_probabilities(const ProbabilityPair& pp, const Proposal& proposal,
                                   int mask_dilation);

/// Throws std::invalid_argument for an empty proposal.
PatchRecord extract_patch(const RgbImage& img, const ProbabilityPair& pp, const Proposal& proposal,
                          const PatchParams& params);

/// Writes the five channels side by side as an 8-bit grayscale strip.
void write_patch_strip(const std::filesystem::path& path, const PatchRecord& record);

}  // namespace brp

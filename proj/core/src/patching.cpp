#include "brp/patching.hpp"

#include <algorithm>
#include <stdexcept>

#include "brp/imaging.hpp"
#include "brp/io.hpp"

namespace brp {

namespace {

int floor_div2(int v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); }

int place(int start, int extent, int side, int image_extent, bool shift) {
  int pos = floor_div2(2 * start + extent - side);
  if (!shift) return pos;
  if (side <= image_extent) return std::clamp(pos, 0, image_extent - side);
  return std::clamp(pos, image_extent - side, 0);
}

// Proposal mask rasterised into window coordinates, dilated.
BinaryMask window_support(const Proposal& proposal, const Window& window, int dilation) {
  BinaryMask support(window.side, window.side, 0);
  for (int r = 0; r < proposal.bbox.height; ++r) {
    for (int c = 0; c < proposal.bbox.width; ++c) {
      if (!proposal.mask(r, c)) continue;
      const int wr = proposal.bbox.row0 + r - window.row0;
      const int wc = proposal.bbox.col0 + c - window.col0;
      if (support.in_bounds(wr, wc)) support(wr, wc) = 1;
    }
  }
  return dilate_square(support, dilation);
}

}  // namespace

const char* to_string(SizeClass c) { return c == SizeClass::kSmall ? "small" : "large"; }

void PatchParams::validate() const {
  if (margin <= 0 || s_small <= 0 || s_large <= 0 || mask_dilation <= 0) {
    throw std::invalid_argument("PatchParams: all sizes must be positive");
  }
  if (s_small >= s_large) throw std::invalid_argument("PatchParams: s_small must be < s_large");
}

ProbMap PatchRecord::channel(int c) const {
  ProbMap out(side, side, 0.0f);
  std::copy_n(input.begin() + static_cast<std::ptrdiff_t>(c) * side * side,
              static_cast<std::ptrdiff_t>(side) * side, out.begin());
  return out;
}

Window crop_window(const Proposal& proposal, int image_height, int image_width, int margin,
                   bool shift_into_image) {
  const auto& b = proposal.bbox;
  if (b.row0 < 0 || b.col0 < 0 || b.row_end() > image_height || b.col_end() > image_width) {
    throw std::invalid_argument("crop_window: proposal box outside the image");
  }
  Window w;
  w.side = std::max(b.height, b.width) + 2 * margin;
  w.row0 = place(b.row0, b.height, w.side, image_height, shift_into_image);
  w.col0 = place(b.col0, b.width, w.side, image_width, shift_into_image);
  return w;
}

SizeClass classify_size(int side, const PatchParams& params) {
  if (side < 1) throw std::invalid_argument("classify_size: side must be >= 1");
  return side <= params.s_small ? SizeClass::kSmall : SizeClass::kLarge;
}

ProbabilityPair mask_probabilities(const ProbabilityPair& pp, const Proposal& proposal,
                                   int mask_dilation) {
  require_same_shape(pp.seg, pp.bnd, "mask_probabilities");
  BinaryMask support(pp.height(), pp.width(), 0);
  for (int r = 0; r < proposal.bbox.height; ++r) {
    for (int c = 0; c < proposal.bbox.width; ++c) {
      const int sr = proposal.bbox.row0 + r, sc = proposal.bbox.col0 + c;
      if (proposal.mask(r, c) && support.in_bounds(sr, sc)) support(sr, sc) = 1;
    }
  }
  support = dilate_square(support, mask_dilation);
  ProbabilityPair out = pp;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (!support[i]) {
      out.seg[i] = 0.0f;
      out.bnd[i] = 0.0f;
    }
  }
  return out;
}

PatchRecord extract_patch(const RgbImage& img, const ProbabilityPair& pp, const Proposal& proposal,
                          const PatchParams& params) {
  params.validate();
  if (proposal.area() == 0) throw std::invalid_argument("extract_patch: empty proposal");
  if (pp.height() != img.height() || pp.width() != img.width()) {
    throw std::invalid_argument("extract_patch: image / probability shape mismatch");
  }

  PatchRecord rec;
  rec.proposal_id = proposal.id;
  rec.window = crop_window(proposal, img.height(), img.width(), params.margin,
                           params.shift_into_image);
  rec.size_class = classify_size(rec.window.side, params);
  rec.side = params.target_side(rec.size_class);
  rec.scale = static_cast<double>(rec.window.side) / rec.side;

  const auto support = window_support(proposal, rec.window, params.mask_dilation);
  std::vector<ProbMap> channels;
  channels.reserve(kPatchChannels);
  for (int ch = 0; ch < 3; ++ch) channels.push_back(crop_channel_padded(img, ch, rec.window));
  for (const ProbMap* prob : {&pp.seg, &pp.bnd}) {
    auto crop = crop_padded(*prob, rec.window);
    for (std::size_t i = 0; i < crop.size(); ++i) {
      if (!support[i]) crop[i] = 0.0f;
    }
    channels.push_back(std::move(crop));
  }

  const auto plane = static_cast<std::size_t>(rec.side) * static_cast<std::size_t>(rec.side);
  rec.input.resize(plane * kPatchChannels);
  for (int ch = 0; ch < kPatchChannels; ++ch) {
    const auto resized = resize_bilinear(channels[static_cast<std::size_t>(ch)], rec.side, rec.side);
    std::copy(resized.begin(), resized.end(), rec.input.begin() + static_cast<std::ptrdiff_t>(ch * plane));
  }
  return rec;
}

void write_patch_strip(const std::filesystem::path& path, const PatchRecord& record) {
  const int s = record.side;
  ProbMap strip(s, s * kPatchChannels, 0.0f);
  for (int ch = 0; ch < kPatchChannels; ++ch) {
    const auto plane = record.channel(ch);
    const auto [lo, hi] = std::minmax_element(plane.begin(), plane.end());
    const float span = (*hi - *lo) > 1e-12f ? (*hi - *lo) : 1.0f;
    for (int r = 0; r < s; ++r) {
      for (int c = 0; c < s; ++c) strip(r, ch * s + c) = (plane(r, c) - *lo) / span;
    }
  }
  write_gray_png(path, strip);
}

}  // namespace brp

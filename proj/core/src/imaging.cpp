#include "brp/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace brp {

namespace {

struct Tap {
  int lo;
  int hi;
  float frac;
};

Tap sample_position(int dst, double scale, int src_len) {
  double pos = (dst + 0.5) * scale - 0.5;
  pos = std::clamp(pos, 0.0, static_cast<double>(src_len - 1));
  const int lo = static_cast<int>(std::floor(pos));
  const int hi = std::min(lo + 1, src_len - 1);
  return {lo, hi, static_cast<float>(pos - lo)};
}

}  // namespace

ProbMap resize_bilinear(const ProbMap& src, int out_height, int out_width) {
  if (out_height <= 0 || out_width <= 0) {
    throw std::invalid_argument("resize_bilinear: output size must be positive");
  }
  if (src.empty()) throw std::invalid_argument("resize_bilinear: empty source");
  if (src.height() == out_height && src.width() == out_width) return src;

  const double sy = static_cast<double>(src.height()) / out_height;
  const double sx = static_cast<double>(src.width()) / out_width;
  std::vector<Tap> cols(static_cast<std::size_t>(out_width));
  for (int c = 0; c < out_width; ++c) cols[static_cast<std::size_t>(c)] = sample_position(c, sx, src.width());

  ProbMap out(out_height, out_width, 0.0f);
  for (int r = 0; r < out_height; ++r) {
    const Tap ty = sample_position(r, sy, src.height());
    for (int c = 0; c < out_width; ++c) {
      const Tap& tx = cols[static_cast<std::size_t>(c)];
      const float top = src(ty.lo, tx.lo) + (src(ty.lo, tx.hi) - src(ty.lo, tx.lo)) * tx.frac;
      const float bot = src(ty.hi, tx.lo) + (src(ty.hi, tx.hi) - src(ty.hi, tx.lo)) * tx.frac;
      out(r, c) = top + (bot - top) * ty.frac;
    }
  }
  return out;
}

ProbMap crop_channel_padded(const RgbImage& img, int channel, const Window& window) {
  ProbMap out(window.side, window.side, 0.0f);
  for (int r = 0; r < window.side; ++r) {
    const int sr = window.row0 + r;
    if (sr < 0 || sr >= img.height()) continue;
    for (int c = 0; c < window.side; ++c) {
      const int sc = window.col0 + c;
      if (sc < 0 || sc >= img.width()) continue;
      out(r, c) = img(sr, sc, channel);
    }
  }
  return out;
}

BinaryMask dilate_square(const BinaryMask& mask, int radius) {
  if (radius < 0) throw std::invalid_argument("dilate_square: negative radius");
  if (radius == 0) return mask;
  const int h = mask.height();
  const int w = mask.width();
  // Separable: a square is the product of two 1-D segments.
  BinaryMask rows(h, w, 0);
  for (int r = 0; r < h; ++r) {
    int last = -1'000'000;
    for (int c = 0; c < w; ++c) {
      if (mask(r, c)) last = c;
      if (c - last <= radius) rows(r, c) = 1;
    }
    last = 1'000'000;
    for (int c = w - 1; c >= 0; --c) {
      if (mask(r, c)) last = c;
      if (last - c <= radius) rows(r, c) = 1;
    }
  }
  BinaryMask out(h, w, 0);
  for (int c = 0; c < w; ++c) {
    int last = -1'000'000;
    for (int r = 0; r < h; ++r) {
      if (rows(r, c)) last = r;
      if (r - last <= radius) out(r, c) = 1;
    }
    last = 1'000'000;
    for (int r = h - 1; r >= 0; --r) {
      if (rows(r, c)) last = r;
      if (last - r <= radius) out(r, c) = 1;
    }
  }
  return out;
}

}  // namespace brp

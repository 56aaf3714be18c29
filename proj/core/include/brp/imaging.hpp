#pragma once

#include "brp/grid.hpp"

namespace brp {

/// Bilinear resampling with half-pixel centers (edge samples are clamped).
/// Same-size resampling is the identity.
ProbMap resize_bilinear(const ProbMap& src, int out_height, int out_width);

/// Nearest-neighbour resampling with half-pixel centers; used for label data.
template <typename T>
Grid<T> resize_nearest(const Grid<T>& src, int out_height, int out_width) {
  Grid<T> out(out_height, out_width);
  if (src.empty()) return out;
  const double sy = static_cast<double>(src.height()) / out_height;
  const double sx = static_cast<double>(src.width()) / out_width;
  for (int r = 0; r < out_height; ++r) {
    int rs = static_cast<int>((r + 0.5) * sy);
    rs = rs < src.height() ? rs : src.height() - 1;
    for (int c = 0; c < out_width; ++c) {
      int cs = static_cast<int>((c + 0.5) * sx);
      cs = cs < src.width() ? cs : src.width() - 1;
      out(r, c) = src(rs, cs);
    }
  }
  return out;
}

/// Copies `window` out of `src`; cells outside the source are zero.
template <typename T>
Grid<T> crop_padded(const Grid<T>& src, const Window& window) {
  Grid<T> out(window.side, window.side, T{});
  for (int r = 0; r < window.side; ++r) {
    const int sr = window.row0 + r;
    if (sr < 0 || sr >= src.height()) continue;
    for (int c = 0; c < window.side; ++c) {
      const int sc = window.col0 + c;
      if (sc < 0 || sc >= src.width()) continue;
      out(r, c) = src(sr, sc);
    }
  }
  return out;
}

/// One channel of `img` cropped to `window`, zero outside the image.
ProbMap crop_channel_padded(const RgbImage& img, int channel, const Window& window);

/// Binary dilation by the (2r+1)x(2r+1) square, i.e. all cells within
/// Chebyshev distance r of a set cell.
BinaryMask dilate_square(const BinaryMask& mask, int radius);

}  // namespace brp

#include "brp/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>
#include <set>
#include <stdexcept>

#include "brp/imaging.hpp"
#include "brp/io.hpp"
#include "brp/labels.hpp"

namespace brp {

namespace fs = std::filesystem;

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr Mat3 kRgbToLms = {{{0.3811, 0.5783, 0.0402}, {0.1967, 0.7244, 0.0782}, {0.0241, 0.1288, 0.8444}}};

Mat3 invert(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  Mat3 inv{};
  inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return inv;
}

std::array<double, 3> mat_vec(const Mat3& m, const std::array<double, 3>& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
          m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

const Mat3& lms_to_rgb() {
  static const Mat3 inv = invert(kRgbToLms);
  return inv;
}

cv::Mat to_mat(const RgbImage& img) {
  cv::Mat m(img.height(), img.width(), CV_32FC3);
  std::copy(img.pixels().begin(), img.pixels().end(), m.ptr<float>());
  return m;
}

RgbImage from_mat(const cv::Mat& m) {
  RgbImage img(m.rows, m.cols);
  const cv::Mat c = m.isContinuous() ? m : m.clone();
  std::copy_n(c.ptr<float>(), img.pixels().size(), img.pixels().begin());
  return img;
}

cv::Mat labels_to_mat(const InstanceMap& m) {
  cv::Mat out(m.height(), m.width(), CV_32FC1);
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) out.at<float>(r, c) = static_cast<float>(m(r, c));
  }
  return out;
}

InstanceMap labels_from_mat(const cv::Mat& m) {
  InstanceMap out(m.rows, m.cols, 0);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) out(r, c) = static_cast<std::int32_t>(std::lround(m.at<float>(r, c)));
  }
  return out;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool chance(std::mt19937_64& rng, double p) { return p > 0.0 && uniform(rng, 0.0, 1.0) < p; }

// Smooth random field: coarse uniform noise upsampled bilinearly, values in [-1, 1].
ProbMap smooth_noise(int h, int w, int cell, std::mt19937_64& rng) {
  ProbMap coarse(h / cell + 2, w / cell + 2, 0.0f);
  for (auto& v : coarse) v = static_cast<float>(uniform(rng, -1.0, 1.0));
  return resize_bilinear(coarse, h, w);
}

}  // namespace

// ---------------------------------------------------------------------------

RgbImage rgb_to_lab(const RgbImage& rgb) {
  static const double s3 = 1.0 / std::sqrt(3.0), s6 = 1.0 / std::sqrt(6.0), s2 = 1.0 / std::sqrt(2.0);
  RgbImage out(rgb.height(), rgb.width());
  for (int r = 0; r < rgb.height(); ++r) {
    for (int c = 0; c < rgb.width(); ++c) {
      auto lms = mat_vec(kRgbToLms, {rgb(r, c, 0), rgb(r, c, 1), rgb(r, c, 2)});
      for (auto& v : lms) v = std::log10(std::max(v, 0.0) + 1.0);
      out(r, c, 0) = static_cast<float>(s3 * (lms[0] + lms[1] + lms[2]));
      out(r, c, 1) = static_cast<float>(s6 * (lms[0] + lms[1] - 2.0 * lms[2]));
      out(r, c, 2) = static_cast<float>(s2 * (lms[0] - lms[1]));
    }
  }
  return out;
}

RgbImage lab_to_rgb(const RgbImage& lab) {
  static const double a = std::sqrt(3.0) / 3.0, b = std::sqrt(6.0) / 6.0, g = std::sqrt(2.0) / 2.0;
  RgbImage out(lab.height(), lab.width());
  for (int r = 0; r < lab.height(); ++r) {
    for (int c = 0; c < lab.width(); ++c) {
      const double l = a * lab(r, c, 0), al = b * lab(r, c, 1), be = g * lab(r, c, 2);
      std::array<double, 3> lms = {l + al + be, l + al - be, l - 2.0 * al};
      for (auto& v : lms) v = std::pow(10.0, v) - 1.0;
      const auto rgb = mat_vec(lms_to_rgb(), lms);
      for (int ch = 0; ch < 3; ++ch) out(r, c, ch) = static_cast<float>(rgb[static_cast<std::size_t>(ch)]);
    }
  }
  return out;
}

ColorStats channel_stats(const RgbImage& img) { return channel_stats(std::vector<RgbImage>{img}); }

ColorStats channel_stats(const std::vector<RgbImage>& images) {
  ColorStats s;
  std::array<double, 3> sum{}, sq{};
  double n = 0.0;
  for (const auto& img : images) {
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); i += 3) {
      for (std::size_t ch = 0; ch < 3; ++ch) sum[ch] += px[i + ch];
    }
    n += static_cast<double>(px.size() / 3);
  }
  if (n == 0.0) throw std::invalid_argument("channel_stats: no pixels");
  for (std::size_t ch = 0; ch < 3; ++ch) s.mean[ch] = sum[ch] / n;
  for (const auto& img : images) {
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); i += 3) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double d = px[i + ch] - s.mean[ch];
        sq[ch] += d * d;
      }
    }
  }
  for (std::size_t ch = 0; ch < 3; ++ch) s.std[ch] = std::sqrt(sq[ch] / n);
  return s;
}

RgbImage stain_normalize(const RgbImage& img, const ColorStats& reference_lab) {
  constexpr double kFlat = 1e-8;
  auto lab = rgb_to_lab(img);
  const auto src = channel_stats(lab);
  auto px = lab.pixels();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double centred = px[i + ch] - src.mean[ch];
      const double scaled = src.std[ch] > kFlat ? centred * reference_lab.std[ch] / src.std[ch] : centred;
      px[i + ch] = static_cast<float>(scaled + reference_lab.mean[ch]);
    }
  }
  auto out = lab_to_rgb(lab);
  for (auto& v : out.pixels()) v = std::clamp(v, 0.0f, 255.0f);
  return out;
}

RgbImage stain_normalize(const RgbImage& img, const RgbImage& reference) {
  return stain_normalize(img, channel_stats(rgb_to_lab(reference)));
}

RgbImage zscore_normalize(const RgbImage& img, const std::array<double, 3>& mean,
                          const std::array<double, 3>& std) {
  for (double s : std) {
    if (!(s > 0.0)) throw std::invalid_argument("zscore_normalize: std must be positive");
  }
  RgbImage out = img;
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      px[i + ch] = static_cast<float>((px[i + ch] - mean[ch]) / std[ch]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void AugmentConfig::validate() const {
  if (crop_size <= 0 || crop_size % 8 != 0) {
    throw std::invalid_argument("AugmentConfig: crop_size must be a positive multiple of 8");
  }
  if (blur_sigma_min > blur_sigma_max) throw std::invalid_argument("AugmentConfig: blur sigma range inverted");
}

AugmentConfig AugmentConfig::none(int crop_size) {
  AugmentConfig c;
  c.crop_size = crop_size;
  c.hflip_prob = c.vflip_prob = 0.0;
  c.jitter_prob = c.blur_prob = c.elastic_prob = 0.0;
  return c;
}

Sample augment(const Sample& sample, const AugmentConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const int h = sample.image.height(), w = sample.image.width();
  require_same_shape(sample.instances, InstanceMap(h, w), "augment");
  const int s = cfg.crop_size;
  if (h < s || w < s) throw std::invalid_argument("augment: image smaller than crop size");

  const int r0 = h == s ? 0 : std::uniform_int_distribution<int>(0, h - s)(rng);
  const int c0 = w == s ? 0 : std::uniform_int_distribution<int>(0, w - s)(rng);
  const bool hflip = chance(rng, cfg.hflip_prob);
  const bool vflip = chance(rng, cfg.vflip_prob);

  Sample out;
  out.stem = sample.stem;
  out.image = RgbImage(s, s);
  out.instances = InstanceMap(s, s, 0);
  for (int r = 0; r < s; ++r) {
    const int sr = r0 + (vflip ? s - 1 - r : r);
    for (int c = 0; c < s; ++c) {
      const int sc = c0 + (hflip ? s - 1 - c : c);
      for (int ch = 0; ch < 3; ++ch) out.image(r, c, ch) = sample.image(sr, sc, ch);
      out.instances(r, c) = sample.instances(sr, sc);
    }
  }

  if (chance(rng, cfg.elastic_prob)) {
    cv::Mat dx(s, s, CV_32FC1), dy(s, s, CV_32FC1);
    for (int r = 0; r < s; ++r) {
      for (int c = 0; c < s; ++c) {
        dx.at<float>(r, c) = static_cast<float>(uniform(rng, -1.0, 1.0));
        dy.at<float>(r, c) = static_cast<float>(uniform(rng, -1.0, 1.0));
      }
    }
    cv::GaussianBlur(dx, dx, cv::Size(0, 0), cfg.elastic_sigma);
    cv::GaussianBlur(dy, dy, cv::Size(0, 0), cfg.elastic_sigma);
    cv::Mat map_x(s, s, CV_32FC1), map_y(s, s, CV_32FC1);
    for (int r = 0; r < s; ++r) {
      for (int c = 0; c < s; ++c) {
        map_x.at<float>(r, c) = static_cast<float>(c + cfg.elastic_alpha * dx.at<float>(r, c));
        map_y.at<float>(r, c) = static_cast<float>(r + cfg.elastic_alpha * dy.at<float>(r, c));
      }
    }
    cv::Mat img_out, lab_out;
    cv::remap(to_mat(out.image), img_out, map_x, map_y, cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
    cv::remap(labels_to_mat(out.instances), lab_out, map_x, map_y, cv::INTER_NEAREST, cv::BORDER_REFLECT_101);
    out.image = from_mat(img_out);
    out.instances = labels_from_mat(lab_out);
  }

  if (chance(rng, cfg.jitter_prob)) {
    std::array<double, 3> gain{};
    for (auto& g : gain) g = uniform(rng, 1.0 - cfg.color_jitter, 1.0 + cfg.color_jitter);
    const double offset = uniform(rng, -cfg.brightness_jitter, cfg.brightness_jitter);
    auto px = out.image.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
      px[i] = std::clamp(static_cast<float>(px[i] * gain[i % 3] + offset), 0.0f, 255.0f);
    }
  }

  if (chance(rng, cfg.blur_prob)) {
    const double sigma = uniform(rng, cfg.blur_sigma_min, cfg.blur_sigma_max);
    cv::Mat m = to_mat(out.image);
    cv::GaussianBlur(m, m, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT_101);
    out.image = from_mat(m);
  }

  out.instances = relabel_contiguous(out.instances);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Footprint {
  std::vector<std::pair<int, int>> pixels;
};

Footprint rasterize_ellipse(double cy, double cx, double a, double b, double theta, int h, int w) {
  Footprint fp;
  const double ct = std::cos(theta), st = std::sin(theta);
  const int r0 = std::max(0, static_cast<int>(std::floor(cy - a - 1)));
  const int r1 = std::min(h - 1, static_cast<int>(std::ceil(cy + a + 1)));
  const int c0 = std::max(0, static_cast<int>(std::floor(cx - a - 1)));
  const int c1 = std::min(w - 1, static_cast<int>(std::ceil(cx + a + 1)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double dy = r - cy, dx = c - cx;
      const double u = (dx * ct + dy * st) / a;
      const double v = (-dx * st + dy * ct) / b;
      if (u * u + v * v <= 1.0) fp.pixels.emplace_back(r, c);
    }
  }
  return fp;
}

// Whether the pixels of `label` not covered by `cover` form one 4-connected
// piece holding at least `min_keep` pixels.
bool survives_occlusion(const InstanceMap& labels, std::int32_t label, const BinaryMask& cover,
                        long min_keep) {
  std::vector<std::pair<int, int>> remaining;
  for (int r = 0; r < labels.height(); ++r) {
    for (int c = 0; c < labels.width(); ++c) {
      if (labels(r, c) == label && !cover(r, c)) remaining.emplace_back(r, c);
    }
  }
  if (static_cast<long>(remaining.size()) < min_keep || remaining.empty()) return false;
  BinaryMask seen(labels.height(), labels.width(), 0);
  std::vector<std::pair<int, int>> stack{remaining.front()};
  seen(remaining.front().first, remaining.front().second) = 1;
  std::size_t reached = 0;
  static constexpr int kDr[4] = {-1, 1, 0, 0}, kDc[4] = {0, 0, -1, 1};
  while (!stack.empty()) {
    auto [r, c] = stack.back();
    stack.pop_back();
    ++reached;
    for (int k = 0; k < 4; ++k) {
      const int nr = r + kDr[k], nc = c + kDc[k];
      if (!labels.in_bounds(nr, nc) || seen(nr, nc) || labels(nr, nc) != label || cover(nr, nc)) continue;
      seen(nr, nc) = 1;
      stack.emplace_back(nr, nc);
    }
  }
  return reached == remaining.size();
}

struct Nucleus {
  double cy, cx, a;
};

}  // namespace

SyntheticDataset synth_generate(int n_images, const SynthConfig& cfg) {
  if (cfg.height % 8 != 0 || cfg.width % 8 != 0) {
    throw std::invalid_argument("synth_generate: image shape must be divisible by 8");
  }
  if (cfg.density < 0.0 || cfg.min_radius <= 1.0 || cfg.max_radius < cfg.min_radius) {
    throw std::invalid_argument("synth_generate: invalid density or radius range");
  }
  const int h = cfg.height, w = cfg.width;
  constexpr int kMinPixels = 12;
  constexpr int kGap = 2;

  SyntheticDataset ds;
  for (int i = 0; i < n_images; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(cfg.seed >> 32), static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);

    const double expected = cfg.density * h * w / 1e4;
    const int target = expected > 0.0 ? std::poisson_distribution<int>(expected)(rng) : 0;

    InstanceMap labels(h, w, 0);
    std::vector<Nucleus> placed;
    for (int t = 0; t < target; ++t) {
      for (int attempt = 0; attempt < 40; ++attempt) {
        const double a = uniform(rng, cfg.min_radius, cfg.max_radius);
        const double b = a * uniform(rng, 0.6, 1.0);
        const double theta = uniform(rng, 0.0, std::numbers::pi);
        const bool overlap = !placed.empty() && chance(rng, cfg.overlap_prob);
        double cy, cx;
        if (overlap) {
          const auto& host = placed[std::uniform_int_distribution<std::size_t>(0, placed.size() - 1)(rng)];
          const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
          const double dist = (host.a + a) * uniform(rng, 0.5, 0.75);
          cy = host.cy + dist * std::sin(phi);
          cx = host.cx + dist * std::cos(phi);
        } else {
          cy = uniform(rng, 0.0, h);
          cx = uniform(rng, 0.0, w);
        }
        const auto fp = rasterize_ellipse(cy, cx, a, b, theta, h, w);
        if (static_cast<int>(fp.pixels.size()) < kMinPixels) continue;

        BinaryMask cover(h, w, 0);
        for (auto [r, c] : fp.pixels) cover(r, c) = 1;
        std::set<std::int32_t> touched;
        if (overlap) {
          for (auto [r, c] : fp.pixels) {
            if (labels(r, c) > 0) touched.insert(labels(r, c));
          }
          if (touched.empty()) continue;
          const auto areas = label_areas(labels);
          bool ok = true;
          for (auto k : touched) {
            const long keep = std::max<long>(kMinPixels, areas[static_cast<std::size_t>(k)] / 2);
            if (!survives_occlusion(labels, k, cover, keep)) {
              ok = false;
              break;
            }
          }
          if (!ok) continue;
        } else {
          const auto halo = dilate_square(cover, kGap);
          bool clear = true;
          for (std::size_t p = 0; p < halo.size() && clear; ++p) clear = !(halo[p] && labels[p] > 0);
          if (!clear) continue;
        }
        const auto id = static_cast<std::int32_t>(placed.size() + 1);
        for (auto [r, c] : fp.pixels) labels(r, c) = id;
        placed.push_back({cy, cx, a});
        break;
      }
    }

    // Rendering: textured background, per-nucleus colour and chromatin
    // texture, darker rim, light blur, integer intensities.
    const auto bg_field = smooth_noise(h, w, 16, rng);
    const auto chroma = smooth_noise(h, w, 4, rng);
    const std::array<double, 3> bg_base = {uniform(rng, 215, 235), uniform(rng, 170, 195), uniform(rng, 195, 220)};
    std::vector<std::array<double, 3>> colors(placed.size() + 1);
    for (auto& col : colors) {
      const double shade = uniform(rng, -25.0, 25.0);
      col = {100.0 + shade + uniform(rng, -8, 8), 55.0 + shade + uniform(rng, -8, 8),
             140.0 + shade + uniform(rng, -8, 8)};
    }
    const auto rim = instance_to_boundary(labels, 1);
    std::normal_distribution<double> grain(0.0, 5.0);
    RgbImage img(h, w);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const auto k = labels(r, c);
        for (int ch = 0; ch < 3; ++ch) {
          double v;
          if (k == 0) {
            v = bg_base[static_cast<std::size_t>(ch)] + 12.0 * bg_field(r, c) + grain(rng);
          } else {
            v = colors[static_cast<std::size_t>(k)][static_cast<std::size_t>(ch)] + 14.0 * chroma(r, c) +
                1.6 * grain(rng);
            if (rim(r, c)) v *= 0.75;
          }
          img(r, c, ch) = static_cast<float>(v);
        }
      }
    }
    cv::Mat m = to_mat(img);
    cv::GaussianBlur(m, m, cv::Size(0, 0), 0.6, 0.6, cv::BORDER_REFLECT_101);
    img = from_mat(m);
    for (auto& v : img.pixels()) v = std::clamp(std::round(v), 0.0f, 255.0f);

    char stem[32];
    std::snprintf(stem, sizeof(stem), "synth_%05d", i);
    ds.samples.push_back({stem, std::move(img), relabel_contiguous(labels)});
    ds.placed.push_back(static_cast<int>(placed.size()));
  }
  return ds;
}

// ---------------------------------------------------------------------------

std::vector<Sample> load_dataset(const fs::path& dir) {
  const auto img_dir = dir / "images";
  const auto lab_dir = dir / "labels";
  if (!fs::is_directory(img_dir) || !fs::is_directory(lab_dir)) {
    throw IoError("dataset directory must contain images/ and labels/: " + dir.string());
  }
  auto stems_in = [](const fs::path& d) {
    std::set<std::string> stems;
    for (const auto& e : fs::directory_iterator(d)) {
      if (e.is_regular_file() && e.path().extension() == ".png") stems.insert(e.path().stem().string());
    }
    return stems;
  };
  const auto image_stems = stems_in(img_dir);
  const auto label_stems = stems_in(lab_dir);
  for (const auto& s : image_stems) {
    if (!label_stems.count(s)) throw IoError("image '" + s + "' has no label map in " + lab_dir.string());
  }
  for (const auto& s : label_stems) {
    if (!image_stems.count(s)) throw IoError("label map '" + s + "' has no image in " + img_dir.string());
  }
  std::vector<Sample> out;
  for (const auto& s : image_stems) {
    Sample sample{s, read_rgb_png(img_dir / (s + ".png")), read_instance_png(lab_dir / (s + ".png"))};
    if (sample.image.height() != sample.instances.height() || sample.image.width() != sample.instances.width()) {
      throw IoError("image and label map sizes differ for '" + s + "'");
    }
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<Sample> load_images(const fs::path& dir) {
  const fs::path d = fs::is_directory(dir / "images") ? dir / "images" : dir;
  if (!fs::is_directory(d)) throw IoError("not a directory: " + d.string());
  std::set<std::string> stems;
  for (const auto& e : fs::directory_iterator(d)) {
    if (e.is_regular_file() && e.path().extension() == ".png") stems.insert(e.path().stem().string());
  }
  std::vector<Sample> out;
  for (const auto& s : stems) {
    auto img = read_rgb_png(d / (s + ".png"));
    InstanceMap empty(img.height(), img.width(), 0);
    out.push_back({s, std::move(img), std::move(empty)});
  }
  return out;
}

void save_dataset(const fs::path& dir, const std::vector<Sample>& samples) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  for (const auto& s : samples) {
    write_rgb_png(dir / "images" / (s.stem + ".png"), s.image);
    write_instance_png(dir / "labels" / (s.stem + ".png"), s.instances);
  }
}

std::vector<std::pair<std::string, InstanceMap>> load_label_dir(const fs::path& dir) {
  const fs::path d = fs::is_directory(dir / "labels") ? dir / "labels" : dir;
  if (!fs::is_directory(d)) throw IoError("not a directory: " + d.string());
  std::set<std::string> stems;
  for (const auto& e : fs::directory_iterator(d)) {
    if (e.is_regular_file() && e.path().extension() == ".png") stems.insert(e.path().stem().string());
  }
  std::vector<std::pair<std::string, InstanceMap>> out;
  for (const auto& s : stems) out.emplace_back(s, read_instance_png(d / (s + ".png")));
  return out;
}

void save_predictions(const fs::path& dir, const std::vector<std::string>& stems,
                      const std::vector<InstanceMap>& predictions) {
  if (stems.size() != predictions.size()) throw std::invalid_argument("save_predictions: size mismatch");
  fs::create_directories(dir / "labels");
  for (std::size_t i = 0; i < stems.size(); ++i) {
    write_instance_png(dir / "labels" / (stems[i] + ".png"), predictions[i]);
  }
}

}  // namespace brp

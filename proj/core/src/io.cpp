#include "brp/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace brp {

namespace {

constexpr std::array<char, 4> kProbMagic = {'B', 'R', 'P', 'F'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                 static_cast<char>((v >> 16) & 0xff),
                                 static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_or_throw(const std::filesystem::path& path, const cv::Mat& mat) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

}  // namespace

RgbImage read_rgb_png(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image " + path.string());
  if (bgr.rows < RgbImage::kMinSide || bgr.cols < RgbImage::kMinSide) {
    throw IoError("image too small: " + path.string());
  }
  RgbImage img(bgr.rows, bgr.cols);
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      img(r, c, 0) = row[c][2];
      img(r, c, 1) = row[c][1];
      img(r, c, 2) = row[c][0];
    }
  }
  return img;
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& img) {
  cv::Mat bgr(img.height(), img.width(), CV_8UC3);
  auto to_byte = [](float v) {
    return static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
  };
  for (int r = 0; r < img.height(); ++r) {
    auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < img.width(); ++c) {
      row[c] = cv::Vec3b(to_byte(img(r, c, 2)), to_byte(img(r, c, 1)), to_byte(img(r, c, 0)));
    }
  }
  write_or_throw(path, bgr);
}

InstanceMap read_instance_png(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IoError("cannot read label map " + path.string());
  if (raw.channels() != 1) throw IoError("label map must be single-channel: " + path.string());
  InstanceMap m(raw.rows, raw.cols, 0);
  if (raw.depth() == CV_16U) {
    for (int r = 0; r < raw.rows; ++r) {
      const auto* row = raw.ptr<std::uint16_t>(r);
      for (int c = 0; c < raw.cols; ++c) m(r, c) = row[c];
    }
  } else if (raw.depth() == CV_8U) {
    for (int r = 0; r < raw.rows; ++r) {
      const auto* row = raw.ptr<std::uint8_t>(r);
      for (int c = 0; c < raw.cols; ++c) m(r, c) = row[c];
    }
  } else {
    throw IoError("unsupported label bit depth in " + path.string());
  }
  return m;
}

void write_instance_png(const std::filesystem::path& path, const InstanceMap& m) {
  cv::Mat raw(m.height(), m.width(), CV_16UC1);
  for (int r = 0; r < m.height(); ++r) {
    auto* row = raw.ptr<std::uint16_t>(r);
    for (int c = 0; c < m.width(); ++c) {
      const auto v = m(r, c);
      if (v < 0 || v > 65535) throw IoError("label out of 16-bit range writing " + path.string());
      row[c] = static_cast<std::uint16_t>(v);
    }
  }
  write_or_throw(path, raw);
}

void write_prob_map(const std::filesystem::path& path, const ProbMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string());
  out.write(kProbMagic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(map.height()));
  put_u32(out, static_cast<std::uint32_t>(map.width()));
  for (float v : map) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw IoError("write failed: " + path.string());
}

ProbMap read_prob_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kProbMagic) throw IoError("not a probability map: " + path.string());
  const auto h = get_u32(in);
  const auto w = get_u32(in);
  if (!in || h > (1u << 16) || w > (1u << 16)) throw IoError("bad header in " + path.string());
  ProbMap map(static_cast<int>(h), static_cast<int>(w), 0.0f);
  for (auto& v : map) v = std::bit_cast<float>(get_u32(in));
  if (!in) throw IoError("truncated probability map " + path.string());
  return map;
}

void write_gray_png(const std::filesystem::path& path, const ProbMap& map) {
  cv::Mat gray(map.height(), map.width(), CV_8UC1);
  for (int r = 0; r < map.height(); ++r) {
    auto* row = gray.ptr<std::uint8_t>(r);
    for (int c = 0; c < map.width(); ++c) {
      row[c] = static_cast<std::uint8_t>(std::clamp(std::lround(map(r, c) * 255.0f), 0L, 255L));
    }
  }
  write_or_throw(path, gray);
}

}  // namespace brp

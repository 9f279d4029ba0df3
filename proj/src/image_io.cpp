#include "sess/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "sess/errors.hpp"

namespace sess {

static_assert(std::endian::native == std::endian::little,
              "float rasters are written in native order; big-endian hosts need a byte swap");

namespace {

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

void write_or_throw(const cv::Mat& mat, const std::filesystem::path& path) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    throw InvalidArgument("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw InvalidArgument("cannot write " + path.string());
}

}  // namespace

RasterImage load_image(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw FileNotFound("image not found: " + path.string());
  }
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw ImageDecodeError("cannot decode image: " + path.string());
  RasterImage img(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = row[x][2 - c] / 255.0f;
    }
  }
  return img;
}

void save_png(const RasterImage& img, const std::filesystem::path& path) {
  cv::Mat bgr(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) row[x][2 - c] = to_byte(img.at(y, x, c));
    }
  }
  write_or_throw(bgr, path);
}

void save_png(const GrayMap& map, const std::filesystem::path& path) {
  cv::Mat gray(map.height(), map.width(), CV_8UC1);
  for (int y = 0; y < map.height(); ++y) {
    auto* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < map.width(); ++x) row[x] = to_byte(map.at(y, x));
  }
  write_or_throw(gray, path);
}

void write_f32(const GrayMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open " + path.string() + " for writing");
  const auto values = map.values();
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw InvalidArgument("short write to " + path.string());
}

GrayMap read_f32(const std::filesystem::path& path, int height, int width) {
  if (!std::filesystem::is_regular_file(path)) {
    throw FileNotFound("float raster not found: " + path.string());
  }
  const auto expected = static_cast<std::uintmax_t>(height) * static_cast<std::uintmax_t>(width) *
                        sizeof(float);
  const auto actual = std::filesystem::file_size(path);
  if (actual != expected) {
    throw ShapeMismatch(path.string() + " holds " + std::to_string(actual) + " bytes, expected " +
                        std::to_string(expected) + " for " + std::to_string(height) + "x" +
                        std::to_string(width) + " float32");
  }
  GrayMap map(height, width);
  std::ifstream in(path, std::ios::binary);
  auto values = map.values();
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!in) throw ShapeMismatch("short read from " + path.string());
  return map;
}

}  // namespace sess

#include "sess/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/imgproc.hpp>

#include "sess/errors.hpp"
#include "sess/imgproc.hpp"

namespace sess {

namespace {

RasterImage from_bgr8(const cv::Mat& bgr) {
  RasterImage out(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = static_cast<float>(row[x][2 - c]) / 255.0f;
    }
  }
  return out;
}

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

RasterImage colorize(const GrayMap& map) {
  cv::Mat gray(map.height(), map.width(), CV_8UC1);
  for (int y = 0; y < map.height(); ++y) {
    auto* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < map.width(); ++x) {
      const float v = std::clamp(map.at(y, x), 0.0f, 1.0f);
      row[x] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  cv::Mat bgr;
  cv::applyColorMap(gray, bgr, cv::COLORMAP_VIRIDIS);
  return from_bgr8(bgr);
}

RasterImage overlay(const RasterImage& image, const GrayMap& saliency, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw InvalidArgument("overlay alpha must be in [0, 1]");
  const auto colors = colorize(bilinear_resize(saliency, image.height(), image.width()));
  RasterImage out(image.height(), image.width());
  const auto a = static_cast<float>(alpha);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(y, x, c) = (1.0f - a) * image.at(y, x, c) + a * colors.at(y, x, c);
      }
    }
  }
  return out;
}

RasterImage line_plot(const std::string& x_label, const std::vector<double>& x,
                      const std::vector<PlotSeries>& series) {
  if (x.empty() || series.empty()) throw InvalidArgument("line_plot: nothing to draw");
  for (const auto& s : series) {
    if (s.y.size() != x.size()) throw ShapeMismatch("line_plot: series '" + s.name + "' length");
  }
  constexpr int kPanelW = 420, kPanelH = 260, kMargin = 48;
  const int n = static_cast<int>(series.size());
  cv::Mat canvas(kPanelH, kPanelW * n, CV_8UC3, cv::Scalar(255, 255, 255));

  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  double xmin = *xmin_it, xmax = *xmax_it;
  if (xmax == xmin) xmax = xmin + 1.0;

  for (int p = 0; p < n; ++p) {
    const auto& s = series[static_cast<std::size_t>(p)];
    auto [ymin_it, ymax_it] = std::minmax_element(s.y.begin(), s.y.end());
    double ymin = *ymin_it, ymax = *ymax_it;
    if (ymax - ymin < 1e-12) {
      ymin -= 0.5;
      ymax += 0.5;
    }
    const int ox = p * kPanelW + kMargin, oy = kPanelH - kMargin;
    const int pw = kPanelW - 2 * kMargin + 20, ph = kPanelH - 2 * kMargin;
    const auto to_px = [&](double xv, double yv) {
      return cv::Point(ox + static_cast<int>(std::lround((xv - xmin) / (xmax - xmin) * pw)),
                       oy - static_cast<int>(std::lround((yv - ymin) / (ymax - ymin) * ph)));
    };
    const cv::Scalar axis(60, 60, 60);
    cv::line(canvas, {ox, oy}, {ox + pw, oy}, axis, 1);
    cv::line(canvas, {ox, oy}, {ox, oy - ph}, axis, 1);
    for (std::size_t i = 1; i < x.size(); ++i) {
      cv::line(canvas, to_px(x[i - 1], s.y[i - 1]), to_px(x[i], s.y[i]),
               cv::Scalar(180, 90, 30), 2, cv::LINE_AA);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      cv::circle(canvas, to_px(x[i], s.y[i]), 3, cv::Scalar(180, 90, 30), cv::FILLED);
    }
    const auto font = cv::FONT_HERSHEY_SIMPLEX;
    cv::putText(canvas, s.name, {ox, kMargin - 22}, font, 0.5, axis, 1, cv::LINE_AA);
    cv::putText(canvas, fmt_num(ymax), {ox - 44, oy - ph + 4}, font, 0.35, axis, 1);
    cv::putText(canvas, fmt_num(ymin), {ox - 44, oy + 4}, font, 0.35, axis, 1);
    cv::putText(canvas, fmt_num(xmin), {ox - 4, oy + 16}, font, 0.35, axis, 1);
    cv::putText(canvas, fmt_num(xmax), {ox + pw - 12, oy + 16}, font, 0.35, axis, 1);
    cv::putText(canvas, x_label, {ox + pw / 2 - 20, oy + 34}, font, 0.45, axis, 1, cv::LINE_AA);
  }
  return from_bgr8(canvas);
}

}  // namespace sess

#pragma once

#include <string>
#include <vector>

#include "sess/raster.hpp"

namespace sess {

/// Viridis lookup (OpenCV COLORMAP_VIRIDIS), input clamped to [0,1].
RasterImage colorize(const GrayMap& map);

/// (1 - alpha) * image + alpha * colorize(saliency).
RasterImage overlay(const RasterImage& image, const GrayMap& saliency, double alpha = 0.5);

struct PlotSeries {
  std::string name;
  std::vector<double> y;
};

/// Small line chart, one panel per series, sharing the x values.
RasterImage line_plot(const std::string& x_label, const std::vector<double>& x,
                      const std::vector<PlotSeries>& series);

}  // namespace sess

// Quick-look plots for track comparison: x-y flight paths and z over time.
// Rendered with OpenCV drawing primitives into RGB images; the CLI writes
// them out as PNGs next to the numeric comparison table.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <opencv2/imgproc.hpp>

#include "mbul/evaluation.hpp"
#include "mbul/image_io.hpp"

namespace mbul {

struct NamedTrack {
  std::string name;
  Track track;
};

namespace detail {

inline cv::Scalar plot_colour(std::size_t i) {
  // BGR; first entry (near-black) is conventionally the ground truth.
  static const cv::Scalar palette[] = {
      {40, 40, 40}, {60, 76, 231}, {96, 174, 39}, {200, 130, 0},
      {180, 0, 180}, {0, 140, 255},
  };
  return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

// Affine map from data coordinates to pixel coordinates with a margin;
// flips the vertical axis so larger values are drawn higher.
struct AxisMap {
  double lo = 0.0, hi = 1.0;
  int px_lo = 0, px_hi = 1;
  bool flip = false;

  int to_px(double v) const {
    const double span = hi > lo ? hi - lo : 1.0;
    double a = (v - lo) / span;
    if (flip) a = 1.0 - a;
    return px_lo + static_cast<int>(std::lround(a * (px_hi - px_lo)));
  }
};

inline void expand(double v, double& lo, double& hi) {
  lo = std::min(lo, v);
  hi = std::max(hi, v);
}

inline void pad_range(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

inline std::string axis_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline void draw_frame_and_legend(cv::Mat& canvas,
                                  const std::vector<NamedTrack>& tracks,
                                  const AxisMap& x, const AxisMap& y,
                                  const std::string& x_name,
                                  const std::string& y_name) {
  const cv::Scalar black(0, 0, 0);
  cv::rectangle(canvas, {x.px_lo, std::min(y.px_lo, y.px_hi)},
                {x.px_hi, std::max(y.px_lo, y.px_hi)}, black, 1);
  cv::putText(canvas, x_name + " " + axis_label(x.lo),
              {x.px_lo, canvas.rows - 8}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
              black, 1);
  cv::putText(canvas, axis_label(x.hi), {x.px_hi - 48, canvas.rows - 8},
              cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1);
  cv::putText(canvas, y_name + " " + axis_label(y.flip ? y.hi : y.lo), {6, 16},
              cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1);
  cv::putText(canvas, axis_label(y.flip ? y.lo : y.hi),
              {6, std::max(y.px_lo, y.px_hi) + 14}, cv::FONT_HERSHEY_SIMPLEX,
              0.4, black, 1);
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const int ty = 20 + 18 * static_cast<int>(i);
    cv::line(canvas, {x.px_hi - 150, ty}, {x.px_hi - 120, ty}, plot_colour(i),
             2);
    cv::putText(canvas, tracks[i].name, {x.px_hi - 112, ty + 4},
                cv::FONT_HERSHEY_SIMPLEX, 0.38, black, 1);
  }
}

inline void draw_polyline(cv::Mat& canvas, const Track& track,
                          const AxisMap& x, const AxisMap& y,
                          double CartesianPosition::*ax,
                          double CartesianPosition::*ay, cv::Scalar colour) {
  for (std::size_t i = 1; i < track.size(); ++i) {
    const cv::Point a(x.to_px(track[i - 1].*ax), y.to_px(track[i - 1].*ay));
    const cv::Point b(x.to_px(track[i].*ax), y.to_px(track[i].*ay));
    cv::line(canvas, a, b, colour, 2, cv::LINE_AA);
  }
  if (track.size() == 1)
    cv::circle(canvas,
               {x.to_px(track[0].*ax), y.to_px(track[0].*ay)}, 3, colour, -1);
}

inline ImageU8 render_plot(const std::vector<NamedTrack>& tracks,
                           double CartesianPosition::*ax,
                           double CartesianPosition::*ay,
                           const std::string& x_name,
                           const std::string& y_name, int width_px,
                           int height_px) {
  check_config(width_px >= 200 && height_px >= 160,
               "render_plot: canvas too small");
  bool any = false;
  double xlo = std::numeric_limits<double>::max(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const NamedTrack& nt : tracks)
    for (const CartesianPosition& p : nt.track) {
      any = true;
      expand(p.*ax, xlo, xhi);
      expand(p.*ay, ylo, yhi);
    }
  check_data(any, "render_plot: no samples to draw");
  pad_range(xlo, xhi);
  pad_range(ylo, yhi);

  cv::Mat canvas(height_px, width_px, CV_8UC3, cv::Scalar(255, 255, 255));
  const AxisMap x{xlo, xhi, 56, width_px - 16, false};
  const AxisMap y{ylo, yhi, 24, height_px - 28, true};
  for (std::size_t i = 0; i < tracks.size(); ++i)
    draw_polyline(canvas, tracks[i].track, x, y, ax, ay, plot_colour(i));
  draw_frame_and_legend(canvas, tracks, x, y, x_name, y_name);
  return from_bgr_mat(canvas);
}

}  // namespace detail

// Bird's-eye view of the flight paths: x against y, one polyline per track.
inline ImageU8 render_path_plot(const std::vector<NamedTrack>& tracks,
                                int width_px = 720, int height_px = 720) {
  return detail::render_plot(tracks, &CartesianPosition::x_m,
                             &CartesianPosition::y_m, "x [m]", "y [m]",
                             width_px, height_px);
}

// Height profile: z against time, one polyline per track.
inline ImageU8 render_z_plot(const std::vector<NamedTrack>& tracks,
                             int width_px = 960, int height_px = 420) {
  return detail::render_plot(tracks, &CartesianPosition::t_s,
                             &CartesianPosition::z_m, "t [s]", "z [m]",
                             width_px, height_px);
}

}  // namespace mbul

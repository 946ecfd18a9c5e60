// Synthetic flight generator: a marker flying a square path at fixed height
// over the camera, rendered into RGB frames with a lead-in of background-only
// frames for the median model. Produces the frames, the per-frame poses, and
// the ground-truth track, all deterministically from one seed.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mbul/common.hpp"
#include "mbul/evaluation.hpp"
#include "mbul/geometry.hpp"
#include "mbul/image.hpp"
#include "mbul/marker.hpp"

namespace mbul {

// Same pixel focal length (and frame rate) as the reference camera, at a
// different frame size, so pixel-diameter measurements transfer unchanged.
inline CameraIntrinsics camera_like(const CameraIntrinsics& cam, int width_px,
                                    int height_px) {
  const double f = 0.5 * cam.width_px * cot_half_hfov(cam);
  const double hfov = 2.0 * std::atan(0.5 * width_px / f);
  return make_camera(width_px, height_px, hfov, cam.frame_rate_hz);
}

struct FlightConfig {
  double side_m = 4.0;       // square side, centred on the optical axis
  double height_m = 16.0;    // constant z
  double speed_mps = 1.6;    // along the perimeter
  double spin_deg_per_s = 20.0;  // slow yaw rotation during the flight
  int frame_width_px = 800;
  int frame_height_px = 800;
  int lead_in_frames = 50;   // background-only frames before take-off
  int bg_green = 40;         // background green level (r=30, b=35 fixed)
  int fg_green = 210;        // marker green level
  int noise_amplitude = 3;   // uniform background shimmer on green
  std::uint64_t seed = 0;

  void validate() const {
    check_config(side_m > 0.0, "flight: side must be positive");
    check_config(height_m > 0.0, "flight: height must be positive");
    check_config(speed_mps > 0.0, "flight: speed must be positive");
    check_config(frame_width_px >= 1 && frame_height_px >= 1,
                 "flight: frame size must be positive");
    check_config(lead_in_frames >= 0, "flight: lead-in must be >= 0");
    check_config(bg_green >= 0 && bg_green <= 255 && fg_green >= 0 &&
                     fg_green <= 255,
                 "flight: green levels must be 8-bit");
    check_config(noise_amplitude >= 0 && bg_green + noise_amplitude <= 255 &&
                     bg_green - noise_amplitude >= 0,
                 "flight: noise must keep the background in range");
  }
};

struct FlightTruth {
  MarkerPose pose;
  double t_s = 0.0;
};

struct SquareFlight {
  CameraIntrinsics camera;        // full-frame intrinsics
  FlightConfig config;
  std::vector<FlightTruth> poses;  // one per flight frame, after the lead-in
  Track truth;                     // (x, y, z, t) of those poses

  int frame_count() const {
    return config.lead_in_frames + static_cast<int>(poses.size());
  }
};

namespace detail {

// Position along the square perimeter at arc length l, counter-clockwise
// from the (-h, -h) corner.
inline void square_position(double l, double half_side, double& x,
                            double& y) {
  const double s = 2.0 * half_side;
  const double leg = std::fmod(l, 4.0 * s);
  if (leg < s) {
    x = -half_side + leg;
    y = -half_side;
  } else if (leg < 2.0 * s) {
    x = half_side;
    y = -half_side + (leg - s);
  } else if (leg < 3.0 * s) {
    x = half_side - (leg - 2.0 * s);
    y = half_side;
  } else {
    x = -half_side;
    y = half_side - (leg - 3.0 * s);
  }
}

}  // namespace detail

// Lays out the flight: full-frame camera, per-frame poses, ground truth.
// Every pose must project fully inside the frame; a flight that would leave
// the frustum is rejected up front.
inline SquareFlight plan_square_flight(const FlightConfig& cfg,
                                       const CameraIntrinsics& base_cam) {
  cfg.validate();
  check_config(base_cam.frame_rate_hz > 0.0,
               "flight: camera needs a frame rate");
  SquareFlight flight;
  flight.config = cfg;
  flight.camera =
      camera_like(base_cam, cfg.frame_width_px, cfg.frame_height_px);

  const MarkerSpec marker;
  const double perimeter = 4.0 * cfg.side_m;
  const double duration_s = perimeter / cfg.speed_mps;
  const double fps = base_cam.frame_rate_hz;
  const int n = static_cast<int>(std::floor(duration_s * fps)) + 1;

  for (int j = 0; j < n; ++j) {
    const double t_flight = static_cast<double>(j) / fps;
    double x = 0.0, y = 0.0;
    detail::square_position(cfg.speed_mps * t_flight, 0.5 * cfg.side_m, x, y);
    MarkerPose pose;
    pose.x_m = x;
    pose.y_m = y;
    pose.z_m = cfg.height_m;
    pose.quaternion =
        quat_from_euler_deg(cfg.spin_deg_per_s * t_flight, 0.0, 0.0);
    const PixelObservation obs = project_marker(pose, flight.camera, marker);
    check_config(obs.m == 1,
                 "flight: pose leaves the view frustum at t = " +
                     std::to_string(t_flight));
    const double t = (cfg.lead_in_frames + j) / fps;
    flight.poses.push_back({pose, t});
    flight.truth.push_back({pose.x_m, pose.y_m, pose.z_m, t});
  }
  return flight;
}

// Renders frame `index` (0-based over lead-in + flight). The background is
// a dark scene with deterministic green shimmer; the marker overlays it in
// bright green. Frames can be rendered independently and in any order.
inline ImageU8 render_flight_frame(const SquareFlight& flight, int index) {
  const FlightConfig& cfg = flight.config;
  check_data(index >= 0 && index < flight.frame_count(),
             "render_flight_frame: frame index out of range");
  ImageU8 img = ImageU8::zeros(cfg.frame_width_px, cfg.frame_height_px, 3);
  Rng rng(derive_seed(cfg.seed, fnv1a("frame-noise"),
                      static_cast<std::uint64_t>(index)));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      img.at(x, y, 0) = 30;
      img.at(x, y, 1) = static_cast<std::uint8_t>(
          cfg.bg_green + rng.uniform_int(-cfg.noise_amplitude,
                                         cfg.noise_amplitude));
      img.at(x, y, 2) = 35;
    }
  const int j = index - cfg.lead_in_frames;
  if (j >= 0) {
    static const MarkerLayout layout = build_layout(MarkerSpec{});
    const BinaryImage mask = rasterize_marker(
        flight.poses[static_cast<std::size_t>(j)].pose, flight.camera, layout);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        if (mask.at(x, y)) {
          img.at(x, y, 0) = 60;
          img.at(x, y, 1) = static_cast<std::uint8_t>(cfg.fg_green);
          img.at(x, y, 2) = 60;
        }
  }
  return img;
}

}  // namespace mbul

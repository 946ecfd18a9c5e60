// Closed-form camera/marker geometry.
//
// Camera frame convention (used everywhere in this library):
//   +z  optical axis, pointing away from the camera (skyward for a
//       ground-based, upward-looking camera); must be > 0 for visible poses
//   +y  to the right in the image; maps to the pixel offset u
//   +x  downward in the image; maps to the pixel offset v
// Pixel offsets u, v are measured from the image centre, +u right, +v down.
//
// For a flat circular marker of physical diameter D facing a camera of
// pixel width w and horizontal field of view 2a, the projected pixel
// diameter d determines range and lateral position:
//   z = D * w * cot(a) / (2 d)
//   y = u * D / (2 d)         (and x from v identically)
// project_marker() is the exact algebraic inverse of those relations, and
// delta_z()/delta_y() are their first-order error propagation estimates.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mbul/common.hpp"

namespace mbul {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

// Unit quaternion with scalar part w and vector part (p, q, r).
struct Quaternion {
  double w = 1.0, p = 0.0, q = 0.0, r = 0.0;

  double norm() const { return std::sqrt(w * w + p * p + q * q + r * r); }

  Quaternion normalized() const {
    const double n = norm();
    check(n > 0.0, "Quaternion::normalized: zero quaternion");
    return {w / n, p / n, q / n, r / n};
  }

  // Same rotation, canonical sign (w >= 0). Removes the q/-q double cover.
  Quaternion canonical() const {
    if (w < 0.0) return {-w, -p, -q, -r};
    return *this;
  }

  // Hamilton product: this ⊗ o.
  Quaternion operator*(const Quaternion& o) const {
    return {w * o.w - p * o.p - q * o.q - r * o.r,
            w * o.p + p * o.w + q * o.r - r * o.q,
            w * o.q - p * o.r + q * o.w + r * o.p,
            w * o.r + p * o.q - q * o.p + r * o.w};
  }

  // Rotates a vector (active rotation, marker-local -> camera frame).
  void rotate(double x, double y, double z, double& ox, double& oy,
              double& oz) const {
    const double r00 = 1 - 2 * (q * q + r * r), r01 = 2 * (p * q - w * r),
                 r02 = 2 * (p * r + w * q);
    const double r10 = 2 * (p * q + w * r), r11 = 1 - 2 * (p * p + r * r),
                 r12 = 2 * (q * r - w * p);
    const double r20 = 2 * (p * r - w * q), r21 = 2 * (q * r + w * p),
                 r22 = 1 - 2 * (p * p + q * q);
    ox = r00 * x + r01 * y + r02 * z;
    oy = r10 * x + r11 * y + r12 * z;
    oz = r20 * x + r21 * y + r22 * z;
  }
};

// Builds the rotation yaw about +z, then pitch about +y, then roll about +x
// (applied to marker-local vectors in that order: R = Rz * Ry * Rx).
// Angles are wrapped to [-180, 180) first, so e.g. yaw 360 equals yaw 0
// exactly, bit for bit.
inline Quaternion quat_from_euler_deg(double yaw_deg, double pitch_deg,
                                      double roll_deg) {
  const auto wrap = [](double a) {
    const double r = std::remainder(a, 360.0);
    return r == 180.0 ? -180.0 : r;
  };
  const double cz = std::cos(deg_to_rad(wrap(yaw_deg)) / 2),
               sz = std::sin(deg_to_rad(wrap(yaw_deg)) / 2);
  const double cy = std::cos(deg_to_rad(wrap(pitch_deg)) / 2),
               sy = std::sin(deg_to_rad(wrap(pitch_deg)) / 2);
  const double cx = std::cos(deg_to_rad(wrap(roll_deg)) / 2),
               sx = std::sin(deg_to_rad(wrap(roll_deg)) / 2);
  const Quaternion qz{cz, 0, 0, sz}, qy{cy, 0, sy, 0}, qx{cx, sx, 0, 0};
  return qz * qy * qx;
}

struct CameraIntrinsics {
  int width_px = 0;
  int height_px = 0;
  double hfov_rad = 0.0;  // full horizontal FOV (= 2a)
  double vfov_rad = 0.0;  // full vertical FOV
  double frame_rate_hz = 0.0;
};

inline void validate(const CameraIntrinsics& cam) {
  check_config(cam.width_px > 0 && cam.height_px > 0,
               "camera: width/height must be positive");
  check_config(cam.hfov_rad > 0.0 && cam.hfov_rad < kPi,
               "camera: hfov must be in (0, pi)");
  check_config(cam.vfov_rad > 0.0 && cam.vfov_rad < kPi,
               "camera: vfov must be in (0, pi)");
}

// Convenience constructor: vfov derived from hfov and the aspect ratio of a
// square-pixel sensor.
inline CameraIntrinsics make_camera(int width_px, int height_px,
                                    double hfov_rad,
                                    double frame_rate_hz = 0.0) {
  CameraIntrinsics cam;
  cam.width_px = width_px;
  cam.height_px = height_px;
  cam.hfov_rad = hfov_rad;
  cam.vfov_rad =
      2.0 * std::atan(std::tan(hfov_rad / 2.0) *
                      (static_cast<double>(height_px) / width_px));
  cam.frame_rate_hz = frame_rate_hz;
  validate(cam);
  return cam;
}

// cot(a) with a = half the horizontal FOV.
inline double cot_half_hfov(const CameraIntrinsics& cam) {
  const double a = 0.5 * cam.hfov_rad;
  return std::cos(a) / std::sin(a);
}

// Physical marker description: `arm_count` radial LED strips at even angular
// spacing, individually removable via `arms_present` (removing one makes the
// marker rotationally asymmetric); `diameter_m` is the diameter of the
// marker's circumscribed circle.
struct MarkerSpec {
  double diameter_m = 0.47;
  int arm_count = 4;
  std::vector<bool> arms_present = {true, true, true, false};
  double strip_width_m = 0.05;
};

inline void validate(const MarkerSpec& marker) {
  check_config(marker.diameter_m > 0.0, "marker: diameter must be positive");
  check_config(marker.arm_count >= 2, "marker: need at least 2 arms");
  check_config(static_cast<int>(marker.arms_present.size()) ==
                   marker.arm_count,
               "marker: arms_present size must equal arm_count");
  int present = 0;
  for (bool b : marker.arms_present) present += b ? 1 : 0;
  check_config(present >= 2, "marker: at least 2 arms must be present");
  check_config(marker.strip_width_m > 0.0 &&
                   marker.strip_width_m < marker.diameter_m,
               "marker: strip width must be in (0, diameter)");
}

// Marker position and orientation in the camera frame.
struct MarkerPose {
  double x_m = 0.0, y_m = 0.0, z_m = 0.0;
  Quaternion quaternion;
};

// Detector-side view of a marker: present flag, centre offsets, projected
// diameter (all in pixels) and orientation.
struct PixelObservation {
  int m = 0;          // 1 when the marker is (fully) in view
  double u = 0.0;     // horizontal offset from image centre, +right
  double v = 0.0;     // vertical offset from image centre, +down
  double d = 0.0;     // projected marker diameter
  Quaternion quaternion;
};

struct CartesianPosition {
  double x_m = 0.0, y_m = 0.0, z_m = 0.0;
  double t_s = 0.0;
};

// ---------------------------------------------------------------------------
// Inverse localisation
// ---------------------------------------------------------------------------

// Range from projected diameter: z = D * w * cot(a) / (2 d).
inline double pixel_to_z(const PixelObservation& obs,
                         const CameraIntrinsics& cam,
                         const MarkerSpec& marker) {
  check_data(obs.d > 0.0, "pixel_to_z: observation needs d > 0");
  return marker.diameter_m * cam.width_px * cot_half_hfov(cam) /
         (2.0 * obs.d);
}

struct LateralPosition {
  double x_m = 0.0;
  double y_m = 0.0;
};

// Lateral position from centre offsets: y = u * D / (2 d), x = v * D / (2 d).
// Note there is no FOV term here; the diameter d carries the scale.
inline LateralPosition pixel_to_xy(const PixelObservation& obs,
                                   const MarkerSpec& marker) {
  check_data(obs.d > 0.0, "pixel_to_xy: observation needs d > 0");
  const double scale = marker.diameter_m / (2.0 * obs.d);
  return {obs.v * scale, obs.u * scale};
}

// Full 3D position; the timestamp is passed through unchanged.
inline CartesianPosition pixel_to_cartesian(const PixelObservation& obs,
                                            const CameraIntrinsics& cam,
                                            const MarkerSpec& marker,
                                            double t_s = 0.0) {
  check_data(obs.m == 1, "pixel_to_cartesian: no detection (m = 0)");
  const LateralPosition xy = pixel_to_xy(obs, marker);
  return {xy.x_m, xy.y_m, pixel_to_z(obs, cam, marker), t_s};
}

// ---------------------------------------------------------------------------
// Forward projection (exact algebraic inverse of the above)
// ---------------------------------------------------------------------------

// d = D * w * cot(a) / (2 z);  u = 2 y d / D;  v = 2 x d / D.
// m = 1 iff the full marker disc fits inside the image bounds.
inline PixelObservation project_marker(const MarkerPose& pose,
                                       const CameraIntrinsics& cam,
                                       const MarkerSpec& marker) {
  check_data(pose.z_m > 0.0,
             "project_marker: pose must be in front of the camera (z > 0)");
  PixelObservation obs;
  obs.d = marker.diameter_m * cam.width_px * cot_half_hfov(cam) /
          (2.0 * pose.z_m);
  obs.u = 2.0 * pose.y_m * obs.d / marker.diameter_m;
  obs.v = 2.0 * pose.x_m * obs.d / marker.diameter_m;
  obs.quaternion = pose.quaternion;
  const bool in_frame =
      std::abs(obs.u) + 0.5 * obs.d <= 0.5 * cam.width_px &&
      std::abs(obs.v) + 0.5 * obs.d <= 0.5 * cam.height_px;
  obs.m = in_frame ? 1 : 0;
  return obs;
}

// ---------------------------------------------------------------------------
// First-order uncertainty propagation
// ---------------------------------------------------------------------------

// Range error from a diameter error: dz = (dd / d) * z. Along the projection
// curve (z inversely proportional to d) this scales as 1/d^2: for a fixed
// pixel error, doubling the diameter quarters the range error.
inline double delta_z(const PixelObservation& obs, double z_m,
                      double delta_d_px) {
  check_data(obs.d > 0.0, "delta_z: observation needs d > 0");
  return (delta_d_px / obs.d) * z_m;
}

// Lateral error from a centre-offset error: dy = (du / u) * y, which equals
// du * D / (2 d). The second form is used when u = 0, where the first is
// indeterminate; both are proportional to du / d.
inline double delta_y(const PixelObservation& obs, double y_m,
                      double delta_u_px, const MarkerSpec& marker) {
  check_data(obs.d > 0.0, "delta_y: observation needs d > 0");
  if (obs.u == 0.0) return delta_u_px * marker.diameter_m / (2.0 * obs.d);
  return (delta_u_px / obs.u) * y_m;
}

}  // namespace mbul

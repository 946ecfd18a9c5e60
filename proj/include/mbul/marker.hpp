// Concrete planar geometry of the LED marker and its rasteriser.
//
// The marker is a central square hub plus radial LED strips ("arms") at even
// angular spacing, some of which may be absent. Two derived quantities pin
// the layout to the physical description:
//   - the circumscribed (minimum enclosing) circle of the lit area has
//     exactly the configured diameter; the arm length is solved for this;
//   - the marker-local origin sits at the centroid of the lit area, so a
//     pose's (x, y, z) — and therefore the projected label (u, v) — always
//     refers to the centre of mass of what is actually visible.
//
// Rasterisation rule: a pixel is lit iff its centre falls inside the
// projected marker region; no anti-aliasing (the output stays strictly
// binary). The projected region uses the same projection model as the
// labels themselves: a similarity transform — in-plane rotation plus a
// uniform scale fixed by the origin depth — translated so the marker origin
// lands exactly on the analytic label position (u, v). Under a similarity
// the region's centroid maps onto the label and its enclosing-circle
// diameter equals the analytic d exactly, so rendered images, labels, and
// the geometry module stay mutually consistent to strictly sub-pixel
// accuracy; out-of-plane tilt (kept small by the pose sampler) is recorded
// in the pose's quaternion but its sub-pixel foreshortening is not
// rendered.
#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "mbul/blob.hpp"
#include "mbul/common.hpp"
#include "mbul/geometry.hpp"
#include "mbul/image.hpp"

namespace mbul {

struct MarkerLayout {
  double half_width_m = 0.0;  // half of the strip width
  double arm_len_m = 0.0;     // arm extent from the hub centre
  struct ArmDir {
    double c = 1.0, s = 0.0;  // cos/sin of the arm direction
  };
  std::vector<ArmDir> arms;   // present arms only
  double centroid_x_m = 0.0;  // lit-area centroid in hub coordinates;
  double centroid_y_m = 0.0;  // local coords = hub coords minus this point
  Point2 mec_center;          // enclosing-circle centre, local coords
  double mec_radius_m = 0.0;  // = diameter / 2 by construction
  double area_m2 = 0.0;

  // Membership test in marker-local coordinates (origin at the centroid).
  bool contains_local(double a, double b) const {
    const double x = a + centroid_x_m, y = b + centroid_y_m;  // hub coords
    const double hw = half_width_m;
    if (std::abs(x) <= hw && std::abs(y) <= hw) return true;  // hub square
    for (const auto& arm : arms) {
      const double along = arm.c * x + arm.s * y;
      const double across = -arm.s * x + arm.c * y;
      if (along >= hw && along <= arm_len_m && std::abs(across) <= hw)
        return true;
    }
    return false;
  }
};

namespace detail {

// Extreme candidate points (hub and arm corners) in hub coordinates.
inline std::vector<Point2> layout_corners(const std::vector<MarkerLayout::ArmDir>& arms,
                                          double hw, double len) {
  std::vector<Point2> pts = {
      {hw, hw}, {hw, -hw}, {-hw, hw}, {-hw, -hw}};
  for (const auto& a : arms) {
    for (double sgn : {1.0, -1.0}) {
      pts.push_back({a.c * len - a.s * sgn * hw, a.s * len + a.c * sgn * hw});
      pts.push_back({a.c * hw - a.s * sgn * hw, a.s * hw + a.c * sgn * hw});
    }
  }
  return pts;
}

}  // namespace detail

// Solves the arm length so that the enclosing circle of the lit area has
// exactly spec.diameter_m, then re-centres local coordinates at the
// lit-area centroid.
inline MarkerLayout build_layout(const MarkerSpec& spec) {
  validate(spec);
  MarkerLayout layout;
  layout.half_width_m = 0.5 * spec.strip_width_m;
  for (int k = 0; k < spec.arm_count; ++k) {
    if (!spec.arms_present[static_cast<std::size_t>(k)]) continue;
    const double theta = 2.0 * kPi * k / spec.arm_count;
    layout.arms.push_back({std::cos(theta), std::sin(theta)});
  }

  const double hw = layout.half_width_m;
  const double target_r = 0.5 * spec.diameter_m;
  const auto radius_for = [&](double len) {
    return min_enclosing_circle(detail::layout_corners(layout.arms, hw, len))
        .r;
  };
  double lo = hw * (1.0 + 1e-9), hi = spec.diameter_m;
  check_config(radius_for(lo) < target_r,
               "marker: strip width too large for the configured diameter");
  check_config(radius_for(hi) > target_r,
               "marker: cannot reach the configured diameter");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (radius_for(mid) < target_r ? lo : hi) = mid;
  }
  layout.arm_len_m = 0.5 * (lo + hi);

  // Lit area decomposes into the hub square and disjoint arm rectangles.
  const double side = 2.0 * hw;
  const double hub_area = side * side;
  const double arm_area = (layout.arm_len_m - hw) * side;
  double area = hub_area, mx = 0.0, my = 0.0;
  const double arm_mid = 0.5 * (layout.arm_len_m + hw);
  for (const auto& a : layout.arms) {
    area += arm_area;
    mx += arm_area * arm_mid * a.c;
    my += arm_area * arm_mid * a.s;
  }
  layout.area_m2 = area;
  layout.centroid_x_m = mx / area;
  layout.centroid_y_m = my / area;

  const Circle mec = min_enclosing_circle(
      detail::layout_corners(layout.arms, hw, layout.arm_len_m));
  layout.mec_center = {mec.cx - layout.centroid_x_m,
                       mec.cy - layout.centroid_y_m};
  layout.mec_radius_m = mec.r;
  return layout;
}

// Renders the marker into a width x height binary image on the camera's
// pixel grid. Pixel (ix, iy) is centred at (ix, iy); the image centre is
// ((width-1)/2, (height-1)/2). The marker-local origin projects exactly to
// the analytic label offsets (u, v); a pixel is lit iff its centre falls
// inside the projected region.
inline BinaryImage rasterize_marker(const MarkerPose& pose,
                                    const CameraIntrinsics& cam,
                                    const MarkerLayout& layout) {
  check_data(pose.z_m > 0.0, "rasterize_marker: pose must have z > 0");
  BinaryImage img = ImageU8::zeros(cam.width_px, cam.height_px, 1);

  const double f = 0.5 * cam.width_px * cot_half_hfov(cam);
  const double cx0 = 0.5 * (cam.width_px - 1);
  const double cy0 = 0.5 * (cam.height_px - 1);
  const Quaternion rot = pose.quaternion.normalized();
  const double tz = pose.z_m;

  // In-plane rotation angle: the orthogonal (Procrustes) factor of the
  // rotated marker's image-plane basis. A marker-local point (a, b) lands at
  //   (du, dv) = (f/z) * R(phi) * (b, a)
  // offset from the label position — the same similarity model the label
  // equations use (u tracks y, v tracks x, depth frozen at the origin's z).
  double r00, r10, r20, r01, r11, r21;
  rot.rotate(1.0, 0.0, 0.0, r00, r10, r20);
  rot.rotate(0.0, 1.0, 0.0, r01, r11, r21);
  const double phi = std::atan2(r01 - r10, r00 + r11);
  const double cph = std::cos(phi), sph = std::sin(phi);

  const double label_u = 2.0 * f * pose.y_m / tz;
  const double label_v = 2.0 * f * pose.x_m / tz;
  const double scale = f / tz;
  const double ou = cx0 + label_u;  // image position of the marker origin
  const double ov = cy0 + label_v;

  const auto to_image = [&](double a, double b) {
    return Point2{ou + scale * (cph * b - sph * a),
                  ov + scale * (sph * b + cph * a)};
  };
  const auto contains_image = [&](double px, double py) {
    const double gu = (px - ou) / scale, gv = (py - ov) / scale;
    return layout.contains_local(cph * gv - sph * gu, cph * gu + sph * gv);
  };

  // Bounding box around the projected enclosing circle; the similarity maps
  // it to a circle of exactly the analytic diameter, +2 px for pixel-centre
  // rounding at the rim.
  const Point2 pc = to_image(layout.mec_center.x, layout.mec_center.y);
  const double half_ext = layout.mec_radius_m * scale + 2.0;
  const int x_lo = std::max(0, static_cast<int>(std::floor(pc.x - half_ext)));
  const int x_hi = std::min(cam.width_px - 1,
                            static_cast<int>(std::ceil(pc.x + half_ext)));
  const int y_lo = std::max(0, static_cast<int>(std::floor(pc.y - half_ext)));
  const int y_hi = std::min(cam.height_px - 1,
                            static_cast<int>(std::ceil(pc.y + half_ext)));
  if (x_lo > x_hi || y_lo > y_hi) return img;

  for (int iy = y_lo; iy <= y_hi; ++iy)
    for (int ix = x_lo; ix <= x_hi; ++ix)
      if (contains_image(ix, iy)) img.at(ix, iy) = 1;
  return img;
}

}  // namespace mbul

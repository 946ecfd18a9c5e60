// Track evaluation: interpolation onto a uniform grid, nearest-timestamp
// matching against ground truth, RMSE reports, and method comparison with
// sample-weighted pooling across flights.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mbul/common.hpp"
#include "mbul/geometry.hpp"

namespace mbul {

// Tracks are sequences of timestamped positions with strictly increasing
// timestamps. Ground truth and predictions share the representation.
using Track = std::vector<CartesianPosition>;

inline void check_track_times(const Track& track, const std::string& what) {
  for (std::size_t i = 1; i < track.size(); ++i)
    check_data(track[i].t_s > track[i - 1].t_s,
               what + ": timestamps must be strictly increasing");
}

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

inline constexpr double kDefaultInterpStepS = 0.01;

// Linear interpolation of each axis onto the uniform grid t0 + k*dt covering
// the track's time span. Grid points that coincide with input samples
// reproduce them; the grid has floor(span/dt) + 1 points (with a small
// guard so exact multiples of dt are not lost to rounding).
inline Track interpolate_track(const Track& track,
                               double dt = kDefaultInterpStepS) {
  check_config(dt > 0.0, "interpolate_track: dt must be positive");
  check_data(track.size() >= 2,
             "interpolate_track: need at least two samples");
  check_track_times(track, "interpolate_track");

  const double t0 = track.front().t_s;
  const double span = track.back().t_s - t0;
  const auto n = static_cast<std::size_t>(std::floor(span / dt + 1e-9)) + 1;

  Track out;
  out.reserve(n);
  std::size_t seg = 0;  // current segment [seg, seg+1]
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    while (seg + 2 < track.size() && track[seg + 1].t_s <= t) ++seg;
    const CartesianPosition& a = track[seg];
    const CartesianPosition& b = track[seg + 1];
    const double alpha =
        std::clamp((t - a.t_s) / (b.t_s - a.t_s), 0.0, 1.0);
    out.push_back({a.x_m + alpha * (b.x_m - a.x_m),
                   a.y_m + alpha * (b.y_m - a.y_m),
                   a.z_m + alpha * (b.z_m - a.z_m), t});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matching and RMSE
// ---------------------------------------------------------------------------

struct RmseReport {
  double rmse_2d_m = 0.0;  // over (x, y)
  double rmse_z_m = 0.0;   // over z
  double rmse_3d_m = 0.0;  // over (x, y, z); satisfies 3d^2 = 2d^2 + z^2
  std::size_t sample_count = 0;
};

// Index of the track sample with the timestamp nearest to t; when t falls
// exactly halfway between two samples the earlier one wins.
inline std::size_t nearest_sample(const Track& track, double t) {
  const auto cmp = [](const CartesianPosition& p, double value) {
    return p.t_s < value;
  };
  const auto it = std::lower_bound(track.begin(), track.end(), t, cmp);
  if (it == track.begin()) return 0;
  if (it == track.end()) return track.size() - 1;
  const auto i = static_cast<std::size_t>(it - track.begin());
  return (track[i].t_s - t < t - track[i - 1].t_s) ? i : i - 1;
}

// Matches every ground-truth point with the prediction sample nearest in
// time and reports RMSEs over the matched pairs. Predictions are usually
// interpolated first (see evaluate_track); the tracks must share part of
// their time span.
inline RmseReport match_and_rmse(const Track& pred, const Track& gt) {
  check_data(!pred.empty(), "match_and_rmse: empty prediction track");
  check_data(!gt.empty(), "match_and_rmse: empty ground-truth track");
  check_track_times(pred, "match_and_rmse(pred)");
  check_track_times(gt, "match_and_rmse(gt)");
  check_data(pred.front().t_s <= gt.back().t_s &&
                 gt.front().t_s <= pred.back().t_s,
             "match_and_rmse: tracks have no temporal overlap");

  double sum_2d = 0.0, sum_z = 0.0;
  for (const CartesianPosition& g : gt) {
    const CartesianPosition& p = pred[nearest_sample(pred, g.t_s)];
    const double dx = p.x_m - g.x_m;
    const double dy = p.y_m - g.y_m;
    const double dz = p.z_m - g.z_m;
    sum_2d += dx * dx + dy * dy;
    sum_z += dz * dz;
  }
  const auto n = static_cast<double>(gt.size());
  RmseReport r;
  r.sample_count = gt.size();
  r.rmse_2d_m = std::sqrt(sum_2d / n);
  r.rmse_z_m = std::sqrt(sum_z / n);
  r.rmse_3d_m = std::sqrt((sum_2d + sum_z) / n);
  return r;
}

// The standard evaluation: interpolate the prediction track onto a fine
// grid, then match each ground-truth point to the nearest grid sample.
inline RmseReport evaluate_track(const Track& pred, const Track& gt,
                                 double dt = kDefaultInterpStepS) {
  return match_and_rmse(interpolate_track(pred, dt), gt);
}

// Pools per-flight reports into one report as if all matched pairs were
// concatenated: pooled^2 is the sample-count-weighted mean of the squared
// errors, so the 3d^2 = 2d^2 + z^2 identity survives pooling.
inline RmseReport pool_reports(const std::vector<RmseReport>& reports) {
  check_config(!reports.empty(), "pool_reports: no reports");
  double sum_2d = 0.0, sum_z = 0.0;
  std::size_t n = 0;
  for (const RmseReport& r : reports) {
    const auto w = static_cast<double>(r.sample_count);
    sum_2d += w * r.rmse_2d_m * r.rmse_2d_m;
    sum_z += w * r.rmse_z_m * r.rmse_z_m;
    n += r.sample_count;
  }
  check_data(n > 0, "pool_reports: zero matched samples");
  RmseReport out;
  out.sample_count = n;
  out.rmse_2d_m = std::sqrt(sum_2d / static_cast<double>(n));
  out.rmse_z_m = std::sqrt(sum_z / static_cast<double>(n));
  out.rmse_3d_m = std::sqrt((sum_2d + sum_z) / static_cast<double>(n));
  return out;
}

// Fraction of the baseline error removed by the candidate: (base - new)/base.
inline double relative_improvement(double base, double candidate) {
  check_data(base > 0.0, "relative_improvement: baseline must be positive");
  return (base - candidate) / base;
}

// ---------------------------------------------------------------------------
// Method comparison
// ---------------------------------------------------------------------------

struct FlightRmse {
  std::string flight;
  RmseReport report;
};

struct MethodRun {
  std::string method;
  std::vector<FlightRmse> flights;
};

// Per-flight and pooled overall numbers for several methods over the same
// set of flights.
struct ComparisonTable {
  std::vector<std::string> methods;
  std::vector<std::string> flights;
  // reports[m][f] pairs with methods[m] x flights[f]; overall[m] pools
  // method m across all flights.
  std::vector<std::vector<RmseReport>> reports;
  std::vector<RmseReport> overall;
};

inline ComparisonTable compare_methods(const std::vector<MethodRun>& runs) {
  check_config(!runs.empty(), "compare_methods: no methods");
  ComparisonTable table;
  for (const FlightRmse& f : runs.front().flights)
    table.flights.push_back(f.flight);
  check_config(!table.flights.empty(), "compare_methods: no flights");

  for (const MethodRun& run : runs) {
    std::map<std::string, RmseReport> by_flight;
    for (const FlightRmse& f : run.flights) {
      check_config(by_flight.emplace(f.flight, f.report).second,
                   "compare_methods: duplicate flight '" + f.flight +
                       "' for method " + run.method);
    }
    check_config(by_flight.size() == table.flights.size(),
                 "compare_methods: method " + run.method +
                     " covers a different flight set");
    std::vector<RmseReport> row;
    for (const std::string& flight : table.flights) {
      const auto it = by_flight.find(flight);
      check_config(it != by_flight.end(),
                   "compare_methods: method " + run.method +
                       " is missing flight '" + flight + "'");
      row.push_back(it->second);
    }
    table.methods.push_back(run.method);
    table.overall.push_back(pool_reports(row));
    table.reports.push_back(std::move(row));
  }
  return table;
}

// Plain-text grid: one row per flight plus a pooled overall row; for each
// method the 2D, z, and 3D RMSEs in metres.
inline std::string format_comparison(const ComparisonTable& table) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  const int name_w = 12;
  out << std::setw(name_w) << std::left << "flight" << std::right;
  for (const std::string& m : table.methods)
    out << "  " << std::setw(26) << m;
  out << '\n';
  out << std::setw(name_w) << "";
  for (std::size_t m = 0; m < table.methods.size(); ++m)
    out << "  " << std::setw(8) << "2D" << std::setw(9) << "z"
        << std::setw(9) << "3D";
  out << '\n';
  const auto row = [&](const std::string& name,
                       const std::vector<RmseReport>& reports) {
    out << std::setw(name_w) << std::left << name << std::right;
    for (const RmseReport& r : reports)
      out << "  " << std::setw(8) << r.rmse_2d_m << std::setw(9) << r.rmse_z_m
          << std::setw(9) << r.rmse_3d_m;
    out << '\n';
  };
  for (std::size_t f = 0; f < table.flights.size(); ++f) {
    std::vector<RmseReport> reports;
    for (std::size_t m = 0; m < table.methods.size(); ++m)
      reports.push_back(table.reports[m][f]);
    row(table.flights[f], reports);
  }
  row("overall", table.overall);
  return out.str();
}

// ---------------------------------------------------------------------------
// Ground-truth file format
// ---------------------------------------------------------------------------

inline constexpr const char* kGroundTruthHeader = "t_s,x_m,y_m,z_m";

inline void write_ground_truth(const std::filesystem::path& path,
                               const Track& track) {
  std::ofstream out(path);
  check_io(out.good(), "write_ground_truth: cannot open " + path.string());
  out << kGroundTruthHeader << '\n';
  out.precision(17);
  for (const CartesianPosition& p : track)
    out << p.t_s << ',' << p.x_m << ',' << p.y_m << ',' << p.z_m << '\n';
  check_io(out.good(), "write_ground_truth: write failed for " + path.string());
}

inline Track read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  check_io(in.good(), "read_ground_truth: cannot open " + path.string());
  Track track;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line == kGroundTruthHeader) {
      first = false;
      continue;
    }
    first = false;
    std::istringstream ls(line);
    CartesianPosition p;
    char comma;
    ls >> p.t_s >> comma >> p.x_m >> comma >> p.y_m >> comma >> p.z_m;
    check_data(!ls.fail(), "read_ground_truth: malformed line: " + line);
    track.push_back(p);
  }
  check_track_times(track, "read_ground_truth");
  return track;
}

}  // namespace mbul

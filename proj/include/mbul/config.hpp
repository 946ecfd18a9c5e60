// Experiment configuration: one JSON file that gathers every knob of the
// system — camera, marker, pose sampler, dataset sizes, augmentation, loss,
// training, tracking thresholds, and the z filter — with defaults matching
// the built-in constants. Parsing is strict: unknown keys, wrong types, and
// out-of-range values are configuration errors, and the seed is mandatory.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "mbul/augment.hpp"
#include "mbul/detector.hpp"
#include "mbul/geometry.hpp"
#include "mbul/image_io.hpp"
#include "mbul/pipeline.hpp"
#include "mbul/synthgen.hpp"

namespace mbul {

struct CameraConfig {
  int width_px = 299;
  int height_px = 299;
  double hfov_deg = 12.5;
  double frame_rate_hz = 12.5;

  CameraIntrinsics intrinsics() const {
    return make_camera(width_px, height_px, deg_to_rad(hfov_deg),
                       frame_rate_hz);
  }
};

struct DatasetConfig {
  long count_positive = 5500;
  long count_null = 1300;
};

struct AugmentConfig {
  std::string method = "noisy_cutout";  // noisy_cutout | sp_cutout | none
  double mask_probability = 0.05;       // noisy_cutout window keep-out rate

  Augmenter make() const {
    if (method == "noisy_cutout") {
      NoisyCutoutConfig cfg;
      cfg.mask_probability = mask_probability;
      return make_noisy_cutout(cfg);
    }
    return make_augmenter(method);
  }
};

struct FilterConfig {
  double fc_hz = 1.0;
};

struct PathsConfig {
  std::string dataset_dir;
  std::string checkpoint;
  std::string frames;
  std::string ground_truth;
  std::string output_dir;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;  // mandatory in files; no silent default
  CameraConfig camera;
  MarkerSpec marker;
  PoseSampler sampler;
  DatasetConfig dataset;
  AugmentConfig augment;
  LossConfig loss;
  TrainConfig train;
  TrackerConfig tracking;
  FilterConfig filter;
  PathsConfig paths;

  void validate() const {
    camera.intrinsics();
    mbul::validate(marker);
    mbul::validate(sampler);
    check_config(dataset.count_positive >= 0 && dataset.count_null >= 0,
                 "config: dataset counts must be non-negative");
    check_config(augment.method == "noisy_cutout" ||
                     augment.method == "sp_cutout" || augment.method == "none",
                 "config: augment.method must be noisy_cutout, sp_cutout, or "
                 "none");
    check_config(augment.mask_probability >= 0.0 &&
                     augment.mask_probability <= 1.0,
                 "config: augment.mask_probability must be in [0, 1]");
    check_config(filter.fc_hz > 0.0, "config: filter.fc_hz must be positive");
    loss.validate();
    train.validate();
    tracking.validate();
  }
};

// Human-readable method tag, e.g. MbULNet_UP(NoisyCutout), MbULNet0(SPCutout).
inline std::string method_name(LossVariant variant,
                               const std::string& augment) {
  const std::string net =
      variant == LossVariant::kUp ? "MbULNet_UP" : "MbULNet0";
  std::string aug = "None";
  if (augment == "noisy_cutout") aug = "NoisyCutout";
  if (augment == "sp_cutout") aug = "SPCutout";
  return net + "(" + aug + ")";
}

// Binarisation threshold matched to how the model was trained: SPCutout
// models run at tau=25; NoisyCutout models at tau=10 (base loss) or tau=13
// (UP loss).
inline int default_tau(LossVariant variant, const std::string& augment) {
  if (augment == "sp_cutout") return 25;
  return variant == LossVariant::kUp ? 13 : 10;
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& section,
                       std::initializer_list<const char*> allowed) {
  check_config(j.is_object(), "config: " + section + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    check_config(ok, "config: unknown key '" + key + "' in " + section);
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out,
                const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: bad value for " + section + "." + key);
  }
}

}  // namespace detail

// Parses a configuration from JSON text. Missing sections and fields keep
// their defaults; `seed` must be present.
inline ExperimentConfig parse_experiment_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: parse error: " + std::string(e.what()));
  }
  detail::check_keys(j, "top level",
                     {"seed", "camera", "marker", "sampler", "dataset",
                      "augment", "loss", "train", "tracking", "filter",
                      "paths"});
  check_config(j.contains("seed"), "config: seed is mandatory");

  ExperimentConfig cfg;
  detail::read_field(j, "seed", cfg.seed, "top level");

  if (j.contains("camera")) {
    const auto& s = j.at("camera");
    detail::check_keys(s, "camera",
                       {"width_px", "height_px", "hfov_deg", "frame_rate_hz"});
    detail::read_field(s, "width_px", cfg.camera.width_px, "camera");
    detail::read_field(s, "height_px", cfg.camera.height_px, "camera");
    detail::read_field(s, "hfov_deg", cfg.camera.hfov_deg, "camera");
    detail::read_field(s, "frame_rate_hz", cfg.camera.frame_rate_hz, "camera");
  }
  if (j.contains("marker")) {
    const auto& s = j.at("marker");
    detail::check_keys(s, "marker", {"diameter_m", "strip_width_m"});
    detail::read_field(s, "diameter_m", cfg.marker.diameter_m, "marker");
    detail::read_field(s, "strip_width_m", cfg.marker.strip_width_m, "marker");
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    detail::check_keys(s, "sampler",
                       {"z_min_m", "z_max_m", "yaw_min_deg", "yaw_max_deg",
                        "roll_pitch_min_deg", "roll_pitch_max_deg",
                        "edge_margin_px"});
    detail::read_field(s, "z_min_m", cfg.sampler.z_min_m, "sampler");
    detail::read_field(s, "z_max_m", cfg.sampler.z_max_m, "sampler");
    detail::read_field(s, "yaw_min_deg", cfg.sampler.yaw_min_deg, "sampler");
    detail::read_field(s, "yaw_max_deg", cfg.sampler.yaw_max_deg, "sampler");
    detail::read_field(s, "roll_pitch_min_deg", cfg.sampler.roll_pitch_min_deg,
                       "sampler");
    detail::read_field(s, "roll_pitch_max_deg", cfg.sampler.roll_pitch_max_deg,
                       "sampler");
    detail::read_field(s, "edge_margin_px", cfg.sampler.edge_margin_px,
                       "sampler");
  }
  if (j.contains("dataset")) {
    const auto& s = j.at("dataset");
    detail::check_keys(s, "dataset", {"count_positive", "count_null"});
    detail::read_field(s, "count_positive", cfg.dataset.count_positive,
                       "dataset");
    detail::read_field(s, "count_null", cfg.dataset.count_null, "dataset");
  }
  if (j.contains("augment")) {
    const auto& s = j.at("augment");
    detail::check_keys(s, "augment", {"method", "mask_probability"});
    detail::read_field(s, "method", cfg.augment.method, "augment");
    detail::read_field(s, "mask_probability", cfg.augment.mask_probability,
                       "augment");
  }
  bool tau_given = false;
  if (j.contains("loss")) {
    const auto& s = j.at("loss");
    detail::check_keys(s, "loss", {"variant", "gamma", "mu"});
    std::string variant = "base";
    if (s.contains("variant")) {
      detail::read_field(s, "variant", variant, "loss");
      check_config(variant == "base" || variant == "up",
                   "config: loss.variant must be base or up");
      cfg.loss.variant =
          variant == "up" ? LossVariant::kUp : LossVariant::kBase;
    }
    detail::read_field(s, "gamma", cfg.loss.gamma, "loss");
    detail::read_field(s, "mu", cfg.loss.mu, "loss");
  }
  if (j.contains("train")) {
    const auto& s = j.at("train");
    detail::check_keys(s, "train",
                       {"batch_size", "learn_rate", "epochs", "backbone",
                        "stop_at_train_loss"});
    detail::read_field(s, "batch_size", cfg.train.batch_size, "train");
    detail::read_field(s, "learn_rate", cfg.train.learn_rate, "train");
    detail::read_field(s, "epochs", cfg.train.epochs, "train");
    detail::read_field(s, "backbone", cfg.train.backbone, "train");
    detail::read_field(s, "stop_at_train_loss", cfg.train.stop_at_train_loss,
                       "train");
  }
  if (j.contains("tracking")) {
    const auto& s = j.at("tracking");
    detail::check_keys(s, "tracking",
                       {"tau", "green_pixel_threshold", "window_px",
                        "overlap_px", "detect_threshold",
                        "lost_frames_to_search", "scan_all_per_frame"});
    tau_given = s.contains("tau");
    detail::read_field(s, "tau", cfg.tracking.threshold.tau, "tracking");
    detail::read_field(s, "green_pixel_threshold",
                       cfg.tracking.threshold.green_pixel_threshold,
                       "tracking");
    detail::read_field(s, "window_px", cfg.tracking.window_px, "tracking");
    detail::read_field(s, "overlap_px", cfg.tracking.overlap_px, "tracking");
    detail::read_field(s, "detect_threshold", cfg.tracking.detect_threshold,
                       "tracking");
    detail::read_field(s, "lost_frames_to_search",
                       cfg.tracking.lost_frames_to_search, "tracking");
    detail::read_field(s, "scan_all_per_frame",
                       cfg.tracking.scan_all_per_frame, "tracking");
  }
  if (j.contains("filter")) {
    const auto& s = j.at("filter");
    detail::check_keys(s, "filter", {"fc_hz"});
    detail::read_field(s, "fc_hz", cfg.filter.fc_hz, "filter");
  }
  if (j.contains("paths")) {
    const auto& s = j.at("paths");
    detail::check_keys(s, "paths",
                       {"dataset_dir", "checkpoint", "frames", "ground_truth",
                        "output_dir"});
    detail::read_field(s, "dataset_dir", cfg.paths.dataset_dir, "paths");
    detail::read_field(s, "checkpoint", cfg.paths.checkpoint, "paths");
    detail::read_field(s, "frames", cfg.paths.frames, "paths");
    detail::read_field(s, "ground_truth", cfg.paths.ground_truth, "paths");
    detail::read_field(s, "output_dir", cfg.paths.output_dir, "paths");
  }

  // The detector seed follows the experiment seed; the sampler draws its
  // own stream from it during generation.
  cfg.train.seed = cfg.seed;
  cfg.sampler.seed = cfg.seed;
  if (!tau_given)
    cfg.tracking.threshold.tau =
        default_tau(cfg.loss.variant, cfg.augment.method);

  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(
    const std::filesystem::path& path) {
  return parse_experiment_config(read_text(path));
}

// The full schema with every default spelled out; `mbul` can write this as
// a starting point for experiments.
inline std::string default_config_text(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["camera"] = {{"width_px", cfg.camera.width_px},
                 {"height_px", cfg.camera.height_px},
                 {"hfov_deg", cfg.camera.hfov_deg},
                 {"frame_rate_hz", cfg.camera.frame_rate_hz}};
  j["marker"] = {{"diameter_m", cfg.marker.diameter_m},
                 {"strip_width_m", cfg.marker.strip_width_m}};
  j["sampler"] = {{"z_min_m", cfg.sampler.z_min_m},
                  {"z_max_m", cfg.sampler.z_max_m},
                  {"yaw_min_deg", cfg.sampler.yaw_min_deg},
                  {"yaw_max_deg", cfg.sampler.yaw_max_deg},
                  {"roll_pitch_min_deg", cfg.sampler.roll_pitch_min_deg},
                  {"roll_pitch_max_deg", cfg.sampler.roll_pitch_max_deg},
                  {"edge_margin_px", cfg.sampler.edge_margin_px}};
  j["dataset"] = {{"count_positive", cfg.dataset.count_positive},
                  {"count_null", cfg.dataset.count_null}};
  j["augment"] = {{"method", cfg.augment.method},
                  {"mask_probability", cfg.augment.mask_probability}};
  j["loss"] = {{"variant",
                cfg.loss.variant == LossVariant::kUp ? "up" : "base"},
               {"gamma", cfg.loss.gamma},
               {"mu", cfg.loss.mu}};
  j["train"] = {{"batch_size", cfg.train.batch_size},
                {"learn_rate", cfg.train.learn_rate},
                {"epochs", cfg.train.epochs},
                {"backbone", cfg.train.backbone},
                {"stop_at_train_loss", cfg.train.stop_at_train_loss}};
  j["tracking"] = {
      {"tau", default_tau(cfg.loss.variant, cfg.augment.method)},
      {"green_pixel_threshold", cfg.tracking.threshold.green_pixel_threshold},
      {"window_px", cfg.tracking.window_px},
      {"overlap_px", cfg.tracking.overlap_px},
      {"detect_threshold", cfg.tracking.detect_threshold},
      {"lost_frames_to_search", cfg.tracking.lost_frames_to_search},
      {"scan_all_per_frame", cfg.tracking.scan_all_per_frame}};
  j["filter"] = {{"fc_hz", cfg.filter.fc_hz}};
  j["paths"] = {{"dataset_dir", ""},
                {"checkpoint", ""},
                {"frames", ""},
                {"ground_truth", ""},
                {"output_dir", ""}};
  return j.dump(2) + "\n";
}

}  // namespace mbul

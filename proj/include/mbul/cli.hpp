// Command-line entry point: one executable exposing the full workflow.
//
//   generate         render the synthetic binary training set
//   augment-preview  write before/after images for an augmenter
//   train            fit the detector on a generated dataset
//   simulate         render a synthetic flight video plus ground truth
//   track            run background subtraction + detector over frames
//   eval             score a track against ground truth
//   compare          grid of per-flight/overall RMSEs across methods
//
// Global flags: --config (experiment JSON), --seed (overrides the config
// seed), --deterministic. Every command is already bit-reproducible for a
// fixed (config, seed); --deterministic additionally refuses to run
// commands that consume randomness without an explicit seed source.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 I/O or
// internal error. Results go to stdout; diagnostics go to stderr.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mbul/config.hpp"
#include "mbul/dataset.hpp"
#include "mbul/detector.hpp"
#include "mbul/evaluation.hpp"
#include "mbul/image_io.hpp"
#include "mbul/marker.hpp"
#include "mbul/pipeline.hpp"
#include "mbul/plots.hpp"
#include "mbul/simflight.hpp"

namespace mbul {
namespace cli {

// Accepts both the compact and the snake_case spellings.
inline std::string canonical_augment_name(const std::string& name) {
  if (name == "noisycutout" || name == "noisy_cutout") return "noisy_cutout";
  if (name == "spcutout" || name == "sp_cutout") return "sp_cutout";
  if (name == "none") return "none";
  throw ConfigError("unknown augmentation '" + name +
                    "' (expected noisycutout, spcutout, or none)");
}

inline std::filesystem::path require_path(const std::string& flag_value,
                                          const std::string& fallback,
                                          const std::string& what) {
  if (!flag_value.empty()) return flag_value;
  if (!fallback.empty()) return fallback;
  throw ConfigError("missing " + what +
                    " (pass the flag or set it in the config paths)");
}

// --------------------------------------------------------------------------
// generate
// --------------------------------------------------------------------------

struct GenerateOptions {
  std::string out_dir;
};

inline void cmd_generate(const ExperimentConfig& cfg,
                         const GenerateOptions& opt, std::ostream& out) {
  const auto dir =
      require_path(opt.out_dir, cfg.paths.dataset_dir, "dataset directory");
  std::optional<DatasetInfo> prior;
  try {
    prior = read_dataset_info(dir);
  } catch (const Error&) {
    prior.reset();  // first generation into this directory
  }
  const auto manifest =
      generate_dataset(cfg.dataset.count_positive, cfg.dataset.count_null,
                       cfg.sampler, cfg.camera.intrinsics(), cfg.marker, dir);
  const DatasetInfo info = read_dataset_info(dir);
  if (prior && prior->content_hash == info.content_hash) {
    out << "dataset unchanged (content hash " << to_hex64(info.content_hash)
        << ")\n";
    return;
  }
  out << "generated " << manifest.records.size() << " images ("
      << manifest.count_positive() << " positive, " << manifest.count_null()
      << " null) in " << dir.string() << "\n";
  out << "train/val split: " << manifest.count_split("train") << "/"
      << manifest.count_split("val") << ", content hash "
      << to_hex64(info.content_hash) << "\n";
}

// --------------------------------------------------------------------------
// augment-preview
// --------------------------------------------------------------------------

struct PreviewOptions {
  std::string out_dir;
  std::string dataset_dir;  // optional: preview a stored sample
  long id = 0;
};

inline void cmd_augment_preview(const ExperimentConfig& cfg,
                                const PreviewOptions& opt, std::ostream& out) {
  const std::filesystem::path dir =
      require_path(opt.out_dir, cfg.paths.output_dir, "output directory");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  check_io(!ec && std::filesystem::is_directory(dir),
           "augment-preview: cannot create " + dir.string());

  BinaryImage before;
  if (!opt.dataset_dir.empty()) {
    const auto manifest = load_dataset(opt.dataset_dir);
    const auto it = std::find_if(
        manifest.records.begin(), manifest.records.end(),
        [&](const auto& rec) { return rec.id == opt.id; });
    check_config(it != manifest.records.end(),
                 "augment-preview: no sample with id " +
                     std::to_string(opt.id) + " in " + opt.dataset_dir);
    before = load_sample_image(manifest, *it);
  } else {
    const MarkerLayout layout = build_layout(cfg.marker);
    before = generate_sample(opt.id, opt.id + 1, cfg.sampler,
                             cfg.camera.intrinsics(), cfg.marker, layout)
                 .pixels;
  }

  Rng rng(derive_seed(cfg.seed, fnv1a("augment-preview"),
                      static_cast<std::uint64_t>(opt.id)));
  const BinaryImage after = cfg.augment.make()(before, rng);

  const std::string stem = "preview_" + std::to_string(opt.id);
  write_binary_png(dir / (stem + "_before.png"), before);
  write_binary_png(dir / (stem + "_after.png"), after);
  out << "wrote " << stem << "_before.png and " << stem
      << "_after.png (augment " << cfg.augment.method << ") to "
      << dir.string() << "\n";
}

// --------------------------------------------------------------------------
// train
// --------------------------------------------------------------------------

struct TrainOptions {
  std::string dataset_dir;
  std::string checkpoint_out;
};

inline void cmd_train(const ExperimentConfig& cfg, const TrainOptions& opt,
                      std::ostream& out) {
  const auto dataset_dir =
      require_path(opt.dataset_dir, cfg.paths.dataset_dir, "dataset directory");
  check_config(std::filesystem::is_directory(dataset_dir),
               "train: dataset directory not found: " + dataset_dir.string());
  const auto ckpt_path = require_path(opt.checkpoint_out, cfg.paths.checkpoint,
                                      "checkpoint path");

  const auto manifest = load_dataset(dataset_dir);
  const std::string method = method_name(cfg.loss.variant, cfg.augment.method);
  out << "training " << method << " on " << manifest.records.size()
      << " images (" << manifest.count_split("train") << " train / "
      << manifest.count_split("val") << " val), backbone "
      << cfg.train.backbone << "\n";
  out << "epoch, train_loss, val_loss, val_class_acc, val_pixel_mae\n";

  ModelCheckpoint ckpt =
      train(manifest, cfg.augment.make(), cfg.loss, cfg.train, &out);
  ckpt.method = method;
  save_checkpoint(ckpt_path, ckpt);
  out << "saved checkpoint " << method << " to " << ckpt_path.string()
      << " (best epoch " << ckpt.best_epoch << ", val loss "
      << ckpt.best_val_loss << ")\n";
}

// --------------------------------------------------------------------------
// simulate
// --------------------------------------------------------------------------

struct SimulateOptions {
  std::string out_dir;
  std::string truth_out;  // defaults to <out_dir>/ground_truth.csv
  FlightConfig flight;
};

inline void cmd_simulate(const ExperimentConfig& cfg,
                         const SimulateOptions& opt, std::ostream& out) {
  const auto dir =
      require_path(opt.out_dir, cfg.paths.frames, "frame output directory");
  FlightConfig flight_cfg = opt.flight;
  flight_cfg.seed = cfg.seed;
  const SquareFlight flight =
      plan_square_flight(flight_cfg, cfg.camera.intrinsics());

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  check_io(!ec && std::filesystem::is_directory(dir),
           "simulate: cannot create " + dir.string());
  for (int i = 0; i < flight.frame_count(); ++i)
    write_image_rgb(dir / frame_filename(i), render_flight_frame(flight, i));

  const std::filesystem::path truth_path =
      opt.truth_out.empty() ? dir / "ground_truth.csv"
                            : std::filesystem::path(opt.truth_out);
  write_ground_truth(truth_path, flight.truth);
  out << "simulated " << flight.frame_count() << " frames ("
      << flight.poses.size() << " in flight, "
      << flight_cfg.lead_in_frames << " lead-in) at "
      << flight_cfg.frame_width_px << "x" << flight_cfg.frame_height_px
      << " px\n";
  out << "wrote frames to " << dir.string() << " and ground truth to "
      << truth_path.string() << "\n";
}

// --------------------------------------------------------------------------
// track
// --------------------------------------------------------------------------

struct TrackOptions {
  std::string frames_path;
  std::string checkpoint;
  std::string track_out;
  bool raw = false;  // skip the z low-pass filter
};

inline void cmd_track(ExperimentConfig cfg, const TrackOptions& opt,
                      std::ostream& out) {
  const auto frames_path =
      require_path(opt.frames_path, cfg.paths.frames, "frames path");
  const auto ckpt_path =
      require_path(opt.checkpoint, cfg.paths.checkpoint, "checkpoint path");
  const auto track_path =
      require_path(opt.track_out, cfg.paths.output_dir.empty()
                                      ? ""
                                      : (std::filesystem::path(
                                             cfg.paths.output_dir) /
                                         "track.csv")
                                            .string(),
                   "track output path");

  const ModelCheckpoint ckpt = load_checkpoint(ckpt_path);
  Detector detector(ckpt);
  // The search window is the network's input; the two cannot differ.
  cfg.tracking.window_px = detector.input_px();
  cfg.tracking.validate();

  const std::vector<ImageU8> frames = read_frames(frames_path);
  const BackgroundModel bg = build_background(frames);
  const CameraIntrinsics cam = camera_like(
      cfg.camera.intrinsics(), bg.median_frame.width, bg.median_frame.height);

  TrackerState state;
  std::vector<TrackPoint> track;
  const double fps = cam.frame_rate_hz;
  for (std::size_t i = kBackgroundFrameCount; i < frames.size(); ++i) {
    StepResult result =
        step(state, frames[i], bg, detector, cfg.tracking, cam, cfg.marker,
             static_cast<double>(i) / fps);
    state = result.state;
    if (result.detection) track.push_back(*result.detection);
  }

  if (!opt.raw && track.size() > 1) {
    const ButterworthCoeffs c =
        design_butterworth_lowpass(cfg.filter.fc_hz, fps);
    std::vector<double> z(track.size());
    for (std::size_t i = 0; i < track.size(); ++i) z[i] = track[i].z_m;
    const std::vector<double> zf = filter_signal(z, c);
    for (std::size_t i = 0; i < track.size(); ++i) track[i].z_m = zf[i];
  }

  write_track(track_path, track);
  const std::size_t tracked =
      frames.size() > kBackgroundFrameCount
          ? frames.size() - kBackgroundFrameCount
          : 0;
  out << "tracked " << tracked << " frames, " << track.size()
      << " detections";
  if (!ckpt.method.empty()) out << " (" << ckpt.method << ")";
  out << "\n";
  out << "wrote track to " << track_path.string() << "\n";
}

// --------------------------------------------------------------------------
// eval
// --------------------------------------------------------------------------

struct EvalOptions {
  std::string track_path;
  std::string truth_path;
  std::string report_out;  // optional JSON report
  std::string plots_dir;   // optional plot images
};

inline Track positions_of(const std::vector<TrackPoint>& points) {
  Track track;
  track.reserve(points.size());
  for (const auto& p : points) track.push_back(p.position());
  return track;
}

inline void write_plot_pair(const std::filesystem::path& dir,
                            const std::string& suffix,
                            const std::vector<NamedTrack>& tracks) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  check_io(!ec && std::filesystem::is_directory(dir),
           "plots: cannot create " + dir.string());
  write_image_rgb(dir / ("path" + suffix + ".png"), render_path_plot(tracks));
  write_image_rgb(dir / ("z" + suffix + ".png"), render_z_plot(tracks));
}

inline void cmd_eval(const ExperimentConfig& cfg, const EvalOptions& opt,
                     std::ostream& out) {
  const auto track_path =
      require_path(opt.track_path, "", "track file (--track)");
  const auto truth_path = require_path(
      opt.truth_path, cfg.paths.ground_truth, "ground-truth file (--truth)");

  const Track pred = positions_of(read_track(track_path));
  const Track gt = read_ground_truth(truth_path);
  const RmseReport report = evaluate_track(pred, gt);

  out << std::fixed << std::setprecision(3);
  out << "matched samples: " << report.sample_count << "\n";
  out << "rmse_2d: " << report.rmse_2d_m << " m\n";
  out << "rmse_z:  " << report.rmse_z_m << " m\n";
  out << "rmse_3d: " << report.rmse_3d_m << " m\n";

  if (!opt.report_out.empty()) {
    nlohmann::json j;
    j["sample_count"] = report.sample_count;
    j["rmse_2d_m"] = report.rmse_2d_m;
    j["rmse_z_m"] = report.rmse_z_m;
    j["rmse_3d_m"] = report.rmse_3d_m;
    write_text(opt.report_out, j.dump(2) + "\n");
    out << "wrote report to " << opt.report_out << "\n";
  }
  if (!opt.plots_dir.empty()) {
    write_plot_pair(opt.plots_dir, "",
                    {{"ground truth", gt}, {"estimate", pred}});
    out << "wrote plots to " << opt.plots_dir << "\n";
  }
}

// --------------------------------------------------------------------------
// compare
// --------------------------------------------------------------------------

struct CompareOptions {
  std::vector<std::string> truths;  // flight=gt_file
  std::vector<std::string> tracks;  // method/flight=track_file
  std::string report_out;
  std::string plots_dir;
};

inline std::pair<std::string, std::string> split_assignment(
    const std::string& s, const std::string& what) {
  const auto eq = s.rfind('=');
  check_config(eq != std::string::npos && eq > 0 && eq + 1 < s.size(),
               "compare: expected " + what + ", got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

inline void cmd_compare(const ExperimentConfig& cfg, const CompareOptions& opt,
                        std::ostream& out) {
  check_config(!opt.truths.empty(),
               "compare: provide at least one --truth flight=file");
  check_config(!opt.tracks.empty(),
               "compare: provide at least one --track method/flight=file");

  std::vector<std::pair<std::string, Track>> flights;  // name -> GT
  for (const auto& s : opt.truths) {
    auto [flight, path] = split_assignment(s, "flight=file");
    for (const auto& [name, gt] : flights)
      check_config(name != flight,
                   "compare: duplicate ground truth for flight " + flight);
    flights.emplace_back(flight, read_ground_truth(path));
  }
  const auto find_flight = [&](const std::string& name) -> const Track& {
    for (const auto& [flight, gt] : flights)
      if (flight == name) return gt;
    throw ConfigError("compare: no --truth given for flight " + name);
  };

  // method -> flight -> raw prediction track (kept for plotting).
  std::vector<MethodRun> runs;
  std::vector<std::vector<std::pair<std::string, Track>>> run_tracks;
  for (const auto& s : opt.tracks) {
    auto [key, path] = split_assignment(s, "method/flight=file");
    const auto slash = key.rfind('/');
    check_config(slash != std::string::npos && slash > 0 &&
                     slash + 1 < key.size(),
                 "compare: expected method/flight=file, got '" + s + "'");
    const std::string method = key.substr(0, slash);
    const std::string flight = key.substr(slash + 1);

    const Track pred = positions_of(read_track(path));
    const RmseReport report = evaluate_track(pred, find_flight(flight));

    std::size_t m = 0;
    while (m < runs.size() && runs[m].method != method) ++m;
    if (m == runs.size()) {
      runs.push_back({method, {}});
      run_tracks.emplace_back();
    }
    runs[m].flights.push_back({flight, report});
    run_tracks[m].emplace_back(flight, pred);
  }

  const ComparisonTable table = compare_methods(runs);
  out << format_comparison(table);

  if (table.methods.size() >= 2) {
    out << std::fixed << std::setprecision(1);
    for (std::size_t m = 1; m < table.methods.size(); ++m) {
      const double gain = relative_improvement(table.overall[0].rmse_z_m,
                                               table.overall[m].rmse_z_m);
      out << "overall z improvement of " << table.methods[m] << " vs "
          << table.methods[0] << ": " << gain * 100.0 << "%\n";
    }
  }

  if (!opt.report_out.empty()) {
    nlohmann::json j;
    j["methods"] = table.methods;
    j["flights"] = table.flights;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
      nlohmann::json row = nlohmann::json::array();
      for (const auto& r : table.reports[m])
        row.push_back({{"sample_count", r.sample_count},
                       {"rmse_2d_m", r.rmse_2d_m},
                       {"rmse_z_m", r.rmse_z_m},
                       {"rmse_3d_m", r.rmse_3d_m}});
      row.push_back({{"sample_count", table.overall[m].sample_count},
                     {"rmse_2d_m", table.overall[m].rmse_2d_m},
                     {"rmse_z_m", table.overall[m].rmse_z_m},
                     {"rmse_3d_m", table.overall[m].rmse_3d_m}});
      rows.push_back(std::move(row));
    }
    j["reports"] = std::move(rows);
    write_text(opt.report_out, j.dump(2) + "\n");
    out << "wrote report to " << opt.report_out << "\n";
  }

  if (!opt.plots_dir.empty()) {
    for (const auto& [flight, gt] : flights) {
      std::vector<NamedTrack> named = {{"ground truth", gt}};
      for (std::size_t m = 0; m < runs.size(); ++m)
        for (const auto& [fname, pred] : run_tracks[m])
          if (fname == flight) named.push_back({runs[m].method, pred});
      write_plot_pair(opt.plots_dir, "_" + flight, named);
    }
    out << "wrote plots to " << opt.plots_dir << "\n";
  }
}

}  // namespace cli

// Builds the CLI11 application, parses `args` (without the program name),
// and runs the selected command. Returns the process exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{
      "mbul: ground-based monocular localisation of a marker-carrying UAV"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  bool deterministic = false;
  app.add_option("--config", config_path, "experiment configuration (JSON)");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "experiment seed (overrides the config)");
  app.add_flag("--deterministic", deterministic,
               "require an explicit seed for randomised commands");

  auto* c_generate =
      app.add_subcommand("generate", "render the synthetic training set");
  cli::GenerateOptions gen_opt;
  long count_positive = -1, count_null = -1;
  c_generate->add_option("--out", gen_opt.out_dir, "dataset directory");
  c_generate->add_option("--count-positive", count_positive,
                         "marker images to render");
  c_generate->add_option("--count-null", count_null, "all-zero images to add");

  auto* c_preview = app.add_subcommand(
      "augment-preview", "write before/after images for the augmenter");
  cli::PreviewOptions prev_opt;
  std::string preview_augment;
  c_preview->add_option("--out", prev_opt.out_dir, "output directory");
  c_preview->add_option("--dataset", prev_opt.dataset_dir,
                        "preview a stored sample instead of a fresh one");
  c_preview->add_option("--id", prev_opt.id, "sample id (default 0)");
  c_preview->add_option("--augment", preview_augment,
                        "noisycutout | spcutout | none");

  auto* c_train = app.add_subcommand("train", "fit the detector");
  cli::TrainOptions train_opt;
  std::string train_loss, train_augment, train_backbone;
  int train_epochs = -1, train_batch = -1;
  double train_lr = -1.0, train_stop = -1.0;
  c_train->add_option("--dataset", train_opt.dataset_dir, "dataset directory");
  c_train->add_option("--out", train_opt.checkpoint_out, "checkpoint path");
  c_train->add_option("--loss", train_loss, "base | up");
  c_train->add_option("--augment", train_augment,
                      "noisycutout | spcutout | none");
  c_train->add_option("--epochs", train_epochs, "training epochs");
  c_train->add_option("--batch-size", train_batch, "minibatch size");
  c_train->add_option("--learn-rate", train_lr, "Adam learning rate");
  c_train->add_option("--backbone", train_backbone,
                      "small-conv | mobilenet-like");
  c_train->add_option("--stop-at-train-loss", train_stop,
                      "stop once the mean train loss reaches this value");

  auto* c_simulate = app.add_subcommand(
      "simulate", "render a synthetic square flight plus ground truth");
  cli::SimulateOptions sim_opt;
  c_simulate->add_option("--out", sim_opt.out_dir, "frame output directory");
  c_simulate->add_option("--truth", sim_opt.truth_out,
                         "ground-truth CSV (default <out>/ground_truth.csv)");
  c_simulate->add_option("--side", sim_opt.flight.side_m, "square side [m]");
  c_simulate->add_option("--altitude", sim_opt.flight.height_m,
                         "flight height [m]");
  c_simulate->add_option("--speed", sim_opt.flight.speed_mps,
                         "flight speed [m/s]");
  c_simulate->add_option("--spin", sim_opt.flight.spin_deg_per_s,
                         "yaw rate [deg/s]");
  c_simulate->add_option("--frame-width", sim_opt.flight.frame_width_px,
                         "frame width [px]");
  c_simulate->add_option("--frame-height", sim_opt.flight.frame_height_px,
                         "frame height [px]");
  c_simulate->add_option("--lead-in", sim_opt.flight.lead_in_frames,
                         "background-only frames before take-off");
  c_simulate->add_option("--noise", sim_opt.flight.noise_amplitude,
                         "background shimmer amplitude");

  auto* c_track =
      app.add_subcommand("track", "run the tracker over frames or a video");
  cli::TrackOptions track_opt;
  int track_tau = -1;
  c_track->add_option("--frames", track_opt.frames_path,
                      "frame directory or video file");
  c_track->add_option("--checkpoint", track_opt.checkpoint,
                      "trained model checkpoint");
  c_track->add_option("--out", track_opt.track_out, "track CSV path");
  c_track->add_option("--tau", track_tau,
                      "green-difference threshold override");
  c_track->add_flag("--raw", track_opt.raw, "skip the z low-pass filter");

  auto* c_eval =
      app.add_subcommand("eval", "score a track against ground truth");
  cli::EvalOptions eval_opt;
  c_eval->add_option("--track", eval_opt.track_path, "track CSV");
  c_eval->add_option("--truth", eval_opt.truth_path, "ground-truth CSV");
  c_eval->add_option("--report", eval_opt.report_out, "JSON report path");
  c_eval->add_option("--plots", eval_opt.plots_dir, "plot output directory");

  auto* c_compare = app.add_subcommand(
      "compare", "compare methods across flights (RMSE grid + plots)");
  cli::CompareOptions cmp_opt;
  c_compare->add_option("--truth", cmp_opt.truths,
                        "flight=gt.csv (repeatable)");
  c_compare->add_option("--track", cmp_opt.tracks,
                        "method/flight=track.csv (repeatable)");
  c_compare->add_option("--report", cmp_opt.report_out, "JSON report path");
  c_compare->add_option("--plots", cmp_opt.plots_dir,
                        "plot output directory");

  try {
    std::vector<const char*> argv;
    argv.push_back("mbul");
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    // Resolve the experiment configuration: file, then flag overrides.
    ExperimentConfig cfg;
    if (!config_path.empty())
      cfg = load_experiment_config(config_path);
    else
      cfg = parse_experiment_config(R"({"seed": 0})");
    const bool seed_given = seed_opt->count() > 0;
    if (seed_given) {
      cfg.seed = seed;
      cfg.train.seed = seed;
      cfg.sampler.seed = seed;
    }
    const bool randomised = app.got_subcommand(c_generate) ||
                            app.got_subcommand(c_preview) ||
                            app.got_subcommand(c_train) ||
                            app.got_subcommand(c_simulate);
    if (deterministic && randomised)
      check_config(seed_given || !config_path.empty(),
                   "deterministic mode: pass --seed or a config with a seed");

    if (app.got_subcommand(c_generate)) {
      if (count_positive >= 0) cfg.dataset.count_positive = count_positive;
      if (count_null >= 0) cfg.dataset.count_null = count_null;
      cfg.validate();
      cli::cmd_generate(cfg, gen_opt, out);
    } else if (app.got_subcommand(c_preview)) {
      if (!preview_augment.empty())
        cfg.augment.method = cli::canonical_augment_name(preview_augment);
      cfg.validate();
      cli::cmd_augment_preview(cfg, prev_opt, out);
    } else if (app.got_subcommand(c_train)) {
      if (!train_loss.empty()) {
        check_config(train_loss == "base" || train_loss == "up",
                     "train: --loss must be base or up");
        cfg.loss.variant =
            train_loss == "up" ? LossVariant::kUp : LossVariant::kBase;
      }
      if (!train_augment.empty())
        cfg.augment.method = cli::canonical_augment_name(train_augment);
      if (train_epochs >= 0) cfg.train.epochs = train_epochs;
      if (train_batch >= 0) cfg.train.batch_size = train_batch;
      if (train_lr >= 0.0) cfg.train.learn_rate = train_lr;
      if (train_stop >= 0.0) cfg.train.stop_at_train_loss = train_stop;
      if (!train_backbone.empty()) cfg.train.backbone = train_backbone;
      cfg.validate();
      cli::cmd_train(cfg, train_opt, out);
    } else if (app.got_subcommand(c_simulate)) {
      cfg.validate();
      cli::cmd_simulate(cfg, sim_opt, out);
    } else if (app.got_subcommand(c_track)) {
      if (track_tau >= 0) cfg.tracking.threshold.tau = track_tau;
      cfg.validate();
      cli::cmd_track(cfg, track_opt, out);
    } else if (app.got_subcommand(c_eval)) {
      cli::cmd_eval(cfg, eval_opt, out);
    } else if (app.got_subcommand(c_compare)) {
      cli::cmd_compare(cfg, cmp_opt, out);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace mbul

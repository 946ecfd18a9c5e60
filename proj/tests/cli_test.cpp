// End-to-end command-line behaviour: argument handling, exit codes, and the
// generate / train / simulate / track / eval / compare workflow on small
// inputs. Models with a forced classification bias make tracking outcomes
// deterministic without training.
#include "mbul/cli.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace mbul {
namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("mbul_cli_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// A checkpoint whose classification output is pinned by a large bias on the
// logit head: +10 detects in every window, -10 never detects. The diameter
// head goes through a softplus, so emitted sizes stay positive either way.
void write_gate_checkpoint(const std::filesystem::path& path, double m_bias) {
  NetConfig nc;
  nc.backbone = "small-conv";
  nc.input_px = 64;
  MbulNet<float> net(nc);
  Rng rng(7);
  net.init(rng);
  bool found = false;
  for (ParamBlob<float>* blob : net.params())
    if (blob->name == "fc2.b") {
      blob->w.data()[0] = static_cast<float>(m_bias);
      found = true;
    }
  ASSERT_TRUE(found) << "logit head bias blob not found";
  ModelCheckpoint ckpt;
  ckpt.net = nc;
  ckpt.weights = extract_weights(net);
  ckpt.method = m_bias > 0 ? "AlwaysFire" : "NeverFire";
  ckpt.best_val_loss = 0.0;  // JSON cannot carry the infinity default
  save_checkpoint(path, ckpt);
}

ImageU8 solid_rgb(int w, int h, std::uint8_t r, std::uint8_t g,
                  std::uint8_t b) {
  ImageU8 img = ImageU8::zeros(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
    }
  return img;
}

void write_static_scene(const std::filesystem::path& dir, int frames) {
  std::filesystem::create_directories(dir);
  const ImageU8 frame = solid_rgb(96, 96, 30, 40, 35);
  for (int i = 0; i < frames; ++i)
    write_image_rgb(dir / frame_filename(i), frame);
}

TEST(CliTest, HelpExitsZeroAndListsSubcommands) {
  const CliResult r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("generate"), std::string::npos);
  EXPECT_NE(r.out.find("compare"), std::string::npos);
}

TEST(CliTest, ArgumentMistakesAreConfigurationErrors) {
  EXPECT_EQ(run({}).code, kExitConfig);
  EXPECT_EQ(run({"no-such-command"}).code, kExitConfig);
  EXPECT_EQ(run({"generate", "--bogus-flag", "1"}).code, kExitConfig);
  EXPECT_EQ(run({"--seed", "1", "train", "--loss", "focal", "--dataset", "x",
                 "--out", "y"})
                .code,
            kExitConfig);
}

TEST(CliTest, GenerateWritesRerunsUnchangedAndTracksSeed) {
  const auto dir = fresh_dir("gen");
  const auto ds = (dir / "ds").string();

  const CliResult first = run({"--seed", "5", "generate", "--out", ds,
                               "--count-positive", "6", "--count-null", "2"});
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_NE(first.out.find("generated 8 images (6 positive, 2 null)"),
            std::string::npos);

  const auto manifest = load_dataset(ds);
  EXPECT_EQ(manifest.records.size(), 8u);
  EXPECT_EQ(manifest.count_positive(), 6);
  EXPECT_EQ(manifest.count_null(), 2);
  EXPECT_GT(manifest.count_split("train"), 0);
  EXPECT_GT(manifest.count_split("val"), 0);

  const CliResult again = run({"--seed", "5", "generate", "--out", ds,
                               "--count-positive", "6", "--count-null", "2"});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_NE(again.out.find("dataset unchanged"), std::string::npos);

  const CliResult reseeded =
      run({"--seed", "6", "generate", "--out", ds, "--count-positive", "6",
           "--count-null", "2"});
  ASSERT_EQ(reseeded.code, 0) << reseeded.err;
  EXPECT_EQ(reseeded.out.find("dataset unchanged"), std::string::npos);
  EXPECT_NE(reseeded.out.find("generated 8 images"), std::string::npos);

  std::filesystem::remove_all(dir);
}

TEST(CliTest, GenerateReadsCountsAndSeedFromConfigFile) {
  const auto dir = fresh_dir("gencfg");
  const auto cfg_path = dir / "exp.json";
  write_text(cfg_path, R"({"seed": 11,
                           "dataset": {"count_positive": 3, "count_null": 1},
                           "paths": {"dataset_dir": ")" +
                           (dir / "ds").string() + R"("}})");
  const CliResult r = run({"--config", cfg_path.string(), "generate"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("generated 4 images (3 positive, 1 null)"),
            std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(CliTest, DeterministicModeRequiresAnExplicitSeed) {
  const auto dir = fresh_dir("det");
  const auto ds = (dir / "ds").string();
  const CliResult refused = run({"--deterministic", "generate", "--out", ds,
                                 "--count-positive", "1", "--count-null",
                                 "0"});
  EXPECT_EQ(refused.code, kExitConfig);
  EXPECT_NE(refused.err.find("deterministic"), std::string::npos);

  const CliResult allowed =
      run({"--deterministic", "--seed", "3", "generate", "--out", ds,
           "--count-positive", "1", "--count-null", "0"});
  EXPECT_EQ(allowed.code, 0) << allowed.err;
  std::filesystem::remove_all(dir);
}

TEST(CliTest, TrainOneEpochLogsOneRowAndTagsTheCheckpoint) {
  const auto dir = fresh_dir("train");
  const auto ds = (dir / "ds").string();
  ASSERT_EQ(run({"--seed", "5", "generate", "--out", ds, "--count-positive",
                 "6", "--count-null", "2"})
                .code,
            0);

  const auto ckpt_path = (dir / "ckpt.json").string();
  const CliResult r =
      run({"--seed", "5", "train", "--dataset", ds, "--out", ckpt_path,
           "--loss", "up", "--augment", "noisycutout", "--epochs", "1",
           "--batch-size", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("training MbULNet_UP(NoisyCutout)"), std::string::npos);
  EXPECT_NE(r.out.find("\n1, "), std::string::npos);
  EXPECT_EQ(r.out.find("\n2, "), std::string::npos);

  const ModelCheckpoint ckpt = load_checkpoint(ckpt_path);
  EXPECT_EQ(ckpt.method, "MbULNet_UP(NoisyCutout)");
  EXPECT_EQ(ckpt.log.size(), 1u);
  EXPECT_EQ(ckpt.loss.variant, LossVariant::kUp);

  std::filesystem::remove_all(dir);
}

TEST(CliTest, TrainWithoutDatasetIsAConfigurationError) {
  const CliResult r = run({"--seed", "1", "train", "--dataset",
                           "/no/such/dir", "--out", "/tmp/never.json"});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("dataset directory not found"), std::string::npos);
}

TEST(CliTest, TrackEmptySceneWritesHeaderOnlyTrack) {
  const auto dir = fresh_dir("track_empty");
  write_static_scene(dir / "frames", 53);
  write_gate_checkpoint(dir / "never.json", -10.0);

  const auto track_path = (dir / "track.csv").string();
  const CliResult r =
      run({"track", "--frames", (dir / "frames").string(), "--checkpoint",
           (dir / "never.json").string(), "--out", track_path});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("tracked 3 frames, 0 detections"), std::string::npos);

  EXPECT_EQ(read_text(track_path), std::string(kTrackHeader) + "\n");
  EXPECT_TRUE(read_track(track_path).empty());
  std::filesystem::remove_all(dir);
}

TEST(CliTest, TauOverrideIsValidatedAndApplied) {
  const auto dir = fresh_dir("tau");
  write_static_scene(dir / "frames", 51);
  write_gate_checkpoint(dir / "never.json", -10.0);
  const CliResult bad =
      run({"track", "--frames", (dir / "frames").string(), "--checkpoint",
           (dir / "never.json").string(), "--out", (dir / "t.csv").string(),
           "--tau", "300"});
  EXPECT_EQ(bad.code, kExitConfig);
  EXPECT_NE(bad.err.find("tau"), std::string::npos);

  const CliResult good =
      run({"track", "--frames", (dir / "frames").string(), "--checkpoint",
           (dir / "never.json").string(), "--out", (dir / "t.csv").string(),
           "--tau", "13"});
  EXPECT_EQ(good.code, 0) << good.err;
  std::filesystem::remove_all(dir);
}

// simulate -> track -> eval -> compare, with an always-detecting model so
// every flight frame yields one track row.
TEST(CliTest, SimulateTrackEvalCompareChain) {
  const auto dir = fresh_dir("chain");
  const auto frames = (dir / "flight").string();

  const CliResult sim =
      run({"--seed", "9", "simulate", "--out", frames, "--side", "0.6",
           "--altitude", "10", "--speed", "2.4", "--frame-width", "240",
           "--frame-height", "240"});
  ASSERT_EQ(sim.code, 0) << sim.err;
  EXPECT_NE(sim.out.find("simulated 63 frames (13 in flight"),
            std::string::npos);
  EXPECT_EQ(read_frames(frames).size(), 63u);
  const Track gt = read_ground_truth(dir / "flight" / "ground_truth.csv");
  ASSERT_EQ(gt.size(), 13u);

  write_gate_checkpoint(dir / "always.json", 10.0);
  const auto track_path = (dir / "track.csv").string();
  const CliResult tr =
      run({"track", "--frames", frames, "--checkpoint",
           (dir / "always.json").string(), "--out", track_path});
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_NE(tr.out.find("tracked 13 frames, 13 detections"),
            std::string::npos);
  const auto points = read_track(track_path);
  ASSERT_EQ(points.size(), 13u);
  EXPECT_DOUBLE_EQ(points.front().t_s, 4.0);  // first frame after the lead-in

  const auto report_path = (dir / "report.json").string();
  const CliResult ev = run({"eval", "--track", track_path, "--truth",
                            (dir / "flight" / "ground_truth.csv").string(),
                            "--report", report_path, "--plots",
                            (dir / "plots").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(ev.out.find("rmse_3d"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "plots" / "path.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "plots" / "z.png"));

  // The JSON report agrees with a direct evaluation of the same files.
  Track pred;
  for (const auto& p : points) pred.push_back(p.position());
  const RmseReport direct = evaluate_track(pred, gt);
  const auto j = nlohmann::json::parse(read_text(report_path));
  EXPECT_EQ(j.at("sample_count").get<std::size_t>(), direct.sample_count);
  EXPECT_NEAR(j.at("rmse_3d_m").get<double>(), direct.rmse_3d_m, 1e-12);

  const CliResult cmp = run(
      {"compare", "--truth",
       "sq=" + (dir / "flight" / "ground_truth.csv").string(), "--track",
       "MethodA/sq=" + track_path, "--track", "MethodB/sq=" + track_path,
       "--plots", (dir / "cplots").string(), "--report",
       (dir / "cmp.json").string()});
  ASSERT_EQ(cmp.code, 0) << cmp.err;
  EXPECT_NE(cmp.out.find("MethodA"), std::string::npos);
  EXPECT_NE(cmp.out.find("overall"), std::string::npos);
  EXPECT_NE(cmp.out.find("improvement of MethodB vs MethodA: 0.0%"),
            std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "cplots" / "path_sq.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "cplots" / "z_sq.png"));

  std::filesystem::remove_all(dir);
}

TEST(CliTest, AugmentPreviewWritesBeforeAndAfterImages) {
  const auto dir = fresh_dir("preview");
  const CliResult r =
      run({"--seed", "4", "augment-preview", "--out", dir.string(), "--id",
           "2", "--augment", "spcutout"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "preview_2_before.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "preview_2_after.png"));
  const BinaryImage before = read_binary_png(dir / "preview_2_before.png");
  EXPECT_GT(count_nonzero(before), 0u);  // a rendered marker, not a null
  std::filesystem::remove_all(dir);
}

TEST(CliTest, EvalWithMissingFilesIsAnIoError) {
  const CliResult r =
      run({"eval", "--track", "/no/track.csv", "--truth", "/no/gt.csv"});
  EXPECT_EQ(r.code, kExitRuntime);
}

}  // namespace
}  // namespace mbul

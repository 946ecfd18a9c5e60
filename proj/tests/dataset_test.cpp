#include "mbul/dataset.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "mbul/blob.hpp"
#include "mbul/common.hpp"
#include "mbul/geometry.hpp"
#include "mbul/image_io.hpp"
#include "mbul/synthgen.hpp"

namespace mbul {
namespace {

namespace fs = std::filesystem;

CameraIntrinsics synth_camera() {
  return make_camera(299, 299, deg_to_rad(12.5), 12.5);
}

// Temp directory removed when the test scope ends.
struct ScopedDir {
  fs::path path;
  explicit ScopedDir(const std::string& name)
      : path(fs::temp_directory_path() / ("mbul_dataset_" + name)) {
    fs::remove_all(path);
  }
  ~ScopedDir() { fs::remove_all(path); }
};

PoseSampler seeded_sampler(std::uint64_t seed) {
  PoseSampler s;
  s.seed = seed;
  return s;
}

TEST(GenerateDataset, WritesRequestedCountsExactly) {
  const ScopedDir dir("counts");
  const auto manifest = generate_dataset(12, 5, seeded_sampler(101),
                                         synth_camera(), MarkerSpec{}, dir.path);
  ASSERT_EQ(manifest.records.size(), 17u);
  EXPECT_EQ(manifest.count_positive(), 12);
  EXPECT_EQ(manifest.count_null(), 5);
  for (const auto& rec : manifest.records) {
    const BinaryImage img = load_sample_image(manifest, rec);
    ASSERT_EQ(img.width, 299);
    ASSERT_EQ(img.height, 299);
    ASSERT_TRUE(is_binary(img));
    if (rec.m == 0) {
      EXPECT_EQ(count_nonzero(img), 0u);  // null samples are all-background
    } else {
      EXPECT_GT(count_nonzero(img), 0u);
    }
    EXPECT_TRUE(fs::exists(dir.path / sidecar_filename(rec.id)));
  }
}

TEST(GenerateDataset, SinglePositiveYieldsOneValidRecord) {
  const ScopedDir dir("single");
  const auto manifest = generate_dataset(1, 0, seeded_sampler(102),
                                         synth_camera(), MarkerSpec{}, dir.path);
  ASSERT_EQ(manifest.records.size(), 1u);
  const SampleRecord& r = manifest.records.front();
  EXPECT_EQ(r.m, 1);
  EXPECT_GT(r.d, 0.0);
  EXPECT_GE(r.z, 2.0);
  EXPECT_LE(r.z, 20.0);
  const double qnorm = std::sqrt(r.qw * r.qw + r.qp * r.qp + r.qq * r.qq +
                                 r.qr * r.qr);
  EXPECT_NEAR(qnorm, 1.0, 1e-12);
  EXPECT_EQ(r.split, "train");
}

TEST(GenerateDataset, SameSeedRegeneratesByteIdenticalFiles) {
  const ScopedDir a("rep_a"), b("rep_b"), c("rep_c");
  const auto cam = synth_camera();
  const auto ma =
      generate_dataset(25, 6, seeded_sampler(7), cam, MarkerSpec{}, a.path);
  const auto mb =
      generate_dataset(25, 6, seeded_sampler(7), cam, MarkerSpec{}, b.path);
  const auto mc =
      generate_dataset(25, 6, seeded_sampler(8), cam, MarkerSpec{}, c.path);
  for (const auto& rec : ma.records) {
    EXPECT_EQ(read_bytes(a.path / image_filename(rec.id)),
              read_bytes(b.path / image_filename(rec.id)));
    EXPECT_EQ(read_text(a.path / sidecar_filename(rec.id)),
              read_text(b.path / sidecar_filename(rec.id)));
  }
  EXPECT_EQ(read_text(a.path / kManifestFilename),
            read_text(b.path / kManifestFilename));
  EXPECT_EQ(hash_dataset(ma), hash_dataset(mb));
  EXPECT_NE(hash_dataset(ma), hash_dataset(mc));
}

TEST(GenerateDataset, PerImageStreamsAreOrderIndependent) {
  const ScopedDir dir("streams");
  const auto cam = synth_camera();
  const MarkerSpec spec;
  const auto sampler = seeded_sampler(55);
  const auto manifest =
      generate_dataset(6, 2, sampler, cam, spec, dir.path);
  const MarkerLayout layout = build_layout(spec);
  // Rebuilding any single sample in isolation must reproduce the very same
  // pixels and ground truth that the sequential pass wrote.
  for (long id : {0L, 3L, 5L, 7L}) {
    const LabeledBinaryImage img =
        generate_sample(id, 6, sampler, cam, spec, layout);
    const BinaryImage on_disk = read_binary_png(dir.path / image_filename(id));
    EXPECT_EQ(img.pixels.data, on_disk.data) << "id " << id;
    const SampleRecord rebuilt =
        make_record(id, img, derive_seed(sampler.seed,
                                         static_cast<std::uint64_t>(id)));
    EXPECT_EQ(format_sidecar(rebuilt) + "\n",
              read_text(dir.path / sidecar_filename(id)));
  }
}

TEST(GenerateDataset, UnwritablePathThrowsIoError) {
  const ScopedDir dir("blocked");
  fs::create_directories(dir.path);
  write_text(dir.path / "file", "x");
  EXPECT_THROW(generate_dataset(1, 0, seeded_sampler(1), synth_camera(),
                                MarkerSpec{}, dir.path / "file" / "sub"),
               IoError);
}

TEST(GenerateDataset, SplitSizesFollowTheDefaultRatio) {
  EXPECT_EQ(train_count_for_total(6800), 5400);
  EXPECT_EQ(train_count_for_total(0), 0);
  const ScopedDir dir("split");
  const auto manifest = generate_dataset(40, 10, seeded_sampler(9),
                                         synth_camera(), MarkerSpec{}, dir.path);
  EXPECT_EQ(manifest.count_split("train"), train_count_for_total(50));
  EXPECT_EQ(manifest.count_split("val"), 50 - train_count_for_total(50));
  for (const auto& rec : manifest.records)
    EXPECT_TRUE(rec.split == "train" || rec.split == "val");
}

TEST(GenerateDataset, LoadReturnsTheRecordsThatWereWritten) {
  const ScopedDir dir("load");
  const auto written = generate_dataset(8, 3, seeded_sampler(21),
                                        synth_camera(), MarkerSpec{}, dir.path);
  const auto loaded = load_dataset(dir.path);
  ASSERT_EQ(loaded.records.size(), written.records.size());
  for (std::size_t i = 0; i < written.records.size(); ++i)
    EXPECT_EQ(format_record(loaded.records[i]),
              format_record(written.records[i]));
}

TEST(GenerateDataset, InfoFileMatchesContent) {
  const ScopedDir dir("info");
  const auto manifest = generate_dataset(5, 2, seeded_sampler(33),
                                         synth_camera(), MarkerSpec{}, dir.path);
  const DatasetInfo info = read_dataset_info(dir.path);
  EXPECT_EQ(info.seed, 33u);
  EXPECT_EQ(info.count_positive, 5);
  EXPECT_EQ(info.count_null, 2);
  EXPECT_EQ(info.content_hash, hash_dataset(manifest));
}

// Full default configuration: every positive sample's lit pixels must agree
// with the stored ground truth to within one pixel in both centroid position
// and enclosing-circle diameter, diameters must exceed the smallest size the
// augmentation windows are allowed to blank out, and the depth draw must
// look uniform over [2, 20] m.
TEST(GenerateDataset, DefaultConfigurationSatisfiesLabelInvariants) {
  const ScopedDir dir("full");
  const auto cam = synth_camera();
  const auto manifest = generate_dataset(5500, 1300, seeded_sampler(2026),
                                         cam, MarkerSpec{}, dir.path);
  ASSERT_EQ(manifest.records.size(), 6800u);
  EXPECT_EQ(manifest.count_positive(), 5500);
  EXPECT_EQ(manifest.count_null(), 1300);
  EXPECT_EQ(manifest.count_split("train"), 5400);
  EXPECT_EQ(manifest.count_split("val"), 1400);

  long png_files = 0;
  for (const auto& entry : fs::directory_iterator(dir.path))
    png_files += (entry.path().extension() == ".png");
  EXPECT_EQ(png_files, 6800);

  const double cx0 = 0.5 * (cam.width_px - 1);
  const double cy0 = 0.5 * (cam.height_px - 1);
  double min_d = 1e9, sum_z = 0.0;
  double worst_centroid = 0.0, worst_diam = 0.0;
  for (const auto& rec : manifest.records) {
    const BinaryImage img = load_sample_image(manifest, rec);
    ASSERT_TRUE(is_binary(img));
    if (rec.m == 0) {
      ASSERT_EQ(count_nonzero(img), 0u);
      continue;
    }
    ASSERT_GE(rec.z, 2.0);
    ASSERT_LE(rec.z, 20.0);
    min_d = std::min(min_d, rec.d);
    sum_z += rec.z;
    const BlobStats stats = blob_stats(img);
    const double centroid_err =
        std::hypot(stats.cx - cx0 - rec.u, stats.cy - cy0 - rec.v);
    const double diam_err = std::abs(2.0 * stats.mec.r - rec.d);
    ASSERT_LE(centroid_err, 1.0) << "id " << rec.id << " z " << rec.z;
    ASSERT_LE(diam_err, 1.0) << "id " << rec.id << " z " << rec.z;
    worst_centroid = std::max(worst_centroid, centroid_err);
    worst_diam = std::max(worst_diam, diam_err);
  }
  EXPECT_GT(min_d, 31.0);
  EXPECT_NEAR(sum_z / 5500.0, 11.0, 0.5);
  ::testing::Test::RecordProperty("worst_centroid_px", worst_centroid);
  ::testing::Test::RecordProperty("worst_diameter_px", worst_diam);
}

}  // namespace
}  // namespace mbul

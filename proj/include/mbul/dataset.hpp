// Dataset generation and on-disk layout.
//
// A dataset directory contains, for each sample id:
//   img_XXXXXX.png   losslessly compressed single-channel image ({0,255})
//   img_XXXXXX.txt   one-line ground-truth sidecar (fields as in the
//                    manifest minus the split column)
// plus manifest.csv (all records with their train/val split assignment)
// and dataset_info.json (requested counts, master seed, and a content hash
// of everything above, used for cheap change detection).
//
// Every per-image random stream is derived from (master seed, sample id),
// so images can be produced in any order — serially or in parallel — and
// the resulting files are identical byte for byte. Regenerating with the
// same seed therefore reproduces the dataset exactly.
#pragma once

#include <cstdint>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbul/common.hpp"
#include "mbul/image_io.hpp"
#include "mbul/synthgen.hpp"

namespace mbul {

inline constexpr const char* kManifestFilename = "manifest.csv";
inline constexpr const char* kDatasetInfoFilename = "dataset_info.json";

// Default split sizes; other totals use the same train fraction, rounded.
inline constexpr long kDefaultTrainCount = 5400;
inline constexpr long kDefaultTotalCount = 6800;

struct DatasetManifest {
  std::filesystem::path dir;
  std::vector<SampleRecord> records;

  long count_with(int m) const {
    long n = 0;
    for (const auto& r : records) n += (r.m == m);
    return n;
  }
  long count_positive() const { return count_with(1); }
  long count_null() const { return count_with(0); }
  long count_split(const std::string& split) const {
    long n = 0;
    for (const auto& r : records) n += (r.split == split);
    return n;
  }
};

struct DatasetInfo {
  std::uint64_t seed = 0;
  long count_positive = 0;
  long count_null = 0;
  std::uint64_t content_hash = 0;
};

inline std::string to_hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Split assignment: a seeded shuffle of all ids, the first chunk is "train".
// ---------------------------------------------------------------------------

inline long train_count_for_total(long total) {
  const double fraction =
      static_cast<double>(kDefaultTrainCount) / kDefaultTotalCount;
  long n = std::llround(static_cast<double>(total) * fraction);
  if (n < 0) n = 0;
  if (n > total) n = total;
  return n;
}

inline std::vector<std::string> assign_splits(long total, std::uint64_t seed) {
  std::vector<long> ids(static_cast<std::size_t>(total));
  std::iota(ids.begin(), ids.end(), 0L);
  Rng rng(derive_seed(seed, fnv1a("split")));
  for (long i = total - 1; i > 0; --i)
    std::swap(ids[static_cast<std::size_t>(i)],
              ids[static_cast<std::size_t>(rng.uniform_int(0, i))]);
  const long n_train = train_count_for_total(total);
  std::vector<std::string> split(static_cast<std::size_t>(total), "val");
  for (long k = 0; k < n_train; ++k)
    split[static_cast<std::size_t>(ids[static_cast<std::size_t>(k)])] = "train";
  return split;
}

// ---------------------------------------------------------------------------
// Per-sample generation (pure in (seed, id); order-independent)
// ---------------------------------------------------------------------------

inline LabeledBinaryImage generate_sample(long id, long count_positive,
                                          const PoseSampler& sampler,
                                          const CameraIntrinsics& cam,
                                          const MarkerSpec& marker,
                                          const MarkerLayout& layout) {
  if (id < count_positive) {
    Rng rng(derive_seed(sampler.seed, static_cast<std::uint64_t>(id)));
    return draw_positive_sample(sampler, cam, marker, layout, rng);
  }
  return make_null_image(cam);
}

// ---------------------------------------------------------------------------
// Content hash: filenames and bytes of every image and sidecar in id order,
// then the manifest text, folded through one FNV-1a stream.
// ---------------------------------------------------------------------------

namespace detail {
inline std::uint64_t fold(std::uint64_t h, const std::string& s) {
  return fnv1a(s.data(), s.size(), h);
}
inline std::uint64_t fold(std::uint64_t h, const std::vector<std::uint8_t>& b) {
  return fnv1a(b.data(), b.size(), h);
}
}  // namespace detail

inline std::uint64_t hash_dataset(const DatasetManifest& manifest) {
  std::uint64_t h = fnv1a("mbul-dataset");
  for (const auto& r : manifest.records) {
    h = detail::fold(h, image_filename(r.id));
    h = detail::fold(h, read_bytes(manifest.dir / image_filename(r.id)));
    h = detail::fold(h, sidecar_filename(r.id));
    h = detail::fold(h, read_text(manifest.dir / sidecar_filename(r.id)));
  }
  std::ostringstream ms;
  write_manifest(ms, manifest.records);
  return detail::fold(h, ms.str());
}

// ---------------------------------------------------------------------------
// dataset_info.json
// ---------------------------------------------------------------------------

inline void write_dataset_info(const std::filesystem::path& dir,
                               const DatasetInfo& info) {
  nlohmann::json j;
  j["seed"] = info.seed;
  j["count_positive"] = info.count_positive;
  j["count_null"] = info.count_null;
  j["content_hash"] = to_hex64(info.content_hash);
  write_text(dir / kDatasetInfoFilename, j.dump(2) + "\n");
}

inline DatasetInfo read_dataset_info(const std::filesystem::path& dir) {
  const std::string text = read_text(dir / kDatasetInfoFilename);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("dataset_info.json: parse error: " + std::string(e.what()));
  }
  DatasetInfo info;
  try {
    info.seed = j.at("seed").get<std::uint64_t>();
    info.count_positive = j.at("count_positive").get<long>();
    info.count_null = j.at("count_null").get<long>();
    info.content_hash =
        std::stoull(j.at("content_hash").get<std::string>(), nullptr, 16);
  } catch (const std::exception& e) {
    throw DataError("dataset_info.json: bad contents: " + std::string(e.what()));
  }
  return info;
}

// ---------------------------------------------------------------------------
// Generation and loading
// ---------------------------------------------------------------------------

inline DatasetManifest generate_dataset(long count_positive, long count_null,
                                        const PoseSampler& sampler,
                                        const CameraIntrinsics& cam,
                                        const MarkerSpec& marker,
                                        const std::filesystem::path& out_dir) {
  check_config(count_positive >= 0 && count_null >= 0,
               "generate_dataset: counts must be non-negative");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  check_io(!ec && std::filesystem::is_directory(out_dir),
           "generate_dataset: cannot create output directory " +
               out_dir.string());

  const MarkerLayout layout = build_layout(marker);
  const long total = count_positive + count_null;
  const std::vector<std::string> splits = assign_splits(total, sampler.seed);

  DatasetManifest manifest;
  manifest.dir = out_dir;
  manifest.records.reserve(static_cast<std::size_t>(total));
  std::uint64_t h = fnv1a("mbul-dataset");
  for (long id = 0; id < total; ++id) {
    const LabeledBinaryImage img =
        generate_sample(id, count_positive, sampler, cam, marker, layout);
    SampleRecord rec = make_record(
        id, img, derive_seed(sampler.seed, static_cast<std::uint64_t>(id)));
    rec.split = splits[static_cast<std::size_t>(id)];

    const std::vector<std::uint8_t> png = encode_binary_png(img.pixels);
    write_bytes(out_dir / image_filename(id), png);
    const std::string sidecar = format_sidecar(rec) + "\n";
    write_text(out_dir / sidecar_filename(id), sidecar);

    h = detail::fold(h, image_filename(id));
    h = detail::fold(h, png);
    h = detail::fold(h, sidecar_filename(id));
    h = detail::fold(h, sidecar);
    manifest.records.push_back(std::move(rec));
  }

  std::ostringstream ms;
  write_manifest(ms, manifest.records);
  write_text(out_dir / kManifestFilename, ms.str());
  h = detail::fold(h, ms.str());

  DatasetInfo info;
  info.seed = sampler.seed;
  info.count_positive = count_positive;
  info.count_null = count_null;
  info.content_hash = h;
  write_dataset_info(out_dir, info);
  return manifest;
}

inline DatasetManifest load_dataset(const std::filesystem::path& dir) {
  std::istringstream is(read_text(dir / kManifestFilename));
  DatasetManifest manifest;
  manifest.dir = dir;
  manifest.records = read_manifest(is);
  return manifest;
}

inline BinaryImage load_sample_image(const DatasetManifest& manifest,
                                     const SampleRecord& rec) {
  return read_binary_png(manifest.dir / image_filename(rec.id));
}

}  // namespace mbul

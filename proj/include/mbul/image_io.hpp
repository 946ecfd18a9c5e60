// Image and byte-level file I/O built on OpenCV codecs.
//
// Binary images live in memory with pixel values {0, 1}; on disk they are
// single-channel PNGs with values {0, 255}. Encoding goes through
// cv::imencode with fixed parameters so that identical pixel content always
// produces identical bytes, which the dataset layer relies on for
// hash-based change detection.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include "mbul/common.hpp"
#include "mbul/image.hpp"

namespace mbul {

inline void write_bytes(const std::filesystem::path& path,
                        const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check_io(out.good(), "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  check_io(out.good(), "write failed: " + path.string());
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check_io(in.good(), "cannot open for reading: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  check_io(!in.bad(), "read failed: " + path.string());
  return bytes;
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check_io(out.good(), "cannot open for writing: " + path.string());
  out << text;
  out.flush();
  check_io(out.good(), "write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

// Encodes a {0,1} single-channel image as a {0,255} grey PNG.
inline std::vector<std::uint8_t> encode_binary_png(const BinaryImage& img) {
  check(img.channels == 1, "encode_binary_png: expected single channel");
  cv::Mat mat(img.height, img.width, CV_8UC1);
  for (int y = 0; y < img.height; ++y) {
    std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width; ++x)
      row[x] = img.at(x, y) ? 255 : 0;
  }
  std::vector<std::uint8_t> bytes;
  const bool ok = cv::imencode(".png", mat, bytes);
  check_io(ok, "encode_binary_png: PNG encoding failed");
  return bytes;
}

inline BinaryImage decode_binary_png(const std::vector<std::uint8_t>& bytes,
                                     const std::string& what = "<memory>") {
  const cv::Mat mat = cv::imdecode(bytes, cv::IMREAD_GRAYSCALE);
  check_io(!mat.empty(), "decode_binary_png: not a decodable image: " + what);
  BinaryImage img = ImageU8::zeros(mat.cols, mat.rows, 1);
  for (int y = 0; y < mat.rows; ++y) {
    const std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      check_data(row[x] == 0 || row[x] == 255,
                 "decode_binary_png: non-binary pixel value in " + what);
      img.at(x, y) = row[x] ? 1 : 0;
    }
  }
  return img;
}

inline void write_binary_png(const std::filesystem::path& path,
                             const BinaryImage& img) {
  write_bytes(path, encode_binary_png(img));
}

inline BinaryImage read_binary_png(const std::filesystem::path& path) {
  return decode_binary_png(read_bytes(path), path.string());
}

// RGB helpers for the tracking front end (memory order R, G, B; OpenCV
// stores BGR on its side of the fence).
inline ImageU8 from_bgr_mat(const cv::Mat& mat) {
  check(mat.type() == CV_8UC3, "from_bgr_mat: expected 8-bit BGR");
  ImageU8 img = ImageU8::zeros(mat.cols, mat.rows, 3);
  for (int y = 0; y < mat.rows; ++y) {
    const cv::Vec3b* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < mat.cols; ++x) {
      img.at(x, y, 0) = row[x][2];
      img.at(x, y, 1) = row[x][1];
      img.at(x, y, 2) = row[x][0];
    }
  }
  return img;
}

inline cv::Mat to_bgr_mat(const ImageU8& img) {
  check(img.channels == 3, "to_bgr_mat: expected 3 channels");
  cv::Mat mat(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    cv::Vec3b* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      row[x][0] = img.at(x, y, 2);
      row[x][1] = img.at(x, y, 1);
      row[x][2] = img.at(x, y, 0);
    }
  }
  return mat;
}

inline void write_image_rgb(const std::filesystem::path& path,
                            const ImageU8& img) {
  std::vector<std::uint8_t> bytes;
  const bool ok = cv::imencode(path.extension().string().empty()
                                   ? std::string(".png")
                                   : path.extension().string(),
                               to_bgr_mat(img), bytes);
  check_io(ok, "write_image_rgb: encoding failed for " + path.string());
  write_bytes(path, bytes);
}

inline ImageU8 read_image_rgb(const std::filesystem::path& path) {
  const cv::Mat mat = cv::imdecode(read_bytes(path), cv::IMREAD_COLOR);
  check_io(!mat.empty(), "read_image_rgb: not a decodable image: " +
                             path.string());
  return from_bgr_mat(mat);
}

// ---------------------------------------------------------------------------
// Frame sources
//
// A frame sequence is either a directory of image files (consumed in
// filename order, so zero-padded numbering plays nicely) or any video
// container OpenCV can open.
// ---------------------------------------------------------------------------

inline std::vector<std::filesystem::path> list_frame_files(
    const std::filesystem::path& dir) {
  check_io(std::filesystem::is_directory(dir),
           "list_frame_files: not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline std::vector<ImageU8> read_frame_dir(const std::filesystem::path& dir) {
  std::vector<ImageU8> frames;
  for (const std::filesystem::path& file : list_frame_files(dir))
    frames.push_back(read_image_rgb(file));
  check_data(!frames.empty(),
             "read_frame_dir: no image files in " + dir.string());
  return frames;
}

inline std::vector<ImageU8> read_video(const std::filesystem::path& path) {
  check_io(std::filesystem::is_regular_file(path),
           "read_video: no such file: " + path.string());
  cv::VideoCapture cap(path.string());
  check_io(cap.isOpened(), "read_video: cannot open " + path.string());
  std::vector<ImageU8> frames;
  cv::Mat frame;
  while (cap.read(frame)) {
    cv::Mat bgr;
    if (frame.type() == CV_8UC3) {
      bgr = frame;
    } else {
      cv::cvtColor(frame, bgr, cv::COLOR_GRAY2BGR);
    }
    frames.push_back(from_bgr_mat(bgr));
  }
  check_data(!frames.empty(), "read_video: no frames in " + path.string());
  return frames;
}

// Dispatch by path type: directory of images or a video file.
inline std::vector<ImageU8> read_frames(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return read_frame_dir(path);
  return read_video(path);
}

inline std::string frame_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d.png", index);
  return buf;
}

inline void write_frame_dir(const std::filesystem::path& dir,
                            const std::vector<ImageU8>& frames) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i)
    write_image_rgb(dir / frame_filename(static_cast<int>(i)), frames[i]);
}

}  // namespace mbul

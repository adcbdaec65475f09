#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace approx8 {

/// Raw IDX file: big-endian header (two zero bytes, type code, rank), one
/// big-endian u32 per dimension, then the payload. Only unsigned-byte
/// payloads (type 0x08) are supported.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t element_count() const;
};

IdxArray parse_idx(std::span<const std::uint8_t> bytes);
IdxArray read_idx(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_idx(const IdxArray& array);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

/// Row-major samples: images scaled to [0, 1], labels one-hot.
struct Dataset {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> images;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> labels;
  std::vector<int> label_index;

  Eigen::Index rows() const { return images.rows(); }
  /// First n rows (or all, if n exceeds the size).
  Dataset head(Eigen::Index n) const;
};

Dataset make_dataset(const IdxArray& images, const IdxArray& labels, int n_classes = 10);

/// Loads `<dir>/<prefix>-images-idx3-ubyte` and `<dir>/<prefix>-labels-idx1-ubyte`.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

}  // namespace approx8

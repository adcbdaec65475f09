#include "approx8/idx.hpp"

#include <fstream>
#include <iterator>

#include "approx8/errors.hpp"

namespace approx8 {

namespace {

constexpr std::uint8_t kUnsignedByte = 0x08;

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("idx: cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::size_t IdxArray::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw ParseError("idx: truncated header, expected 4 bytes but file has " +
                                             std::to_string(bytes.size()), bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw ParseError("idx: bad magic, leading bytes must be zero", 0);
  if (bytes[2] != kUnsignedByte)
    throw ParseError("idx: unsupported element type 0x" + std::to_string(bytes[2]) +
                         " (only unsigned byte 0x08)", 2);
  const std::size_t rank = bytes[3];
  if (rank == 0) throw ParseError("idx: rank must be >= 1", 3);
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header)
    throw ParseError("idx: truncated dimension list, expected " + std::to_string(header) +
                         " header bytes but file has " + std::to_string(bytes.size()),
                     bytes.size());
  IdxArray a;
  for (std::size_t i = 0; i < rank; ++i) a.dims.push_back(read_be32(bytes, 4 + 4 * i));
  const std::size_t expected = header + a.element_count();
  if (bytes.size() != expected)
    throw ParseError("idx: payload length mismatch, expected " + std::to_string(expected) +
                         " bytes but file has " + std::to_string(bytes.size()),
                     std::min(bytes.size(), expected));
  a.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return a;
}

IdxArray read_idx(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_idx(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

std::vector<std::uint8_t> serialize_idx(const IdxArray& array) {
  if (array.dims.empty() || array.dims.size() > 255) throw UsageError("idx: rank must be in [1, 255]");
  if (array.data.size() != array.element_count()) throw UsageError("idx: data size does not match dims");
  std::vector<std::uint8_t> out = {0, 0, kUnsignedByte, static_cast<std::uint8_t>(array.dims.size())};
  for (auto d : array.dims) put_be32(out, d);
  out.insert(out.end(), array.data.begin(), array.data.end());
  return out;
}

void write_idx(const std::filesystem::path& path, const IdxArray& array) {
  const auto bytes = serialize_idx(array);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("idx: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Dataset make_dataset(const IdxArray& images, const IdxArray& labels, int n_classes) {
  if (images.dims.size() < 2) throw InputError("idx: image file must have rank >= 2");
  if (labels.dims.size() != 1) throw InputError("idx: label file must have rank 1");
  if (images.dims[0] != labels.dims[0])
    throw InputError("idx: " + std::to_string(images.dims[0]) + " images but " +
                     std::to_string(labels.dims[0]) + " labels");
  const auto rows = static_cast<Eigen::Index>(images.dims[0]);
  const auto cols = static_cast<Eigen::Index>(images.element_count() / images.dims[0]);
  Dataset d;
  d.images.resize(rows, cols);
  d.labels = decltype(d.labels)::Zero(rows, n_classes);
  d.label_index.resize(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c)
      d.images(r, c) = static_cast<float>(images.data[static_cast<std::size_t>(r * cols + c)]) / 255.0f;
    const int label = labels.data[static_cast<std::size_t>(r)];
    if (label >= n_classes)
      throw InputError("idx: label " + std::to_string(label) + " at row " + std::to_string(r) +
                       " exceeds class count " + std::to_string(n_classes));
    d.labels(r, label) = 1.0f;
    d.label_index[static_cast<std::size_t>(r)] = label;
  }
  return d;
}

Dataset Dataset::head(Eigen::Index n) const {
  n = std::min(n, rows());
  Dataset d;
  d.images = images.topRows(n);
  d.labels = labels.topRows(n);
  d.label_index.assign(label_index.begin(), label_index.begin() + n);
  return d;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  return make_dataset(read_idx(images_path), read_idx(labels_path));
}

}  // namespace approx8

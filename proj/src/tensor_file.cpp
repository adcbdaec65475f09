#include "approx8/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "approx8/errors.hpp"

namespace approx8 {

namespace {

constexpr char kMagic[4] = {'A', '8', 'T', '1'};
constexpr std::size_t kFixedHeader = 24;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U u;
  std::memcpy(&u, &v, sizeof u);
  for (std::size_t i = 0; i < sizeof u; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> b, std::size_t off) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof u; ++i) u |= static_cast<U>(b[off + i]) << (8 * i);
  T v;
  std::memcpy(&v, &u, sizeof v);
  return v;
}

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::size_t payload_bytes(TensorTag tag, std::size_t n) {
  switch (tag) {
    case TensorTag::F32: return 4 * n;
    case TensorTag::Codes8: return n;
    case TensorTag::PackedBits: return (n + 7) / 8;
  }
  return 0;
}

}  // namespace

TensorFile TensorFile::from_floats(std::vector<float> v, std::vector<std::size_t> shape) {
  if (product(shape) != v.size()) throw UsageError("tensor: shape does not match value count");
  TensorFile t;
  t.tag = TensorTag::F32;
  t.shape = std::move(shape);
  t.values = std::move(v);
  return t;
}

TensorFile TensorFile::from_quantized(QuantizedTensor q) {
  TensorFile t;
  t.tag = q.format == CodeFormat::PackedBits ? TensorTag::PackedBits : TensorTag::Codes8;
  t.shape = q.shape;
  t.quantized = std::move(q);
  return t;
}

std::vector<std::uint8_t> serialize_tensor(const TensorFile& t) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<std::uint8_t>(t.tag));
  const auto& q = t.quantized;
  switch (t.tag) {
    case TensorTag::F32:
      out.insert(out.end(), {0, 0, 0});
      put_le(out, 1.0f);
      put_le(out, 0.0f);
      put_le(out, 0.0f);
      break;
    case TensorTag::Codes8:
      out.push_back(static_cast<std::uint8_t>(q.spec.kind));
      out.push_back(static_cast<std::uint8_t>(q.spec.norm.kind));
      out.push_back(static_cast<std::uint8_t>(static_cast<std::int8_t>(q.spec.norm.decades)));
      put_le(out, q.scale);
      put_le(out, 0.0f);
      put_le(out, 0.0f);
      break;
    case TensorTag::PackedBits:
      out.insert(out.end(), {kOneBitKindTag, 0, 0});
      put_le(out, 1.0f);
      put_le(out, q.pos_level);
      put_le(out, q.neg_level);
      break;
  }
  put_le(out, static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) put_le(out, static_cast<std::uint64_t>(d));

  const std::size_t n = product(t.shape);
  if (t.tag == TensorTag::F32) {
    if (t.values.size() != n) throw UsageError("tensor: value count does not match shape");
    for (float v : t.values) put_le(out, v);
  } else {
    if (q.codes.size() != payload_bytes(t.tag, n)) throw UsageError("tensor: code count does not match shape");
    out.insert(out.end(), q.codes.begin(), q.codes.end());
  }
  return out;
}

TensorFile parse_tensor(std::span<const std::uint8_t> b) {
  if (b.size() < kFixedHeader)
    throw ParseError("tensor: truncated header, expected " + std::to_string(kFixedHeader) +
                         " bytes but file has " + std::to_string(b.size()), b.size());
  if (std::memcmp(b.data(), kMagic, 4) != 0) throw ParseError("tensor: bad magic, expected A8T1", 0);
  if (b[4] > 2) throw ParseError("tensor: unknown dtype tag " + std::to_string(b[4]), 4);

  TensorFile t;
  t.tag = static_cast<TensorTag>(b[4]);
  const std::uint32_t rank = get_le<std::uint32_t>(b, 20);
  const std::size_t header = kFixedHeader + 8 * static_cast<std::size_t>(rank);
  if (rank > 64 || b.size() < header)
    throw ParseError("tensor: truncated dimension list (rank " + std::to_string(rank) + ")", b.size());
  for (std::uint32_t i = 0; i < rank; ++i)
    t.shape.push_back(static_cast<std::size_t>(get_le<std::uint64_t>(b, kFixedHeader + 8 * i)));

  const std::size_t n = product(t.shape);
  const std::size_t expected = header + payload_bytes(t.tag, n);
  if (b.size() != expected)
    throw ParseError("tensor: payload length mismatch, expected " + std::to_string(expected) +
                         " bytes but file has " + std::to_string(b.size()),
                     std::min(b.size(), expected));

  const auto payload = b.subspan(header);
  if (t.tag == TensorTag::F32) {
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) t.values[i] = get_le<float>(payload, 4 * i);
    return t;
  }
  auto& q = t.quantized;
  q.shape = t.shape;
  q.codes.assign(payload.begin(), payload.end());
  if (t.tag == TensorTag::PackedBits) {
    if (b[5] != kOneBitKindTag) throw ParseError("tensor: packed bits must carry the 1-bit kind tag", 5);
    q.format = CodeFormat::PackedBits;
    q.pos_level = get_le<float>(b, 12);
    q.neg_level = get_le<float>(b, 16);
    return t;
  }
  if (b[5] < 1 || b[5] > 4) throw ParseError("tensor: unknown data kind " + std::to_string(b[5]), 5);
  if (b[6] > 2) throw ParseError("tensor: unknown normalization " + std::to_string(b[6]), 6);
  q.format = CodeFormat::Byte;
  q.spec.kind = static_cast<DataKind>(b[5]);
  q.spec.norm.kind = static_cast<NormKind>(b[6]);
  q.spec.norm.decades = static_cast<std::int8_t>(b[7]);
  q.scale = get_le<float>(b, 8);
  if (!(q.scale > 0.0f)) throw ParseError("tensor: scale must be > 0", 8);
  return t;
}

void write_tensor_file(const std::filesystem::path& path, const TensorFile& t) {
  const auto bytes = serialize_tensor(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("tensor: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("tensor: cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_tensor(bytes);
}

}  // namespace approx8

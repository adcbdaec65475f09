#include "approx8/onebit.hpp"

#include <string>

#include "approx8/errors.hpp"

namespace approx8 {

QuantizedTensor onebit_quantize(std::span<const float> g, OneBitState& state) {
  if (state.residual.size() != g.size())
    throw UsageError("onebit: residual has " + std::to_string(state.residual.size()) +
                     " elements but gradient has " + std::to_string(g.size()));
  const std::size_t n = g.size();
  QuantizedTensor q;
  q.format = CodeFormat::PackedBits;
  q.shape = {n};
  q.codes.assign((n + 7) / 8, 0);

  std::vector<float> u(n);
  double pos_sum = 0.0, neg_sum = 0.0;
  std::size_t pos_n = 0, neg_n = 0;
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = g[i] + state.residual[i];
    if (u[i] >= 0.0f) {
      q.codes[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
      pos_sum += u[i];
      ++pos_n;
    } else {
      neg_sum += u[i];
      ++neg_n;
    }
  }
  q.pos_level = pos_n ? static_cast<float>(pos_sum / static_cast<double>(pos_n)) : 0.0f;
  q.neg_level = neg_n ? static_cast<float>(neg_sum / static_cast<double>(neg_n)) : 0.0f;
  for (std::size_t i = 0; i < n; ++i) {
    const float r = packed_bit(q.codes, i) ? q.pos_level : q.neg_level;
    state.residual[i] = u[i] - r;
  }
  return q;
}

void onebit_decode_into(const QuantizedTensor& q, std::span<float> out) {
  if (q.format != CodeFormat::PackedBits)
    throw UsageError("onebit: tensor does not hold packed bits");
  const std::size_t n = q.element_count();
  if (q.codes.size() != (n + 7) / 8) throw UsageError("onebit: packed length does not match shape");
  if (out.size() != n) throw UsageError("onebit: output buffer has wrong size");
  for (std::size_t i = 0; i < n; ++i) out[i] = packed_bit(q.codes, i) ? q.pos_level : q.neg_level;
}

std::vector<float> onebit_decode(const QuantizedTensor& q) {
  std::vector<float> out(q.element_count());
  onebit_decode_into(q, out);
  return out;
}

}  // namespace approx8

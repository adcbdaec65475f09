#pragma once

// Reference implementations used only by the tests. They are written from the
// format descriptions directly and avoid the library's search structures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "approx8/codec.hpp"

namespace oracle {

using approx8::DataKind;
using approx8::NormKind;

// Value of a code byte, computed bit by bit.
inline double code_value(DataKind kind, std::uint8_t code) {
  const bool negative = code & 0x80;
  const unsigned p = code & 0x7F;
  double v = 0.0;
  if (p != 0) {
    switch (kind) {
      case DataKind::Mantissa8:
        v = (p & 15) * std::pow(10.0, -static_cast<double>(p >> 4));
        break;
      case DataKind::StaticTree:
        v = (0.1 + ((p & 15) + 0.5) * 0.9 / 16.0) * std::pow(10.0, -static_cast<double>(p >> 4));
        break;
      case DataKind::DynamicTree: {
        int z = 0;
        for (int bit = 6; bit >= 0 && !((p >> bit) & 1); --bit) ++z;
        const int t = 6 - z;
        const unsigned k = p & ((1u << t) - 1);
        v = (0.1 + (k + 0.5) * 0.9 / std::ldexp(1.0, t)) * std::pow(10.0, -z);
        break;
      }
      case DataKind::LinearQuant:
        v = p / 127.0;
        break;
    }
  }
  return negative ? -v : v;
}

inline double norm_scale(const approx8::DataTypeSpec& spec, std::span<const float> x) {
  switch (spec.norm.kind) {
    case NormKind::None:
      return 1.0;
    case NormKind::AbsMax: {
      float m = 0.0f;
      for (float v : x) m = std::fmax(m, std::fabs(v));
      return m > 0.0f ? m : 1.0;
    }
    case NormKind::DecadeOffset: {
      double p = 1.0;
      for (int i = 0; i < std::abs(spec.norm.decades); ++i) p *= 10.0;
      return spec.norm.decades >= 0 ? p : 1.0 / p;
    }
  }
  return 1.0;
}

// Exhaustive nearest code over the whole 256-entry table: smallest distance,
// then smaller magnitude, then lowest code byte.
inline std::uint8_t linear_scan_code(const approx8::Codebook& cb, double normalized) {
  int best = 0;
  double best_d = INFINITY, best_mag = INFINITY;
  for (int c = 0; c < 256; ++c) {
    const double v = cb.decode_table[c];
    const double d = std::fabs(v - normalized);
    const double mag = std::fabs(v);
    if (d < best_d || (d == best_d && mag < best_mag)) {
      best = c;
      best_d = d;
      best_mag = mag;
    }
  }
  return static_cast<std::uint8_t>(best);
}

inline std::vector<std::uint8_t> linear_scan_encode(const approx8::Codebook& cb, std::span<const float> x) {
  const double s = norm_scale(cb.spec, x);
  std::vector<std::uint8_t> out;
  out.reserve(x.size());
  for (float v : x) out.push_back(linear_scan_code(cb, static_cast<double>(v) / s));
  return out;
}

inline double relative_gap(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

// Repository root, for tests that read shipped configs and data.
inline std::filesystem::path source_dir() {
  if (const char* d = std::getenv("APPROX8_SOURCE_DIR")) return d;
  return std::filesystem::path(__FILE__).parent_path().parent_path();
}

}  // namespace oracle

#include "approx8/mlp.hpp"
#include "approx8/random.hpp"

namespace oracle {

// Worst relative error between analytic gradients and central differences
// of the loss, over `coords` random parameters of a small double network
// with dropout off.
inline double gradient_check(std::uint64_t seed, int coords = 10, std::vector<int> sizes = {6, 5, 4}) {
  approx8::Rng rng(seed);
  approx8::Mlp<double> net(sizes, rng);
  for (auto& b : net.biases())
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.normal(0.0, 0.1);
  const Eigen::Index batch = 7;
  approx8::RowMatrix<double> x(batch, sizes.front()), y = approx8::RowMatrix<double>::Zero(batch, sizes.back());
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal(0.0, 1.0);
  for (Eigen::Index r = 0; r < batch; ++r) y(r, static_cast<Eigen::Index>(rng.below(sizes.back()))) = 1.0;

  approx8::MlpGradients<double> g, scratch;
  net.loss_and_gradients(x, y, g);
  const double h = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < coords; ++k) {
    const auto layer = rng.below(net.layer_count());
    const bool bias = rng.uniform() < 0.3;
    double* p;
    double analytic;
    if (bias) {
      const auto i = static_cast<Eigen::Index>(rng.below(net.biases()[layer].size()));
      p = &net.biases()[layer][i];
      analytic = g.biases[layer][i];
    } else {
      const auto i = static_cast<Eigen::Index>(rng.below(net.weights()[layer].size()));
      p = net.weights()[layer].data() + i;
      analytic = g.weights[layer].data()[i];
    }
    const double saved = *p;
    *p = saved + h;
    const double up = net.loss_and_gradients(x, y, scratch);
    *p = saved - h;
    const double down = net.loss_and_gradients(x, y, scratch);
    *p = saved;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    worst = std::max(worst, std::fabs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace oracle

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "approx8/codec.hpp"

namespace approx8 {

enum class Distribution { Uniform01, Normal };

struct SampleSpec {
  Distribution distribution = Distribution::Uniform01;
  double mean = 0.0;
  double sigma = 1.0;
  std::size_t count = 1'000'000;
  std::uint64_t seed = 0;

  static SampleSpec uniform01(std::size_t n, std::uint64_t seed) {
    return {Distribution::Uniform01, 0.0, 1.0, n, seed};
  }
  static SampleSpec normal(double mean, double sigma, std::size_t n, std::uint64_t seed) {
    return {Distribution::Normal, mean, sigma, n, seed};
  }

  void validate() const;
  /// "U(0,1)", "N(0,1)", "N(0,10^2)", "N(0,0.2^2)" style label.
  std::string label() const;
};

struct ErrorReport {
  double mean_abs_error = 0.0;
  double mean_rel_error_pct = 0.0;
  std::size_t count = 0;          // elements in the buffer
  std::size_t nonzero_count = 0;  // elements contributing to the relative error
  DataTypeSpec spec;
  SampleSpec sample;
};

std::vector<float> sample(const SampleSpec& spec);

/// Round-trips x through `spec` and aggregates the errors. Relative error is
/// averaged over elements with x != 0 only.
ErrorReport measure_error(std::span<const float> x, const DataTypeSpec& spec);

/// Normalization used by the error tables: absmax for the tree/linear types,
/// a decade offset for static tree and mantissa (2 decades when sigma >= 10,
/// otherwise 1).
DataTypeSpec table_protocol_spec(DataKind kind, const SampleSpec& sample);

inline constexpr DataKind kAllKinds[] = {DataKind::DynamicTree, DataKind::LinearQuant,
                                         DataKind::Mantissa8, DataKind::StaticTree};

/// The 16 distribution x data-type cells: U(0,1), N(0,1), N(0,10^2), N(0,0.2^2)
/// crossed with the four kinds. Cell i is sampled with seed + i, so serial and
/// parallel evaluation agree.
std::vector<ErrorReport> run_table2_suite(std::uint64_t seed, std::size_t n = 1'000'000);

/// CSV with header distribution,datatype,n,mean_abs_error,mean_rel_error_pct,seed
void write_error_csv(std::ostream& os, const std::vector<ErrorReport>& reports);

}  // namespace approx8

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "approx8/codec.hpp"
#include "approx8/idx.hpp"

namespace approx8 {

struct MlpConfig {
  std::vector<int> layer_sizes = {784, 128, 128, 10};
  std::vector<double> dropout_rates = {0.2, 0.3, 0.3};  // one per non-output layer
  double learning_rate = 0.003;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  int epochs = 10;
  int batch_size = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Where quantization is injected.
///   DataParallel   weight and bias gradients, before the optimizer step
///   ModelParallel  hidden-layer outputs on forward (also at evaluation) and
///                  hidden-layer pre-activation error signals on backward
enum class HookMode { None, DataParallel, ModelParallel };

enum class QuantizerKind { EightBit, OneBit };

struct QuantHookConfig {
  HookMode mode = HookMode::None;
  QuantizerKind quantizer = QuantizerKind::EightBit;
  DataTypeSpec spec;

  static QuantHookConfig none() { return {}; }
  /// Normalization picked per kind: absmax for dynamic tree and linear;
  /// for static tree and mantissa, none on gradients and one decade on
  /// model-parallel activations/errors.
  static QuantHookConfig eight_bit(HookMode mode, DataKind kind);
  static QuantHookConfig one_bit() { return {HookMode::DataParallel, QuantizerKind::OneBit, {}}; }

  void validate() const;
  std::string label() const;
};

std::string_view to_string(HookMode mode);
HookMode parse_hook_mode(std::string_view text);

/// Approximation error accumulated at one hook point.
struct HookStat {
  std::string point;
  double abs_sum = 0.0;
  double rel_sum = 0.0;
  std::size_t count = 0;
  std::size_t nonzero = 0;

  double mean_abs() const { return count ? abs_sum / static_cast<double>(count) : 0.0; }
  double mean_rel_pct() const { return nonzero ? 100.0 * rel_sum / static_cast<double>(nonzero) : 0.0; }
};

struct TrainReport {
  std::string hook_label;
  HookMode mode = HookMode::None;
  std::uint64_t seed = 0;
  std::vector<double> epoch_loss;
  std::vector<double> train_error;  // fraction in [0, 1]
  std::vector<double> test_error;
  std::vector<double> first_epoch_batch_loss;
  double final_test_error = 0.0;
  /// Captured during the middle epoch; empty when no hooks are active.
  std::vector<HookStat> hook_stats;

  std::string abs_triplet() const;  // "a/b/c" over hook points
  std::string rel_triplet() const;
};

struct TrainData {
  Dataset train;
  Dataset test;
};

/// Loads train-{images,labels} and t10k-{images,labels} IDX files from dir.
TrainData load_mnist_dir(const std::string& dir, std::optional<Eigen::Index> train_limit = {});

TrainReport train(const MlpConfig& config, const QuantHookConfig& hooks, const TrainData& data);

struct ParityRow {
  QuantHookConfig hooks;
  std::vector<TrainReport> runs;  // one per seed
  double mean_test_error = 0.0;
  double sd_test_error = 0.0;
};

/// Trains the 32-bit baseline plus every (mode, quantizer) pair once per
/// seed. Independent runs may execute concurrently; each run stays
/// single-threaded and deterministic.
std::vector<ParityRow> parity_experiment(const MlpConfig& config,
                                         const std::vector<QuantHookConfig>& quantizers,
                                         const std::vector<std::uint64_t>& seeds,
                                         const TrainData& data);

void write_train_csv(std::ostream& os, const TrainReport& report);
void write_parity_csv(std::ostream& os, const std::vector<ParityRow>& rows);

}  // namespace approx8

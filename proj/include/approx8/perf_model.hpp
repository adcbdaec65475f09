#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace approx8::perf {

// Size units are binary: 1 kB = 1024 bytes, 1 MB = 2^20 bytes, and bandwidths
// in GB/s mean 2^30 bytes per second. Times are milliseconds.
inline constexpr double kKiB = 1024.0;
inline constexpr double kMiB = 1024.0 * 1024.0;
inline constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;

struct LatencyPoint {
  double message_bytes = 0.0;
  double latency_ms = 0.0;
};

struct HardwareProfile {
  double pcie_bandwidth_gbps = 7.0;
  double ib_bandwidth_gbps = 6.0;
  /// End-to-end one-way time of a message of the given size, as read off
  /// MPI latency charts. Sizes strictly increasing.
  std::vector<LatencyPoint> ib_latency_curve;
  int gpus_per_node = 4;
  int nodes = 1;

  int total_gpus() const { return gpus_per_node * nodes; }
  void validate() const;
};

enum class PayloadBits { Bits32 = 32, Bits8 = 8 };

inline int bit_count(PayloadBits b) { return static_cast<int>(b); }

enum class LayerKind { Conv, FC, Activation };

struct ParallelTimes {
  double fprop_ms = 0.0;
  double bprop_ms = 0.0;
  double update_ms = 0.0;
  double total() const { return fprop_ms + bprop_ms + update_ms; }
};

struct LayerBenchmark {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  double fprop_ms = 0.0;
  double bprop_ms = 0.0;
  double update_ms = 0.0;
  std::optional<ParallelTimes> parallel;
  double transfer_mb_32bit = 0.0;
  std::optional<double> sync_ms_32bit;
  std::optional<double> sync_ms_8bit;

  double total_ms() const { return fprop_ms + bprop_ms + update_ms; }
  double transfer_mb(PayloadBits bits) const {
    return bits == PayloadBits::Bits32 ? transfer_mb_32bit : transfer_mb_32bit / 4.0;
  }
  void validate() const;
};

/// Layer timings for one node, forward order.
struct NodeBenchmarks {
  std::vector<LayerBenchmark> layers;
  /// The GPU count the parallel times were measured for.
  int parallel_divisor = 4;
};

struct ParallelPlan {
  int n_gpus = 4;
  int sub_batch_size = 128;
  int n_sub_batches = 4;
  PayloadBits bits = PayloadBits::Bits32;
  /// Total batch; when set, must equal n_sub_batches * sub_batch_size.
  std::optional<int> total_batch;
  /// Number of unoverlapped activation transfers charged at the end of the
  /// model-parallel stage. Defaults to n_sub_batches + 1.
  std::optional<int> tail_messages;
  /// Penalty overrides. When absent they are derived from the layer table.
  std::optional<double> conv_penalty_ms;
  std::optional<double> fc_penalty_ms;

  void validate() const;
};

struct SpeedupReport {
  std::string baseline_name;
  double baseline_total_ms = 0.0;
  double conv_penalty_ms = 0.0;
  double fc_penalty_ms = 0.0;
  double parallel_fc_ms = 0.0;
  double speedup = 0.0;
  int n_gpus = 0;
  int sub_batch_size = 0;
  PayloadBits bits = PayloadBits::Bits32;
  bool low_confidence = false;
  std::vector<std::string> warnings;
};

/// Piecewise-linear interpolation in log(message size), clamped at both ends.
double latency_lookup(const HardwareProfile& profile, double message_bytes);

/// Intra-node broadcast over PCIe. Paired slots share a switch, so beyond two
/// GPUs the broadcast costs one message per GPU.
double intra_node_sync_ms(const HardwareProfile& profile, double payload_bytes, int n_gpus);

/// Cluster gradient broadcast: two PCIe messages carrying the per-GPU share
/// (payload / gpus_per_node), then one InfiniBand message per remote node.
/// Each InfiniBand message costs max(chart latency, payload / ib bandwidth).
/// Gradients use two rounds (scatter, then redistribute); activations one.
double cluster_broadcast_ms(const HardwareProfile& profile, double payload_bytes, int rounds = 2);

struct SyncOverlap {
  double sync_ms = 0.0;
  double overlap_ms = 0.0;
};

/// Sum of max(0, sync - overlap) plus a non-overlappable tail.
double fc_penalty_ms(const std::vector<SyncOverlap>& pairs, double tail_ms);

/// Sync time of a layer at the given width: the measured value when present,
/// else intra_node_sync_ms of its transfer size.
double layer_sync_ms(const LayerBenchmark& layer, PayloadBits bits, const HardwareProfile& profile,
                     int n_gpus);

/// Exposed sync/overlap pairs of the sub-batched model-parallel stage.
///
/// For an activation transfer a followed by fc layers f1..fn:
///   forward:  (sync a, fprop f1), (sync f_i, fprop f_i+1)
///   backward: (sync f_n, bprop f_n-1) ... (sync f2, bprop f1),
///             (sync f1, sum of fc updates)
std::vector<SyncOverlap> model_parallel_pairs(const NodeBenchmarks& bench, PayloadBits bits,
                                              const HardwareProfile& profile, int n_gpus);

struct PenaltyBreakdown {
  double conv_penalty_ms = 0.0;
  double fc_penalty_ms = 0.0;
  double fc_ms = 0.0;
  double parallel_fc_ms = 0.0;
  std::vector<std::string> warnings;
};

PenaltyBreakdown derive_penalties(const NodeBenchmarks& bench, const ParallelPlan& plan,
                                  const HardwareProfile& profile);

/// speedup = n * total / ((total - fc) + conv_penalty + K * parallel_fc + fc_penalty)
SpeedupReport predict_single_node(const NodeBenchmarks& bench, const ParallelPlan& plan,
                                  const HardwareProfile& profile, double baseline_total_ms,
                                  std::string baseline_name = {});

struct WidthPair {
  double bits32 = 0.0;
  double bits8 = 0.0;
  double at(PayloadBits b) const { return b == PayloadBits::Bits32 ? bits32 : bits8; }
};

struct FlagPair {
  bool bits32 = false;
  bool bits8 = false;
  bool at(PayloadBits b) const { return b == PayloadBits::Bits32 ? bits32 : bits8; }
};

/// One row of the cluster activation-sync benchmark.
struct ClusterPass {
  int sub_batch = 0;
  int passes = 0;
  /// Forward time summed over all passes.
  double forward_ms = 0.0;
  WidthPair single_sync_ms;
  std::optional<WidthPair> full_sync_ms;  // measured, overlap-adjusted
  std::optional<WidthPair> total_ms;      // measured forward + sync
  FlagPair low_confidence;
};

enum class ClusterMode { Measured, Derived };

struct ClusterBenchmarks {
  int total_batch = 12288;
  double fc_ms = 0.0;          // single-GPU fc time, excluded from the conv part
  double conv_sync_ms = 0.0;   // exposed conv gradient sync
  double overlap_window_ms = 0.0;
  /// Largest conv sub-gradient, for reporting its cluster broadcast time.
  std::optional<double> conv_gradient_bytes;
  std::vector<ClusterPass> passes;

  const ClusterPass& row(int sub_batch) const;
};

/// speedup = gpus * baseline / (conv + conv_sync + fc_forward_total + fc_sync_total)
///
/// Measured mode takes the fc totals verbatim (total_ms, else forward +
/// full_sync). Derived mode rebuilds the sync total as
/// passes * max(0, single_sync - overlap_window).
SpeedupReport predict_cluster(const ClusterBenchmarks& bench, int sub_batch, PayloadBits bits,
                              const HardwareProfile& profile, double baseline_total_ms,
                              ClusterMode mode = ClusterMode::Measured,
                              std::string baseline_name = {});

struct Baseline {
  std::string name;
  double total_ms = 0.0;
};

struct SweepRow {
  int sub_batch = 0;
  std::vector<SpeedupReport> bits32;  // one per baseline
  std::vector<SpeedupReport> bits8;
};

std::vector<SweepRow> sweep_sub_batch(const ClusterBenchmarks& bench, const HardwareProfile& profile,
                                      const std::vector<Baseline>& baselines,
                                      const std::vector<int>& sizes,
                                      ClusterMode mode = ClusterMode::Measured);

}  // namespace approx8::perf

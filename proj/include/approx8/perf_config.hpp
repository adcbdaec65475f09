#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "approx8/perf_model.hpp"

namespace approx8::perf {

/// Contents of a speedup-model config file (JSON).
///
///   profile    hardware bandwidths, latency curve, node layout
///   layer      per-layer benchmark rows, forward order
///   plan       single-node parallel plan
///   baselines  named single-GPU total times
///   cluster    optional cluster activation-sync benchmark rows
struct PerfConfig {
  int version = 1;
  std::string description;
  HardwareProfile profile;
  NodeBenchmarks node;
  std::optional<ParallelPlan> plan;
  std::vector<Baseline> baselines;
  std::optional<ClusterBenchmarks> cluster;
  ClusterMode cluster_mode = ClusterMode::Measured;
  std::vector<int> sweep_sizes;
};

PerfConfig parse_perf_config(const std::string& json_text);
PerfConfig load_perf_config(const std::filesystem::path& path);

}  // namespace approx8::perf

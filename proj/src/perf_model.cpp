#include "approx8/perf_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "approx8/errors.hpp"

namespace approx8::perf {

namespace {

void require_nonneg(double v, const std::string& field) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(field + " must be a finite value >= 0");
}

double transfer_ms(double bytes, double gbps) { return 1000.0 * bytes / (gbps * kGiB); }

void check_speedup_bound(const SpeedupReport& r) {
  if (!(r.speedup > 0.0) || !std::isfinite(r.speedup))
    throw ConfigError("speedup: non-positive or non-finite result; check baseline and times");
  if (r.speedup > static_cast<double>(r.n_gpus) * (1.0 + 1e-12))
    throw ConfigError("speedup: " + std::to_string(r.speedup) + " exceeds the GPU count " +
                      std::to_string(r.n_gpus) +
                      "; parallel times are faster than a perfect split");
}

}  // namespace

void HardwareProfile::validate() const {
  if (!(pcie_bandwidth_gbps > 0.0)) throw ConfigError("profile.pcie_bandwidth_gbps must be > 0");
  if (!(ib_bandwidth_gbps > 0.0)) throw ConfigError("profile.ib_bandwidth_gbps must be > 0");
  if (gpus_per_node < 1) throw ConfigError("profile.gpus_per_node must be >= 1");
  if (nodes < 1) throw ConfigError("profile.nodes must be >= 1");
  for (std::size_t i = 0; i < ib_latency_curve.size(); ++i) {
    const auto& p = ib_latency_curve[i];
    if (!(p.message_bytes > 0.0))
      throw ConfigError("profile.ib_latency_curve[" + std::to_string(i) + "].size must be > 0");
    require_nonneg(p.latency_ms, "profile.ib_latency_curve[" + std::to_string(i) + "].latency_ms");
    if (i > 0 && !(p.message_bytes > ib_latency_curve[i - 1].message_bytes))
      throw ConfigError("profile.ib_latency_curve sizes must be strictly increasing (entry " +
                        std::to_string(i) + ")");
  }
}

void LayerBenchmark::validate() const {
  const std::string f = "layer '" + name + "'.";
  require_nonneg(fprop_ms, f + "fprop_ms");
  require_nonneg(bprop_ms, f + "bprop_ms");
  require_nonneg(update_ms, f + "update_ms");
  require_nonneg(transfer_mb_32bit, f + "transfer_mb_32bit");
  if (parallel) {
    require_nonneg(parallel->fprop_ms, f + "parallel_fprop_ms");
    require_nonneg(parallel->bprop_ms, f + "parallel_bprop_ms");
    require_nonneg(parallel->update_ms, f + "parallel_update_ms");
  }
  if (sync_ms_32bit) require_nonneg(*sync_ms_32bit, f + "sync_ms_32bit");
  if (sync_ms_8bit) require_nonneg(*sync_ms_8bit, f + "sync_ms_8bit");
}

void ParallelPlan::validate() const {
  if (n_gpus < 1) throw ConfigError("plan.n_gpus must be >= 1");
  if (sub_batch_size < 1) throw ConfigError("plan.sub_batch_size must be >= 1");
  if (n_sub_batches < 1) throw ConfigError("plan.n_sub_batches must be >= 1");
  if (bits != PayloadBits::Bits32 && bits != PayloadBits::Bits8)
    throw ConfigError("plan.payload_bits must be 32 or 8");
  if (total_batch && *total_batch != n_sub_batches * sub_batch_size)
    throw ConfigError("plan: n_sub_batches * sub_batch_size = " +
                      std::to_string(n_sub_batches * sub_batch_size) +
                      " does not equal total_batch " + std::to_string(*total_batch));
  if (tail_messages && *tail_messages < 0) throw ConfigError("plan.tail_messages must be >= 0");
  if (conv_penalty_ms) require_nonneg(*conv_penalty_ms, "plan.conv_penalty_ms");
  if (fc_penalty_ms) require_nonneg(*fc_penalty_ms, "plan.fc_penalty_ms");
}

double latency_lookup(const HardwareProfile& profile, double message_bytes) {
  const auto& curve = profile.ib_latency_curve;
  if (curve.empty()) throw ConfigError("profile.ib_latency_curve is empty");
  if (message_bytes <= curve.front().message_bytes) return curve.front().latency_ms;
  if (message_bytes >= curve.back().message_bytes) return curve.back().latency_ms;
  const auto hi = std::upper_bound(curve.begin(), curve.end(), message_bytes,
                                   [](double s, const LatencyPoint& p) { return s < p.message_bytes; });
  const auto lo = hi - 1;
  const double t = (std::log(message_bytes) - std::log(lo->message_bytes)) /
                   (std::log(hi->message_bytes) - std::log(lo->message_bytes));
  return lo->latency_ms + t * (hi->latency_ms - lo->latency_ms);
}

double intra_node_sync_ms(const HardwareProfile& profile, double payload_bytes, int n_gpus) {
  if (n_gpus < 2) throw UsageError("intra_node_sync: needs at least 2 GPUs, got " + std::to_string(n_gpus));
  require_nonneg(payload_bytes, "payload_bytes");
  const int messages = n_gpus == 2 ? 1 : n_gpus;
  return messages * transfer_ms(payload_bytes, profile.pcie_bandwidth_gbps);
}

double cluster_broadcast_ms(const HardwareProfile& profile, double payload_bytes, int rounds) {
  profile.validate();
  if (profile.nodes < 2) throw UsageError("cluster_broadcast: needs at least 2 nodes");
  if (rounds < 1) throw UsageError("cluster_broadcast: rounds must be >= 1");
  require_nonneg(payload_bytes, "payload_bytes");
  const double share = payload_bytes / profile.gpus_per_node;
  const double pcie = 2.0 * transfer_ms(share, profile.pcie_bandwidth_gbps);
  const double wire = transfer_ms(payload_bytes, profile.ib_bandwidth_gbps);
  const double chart = profile.ib_latency_curve.empty() ? 0.0 : latency_lookup(profile, payload_bytes);
  const double per_message = std::max(chart, wire);
  return rounds * (pcie + (profile.nodes - 1) * per_message);
}

double fc_penalty_ms(const std::vector<SyncOverlap>& pairs, double tail_ms) {
  require_nonneg(tail_ms, "tail_ms");
  double total = tail_ms;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    require_nonneg(pairs[i].sync_ms, "pairs[" + std::to_string(i) + "].sync_ms");
    require_nonneg(pairs[i].overlap_ms, "pairs[" + std::to_string(i) + "].overlap_ms");
    total += std::max(0.0, pairs[i].sync_ms - pairs[i].overlap_ms);
  }
  return total;
}

double layer_sync_ms(const LayerBenchmark& layer, PayloadBits bits, const HardwareProfile& profile,
                     int n_gpus) {
  const auto& measured = bits == PayloadBits::Bits32 ? layer.sync_ms_32bit : layer.sync_ms_8bit;
  if (measured) return *measured;
  return intra_node_sync_ms(profile, layer.transfer_mb(bits) * kMiB, n_gpus);
}

std::vector<SyncOverlap> model_parallel_pairs(const NodeBenchmarks& bench, PayloadBits bits,
                                              const HardwareProfile& profile, int n_gpus) {
  const LayerBenchmark* activation = nullptr;
  std::vector<const LayerBenchmark*> fc;
  for (const auto& l : bench.layers) {
    if (l.kind == LayerKind::Activation && fc.empty()) activation = &l;
    if (l.kind == LayerKind::FC) {
      if (!l.parallel) throw ConfigError("layer '" + l.name + "' has no parallel fc times");
      fc.push_back(&l);
    }
  }
  std::vector<SyncOverlap> pairs;
  if (fc.empty()) return pairs;
  auto sync = [&](const LayerBenchmark* l) { return layer_sync_ms(*l, bits, profile, n_gpus); };

  if (activation) pairs.push_back({sync(activation), fc[0]->parallel->fprop_ms});
  for (std::size_t i = 0; i + 1 < fc.size(); ++i)
    pairs.push_back({sync(fc[i]), fc[i + 1]->parallel->fprop_ms});
  for (std::size_t i = fc.size() - 1; i >= 1; --i)
    pairs.push_back({sync(fc[i]), fc[i - 1]->parallel->bprop_ms});
  double updates = 0.0;
  for (const auto* l : fc) updates += l->parallel->update_ms;
  pairs.push_back({sync(fc[0]), updates});
  return pairs;
}

PenaltyBreakdown derive_penalties(const NodeBenchmarks& bench, const ParallelPlan& plan,
                                  const HardwareProfile& profile) {
  PenaltyBreakdown out;
  const LayerBenchmark* first_conv = nullptr;
  const LayerBenchmark* activation = nullptr;
  bool any_fc = false;
  for (const auto& l : bench.layers) {
    l.validate();
    switch (l.kind) {
      case LayerKind::Conv: {
        // Conv layers stay data parallel at 32 bits; their sync hides under
        // the next layer's update except for the last one to finish backward.
        const double s = layer_sync_ms(l, PayloadBits::Bits32, profile, plan.n_gpus);
        if (!first_conv) {
          first_conv = &l;
        } else if (s > l.update_ms) {
          out.warnings.push_back("conv layer '" + l.name + "' sync " + std::to_string(s) +
                                 " ms exceeds its update time " + std::to_string(l.update_ms) +
                                 " ms; assumed hidden anyway");
        }
        break;
      }
      case LayerKind::FC:
        if (!l.parallel) throw ConfigError("layer '" + l.name + "' has no parallel fc times");
        any_fc = true;
        out.fc_ms += l.total_ms();
        out.parallel_fc_ms += l.parallel->total();
        break;
      case LayerKind::Activation:
        if (!activation) activation = &l;
        break;
    }
  }
  if (!any_fc) throw ConfigError("benchmarks: no fc layers with parallel times");

  if (plan.conv_penalty_ms)
    out.conv_penalty_ms = *plan.conv_penalty_ms;
  else if (first_conv)
    out.conv_penalty_ms = layer_sync_ms(*first_conv, PayloadBits::Bits32, profile, plan.n_gpus);

  if (plan.fc_penalty_ms) {
    out.fc_penalty_ms = *plan.fc_penalty_ms;
  } else {
    const int tail_n = plan.tail_messages.value_or(plan.n_sub_batches + 1);
    const double tail =
        activation ? tail_n * layer_sync_ms(*activation, plan.bits, profile, plan.n_gpus) : 0.0;
    out.fc_penalty_ms = fc_penalty_ms(model_parallel_pairs(bench, plan.bits, profile, plan.n_gpus), tail);
  }
  return out;
}

SpeedupReport predict_single_node(const NodeBenchmarks& bench, const ParallelPlan& plan,
                                  const HardwareProfile& profile, double baseline_total_ms,
                                  std::string baseline_name) {
  plan.validate();
  profile.validate();
  if (plan.n_gpus != bench.parallel_divisor)
    throw ConfigError("plan.n_gpus = " + std::to_string(plan.n_gpus) +
                      " but parallel times were measured for " +
                      std::to_string(bench.parallel_divisor) + " GPUs");
  if (!(baseline_total_ms > 0.0)) throw ConfigError("baseline total_ms must be > 0");

  const auto p = derive_penalties(bench, plan, profile);
  SpeedupReport r;
  r.baseline_name = std::move(baseline_name);
  r.baseline_total_ms = baseline_total_ms;
  r.conv_penalty_ms = p.conv_penalty_ms;
  r.fc_penalty_ms = p.fc_penalty_ms;
  r.parallel_fc_ms = p.parallel_fc_ms;
  r.n_gpus = plan.n_gpus;
  r.sub_batch_size = plan.sub_batch_size;
  r.bits = plan.bits;
  r.warnings = p.warnings;
  const double denom = (baseline_total_ms - p.fc_ms) + p.conv_penalty_ms +
                       plan.n_sub_batches * p.parallel_fc_ms + p.fc_penalty_ms;
  r.speedup = plan.n_gpus * baseline_total_ms / denom;
  check_speedup_bound(r);
  return r;
}

const ClusterPass& ClusterBenchmarks::row(int sub_batch) const {
  for (const auto& p : passes)
    if (p.sub_batch == sub_batch) return p;
  throw ConfigError("cluster: no benchmark row for sub-batch " + std::to_string(sub_batch));
}

SpeedupReport predict_cluster(const ClusterBenchmarks& bench, int sub_batch, PayloadBits bits,
                              const HardwareProfile& profile, double baseline_total_ms,
                              ClusterMode mode, std::string baseline_name) {
  profile.validate();
  if (!(baseline_total_ms > 0.0)) throw ConfigError("baseline total_ms must be > 0");
  require_nonneg(bench.fc_ms, "cluster.fc_ms");
  require_nonneg(bench.conv_sync_ms, "cluster.conv_sync_ms");
  const ClusterPass& row = bench.row(sub_batch);
  if (static_cast<long long>(row.passes) * row.sub_batch != bench.total_batch)
    throw ConfigError("cluster row " + std::to_string(row.sub_batch) + ": passes * sub_batch = " +
                      std::to_string(static_cast<long long>(row.passes) * row.sub_batch) +
                      " does not equal total_batch " + std::to_string(bench.total_batch));

  double fc_total = 0.0;
  if (mode == ClusterMode::Measured) {
    if (row.total_ms)
      fc_total = row.total_ms->at(bits);
    else if (row.full_sync_ms)
      fc_total = row.forward_ms + row.full_sync_ms->at(bits);
    else
      throw ConfigError("cluster row " + std::to_string(row.sub_batch) +
                        ": measured mode needs total_ms or full_sync_ms");
  } else {
    const double exposed = std::max(0.0, row.single_sync_ms.at(bits) - bench.overlap_window_ms);
    fc_total = row.forward_ms + row.passes * exposed;
  }

  SpeedupReport r;
  r.baseline_name = std::move(baseline_name);
  r.baseline_total_ms = baseline_total_ms;
  r.conv_penalty_ms = bench.conv_sync_ms;
  r.fc_penalty_ms = fc_total - row.forward_ms;
  r.parallel_fc_ms = row.forward_ms;
  r.n_gpus = profile.total_gpus();
  r.sub_batch_size = row.sub_batch;
  r.bits = bits;
  r.low_confidence = row.low_confidence.at(bits);
  const double conv_ms = baseline_total_ms - bench.fc_ms;
  r.speedup = r.n_gpus * baseline_total_ms / (conv_ms + bench.conv_sync_ms + fc_total);
  check_speedup_bound(r);
  return r;
}

std::vector<SweepRow> sweep_sub_batch(const ClusterBenchmarks& bench, const HardwareProfile& profile,
                                      const std::vector<Baseline>& baselines,
                                      const std::vector<int>& sizes, ClusterMode mode) {
  if (sizes.empty()) throw UsageError("sweep: no sub-batch sizes given");
  if (baselines.empty()) throw ConfigError("sweep: no baselines configured");
  std::vector<SweepRow> rows;
  for (int size : sizes) {
    SweepRow row;
    row.sub_batch = size;
    for (const auto& b : baselines) {
      row.bits32.push_back(predict_cluster(bench, size, PayloadBits::Bits32, profile, b.total_ms, mode, b.name));
      row.bits8.push_back(predict_cluster(bench, size, PayloadBits::Bits8, profile, b.total_ms, mode, b.name));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace approx8::perf

#include "approx8/perf_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "approx8/errors.hpp"

namespace approx8::perf {

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError(path + "." + key + " is missing");
  return obj.at(key);
}

double number(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) throw ConfigError(path + "." + key + " must be a number");
  return v.get<double>();
}

std::optional<double> opt_number(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return number(obj, key, path);
}

int integer(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number_integer()) throw ConfigError(path + "." + key + " must be an integer");
  return v.get<int>();
}

std::optional<int> opt_integer(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return integer(obj, key, path);
}

std::string string(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw ConfigError(path + "." + key + " must be a string");
  return v.get<std::string>();
}

WidthPair width_pair(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  const std::string p = path + "." + key;
  return {number(v, "32", p), number(v, "8", p)};
}

std::optional<WidthPair> opt_width_pair(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return width_pair(obj, key, path);
}

PayloadBits payload_bits(int bits, const std::string& field) {
  if (bits == 32) return PayloadBits::Bits32;
  if (bits == 8) return PayloadBits::Bits8;
  throw ConfigError(field + " must be 32 or 8, got " + std::to_string(bits));
}

HardwareProfile parse_profile(const json& j) {
  const std::string path = "profile";
  HardwareProfile p;
  p.pcie_bandwidth_gbps = number(j, "pcie_bandwidth_gbps", path);
  p.ib_bandwidth_gbps = number(j, "ib_bandwidth_gbps", path);
  p.gpus_per_node = integer(j, "gpus_per_node", path);
  p.nodes = integer(j, "nodes", path);
  if (j.contains("ib_latency_curve")) {
    const auto& curve = j.at("ib_latency_curve");
    if (!curve.is_array()) throw ConfigError("profile.ib_latency_curve must be an array");
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const std::string ip = path + ".ib_latency_curve[" + std::to_string(i) + "]";
      p.ib_latency_curve.push_back({number(curve[i], "size_kb", ip) * kKiB,
                                    number(curve[i], "latency_ms", ip)});
    }
  }
  p.validate();
  return p;
}

LayerKind layer_kind(const std::string& s, const std::string& path) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "fc") return LayerKind::FC;
  if (s == "activation") return LayerKind::Activation;
  throw ConfigError(path + ".kind must be conv, fc or activation, got '" + s + "'");
}

LayerBenchmark parse_layer(const json& j, const std::string& path) {
  LayerBenchmark l;
  l.name = string(j, "name", path);
  l.kind = layer_kind(string(j, "kind", path), path);
  l.fprop_ms = opt_number(j, "fprop_ms", path).value_or(0.0);
  l.bprop_ms = opt_number(j, "bprop_ms", path).value_or(0.0);
  l.update_ms = opt_number(j, "update_ms", path).value_or(0.0);
  if (j.contains("parallel") && !j.at("parallel").is_null()) {
    const auto& pj = j.at("parallel");
    const std::string pp = path + ".parallel";
    l.parallel = ParallelTimes{number(pj, "fprop_ms", pp), number(pj, "bprop_ms", pp),
                               number(pj, "update_ms", pp)};
  }
  l.transfer_mb_32bit = opt_number(j, "transfer_mb_32bit", path).value_or(0.0);
  l.sync_ms_32bit = opt_number(j, "sync_ms_32bit", path);
  l.sync_ms_8bit = opt_number(j, "sync_ms_8bit", path);
  l.validate();
  return l;
}

ParallelPlan parse_plan(const json& j) {
  const std::string path = "plan";
  ParallelPlan p;
  p.n_gpus = integer(j, "n_gpus", path);
  p.sub_batch_size = integer(j, "sub_batch_size", path);
  p.n_sub_batches = integer(j, "n_sub_batches", path);
  p.bits = payload_bits(opt_integer(j, "payload_bits", path).value_or(32), "plan.payload_bits");
  p.total_batch = opt_integer(j, "total_batch", path);
  p.tail_messages = opt_integer(j, "tail_messages", path);
  p.conv_penalty_ms = opt_number(j, "conv_penalty_ms", path);
  p.fc_penalty_ms = opt_number(j, "fc_penalty_ms", path);
  p.validate();
  return p;
}

ClusterBenchmarks parse_cluster(const json& j, PerfConfig& cfg) {
  const std::string path = "cluster";
  ClusterBenchmarks c;
  c.total_batch = integer(j, "total_batch", path);
  c.fc_ms = number(j, "fc_ms", path);
  c.conv_sync_ms = opt_number(j, "conv_sync_ms", path).value_or(0.0);
  c.overlap_window_ms = opt_number(j, "overlap_window_ms", path).value_or(0.0);
  if (auto kb = opt_number(j, "conv_gradient_kb", path)) c.conv_gradient_bytes = *kb * kKiB;
  if (j.contains("mode")) {
    const auto mode = string(j, "mode", path);
    if (mode == "measured")
      cfg.cluster_mode = ClusterMode::Measured;
    else if (mode == "derived")
      cfg.cluster_mode = ClusterMode::Derived;
    else
      throw ConfigError("cluster.mode must be measured or derived, got '" + mode + "'");
  }
  if (j.contains("sweep_sizes")) {
    for (const auto& s : j.at("sweep_sizes")) {
      if (!s.is_number_integer()) throw ConfigError("cluster.sweep_sizes must hold integers");
      cfg.sweep_sizes.push_back(s.get<int>());
    }
  }
  const auto& rows = require(j, "passes", path);
  if (!rows.is_array() || rows.empty()) throw ConfigError("cluster.passes must be a non-empty array");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string rp = path + ".passes[" + std::to_string(i) + "]";
    const auto& r = rows[i];
    ClusterPass p;
    p.sub_batch = integer(r, "sub_batch", rp);
    p.passes = integer(r, "passes", rp);
    p.forward_ms = number(r, "forward_ms", rp);
    p.single_sync_ms = width_pair(r, "single_sync_ms", rp);
    p.full_sync_ms = opt_width_pair(r, "full_sync_ms", rp);
    p.total_ms = opt_width_pair(r, "total_ms", rp);
    if (r.contains("low_confidence")) {
      const auto& lc = r.at("low_confidence");
      p.low_confidence.bits32 = lc.value("32", false);
      p.low_confidence.bits8 = lc.value("8", false);
    }
    if (p.sub_batch < 1 || p.passes < 1) throw ConfigError(rp + ": sub_batch and passes must be >= 1");
    if (static_cast<long long>(p.sub_batch) * p.passes != c.total_batch)
      throw ConfigError(rp + ": passes * sub_batch = " +
                        std::to_string(static_cast<long long>(p.sub_batch) * p.passes) +
                        " does not equal cluster.total_batch " + std::to_string(c.total_batch));
    c.passes.push_back(p);
  }
  return c;
}

}  // namespace

PerfConfig parse_perf_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  PerfConfig cfg;
  try {
    cfg.version = j.value("version", 1);
    if (cfg.version != 1) throw ConfigError("version " + std::to_string(cfg.version) + " is not supported");
    cfg.description = j.value("description", std::string{});
    cfg.profile = parse_profile(require(j, "profile", "config"));
    cfg.node.parallel_divisor = j.value("parallel_divisor", cfg.profile.gpus_per_node);
    if (j.contains("layer")) {
      const auto& layers = j.at("layer");
      if (!layers.is_array()) throw ConfigError("layer must be an array");
      for (std::size_t i = 0; i < layers.size(); ++i)
        cfg.node.layers.push_back(parse_layer(layers[i], "layer[" + std::to_string(i) + "]"));
    }
    if (j.contains("plan")) cfg.plan = parse_plan(j.at("plan"));
    if (j.contains("baselines")) {
      const auto& bs = j.at("baselines");
      for (std::size_t i = 0; i < bs.size(); ++i) {
        const std::string bp = "baselines[" + std::to_string(i) + "]";
        Baseline b{string(bs[i], "name", bp), number(bs[i], "total_ms", bp)};
        if (!(b.total_ms > 0.0)) throw ConfigError(bp + ".total_ms must be > 0");
        cfg.baselines.push_back(b);
      }
    }
    if (cfg.baselines.empty()) throw ConfigError("baselines must list at least one entry");
    if (j.contains("cluster")) cfg.cluster = parse_cluster(j.at("cluster"), cfg);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

PerfConfig load_perf_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_perf_config(ss.str());
}

}  // namespace approx8::perf

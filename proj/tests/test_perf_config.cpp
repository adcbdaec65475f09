#include <doctest.h>

#include <string>

#include "approx8/errors.hpp"
#include "approx8/perf_config.hpp"
#include "oracles.hpp"

using namespace approx8;
using namespace approx8::perf;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_perf_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

const char* kMinimal = R"({
  "version": 1,
  "profile": { "pcie_bandwidth_gbps": 5, "ib_bandwidth_gbps": 6, "gpus_per_node": 4, "nodes": 1 },
  "baselines": [ { "name": "a", "total_ms": 10 } ],
  "layer": [
    { "name": "fc", "kind": "fc", "fprop_ms": 1, "bprop_ms": 1, "update_ms": 1,
      "parallel": { "fprop_ms": 0.3, "bprop_ms": 0.3, "update_ms": 0.3 }, "transfer_mb_32bit": 1 }
  ]
})";

}  // namespace

TEST_CASE("shipped configs load") {
  const auto single = load_perf_config(oracle::source_dir() / "configs" / "alexnet_4gpu.json");
  CHECK(single.node.layers.size() == 9);
  CHECK(single.plan.has_value());
  CHECK(single.baselines.size() == 2);
  CHECK_FALSE(single.cluster.has_value());
  CHECK(single.node.layers[6].parallel->update_ms == doctest::Approx(0.43));
  CHECK(*single.node.layers[5].sync_ms_8bit == doctest::Approx(0.4));

  const auto cluster = load_perf_config(oracle::source_dir() / "configs" / "alexnet_cluster.json");
  REQUIRE(cluster.cluster.has_value());
  CHECK(cluster.profile.total_gpus() == 96);
  CHECK(cluster.profile.ib_latency_curve.size() == 15);
  CHECK(cluster.profile.ib_latency_curve[8].message_bytes == 108 * kKiB);
  CHECK(cluster.cluster->passes.size() == 6);
  CHECK(cluster.cluster->row(512).total_ms->bits8 == 157);
  CHECK(cluster.cluster->row(12288).low_confidence.bits32);
  CHECK(*cluster.cluster->conv_gradient_bytes == 108 * kKiB);
  CHECK(cluster.sweep_sizes == std::vector<int>{128, 256, 512, 1024, 2048, 12288});
}

TEST_CASE("minimal config parses with defaults") {
  const auto cfg = parse_perf_config(kMinimal);
  CHECK_FALSE(cfg.plan.has_value());
  CHECK(cfg.node.parallel_divisor == 4);
  CHECK(cfg.node.layers[0].transfer_mb(PayloadBits::Bits8) == doctest::Approx(0.25));
}

TEST_CASE("errors name the offending field") {
  std::string text = kMinimal;
  CHECK(config_error(std::string(text).replace(text.find("\"nodes\": 1"), 10, "\"nodes\": 0")).find("profile.nodes") !=
        std::string::npos);
  CHECK(config_error(std::string(text).replace(text.find("\"kind\": \"fc\""), 12, "\"kind\": \"xx\"")).find("kind") !=
        std::string::npos);
  CHECK(config_error(std::string(text).replace(text.find("\"total_ms\": 10"), 14, "\"total_ms\": -1"))
            .find("total_ms") != std::string::npos);
  CHECK(config_error("{ not json").find("config:") != std::string::npos);
  CHECK(config_error(R"({"version": 2})").find("version") != std::string::npos);
  CHECK_THROWS_AS(load_perf_config("/nonexistent/config.json"), ConfigError);
}

#include "approx8/train.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>

#include "approx8/errors.hpp"
#include "approx8/mlp.hpp"
#include "approx8/onebit.hpp"
#include "approx8/parallel.hpp"

namespace approx8 {

namespace {

using Matrix = RowMatrix<float>;

/// Applies the configured quantizer to float tensors and records errors
/// while `capturing` is set.
class Quantizer {
 public:
  explicit Quantizer(const QuantHookConfig& cfg) : cfg_(cfg) {
    if (cfg.quantizer == QuantizerKind::EightBit && cfg.mode != HookMode::None)
      codebook_ = std::make_unique<Codebook>(build_codebook(cfg.spec));
  }

  bool capturing = false;

  void apply(const std::string& point, float* data, std::size_t n) {
    std::vector<float> before;
    if (capturing) before.assign(data, data + n);
    const std::span<float> x(data, n);
    if (cfg_.quantizer == QuantizerKind::OneBit) {
      auto& state = states_.try_emplace(point, n).first->second;
      const auto q = onebit_quantize(x, state);
      onebit_decode_into(q, x);
    } else {
      round_trip_inplace(x, *codebook_);
    }
    if (capturing) record(point, before, x);
  }

  std::vector<HookStat> stats() const {
    std::vector<HookStat> out;
    for (const auto& name : order_) out.push_back(stats_.at(name));
    return out;
  }

 private:
  void record(const std::string& point, const std::vector<float>& before, std::span<const float> after) {
    auto [it, inserted] = stats_.try_emplace(point);
    if (inserted) {
      it->second.point = point;
      order_.push_back(point);
    }
    HookStat& s = it->second;
    for (std::size_t i = 0; i < before.size(); ++i) {
      const double err = std::fabs(static_cast<double>(before[i]) - static_cast<double>(after[i]));
      s.abs_sum += err;
      ++s.count;
      if (before[i] != 0.0f) {
        s.rel_sum += err / std::fabs(static_cast<double>(before[i]));
        ++s.nonzero;
      }
    }
  }

  QuantHookConfig cfg_;
  std::unique_ptr<Codebook> codebook_;
  std::map<std::string, OneBitState> states_;
  std::map<std::string, HookStat> stats_;
  std::vector<std::string> order_;
};

double error_rate(const std::vector<int>& predicted, const std::vector<int>& truth) {
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
  return truth.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(truth.size());
}

std::string join_stats(const std::vector<HookStat>& stats, bool relative) {
  std::string out;
  char buf[64];
  for (const auto& s : stats) {
    if (!out.empty()) out += '/';
    std::snprintf(buf, sizeof buf, "%.3g", relative ? s.mean_rel_pct() : s.mean_abs());
    out += buf;
  }
  return out;
}

}  // namespace

void MlpConfig::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("layer_sizes must have at least 2 entries");
  for (int s : layer_sizes)
    if (s < 1) throw ConfigError("layer_sizes entries must be >= 1");
  if (dropout_rates.size() != layer_sizes.size() - 1)
    throw ConfigError("dropout_rates needs one rate per non-output layer (" +
                      std::to_string(layer_sizes.size() - 1) + "), got " +
                      std::to_string(dropout_rates.size()));
  for (double r : dropout_rates)
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout_rates entries must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(rmsprop_decay >= 0.0 && rmsprop_decay < 1.0)) throw ConfigError("rmsprop_decay must be in [0, 1)");
  if (!(rmsprop_epsilon > 0.0)) throw ConfigError("rmsprop_epsilon must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

QuantHookConfig QuantHookConfig::eight_bit(HookMode mode, DataKind kind) {
  QuantHookConfig c;
  c.mode = mode;
  c.quantizer = QuantizerKind::EightBit;
  c.spec.kind = kind;
  if (kind == DataKind::DynamicTree || kind == DataKind::LinearQuant)
    c.spec.norm = Normalization::absmax();
  else
    c.spec.norm = mode == HookMode::ModelParallel ? Normalization::decade(1) : Normalization::none();
  return c;
}

void QuantHookConfig::validate() const {
  if (mode == HookMode::None) return;
  if (quantizer == QuantizerKind::OneBit) {
    if (mode != HookMode::DataParallel)
      throw ConfigError("hooks: 1-bit quantization is only supported for data-parallel gradients");
    return;
  }
  spec.validate();
}

std::string QuantHookConfig::label() const {
  if (mode == HookMode::None) return "32-bit";
  const std::string q = quantizer == QuantizerKind::OneBit ? "onebit" : to_string(spec);
  return std::string(to_string(mode)) + ":" + q;
}

std::string_view to_string(HookMode mode) {
  switch (mode) {
    case HookMode::None: return "none";
    case HookMode::DataParallel: return "data-parallel";
    case HookMode::ModelParallel: return "model-parallel";
  }
  return "unknown";
}

HookMode parse_hook_mode(std::string_view text) {
  if (text == "none") return HookMode::None;
  if (text == "data-parallel" || text == "dp") return HookMode::DataParallel;
  if (text == "model-parallel" || text == "mp") return HookMode::ModelParallel;
  throw ConfigError("mode: unknown hook mode '" + std::string(text) + "'");
}

std::string TrainReport::abs_triplet() const { return join_stats(hook_stats, false); }
std::string TrainReport::rel_triplet() const { return join_stats(hook_stats, true); }

TrainData load_mnist_dir(const std::string& dir, std::optional<Eigen::Index> train_limit) {
  TrainData d;
  d.train = load_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
  d.test = load_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
  if (train_limit) d.train = d.train.head(*train_limit);
  return d;
}

TrainReport train(const MlpConfig& config, const QuantHookConfig& hooks, const TrainData& data) {
  config.validate();
  hooks.validate();
  const auto in = static_cast<Eigen::Index>(config.layer_sizes.front());
  const auto out = static_cast<Eigen::Index>(config.layer_sizes.back());
  if (data.train.images.cols() != in || data.test.images.cols() != in)
    throw TrainingError("input width does not match layer_sizes.front() = " + std::to_string(in), 0, 0);
  if (data.train.labels.cols() != out || data.test.labels.cols() != out)
    throw TrainingError("label width does not match layer_sizes.back() = " + std::to_string(out), 0, 0);
  if (data.train.rows() == 0) throw TrainingError("empty training set", 0, 0);

  Rng rng(config.seed);
  Mlp<float> net(config.layer_sizes, rng);
  RmsProp<float> opt(net, config.learning_rate, config.rmsprop_decay, config.rmsprop_epsilon);
  Quantizer quant(hooks);

  BoundaryHooks<float> boundary;
  if (hooks.mode == HookMode::ModelParallel) {
    boundary.activation = [&](int layer, float* p, std::size_t n) {
      quant.apply("act" + std::to_string(layer), p, n);
    };
    boundary.error = [&](int layer, float* p, std::size_t n) {
      quant.apply("err" + std::to_string(layer), p, n);
    };
  }
  const BoundaryHooks<float>* hook_ptr = hooks.mode == HookMode::ModelParallel ? &boundary : nullptr;

  // Evaluation forwards must not perturb training statistics.
  auto evaluate = [&](const Dataset& d) {
    const bool was = quant.capturing;
    quant.capturing = false;
    const double e = error_rate(net.predict(d.images, hook_ptr), d.label_index);
    quant.capturing = was;
    return e;
  };

  TrainReport report;
  report.hook_label = hooks.label();
  report.mode = hooks.mode;
  report.seed = config.seed;

  const auto n = static_cast<std::size_t>(data.train.rows());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const int capture_epoch = config.epochs / 2;
  MlpGradients<float> grads;
  Matrix xb, yb;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    quant.capturing = hooks.mode != HookMode::None && epoch == capture_epoch;
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      const auto rows = static_cast<Eigen::Index>(end - start);
      xb.resize(rows, in);
      yb.resize(rows, out);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto src = order[start + static_cast<std::size_t>(r)];
        xb.row(r) = data.train.images.row(src);
        yb.row(r) = data.train.labels.row(src);
      }
      const float loss = net.loss_and_gradients(xb, yb, grads, config.dropout_rates, &rng, hook_ptr);
      if (!std::isfinite(loss)) throw TrainingError("non-finite loss", epoch, batches);
      if (hooks.mode == HookMode::DataParallel) {
        for (std::size_t l = 0; l < grads.weights.size(); ++l) {
          const std::string id = std::to_string(l + 1);
          quant.apply("W" + id, grads.weights[l].data(), static_cast<std::size_t>(grads.weights[l].size()));
          const bool was = quant.capturing;
          quant.capturing = false;  // report weight gradients only
          quant.apply("b" + id, grads.biases[l].data(), static_cast<std::size_t>(grads.biases[l].size()));
          quant.capturing = was;
        }
      }
      opt.step(net, grads);
      loss_sum += loss;
      if (epoch == 0) report.first_epoch_batch_loss.push_back(loss);
      ++batches;
    }
    quant.capturing = false;
    report.epoch_loss.push_back(loss_sum / batches);
    report.train_error.push_back(evaluate(data.train));
    report.test_error.push_back(evaluate(data.test));
  }
  report.final_test_error = report.test_error.back();
  if (hooks.mode != HookMode::None) report.hook_stats = quant.stats();
  return report;
}

std::vector<ParityRow> parity_experiment(const MlpConfig& config,
                                         const std::vector<QuantHookConfig>& quantizers,
                                         const std::vector<std::uint64_t>& seeds,
                                         const TrainData& data) {
  if (seeds.size() < 2) throw ConfigError("parity: at least 2 seeds per cell are required");
  std::vector<ParityRow> rows;
  rows.push_back({QuantHookConfig::none(), {}, 0.0, 0.0});
  for (const auto& q : quantizers) {
    q.validate();
    rows.push_back({q, {}, 0.0, 0.0});
  }
  for (auto& r : rows) r.runs.resize(seeds.size());

  const std::size_t jobs = rows.size() * seeds.size();
  parallel_chunks(jobs, 2, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      auto& row = rows[j / seeds.size()];
      MlpConfig c = config;
      c.seed = seeds[j % seeds.size()];
      row.runs[j % seeds.size()] = train(c, row.hooks, data);
    }
  });

  for (auto& r : rows) {
    double sum = 0.0;
    for (const auto& run : r.runs) sum += run.final_test_error;
    r.mean_test_error = sum / static_cast<double>(r.runs.size());
    double ss = 0.0;
    for (const auto& run : r.runs) ss += std::pow(run.final_test_error - r.mean_test_error, 2);
    r.sd_test_error = std::sqrt(ss / static_cast<double>(r.runs.size() - 1));
  }
  return rows;
}

void write_train_csv(std::ostream& os, const TrainReport& report) {
  os << "epoch,hooks,seed,loss,train_error_pct,test_error_pct\n";
  char buf[256];
  for (std::size_t e = 0; e < report.test_error.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%llu,%.6f,%.3f,%.3f\n", e + 1, report.hook_label.c_str(),
                  static_cast<unsigned long long>(report.seed), report.epoch_loss[e],
                  100.0 * report.train_error[e], 100.0 * report.test_error[e]);
    os << buf;
  }
  if (!report.hook_stats.empty()) {
    os << "# hook_points,";
    for (std::size_t i = 0; i < report.hook_stats.size(); ++i)
      os << (i ? "/" : "") << report.hook_stats[i].point;
    os << "\n# mean_abs_error," << report.abs_triplet() << "\n# mean_rel_error_pct,"
       << report.rel_triplet() << "\n";
  }
}

void write_parity_csv(std::ostream& os, const std::vector<ParityRow>& rows) {
  os << "mode,datatype,seeds,mean_test_error_pct,sd_test_error_pct,hook_points,mean_abs_error,mean_rel_error_pct\n";
  char buf[512];
  for (const auto& r : rows) {
    const std::string dtype = r.hooks.mode == HookMode::None ? "32-bit"
                              : r.hooks.quantizer == QuantizerKind::OneBit ? "onebit"
                                                                           : to_string(r.hooks.spec);
    std::string points;
    const TrainReport& first = r.runs.front();
    for (std::size_t i = 0; i < first.hook_stats.size(); ++i)
      points += (i ? "/" : "") + first.hook_stats[i].point;
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.3f,%.3f,%s,%s,%s\n",
                  std::string(to_string(r.hooks.mode)).c_str(), dtype.c_str(), r.runs.size(),
                  100.0 * r.mean_test_error, 100.0 * r.sd_test_error, points.c_str(),
                  first.abs_triplet().c_str(), first.rel_triplet().c_str());
    os << buf;
  }
}

}  // namespace approx8

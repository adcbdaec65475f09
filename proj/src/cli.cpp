#include "approx8/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "approx8/codec.hpp"
#include "approx8/error_bench.hpp"
#include "approx8/errors.hpp"
#include "approx8/onebit.hpp"
#include "approx8/perf_config.hpp"
#include "approx8/perf_model.hpp"
#include "approx8/tensor_file.hpp"
#include "approx8/train.hpp"

namespace approx8 {

namespace {

using namespace perf;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Writes to --out when given, else to the command's stdout.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw InputError("out: cannot write " + path);
      os_ = file_.get();
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_;
};

struct CodecFlags {
  std::string dtype = "dynamic-tree";
  std::string norm = "none";

  bool onebit() const { return dtype == "onebit"; }
  DataTypeSpec spec() const {
    DataTypeSpec s{parse_data_kind(dtype), parse_normalization(norm)};
    s.validate();
    return s;
  }
};

void add_codec_flags(CLI::App* cmd, CodecFlags& f) {
  cmd->add_option("--dtype", f.dtype, "dynamic-tree | static-tree | linear | mantissa | onebit")
      ->capture_default_str();
  cmd->add_option("--norm", f.norm, "none | absmax | decade:N")->capture_default_str();
}

void run_codebook(const CodecFlags& f, const std::string& out_path, std::ostream& out) {
  if (f.onebit()) throw ConfigError("dtype: onebit has no codebook");
  Sink sink(out_path, out);
  dump_codebook(*sink, build_codebook(f.spec()));
}

void run_encode(const CodecFlags& f, const std::string& in_path, const std::string& out_path) {
  const TensorFile in = read_tensor_file(in_path);
  if (in.tag != TensorTag::F32) throw InputError("encode: input " + in_path + " is not an f32 tensor");
  QuantizedTensor q;
  if (f.onebit()) {
    OneBitState state(in.values.size());
    q = onebit_quantize(in.values, state);
    q.shape = in.shape;
  } else {
    q = encode_buffer(in.values, build_codebook(f.spec()), in.shape);
  }
  write_tensor_file(out_path, TensorFile::from_quantized(std::move(q)));
}

void run_decode(const CodecFlags& f, bool dtype_given, bool norm_given, const std::string& in_path,
                const std::string& out_path) {
  const TensorFile in = read_tensor_file(in_path);
  std::vector<float> values;
  switch (in.tag) {
    case TensorTag::F32:
      throw InputError("decode: input " + in_path + " is already an f32 tensor");
    case TensorTag::PackedBits:
      if (dtype_given && !f.onebit())
        throw UsageError("decode: file holds 1-bit codes but --dtype is " + f.dtype);
      values = onebit_decode(in.quantized);
      break;
    case TensorTag::Codes8: {
      const DataTypeSpec file_spec = in.quantized.spec;
      DataTypeSpec want = file_spec;
      if (dtype_given) want.kind = parse_data_kind(f.dtype);
      if (norm_given) want.norm = parse_normalization(f.norm);
      if (!(want == file_spec))
        throw UsageError("decode: file was encoded as " + to_string(file_spec) + " but flags ask for " +
                         to_string(want));
      values = decode_buffer(in.quantized, build_codebook(file_spec));
      break;
    }
  }
  write_tensor_file(out_path, TensorFile::from_floats(std::move(values), in.shape));
}

void run_bench_error(std::size_t n, std::uint64_t seed, const std::string& out_path, std::ostream& out) {
  if (n < 1) throw ConfigError("n: must be >= 1");
  const auto reports = run_table2_suite(seed, n);
  Sink sink(out_path, out);
  write_error_csv(*sink, reports);
}

PayloadBits parse_bits(int bits) {
  if (bits == 32) return PayloadBits::Bits32;
  if (bits == 8) return PayloadBits::Bits8;
  throw ConfigError("bits: must be 32 or 8, got " + std::to_string(bits));
}

std::string speedup_cell(const SpeedupReport& r) {
  return fmt("%.2f", r.speedup) + (r.low_confidence ? "x?" : "x");
}

void print_reports(std::ostream& os, const std::vector<SpeedupReport>& reports) {
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %4s %5s %9s %10s %12s %14s %8s\n", "baseline", "bits", "gpus",
                "sub-batch", "total_ms", "conv_pen_ms", "fc_pen_ms", "speedup");
  os << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-12s %4d %5d %9d %10.1f %12.3f %14.3f %8s\n",
                  r.baseline_name.c_str(), bit_count(r.bits), r.n_gpus, r.sub_batch_size,
                  r.baseline_total_ms, r.conv_penalty_ms, r.fc_penalty_ms, speedup_cell(r).c_str());
    os << line;
    for (const auto& w : r.warnings) os << "  warning: " << w << "\n";
  }
}

void write_report_csv(std::ostream& os, const std::vector<SpeedupReport>& reports) {
  os << "baseline,bits,gpus,sub_batch,baseline_total_ms,conv_penalty_ms,fc_penalty_ms,parallel_fc_ms,speedup,low_confidence\n";
  char line[256];
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%s,%d,%d,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%d\n", r.baseline_name.c_str(),
                  bit_count(r.bits), r.n_gpus, r.sub_batch_size, r.baseline_total_ms, r.conv_penalty_ms,
                  r.fc_penalty_ms, r.parallel_fc_ms, r.speedup, r.low_confidence ? 1 : 0);
    os << line;
  }
}

void run_predict(const std::string& config_path, std::vector<int> bits_list, int sub_batch,
                 const std::string& out_path, std::ostream& out) {
  const PerfConfig cfg = load_perf_config(config_path);
  if (bits_list.empty()) bits_list = {32, 8};
  std::vector<SpeedupReport> reports;
  for (int b : bits_list) {
    const PayloadBits bits = parse_bits(b);
    for (const auto& base : cfg.baselines) {
      if (cfg.plan) {
        ParallelPlan plan = *cfg.plan;
        plan.bits = bits;
        reports.push_back(predict_single_node(cfg.node, plan, cfg.profile, base.total_ms, base.name));
      } else if (cfg.cluster) {
        const int size = sub_batch > 0 ? sub_batch : cfg.cluster->passes.front().sub_batch;
        reports.push_back(predict_cluster(*cfg.cluster, size, bits, cfg.profile, base.total_ms,
                                          cfg.cluster_mode, base.name));
      } else {
        throw ConfigError("config: needs a plan section or a cluster section");
      }
    }
  }
  if (!cfg.plan && cfg.cluster && cfg.cluster->conv_gradient_bytes) {
    out << "conv gradient sync (" << fmt("%.0f", *cfg.cluster->conv_gradient_bytes / kKiB)
        << " kB, 2 rounds): " << fmt("%.3f", cluster_broadcast_ms(cfg.profile, *cfg.cluster->conv_gradient_bytes, 2))
        << " ms\n";
  }
  print_reports(out, reports);
  if (!out_path.empty()) {
    Sink sink(out_path, out);
    write_report_csv(*sink, reports);
  }
}

void run_sweep(const std::string& config_path, std::vector<int> sizes, const std::string& mode,
               const std::string& out_path, std::ostream& out) {
  const PerfConfig cfg = load_perf_config(config_path);
  if (!cfg.cluster) throw ConfigError("config: sweep needs a cluster section");
  ClusterMode m = cfg.cluster_mode;
  if (mode == "measured")
    m = ClusterMode::Measured;
  else if (mode == "derived")
    m = ClusterMode::Derived;
  else if (!mode.empty())
    throw ConfigError("mode: must be measured or derived, got '" + mode + "'");
  if (sizes.empty()) sizes = cfg.sweep_sizes;
  if (sizes.empty())
    for (const auto& p : cfg.cluster->passes) sizes.push_back(p.sub_batch);
  const auto rows = sweep_sub_batch(*cfg.cluster, cfg.profile, cfg.baselines, sizes, m);

  out << "Sub-batch";
  for (const auto& b : cfg.baselines) {
    char h[96];
    std::snprintf(h, sizeof h, " | %-9s 32-bit |     8-bit", b.name.substr(0, 9).c_str());
    out << h;
  }
  out << "\n";
  for (const auto& row : rows) {
    char cell[64];
    std::snprintf(cell, sizeof cell, "%9d", row.sub_batch);
    out << cell;
    for (std::size_t i = 0; i < cfg.baselines.size(); ++i) {
      std::snprintf(cell, sizeof cell, " | %16s | %9s", speedup_cell(row.bits32[i]).c_str(),
                    speedup_cell(row.bits8[i]).c_str());
      out << cell;
    }
    out << "\n";
  }
  if (!out_path.empty()) {
    std::vector<SpeedupReport> flat;
    for (const auto& row : rows) {
      flat.insert(flat.end(), row.bits32.begin(), row.bits32.end());
      flat.insert(flat.end(), row.bits8.begin(), row.bits8.end());
    }
    Sink sink(out_path, out);
    write_report_csv(*sink, flat);
  }
}

struct TrainFlags {
  std::string data_dir = "data/mnist-subset";
  long train_limit = 0;
  std::vector<int> hidden = {128, 128};
  int epochs = 10;
  int batch_size = 100;
  double learning_rate = 0.003;
  std::uint64_t seed = 1;

  MlpConfig config() const {
    MlpConfig c;
    c.layer_sizes = {784};
    c.layer_sizes.insert(c.layer_sizes.end(), hidden.begin(), hidden.end());
    c.layer_sizes.push_back(10);
    c.dropout_rates = {0.2};
    for (std::size_t i = 0; i < hidden.size(); ++i) c.dropout_rates.push_back(0.3);
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.learning_rate = learning_rate;
    c.seed = seed;
    return c;
  }
  TrainData data() const {
    return load_mnist_dir(data_dir, train_limit > 0 ? std::optional<Eigen::Index>(train_limit) : std::nullopt);
  }
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--data", f.data_dir, "directory with train-/t10k- IDX files")->capture_default_str();
  cmd->add_option("--train-limit", f.train_limit, "use only the first N training samples");
  cmd->add_option("--hidden", f.hidden, "hidden layer widths")->capture_default_str();
  cmd->add_option("--epochs", f.epochs)->capture_default_str();
  cmd->add_option("--batch-size", f.batch_size)->capture_default_str();
  cmd->add_option("--lr", f.learning_rate)->capture_default_str();
}

QuantHookConfig hook_config(HookMode mode, const CodecFlags& f, bool norm_given) {
  if (mode == HookMode::None) return QuantHookConfig::none();
  if (f.onebit()) return QuantHookConfig::one_bit();
  QuantHookConfig h = QuantHookConfig::eight_bit(mode, parse_data_kind(f.dtype));
  if (norm_given) h.spec.norm = parse_normalization(f.norm);
  return h;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"8-bit gradient/activation approximation toolkit", "approx8"};
  app.require_subcommand(1);

  CodecFlags codec;
  std::string out_path, in_path, config_path, mode_text = "data-parallel", dtypes_text, modes_text;
  std::size_t n = 1'000'000;
  std::uint64_t seed = 0;
  int seeds = 3, sub_batch = 0;
  std::vector<int> bits_list, sizes;
  std::string sweep_mode;
  TrainFlags tf;

  auto* codebook = app.add_subcommand("codebook", "dump the decode table of a data type");
  add_codec_flags(codebook, codec);
  codebook->add_option("--out", out_path);

  auto* encode = app.add_subcommand("encode", "encode an f32 tensor file");
  add_codec_flags(encode, codec);
  encode->add_option("--in", in_path)->required();
  encode->add_option("--out", out_path)->required();

  auto* decode = app.add_subcommand("decode", "decode a code tensor file back to f32");
  add_codec_flags(decode, codec);
  decode->add_option("--in", in_path)->required();
  decode->add_option("--out", out_path)->required();

  auto* bench = app.add_subcommand("bench-error", "approximation error over the standard distributions");
  bench->add_option("--n", n, "samples per cell")->capture_default_str();
  bench->add_option("--seed", seed)->capture_default_str();
  bench->add_option("--out", out_path);

  auto* predict = app.add_subcommand("predict", "predict parallel speedup from a benchmark config");
  predict->add_option("--config", config_path)->required();
  predict->add_option("--bits", bits_list, "32 and/or 8 (default both)");
  predict->add_option("--sub-batch", sub_batch, "cluster configs: sub-batch row");
  predict->add_option("--out", out_path, "also write CSV here");

  auto* sweep = app.add_subcommand("sweep", "speedup over sub-batch sizes for a cluster config");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--sizes", sizes);
  sweep->add_option("--mode", sweep_mode, "measured | derived");
  sweep->add_option("--out", out_path, "also write CSV here");

  auto* train_cmd = app.add_subcommand("train", "train the MLP with quantization hooks");
  add_codec_flags(train_cmd, codec);
  add_train_flags(train_cmd, tf);
  train_cmd->add_option("--mode", mode_text, "none | data-parallel | model-parallel")->capture_default_str();
  train_cmd->add_option("--seed", tf.seed)->capture_default_str();
  train_cmd->add_option("--out", out_path);

  auto* parity = app.add_subcommand("parity", "32-bit vs quantized training over several seeds");
  add_train_flags(parity, tf);
  parity->add_option("--seeds", seeds, "runs per cell")->capture_default_str();
  parity->add_option("--seed", tf.seed, "first seed")->capture_default_str();
  parity->add_option("--dtypes", dtypes_text, "comma list (default: all four 8-bit types)");
  parity->add_option("--modes", modes_text, "comma list of data-parallel,model-parallel");
  parity->add_option("--out", out_path);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitInput;
  }

  try {
    if (*codebook) {
      run_codebook(codec, out_path, out);
    } else if (*encode) {
      run_encode(codec, in_path, out_path);
    } else if (*decode) {
      run_decode(codec, decode->count("--dtype") > 0, decode->count("--norm") > 0, in_path, out_path);
    } else if (*bench) {
      run_bench_error(n, seed, out_path, out);
    } else if (*predict) {
      run_predict(config_path, bits_list, sub_batch, out_path, out);
    } else if (*sweep) {
      run_sweep(config_path, sizes, sweep_mode, out_path, out);
    } else if (*train_cmd) {
      const HookMode mode = parse_hook_mode(mode_text);
      const auto hooks = hook_config(mode, codec, train_cmd->count("--norm") > 0);
      const auto report = train(tf.config(), hooks, tf.data());
      Sink sink(out_path, out);
      write_train_csv(*sink, report);
    } else if (*parity) {
      std::vector<HookMode> modes;
      for (const auto& m : split_list(modes_text.empty() ? "data-parallel,model-parallel" : modes_text))
        modes.push_back(parse_hook_mode(m));
      std::vector<std::string> kinds =
          split_list(dtypes_text.empty() ? "dynamic-tree,static-tree,linear,mantissa" : dtypes_text);
      std::vector<QuantHookConfig> quantizers;
      for (auto mode : modes) {
        for (const auto& k : kinds) {
          CodecFlags f;
          f.dtype = k;
          if (f.onebit() && mode != HookMode::DataParallel) continue;
          quantizers.push_back(hook_config(mode, f, false));
        }
      }
      std::vector<std::uint64_t> seed_list;
      for (int i = 0; i < seeds; ++i) seed_list.push_back(tf.seed + static_cast<std::uint64_t>(i));
      const auto rows = parity_experiment(tf.config(), quantizers, seed_list, tf.data());
      Sink sink(out_path, out);
      write_parity_csv(*sink, rows);
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace approx8

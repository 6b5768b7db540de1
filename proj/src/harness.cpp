#include "bcsc/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string_view>

#include "bcsc/data.hpp"
#include "bcsc/errors.hpp"

namespace bcsc {

namespace {

constexpr std::string_view kCsvHeader =
    "epoch,train_loss_mean,train_loss_std,test_loss,test_acc,lr,wall_ms";

std::string trim(std::string_view s) {
  constexpr std::string_view kWs = " \t\r\n";
  const auto begin = s.find_first_not_of(kWs);
  if (begin == std::string_view::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(kWs);
  return std::string(s.substr(begin, end - begin + 1));
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), last, out);
  if (ec != std::errc{} || ptr != last || value.empty()) {
    throw ConfigError(key + ": expected unsigned integer, got '" + value + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), last, out);
  if (ec != std::errc{} || ptr != last || value.empty()) {
    throw ConfigError(key + ": expected real number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") {
    return true;
  }
  if (value == "false" || value == "0") {
    return false;
  }
  throw ConfigError(key + ": expected true|false|1|0, got '" + value + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t begin = 0;
  while (true) {
    const std::size_t end = s.find(sep, begin);
    parts.push_back(s.substr(begin, end - begin));
    if (end == std::string::npos) {
      return parts;
    }
    begin = end + 1;
  }
}

std::vector<std::pair<std::size_t, double>> parse_schedule(const std::string& value) {
  std::vector<std::pair<std::size_t, double>> pieces;
  for (const std::string& token : split(value, ',')) {
    const std::vector<std::string> kv = split(trim(token), ':');
    if (kv.size() != 2) {
      throw ConfigError("schedule: expected comma-separated epoch:lr pieces, got '" + value +
                        "'");
    }
    pieces.emplace_back(parse_u64("schedule epoch", kv[0]), parse_real("schedule lr", kv[1]));
  }
  return pieces;
}

std::string resolve_data_file(const std::string& dir, const std::string& base) {
  namespace fs = std::filesystem;
  const fs::path plain = fs::path(dir) / base;
  if (fs::exists(plain)) {
    return plain.string();
  }
  const fs::path gz = fs::path(dir) / (base + ".gz");
  if (fs::exists(gz)) {
    return gz.string();
  }
  throw ConfigError("dataset file not found: " + plain.string() + " (also tried .gz)");
}

std::string resolve_data_dir(const ExperimentConfig& cfg) {
  if (!cfg.data_dir.empty()) {
    return cfg.data_dir;
  }
  if (const char* env = std::getenv("BCSC_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  throw ConfigError("mnist dataset needs data_dir in the config or BCSC_DATA_DIR in the "
                    "environment");
}

OptimizerConfig to_optimizer_config(const ExperimentConfig& cfg) {
  OptimizerConfig out;
  out.method = cfg.method;
  out.blocks = cfg.blocks;
  out.batch_size = cfg.batch_size;
  out.momentum = cfg.momentum;
  out.weight_decay = cfg.weight_decay;
  out.schedule = make_schedule(cfg.schedule_pieces, cfg.epochs);
  out.adagrad = cfg.adagrad;
  out.adagrad_eps = cfg.adagrad_eps;
  return out;
}

double mean_of(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) {
    sum += x;
  }
  return sum / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs, double mean) {
  double sq = 0.0;
  for (double x : xs) {
    sq += (x - mean) * (x - mean);
  }
  return std::sqrt(sq / static_cast<double>(xs.size()));
}

struct LoadedData {
  Dataset train;
  Dataset test;
};

LoadedData load_data(const ExperimentConfig& cfg) {
  LoadedData out;
  if (cfg.dataset == DatasetKind::kMnist) {
    auto [train, test] = load_mnist(resolve_data_dir(cfg));
    out.train = std::move(train);
    out.test = std::move(test);
    if (cfg.train_subset > 0) {
      RngStream s = derive_stream(cfg.seed, "subset/train");
      out.train = subset(out.train, s, cfg.train_subset);
    }
    if (cfg.test_subset > 0) {
      RngStream s = derive_stream(cfg.seed, "subset/test");
      out.test = subset(out.test, s, cfg.test_subset);
    }
  } else {
    RngStream train_stream = derive_stream(cfg.seed, "synth/train");
    out.train = synth_blobs(train_stream, cfg.synth_train_n, cfg.synth_d, cfg.synth_k,
                            cfg.synth_separation);
    RngStream test_stream = derive_stream(cfg.seed, "synth/test");
    out.test = synth_blobs(test_stream, cfg.synth_test_n, cfg.synth_d, cfg.synth_k,
                           cfg.synth_separation);
  }
  if (cfg.outlier_rate > 0.0) {
    RngStream s = derive_stream(cfg.seed, "corrupt");
    out.train = corrupt_labels(s, out.train, cfg.outlier_rate).data;
  }
  return out;
}

std::unique_ptr<GradOracle> make_oracle(const ExperimentConfig& cfg, const LoadedData& data) {
  const std::size_t num_classes = std::max(data.train.num_classes, data.test.num_classes);
  if (cfg.model == ModelKind::kLogistic) {
    return logistic_oracle(data.train.feature_dim, num_classes);
  }
  return mlp_oracle(data.train.feature_dim, cfg.hidden, num_classes);
}

}  // namespace

std::pair<Dataset, Dataset> load_mnist(const std::string& dir) {
  const RawIdxTensor train_images = load_idx(resolve_data_file(dir, "train-images-idx3-ubyte"));
  const RawIdxTensor train_labels = load_idx(resolve_data_file(dir, "train-labels-idx1-ubyte"));
  const RawIdxTensor test_images = load_idx(resolve_data_file(dir, "t10k-images-idx3-ubyte"));
  const RawIdxTensor test_labels = load_idx(resolve_data_file(dir, "t10k-labels-idx1-ubyte"));
  return {to_dataset(train_images, train_labels), to_dataset(test_images, test_labels)};
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(path + ": cannot open config file");
  }
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const std::string stripped = trim(line);
    if (stripped.empty()) {
      continue;
    }
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key or value");
    }
    try {
      apply_config_entry(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "method") {
    cfg.method = method_from_string(value);
  } else if (key == "blocks") {
    cfg.blocks = parse_u64(key, value);
  } else if (key == "batch_size") {
    cfg.batch_size = parse_u64(key, value);
  } else if (key == "epochs") {
    cfg.epochs = parse_u64(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "model") {
    if (value == "logistic") {
      cfg.model = ModelKind::kLogistic;
    } else if (value == "mlp") {
      cfg.model = ModelKind::kMlp;
    } else {
      throw ConfigError("model: expected logistic|mlp, got '" + value + "'");
    }
  } else if (key == "hidden") {
    cfg.hidden = parse_u64(key, value);
  } else if (key == "dataset") {
    if (value == "mnist") {
      cfg.dataset = DatasetKind::kMnist;
    } else if (value == "synth") {
      cfg.dataset = DatasetKind::kSynth;
    } else {
      throw ConfigError("dataset: expected mnist|synth, got '" + value + "'");
    }
  } else if (key == "data_dir") {
    cfg.data_dir = value;
  } else if (key == "train_subset") {
    cfg.train_subset = parse_u64(key, value);
  } else if (key == "test_subset") {
    cfg.test_subset = parse_u64(key, value);
  } else if (key == "synth_train_n") {
    cfg.synth_train_n = parse_u64(key, value);
  } else if (key == "synth_test_n") {
    cfg.synth_test_n = parse_u64(key, value);
  } else if (key == "synth_d") {
    cfg.synth_d = parse_u64(key, value);
  } else if (key == "synth_k") {
    cfg.synth_k = parse_u64(key, value);
  } else if (key == "synth_separation") {
    cfg.synth_separation = parse_real(key, value);
  } else if (key == "outlier_rate") {
    cfg.outlier_rate = parse_real(key, value);
  } else if (key == "schedule") {
    cfg.schedule_pieces = parse_schedule(value);
  } else if (key == "momentum") {
    cfg.momentum = parse_real(key, value);
  } else if (key == "weight_decay") {
    cfg.weight_decay = parse_real(key, value);
  } else if (key == "adagrad") {
    cfg.adagrad = parse_bool(key, value);
  } else if (key == "adagrad_eps") {
    cfg.adagrad_eps = parse_real(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.blocks == 0) {
    throw ConfigError("blocks must be >= 1");
  }
  if (cfg.method == Method::kSgd && cfg.blocks != 1) {
    throw ConfigError("sgd requires blocks = 1");
  }
  if (cfg.batch_size == 0) {
    throw ConfigError("batch_size must be >= 1");
  }
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw ConfigError("momentum must be in [0, 1)");
  }
  if (!(cfg.weight_decay >= 0.0) || !std::isfinite(cfg.weight_decay)) {
    throw ConfigError("weight_decay must be >= 0");
  }
  if (cfg.adagrad && !(cfg.adagrad_eps > 0.0)) {
    throw ConfigError("adagrad_eps must be > 0");
  }
  if (!(cfg.outlier_rate >= 0.0 && cfg.outlier_rate <= 1.0)) {
    throw ConfigError("outlier_rate must be in [0, 1]");
  }
  if (cfg.model == ModelKind::kMlp && cfg.hidden == 0) {
    throw ConfigError("hidden must be >= 1 for the mlp model");
  }
  if (cfg.epochs >= 1) {
    make_schedule(cfg.schedule_pieces, cfg.epochs);  // throws on bad pieces
  }
  if (cfg.dataset == DatasetKind::kSynth) {
    if (cfg.synth_d == 0 || cfg.synth_k == 0) {
      throw ConfigError("synth_d and synth_k must be >= 1");
    }
    if (cfg.synth_train_n < cfg.synth_k || cfg.synth_test_n == 0) {
      throw ConfigError("synth_train_n must be >= synth_k and synth_test_n >= 1");
    }
    if (!(cfg.synth_separation >= 0.0) || !std::isfinite(cfg.synth_separation)) {
      throw ConfigError("synth_separation must be >= 0");
    }
  } else {
    const std::string dir = resolve_data_dir(cfg);
    resolve_data_file(dir, "train-images-idx3-ubyte");
    resolve_data_file(dir, "train-labels-idx1-ubyte");
    resolve_data_file(dir, "t10k-images-idx3-ubyte");
    resolve_data_file(dir, "t10k-labels-idx1-ubyte");
  }
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<MetricsRow> rows;
  if (cfg.epochs == 0) {
    return rows;
  }

  const LoadedData data = load_data(cfg);
  const std::unique_ptr<GradOracle> oracle = make_oracle(cfg, data);
  const OptimizerConfig ocfg = to_optimizer_config(cfg);
  validate(ocfg, oracle->param_count(), data.train.sample_count);

  RngStream init_stream = derive_stream(cfg.seed, "init");
  FlatVector w = oracle->init_params(init_stream);
  OptimizerState state(w.size());

  rows.reserve(cfg.epochs);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const EpochResult er = run_epoch(*oracle, w, data.train, ocfg, state, cfg.seed);
    const Evaluation ev = evaluate(*oracle, w, data.test);
    const std::chrono::duration<double, std::milli> wall =
        std::chrono::steady_clock::now() - start;

    MetricsRow row;
    row.epoch = epoch;
    row.train_loss_mean = mean_of(er.batch_losses);
    row.train_loss_std = population_std(er.batch_losses, row.train_loss_mean);
    row.test_loss = ev.mean_loss;
    row.test_acc = ev.accuracy;
    row.lr = lr_at(ocfg.schedule, epoch);
    row.wall_ms = wall.count();
    rows.push_back(row);
  }
  return rows;
}

Summary summarize(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) {
    throw ConfigError("summarize: no metrics rows");
  }
  const std::size_t total = rows.size();
  const std::size_t half = (total + 1) / 2;  // first half is epochs 1..ceil(E/2)
  Summary s;
  for (std::size_t i = 0; i < total; ++i) {
    s.all_acc += rows[i].test_acc;
    (i < half ? s.first_half_acc : s.last_half_acc) += rows[i].test_acc;
  }
  s.first_half_acc /= static_cast<double>(half);
  // A single epoch has an empty second half; report its accuracy there too so
  // all four windows stay meaningful.
  s.last_half_acc = (total > half)
                        ? s.last_half_acc / static_cast<double>(total - half)
                        : rows.back().test_acc;
  s.all_acc /= static_cast<double>(total);
  s.final_acc = rows.back().test_acc;
  return s;
}

void emit_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << kCsvHeader << '\n';
  char buf[256];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", r.epoch,
                  r.train_loss_mean, r.train_loss_std, r.test_loss, r.test_acc, r.lr, r.wall_ms);
    out << buf << '\n';
  }
}

void emit_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError(path + ": cannot open for writing");
  }
  emit_csv(rows, out);
  if (!out) {
    throw IoError(path + ": write failed");
  }
}

std::vector<MetricsRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError(path + ": cannot open");
  }
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) {
    throw FormatError(path + ": missing or wrong CSV header");
  }
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    const std::vector<std::string> fields = split(trim(line), ',');
    if (fields.size() != 7) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected 7 columns, got " +
                        std::to_string(fields.size()));
    }
    try {
      MetricsRow r;
      r.epoch = parse_u64("epoch", fields[0]);
      r.train_loss_mean = parse_real("train_loss_mean", fields[1]);
      r.train_loss_std = parse_real("train_loss_std", fields[2]);
      r.test_loss = parse_real("test_loss", fields[3]);
      r.test_acc = parse_real("test_acc", fields[4]);
      r.lr = parse_real("lr", fields[5]);
      r.wall_ms = parse_real("wall_ms", fields[6]);
      rows.push_back(r);
    } catch (const ConfigError& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<ComparisonRow> compare(std::span<const ExperimentConfig> configs,
                                   std::size_t repeats) {
  if (repeats == 0) {
    throw ConfigError("compare: repeats must be >= 1");
  }
  std::vector<ComparisonRow> rows;
  rows.reserve(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::vector<Summary> sums;
    sums.reserve(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
      ExperimentConfig run_cfg = configs[i];
      run_cfg.seed = configs[i].seed + r;
      try {
        sums.push_back(summarize(run_experiment(run_cfg)));
      } catch (const DivergenceError& e) {
        throw DivergenceError(e.epoch(), e.iteration(),
                              "config #" + std::to_string(i) + ": " + e.what());
      } catch (const Error& e) {
        throw Error("config #" + std::to_string(i) + ": " + e.what());
      }
    }
    const auto field_stats = [&sums](double Summary::*field) {
      std::vector<double> xs;
      xs.reserve(sums.size());
      for (const Summary& s : sums) {
        xs.push_back(s.*field);
      }
      const double mean = mean_of(xs);
      return std::pair<double, double>(mean, population_std(xs, mean));
    };
    ComparisonRow row;
    std::tie(row.mean.first_half_acc, row.stddev.first_half_acc) =
        field_stats(&Summary::first_half_acc);
    std::tie(row.mean.last_half_acc, row.stddev.last_half_acc) =
        field_stats(&Summary::last_half_acc);
    std::tie(row.mean.all_acc, row.stddev.all_acc) = field_stats(&Summary::all_acc);
    std::tie(row.mean.final_acc, row.stddev.final_acc) = field_stats(&Summary::final_acc);
    rows.push_back(row);
  }
  return rows;
}

void emit_comparison_csv(std::span<const std::string> names,
                         const std::vector<ComparisonRow>& rows, std::ostream& out) {
  if (names.size() != rows.size()) {
    throw ShapeError("emit_comparison_csv: " + std::to_string(names.size()) + " names vs " +
                     std::to_string(rows.size()) + " rows");
  }
  out << "config,first_half_mean,first_half_std,last_half_mean,last_half_std,all_mean,all_std,"
         "final_mean,final_std\n";
  char buf[320];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ComparisonRow& r = rows[i];
    std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                  names[i].c_str(), r.mean.first_half_acc, r.stddev.first_half_acc,
                  r.mean.last_half_acc, r.stddev.last_half_acc, r.mean.all_acc, r.stddev.all_acc,
                  r.mean.final_acc, r.stddev.final_acc);
    out << buf << '\n';
  }
}

}  // namespace bcsc

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bcsc/optim.hpp"

namespace bcsc {

enum class DatasetKind { kMnist, kSynth };
enum class ModelKind { kLogistic, kMlp };

// Everything a run depends on. `run_experiment` output is a pure function of
// this struct (wall_ms excepted).
struct ExperimentConfig {
  Method method = Method::kSgd;
  std::size_t blocks = 1;
  std::size_t batch_size = 128;
  std::size_t epochs = 0;
  std::uint64_t seed = 1;

  ModelKind model = ModelKind::kLogistic;
  std::size_t hidden = 64;  // mlp only

  DatasetKind dataset = DatasetKind::kMnist;
  std::string data_dir;           // empty: use $BCSC_DATA_DIR
  std::size_t train_subset = 0;   // 0: whole training split
  std::size_t test_subset = 0;    // 0: whole test split
  std::size_t synth_train_n = 200;
  std::size_t synth_test_n = 200;
  std::size_t synth_d = 2;
  std::size_t synth_k = 2;
  double synth_separation = 6.0;
  double outlier_rate = 0.0;  // fraction of training labels to corrupt

  std::vector<std::pair<std::size_t, double>> schedule_pieces = {{1, 0.1}};
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool adagrad = false;
  double adagrad_eps = 1e-8;
};

// Loads the four canonical IDX files (train/test images and labels, plain or
// .gz) from `dir` and returns {train, test}.
std::pair<Dataset, Dataset> load_mnist(const std::string& dir);

// Parses a flat `key = value` file with '#' comments. Unknown keys are
// rejected. See README for the key list.
ExperimentConfig parse_config_file(const std::string& path);

// Applies one key/value pair (the config-file grammar, also used by tests).
void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Rejects invalid configs, including missing dataset files, before any
// training starts.
void validate(const ExperimentConfig& cfg);

struct MetricsRow {
  std::size_t epoch = 0;
  double train_loss_mean = 0.0;
  double train_loss_std = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;  // informational only, excluded from determinism
};

// Runs the full experiment: loads data, initializes the model from a labeled
// substream, trains `epochs` epochs with the configured method, and evaluates
// on the test split after each epoch.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg);

struct Summary {
  double first_half_acc = 0.0;  // mean test_acc over epochs 1..ceil(E/2)
  double last_half_acc = 0.0;   // mean over the remaining epochs
  double all_acc = 0.0;         // mean over all epochs
  double final_acc = 0.0;       // last epoch's accuracy
};

Summary summarize(const std::vector<MetricsRow>& rows);

// CSV with the fixed header
// "epoch,train_loss_mean,train_loss_std,test_loss,test_acc,lr,wall_ms" and
// reals printed with 9 significant digits.
void emit_csv(const std::vector<MetricsRow>& rows, std::ostream& out);
void emit_csv(const std::vector<MetricsRow>& rows, const std::string& path);
std::vector<MetricsRow> read_csv(const std::string& path);

struct ComparisonRow {
  Summary mean;
  Summary stddev;
};

// Runs each config `repeats` times with seeds seed..seed+repeats-1 and reports
// mean and standard deviation of the four summary fields per config.
std::vector<ComparisonRow> compare(std::span<const ExperimentConfig> configs,
                                   std::size_t repeats);

void emit_comparison_csv(std::span<const std::string> names,
                         const std::vector<ComparisonRow>& rows, std::ostream& out);

}  // namespace bcsc

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bcsc/models.hpp"
#include "bcsc/numerics.hpp"

namespace bcsc {

enum class Method { kSgd, kBcd, kSbc, kRbc, kBcsc };

Method method_from_string(std::string_view name);
std::string_view to_string(Method method);

// Piecewise-constant learning-rate schedule over 1-based epochs.
struct SchedulePiece {
  std::size_t first_epoch;
  std::size_t last_epoch;  // inclusive
  double lr;
};

struct Schedule {
  std::vector<SchedulePiece> pieces;
};

// Builds a schedule from (start epoch, lr) pairs. Starts must begin at 1 and
// strictly increase; each piece extends to the next start - 1, the last to
// total_epochs.
Schedule make_schedule(std::span<const std::pair<std::size_t, double>> starts,
                       std::size_t total_epochs);

double lr_at(const Schedule& schedule, std::size_t epoch);

struct OptimizerConfig {
  Method method = Method::kSgd;
  std::size_t blocks = 1;  // M
  std::size_t batch_size = 128;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  Schedule schedule;
  bool adagrad = false;
  double adagrad_eps = 1e-8;
};

// Rejects configurations that violate the method contracts (e.g. SGD with
// more than one block, batches larger than the dataset, BCD beyond desk
// scale).
void validate(const OptimizerConfig& cfg, std::size_t param_count, std::size_t sample_count);

struct OptimizerState {
  FlatVector velocity;
  FlatVector accumulator;  // AdaGrad sum of squared effective gradients
  std::size_t epoch = 0;   // epochs completed / in progress (1-based inside an epoch)

  explicit OptimizerState(std::size_t param_count)
      : velocity(param_count), accumulator(param_count) {}
};

// The one step rule shared by every method. For each coordinate c in `coords`:
// effective gradient g^ = grad[c] + weight_decay * params[c]; with adagrad the
// accumulator picks up g^2 and the scale becomes lr / sqrt(acc + eps), else the
// scale is lr; velocity[c] = momentum * velocity[c] + g^; step[c] = scale *
// velocity[c]. Entries outside `coords` are neither read nor written.
void coordinate_step(const FlatVector& grad, const FlatVector& params,
                     std::span<const std::size_t> coords, const OptimizerConfig& cfg, double lr,
                     OptimizerState& state, FlatVector& step_out);

// Batch losses observed during one epoch, in update order: t_max entries for
// SGD/BCD/SBC, t_max * M for RBC and BCSC.
struct EpochResult {
  std::vector<double> batch_losses;
};

// Each *_epoch advances state.epoch by one, draws its randomness from labeled
// substreams of master_seed (so reruns are bit-reproducible), performs one full
// pass, and mutates w in place.
EpochResult sgd_epoch(const GradOracle& oracle, FlatVector& w, const Dataset& data,
                      const OptimizerConfig& cfg, OptimizerState& state,
                      std::uint64_t master_seed);
EpochResult bcd_epoch(const GradOracle& oracle, FlatVector& w, const Dataset& data,
                      const OptimizerConfig& cfg, OptimizerState& state,
                      std::uint64_t master_seed);
EpochResult sbc_epoch(const GradOracle& oracle, FlatVector& w, const Dataset& data,
                      const OptimizerConfig& cfg, OptimizerState& state,
                      std::uint64_t master_seed);
EpochResult rbc_epoch(const GradOracle& oracle, FlatVector& w, const Dataset& data,
                      const OptimizerConfig& cfg, OptimizerState& state,
                      std::uint64_t master_seed);
EpochResult bcsc_epoch(const GradOracle& oracle, FlatVector& w, const Dataset& data,
                       const OptimizerConfig& cfg, OptimizerState& state,
                       std::uint64_t master_seed);

// Dispatches to the *_epoch matching cfg.method.
EpochResult run_epoch(const GradOracle& oracle, FlatVector& w, const Dataset& data,
                      const OptimizerConfig& cfg, OptimizerState& state,
                      std::uint64_t master_seed);

}  // namespace bcsc

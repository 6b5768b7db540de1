#include "bcsc/optim.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "bcsc/errors.hpp"
#include "bcsc/partition.hpp"
#include "bcsc/scheduler.hpp"

namespace bcsc {

namespace {

std::string epoch_label(std::string_view prefix, std::size_t epoch) {
  return std::string(prefix) + "/epoch=" + std::to_string(epoch);
}

std::string shuffle_label(std::size_t j, std::size_t epoch) {
  return "shuffle/j=" + std::to_string(j) + "/epoch=" + std::to_string(epoch);
}

void check_finite_loss(double loss, std::size_t epoch, std::size_t t) {
  if (!std::isfinite(loss)) {
    throw DivergenceError(epoch, t, "training loss is non-finite");
  }
}

// Shared prologue: bumps the epoch counter, validates, and resolves the
// learning rate for the new epoch.
double begin_epoch(const GradOracle& oracle, const FlatVector& w, const Dataset& data,
                   const OptimizerConfig& cfg, OptimizerState& state, Method expected) {
  if (cfg.method != expected) {
    throw ConfigError(std::string("epoch driver for ") + std::string(to_string(expected)) +
                      " called with method " + std::string(to_string(cfg.method)));
  }
  if (w.size() != oracle.param_count()) {
    throw ShapeError("epoch: params length " + std::to_string(w.size()) +
                     " != oracle param count " + std::to_string(oracle.param_count()));
  }
  if (state.velocity.size() != w.size() || state.accumulator.size() != w.size()) {
    throw ShapeError("epoch: optimizer state buffers do not match param count");
  }
  validate(cfg, w.size(), data.sample_count);
  state.epoch += 1;
  return lr_at(cfg.schedule, state.epoch);
}

std::vector<RngStream> block_data_streams(std::uint64_t master_seed, std::size_t blocks,
                                          std::size_t epoch) {
  std::vector<RngStream> streams;
  streams.reserve(blocks);
  for (std::size_t j = 0; j < blocks; ++j) {
    streams.push_back(derive_stream(master_seed, shuffle_label(j, epoch)));
  }
  return streams;
}

}  // namespace

Method method_from_string(std::string_view name) {
  if (name == "sgd") return Method::kSgd;
  if (name == "bcd") return Method::kBcd;
  if (name == "sbc") return Method::kSbc;
  if (name == "rbc") return Method::kRbc;
  if (name == "bcsc") return Method::kBcsc;
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (want sgd|bcd|sbc|rbc|bcsc)");
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kSgd:
      return "sgd";
    case Method::kBcd:
      return "bcd";
    case Method::kSbc:
      return "sbc";
    case Method::kRbc:
      return "rbc";
    case Method::kBcsc:
      return "bcsc";
  }
  throw ConfigError("unknown method enum value");
}

Schedule make_schedule(std::span<const std::pair<std::size_t, double>> starts,
                       std::size_t total_epochs) {
  if (starts.empty()) {
    throw ConfigError("schedule: need at least one (start epoch, lr) piece");
  }
  if (total_epochs == 0) {
    throw ConfigError("schedule: total_epochs must be >= 1");
  }
  if (starts.front().first != 1) {
    throw ConfigError("schedule: first piece must start at epoch 1");
  }
  Schedule schedule;
  schedule.pieces.reserve(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const auto [start, lr] = starts[i];
    if (i > 0 && start <= starts[i - 1].first) {
      throw ConfigError("schedule: piece starts must strictly increase");
    }
    if (start > total_epochs) {
      throw ConfigError("schedule: piece start " + std::to_string(start) +
                        " exceeds total epochs " + std::to_string(total_epochs));
    }
    if (!(lr > 0.0) || !std::isfinite(lr)) {
      throw ConfigError("schedule: learning rate must be positive and finite");
    }
    const std::size_t last = (i + 1 < starts.size()) ? starts[i + 1].first - 1 : total_epochs;
    schedule.pieces.push_back({start, last, lr});
  }
  return schedule;
}

double lr_at(const Schedule& schedule, std::size_t epoch) {
  for (const SchedulePiece& piece : schedule.pieces) {
    if (epoch >= piece.first_epoch && epoch <= piece.last_epoch) {
      return piece.lr;
    }
  }
  throw ConfigError("schedule: epoch " + std::to_string(epoch) + " is outside every piece");
}

void validate(const OptimizerConfig& cfg, std::size_t param_count, std::size_t sample_count) {
  if (param_count == 0 || sample_count == 0) {
    throw ConfigError("optimizer: need at least one parameter and one sample");
  }
  if (cfg.blocks == 0 || cfg.blocks > param_count) {
    throw ConfigError("optimizer: blocks must be in [1, " + std::to_string(param_count) +
                      "], got " + std::to_string(cfg.blocks));
  }
  if (cfg.method == Method::kSgd && cfg.blocks != 1) {
    throw ConfigError("optimizer: sgd requires blocks = 1");
  }
  if (cfg.batch_size == 0 || cfg.batch_size > sample_count) {
    throw ConfigError("optimizer: batch_size must be in [1, " + std::to_string(sample_count) +
                      "], got " + std::to_string(cfg.batch_size));
  }
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw ConfigError("optimizer: momentum must be in [0, 1)");
  }
  if (!(cfg.weight_decay >= 0.0) || !std::isfinite(cfg.weight_decay)) {
    throw ConfigError("optimizer: weight_decay must be >= 0");
  }
  if (cfg.adagrad && !(cfg.adagrad_eps > 0.0)) {
    throw ConfigError("optimizer: adagrad_eps must be > 0");
  }
  // A full-dataset gradient per iteration is only affordable at desk scale.
  if (cfg.method == Method::kBcd && sample_count > 10000) {
    throw ConfigError("optimizer: bcd is limited to sample counts <= 10000");
  }
}

void coordinate_step(const FlatVector& grad, const FlatVector& params,
                     std::span<const std::size_t> coords, const OptimizerConfig& cfg, double lr,
                     OptimizerState& state, FlatVector& step_out) {
  const std::size_t m = params.size();
  if (grad.size() != m || state.velocity.size() != m || state.accumulator.size() != m ||
      step_out.size() != m) {
    throw ShapeError("coordinate_step: buffer lengths disagree with param count " +
                     std::to_string(m));
  }
  for (std::size_t c : coords) {
    if (c >= m) {
      throw IndexError("coordinate_step: coordinate " + std::to_string(c) + " out of range");
    }
    const double ghat = grad[c] + cfg.weight_decay * params[c];
    double scale = lr;
    if (cfg.adagrad) {
      state.accumulator[c] += ghat * ghat;
      scale = lr / std::sqrt(state.accumulator[c] + cfg.adagrad_eps);
    }
    state.velocity[c] = cfg.momentum * state.velocity[c] + ghat;
    step_out[c] = scale * state.velocity[c];
  }
}

EpochResult sgd_epoch(const GradOracle& oracle, FlatVector& w, const Dataset& data,
                      const OptimizerConfig& cfg, OptimizerState& state,
                      std::uint64_t master_seed) {
  const double lr = begin_epoch(oracle, w, data, cfg, state, Method::kSgd);
  const std::size_t m = w.size();

  std::vector<RngStream> streams;
  streams.push_back(derive_stream(master_seed, shuffle_label(0, state.epoch)));
  const EpochPlan plan = make_epoch_plan(streams, data.sample_count, cfg.batch_size);

  std::vector<std::size_t> all_coords(m);
  std::iota(all_coords.begin(), all_coords.end(), std::size_t{0});
  FlatVector grad(m), step(m);
  EpochResult result;
  result.batch_losses.reserve(plan.batches_per_epoch);
  for (std::size_t t = 0; t < plan.batches_per_epoch; ++t) {
    const auto batch = next_batch(plan, t, 0);
    const double loss = oracle.loss_and_grad(w, batch, data, grad);
    check_finite_loss(loss, state.epoch, t);
    coordinate_step(grad, w, all_coords, cfg, lr, state, step);
    for (std::size_t c = 0; c < m; ++c) {
      w[c] -= step[c];
    }
    result.batch_losses.push_back(loss);
  }
  return result;
}

EpochResult bcd_epoch(const GradOracle& oracle, FlatVector& w, const Dataset& data,
                      const OptimizerConfig& cfg, OptimizerState& state,
                      std::uint64_t master_seed) {
  const double lr = begin_epoch(oracle, w, data, cfg, state, Method::kBcd);
  const std::size_t m = w.size();
  const std::size_t t_max =
      (data.sample_count + cfg.batch_size - 1) / cfg.batch_size;

  RngStream perm_stream = derive_stream(master_seed, epoch_label("perm", state.epoch));
  const BlockPartition part = make_partition(perm_stream, m, cfg.blocks);
  RngStream choice_stream = derive_stream(master_seed, epoch_label("block_choice", state.epoch));

  std::vector<std::size_t> full_batch(data.sample_count);
  std::iota(full_batch.begin(), full_batch.end(), std::size_t{0});
  FlatVector grad(m), step(m);
  EpochResult result;
  result.batch_losses.reserve(t_max);
  for (std::size_t t = 0; t < t_max; ++t) {
    const double loss = oracle.loss_and_grad(w, full_batch, data, grad);
    check_finite_loss(loss, state.epoch, t);
    const std::size_t j = choice_stream.next_below(cfg.blocks);
    coordinate_step(grad, w, block_coords(part, j), cfg, lr, state, step);
    apply_block_update(w, part, j, step);
    result.batch_losses.push_back(loss);
  }
  return result;
}

EpochResult sbc_epoch(const GradOracle& oracle, FlatVector& w, const Dataset& data,
                      const OptimizerConfig& cfg, OptimizerState& state,
                      std::uint64_t master_seed) {
  const double lr = begin_epoch(oracle, w, data, cfg, state, Method::kSbc);
  const std::size_t m = w.size();

  RngStream perm_stream = derive_stream(master_seed, epoch_label("perm", state.epoch));
  const BlockPartition part = make_partition(perm_stream, m, cfg.blocks);
  RngStream choice_stream = derive_stream(master_seed, epoch_label("block_choice", state.epoch));
  std::vector<RngStream> streams;
  streams.push_back(derive_stream(master_seed, shuffle_label(0, state.epoch)));
  const EpochPlan plan = make_epoch_plan(streams, data.sample_count, cfg.batch_size);

  FlatVector grad(m), step(m);
  EpochResult result;
  result.batch_losses.reserve(plan.batches_per_epoch);
  for (std::size_t t = 0; t < plan.batches_per_epoch; ++t) {
    const auto batch = next_batch(plan, t, 0);
    const double loss = oracle.loss_and_grad(w, batch, data, grad);
    check_finite_loss(loss, state.epoch, t);
    const std::size_t j = choice_stream.next_below(cfg.blocks);
    coordinate_step(grad, w, block_coords(part, j), cfg, lr, state, step);
    apply_block_update(w, part, j, step);
    result.batch_losses.push_back(loss);
  }
  return result;
}

EpochResult rbc_epoch(const GradOracle& oracle, FlatVector& w, const Dataset& data,
                      const OptimizerConfig& cfg, OptimizerState& state,
                      std::uint64_t master_seed) {
  const double lr = begin_epoch(oracle, w, data, cfg, state, Method::kRbc);
  const std::size_t m = w.size();

  RngStream perm_stream = derive_stream(master_seed, epoch_label("perm", state.epoch));
  const BlockPartition part = make_partition(perm_stream, m, cfg.blocks);
  std::vector<RngStream> streams;
  streams.push_back(derive_stream(master_seed, shuffle_label(0, state.epoch)));
  const EpochPlan plan = make_epoch_plan(streams, data.sample_count, cfg.batch_size);

  FlatVector grad(m), step(m);
  EpochResult result;
  result.batch_losses.reserve(plan.batches_per_epoch * cfg.blocks);
  for (std::size_t t = 0; t < plan.batches_per_epoch; ++t) {
    const auto batch = next_batch(plan, t, 0);
    // The same mini-batch updates every block; the gradient is recomputed at
    // the moving iterate before each block update.
    for (std::size_t j = 0; j < cfg.blocks; ++j) {
      const double loss = oracle.loss_and_grad(w, batch, data, grad);
      check_finite_loss(loss, state.epoch, t);
      coordinate_step(grad, w, block_coords(part, j), cfg, lr, state, step);
      apply_block_update(w, part, j, step);
      result.batch_losses.push_back(loss);
    }
  }
  return result;
}

EpochResult bcsc_epoch(const GradOracle& oracle, FlatVector& w, const Dataset& data,
                       const OptimizerConfig& cfg, OptimizerState& state,
                       std::uint64_t master_seed) {
  const double lr = begin_epoch(oracle, w, data, cfg, state, Method::kBcsc);
  const std::size_t m = w.size();

  // Dual stochastic process: a fresh coordinate partition and M fresh
  // independent data streams every epoch.
  RngStream perm_stream = derive_stream(master_seed, epoch_label("perm", state.epoch));
  const BlockPartition part = make_partition(perm_stream, m, cfg.blocks);
  std::vector<RngStream> streams = block_data_streams(master_seed, cfg.blocks, state.epoch);
  const EpochPlan plan = make_epoch_plan(streams, data.sample_count, cfg.batch_size);

  FlatVector grad(m), step(m);
  EpochResult result;
  result.batch_losses.reserve(plan.batches_per_epoch * cfg.blocks);
  for (std::size_t t = 0; t < plan.batches_per_epoch; ++t) {
    for (std::size_t j = 0; j < cfg.blocks; ++j) {
      const auto batch = next_batch(plan, t, j);
      const double loss = oracle.loss_and_grad(w, batch, data, grad);
      check_finite_loss(loss, state.epoch, t);
      coordinate_step(grad, w, block_coords(part, j), cfg, lr, state, step);
      apply_block_update(w, part, j, step);
      result.batch_losses.push_back(loss);
    }
  }
  return result;
}

EpochResult run_epoch(const GradOracle& oracle, FlatVector& w, const Dataset& data,
                      const OptimizerConfig& cfg, OptimizerState& state,
                      std::uint64_t master_seed) {
  switch (cfg.method) {
    case Method::kSgd:
      return sgd_epoch(oracle, w, data, cfg, state, master_seed);
    case Method::kBcd:
      return bcd_epoch(oracle, w, data, cfg, state, master_seed);
    case Method::kSbc:
      return sbc_epoch(oracle, w, data, cfg, state, master_seed);
    case Method::kRbc:
      return rbc_epoch(oracle, w, data, cfg, state, master_seed);
    case Method::kBcsc:
      return bcsc_epoch(oracle, w, data, cfg, state, master_seed);
  }
  throw ConfigError("run_epoch: unknown method enum value");
}

}  // namespace bcsc

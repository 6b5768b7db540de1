// Command-line front end: train / compare / gradcheck / selftest.
//
// Exit codes: 0 success, 1 internal error or failed check, 2 configuration
// error, 3 divergence during training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bcsc/data.hpp"
#include "bcsc/errors.hpp"
#include "bcsc/harness.hpp"
#include "bcsc/optim.hpp"
#include "bcsc/partition.hpp"
#include "bcsc/scheduler.hpp"

namespace {

constexpr std::uint64_t kToolSeed = 12345;  // fixed so tool output is reproducible

double l2_norm(const bcsc::FlatVector& v) {
  double sq = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sq += v[i] * v[i];
  }
  return std::sqrt(sq);
}

double relative_grad_error(const bcsc::FlatVector& analytic, const bcsc::FlatVector& numeric) {
  double diff_sq = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double d = analytic[i] - numeric[i];
    diff_sq += d * d;
  }
  const double denom = std::max({l2_norm(analytic), l2_norm(numeric), 1e-12});
  return std::sqrt(diff_sq) / denom;
}

// Smallest |pre-activation| of the MLP hidden layer over the batch; used to
// reject ReLU-kink-adjacent points before finite differencing.
double mlp_min_abs_preact(const bcsc::FlatVector& params, std::span<const std::size_t> batch,
                          const bcsc::Dataset& data, std::size_t hidden) {
  const std::size_t d = data.feature_dim;
  double min_abs = std::numeric_limits<double>::infinity();
  for (std::size_t i : batch) {
    const auto x = data.row(i);
    for (std::size_t h = 0; h < hidden; ++h) {
      double a = params[hidden * d + h];  // b1
      for (std::size_t j = 0; j < d; ++j) {
        a += params[h * d + j] * x[j];
      }
      min_abs = std::min(min_abs, std::abs(a));
    }
  }
  return min_abs;
}

int run_gradcheck(const std::string& model) {
  const bool is_mlp = model == "mlp";
  const std::size_t d = 6, k = 3, hidden = 5, points = 20, batch_size = 8;
  const double tolerance = is_mlp ? 1e-5 : 1e-6;

  bcsc::RngStream data_stream = bcsc::derive_stream(kToolSeed, "synth/train");
  const bcsc::Dataset data = bcsc::synth_blobs(data_stream, 32, d, k, 2.0);
  const auto oracle =
      is_mlp ? bcsc::mlp_oracle(d, hidden, k) : bcsc::logistic_oracle(d, k);

  bcsc::RngStream stream = bcsc::derive_stream(kToolSeed, "gradcheck");
  double worst = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    bcsc::FlatVector w(oracle->param_count());
    std::vector<std::size_t> batch(batch_size);
    while (true) {
      for (std::size_t c = 0; c < w.size(); ++c) {
        w[c] = 0.5 * stream.next_gaussian();
      }
      const std::vector<std::size_t> order = bcsc::shuffle_indices(stream, data.sample_count);
      std::copy_n(order.begin(), batch_size, batch.begin());
      // Central differences are unreliable across the ReLU kink.
      if (!is_mlp || mlp_min_abs_preact(w, batch, data, hidden) >= 1e-4) {
        break;
      }
    }
    bcsc::FlatVector analytic;
    oracle->loss_and_grad(w, batch, data, analytic);
    const bcsc::FlatVector numeric = bcsc::finite_diff_grad(*oracle, w, batch, data);
    worst = std::max(worst, relative_grad_error(analytic, numeric));
  }
  std::printf("gradcheck %s: %zu points, max relative error %.3g (tolerance %.0e)\n",
              model.c_str(), points, worst, tolerance);
  if (worst <= tolerance) {
    std::printf("PASS\n");
    return 0;
  }
  std::printf("FAIL\n");
  return 1;
}

int run_selftest() {
  using Check = std::pair<const char*, std::function<void()>>;
  const auto expect = [](bool ok, const std::string& what) {
    if (!ok) {
      throw bcsc::Error("expectation failed: " + what);
    }
  };

  const std::vector<Check> checks = {
      {"rng streams are reproducible and label-separated",
       [&] {
         bcsc::RngStream a = bcsc::derive_stream(7, "perm/epoch=1");
         bcsc::RngStream b = bcsc::derive_stream(7, "perm/epoch=1");
         bcsc::RngStream c = bcsc::derive_stream(7, "perm/epoch=2");
         bool same = true, differ = false;
         for (int i = 0; i < 16; ++i) {
           const auto av = a.next_u64();
           same = same && (av == b.next_u64());
           differ = differ || (av != c.next_u64());
         }
         expect(same, "same (seed, label) must repeat");
         expect(differ, "different labels must diverge");
       }},
      {"shuffle_indices emits a permutation",
       [&] {
         bcsc::RngStream s = bcsc::derive_stream(kToolSeed, "selftest/shuffle");
         auto perm = bcsc::shuffle_indices(s, 17);
         std::sort(perm.begin(), perm.end());
         for (std::size_t i = 0; i < perm.size(); ++i) {
           expect(perm[i] == i, "each index exactly once");
         }
       }},
      {"block partition reconstructs the identity",
       [&] {
         bcsc::RngStream s = bcsc::derive_stream(kToolSeed, "selftest/perm");
         const auto part = bcsc::make_partition(s, 101, 7);
         std::vector<int> seen(101, 0);
         for (std::size_t j = 0; j < part.block_count(); ++j) {
           for (std::size_t c : bcsc::block_coords(part, j)) {
             seen[c] += 1;
           }
         }
         for (int v : seen) {
           expect(v == 1, "every coordinate in exactly one block");
         }
       }},
      {"epoch plan batches are disjoint and cover the data",
       [&] {
         std::vector<bcsc::RngStream> streams;
         for (std::size_t j = 0; j < 3; ++j) {
           streams.push_back(
               bcsc::derive_stream(kToolSeed, "shuffle/j=" + std::to_string(j) + "/epoch=1"));
         }
         const auto plan = bcsc::make_epoch_plan(streams, 23, 5);
         for (std::size_t j = 0; j < 3; ++j) {
           std::vector<int> seen(23, 0);
           for (std::size_t t = 0; t < plan.batches_per_epoch; ++t) {
             for (std::size_t i : bcsc::next_batch(plan, t, j)) {
               seen[i] += 1;
             }
           }
           for (int v : seen) {
             expect(v == 1, "every sample used exactly once per block");
           }
         }
       }},
      {"staircase schedule hits the documented rates",
       [&] {
         const std::vector<std::pair<std::size_t, double>> pieces = {
             {1, 0.1}, {101, 0.01}, {151, 0.001}};
         const auto schedule = bcsc::make_schedule(pieces, 200);
         expect(bcsc::lr_at(schedule, 1) == 0.1 && bcsc::lr_at(schedule, 100) == 0.1,
                "first piece");
         expect(bcsc::lr_at(schedule, 101) == 0.01 && bcsc::lr_at(schedule, 150) == 0.01,
                "second piece");
         expect(bcsc::lr_at(schedule, 151) == 0.001 && bcsc::lr_at(schedule, 200) == 0.001,
                "third piece");
       }},
      {"logistic gradient matches finite differences",
       [&] {
         bcsc::RngStream data_stream = bcsc::derive_stream(kToolSeed, "synth/train");
         const auto data = bcsc::synth_blobs(data_stream, 16, 4, 3, 2.0);
         const auto oracle = bcsc::logistic_oracle(4, 3);
         bcsc::RngStream ws = bcsc::derive_stream(kToolSeed, "selftest/w");
         bcsc::FlatVector w(oracle->param_count());
         for (std::size_t c = 0; c < w.size(); ++c) {
           w[c] = 0.5 * ws.next_gaussian();
         }
         std::vector<std::size_t> batch(8);
         std::iota(batch.begin(), batch.end(), std::size_t{0});
         bcsc::FlatVector analytic;
         oracle->loss_and_grad(w, batch, data, analytic);
         const auto numeric = bcsc::finite_diff_grad(*oracle, w, batch, data);
         expect(relative_grad_error(analytic, numeric) <= 1e-6, "relative error <= 1e-6");
       }},
      {"single-block runs reduce to plain sgd",
       [&] {
         bcsc::RngStream data_stream = bcsc::derive_stream(kToolSeed, "synth/train");
         const auto data = bcsc::synth_blobs(data_stream, 40, 4, 3, 2.0);
         const auto oracle = bcsc::logistic_oracle(4, 3);

         bcsc::OptimizerConfig sgd_cfg;
         sgd_cfg.method = bcsc::Method::kSgd;
         sgd_cfg.blocks = 1;
         sgd_cfg.batch_size = 8;
         sgd_cfg.schedule = bcsc::make_schedule(
             std::vector<std::pair<std::size_t, double>>{{1, 0.1}}, 2);
         bcsc::OptimizerConfig bcsc_cfg = sgd_cfg;
         bcsc_cfg.method = bcsc::Method::kBcsc;

         bcsc::RngStream init = bcsc::derive_stream(777, "init");
         bcsc::FlatVector w_sgd = oracle->init_params(init);
         bcsc::FlatVector w_bcsc = w_sgd;
         bcsc::OptimizerState s_sgd(w_sgd.size()), s_bcsc(w_bcsc.size());
         for (int e = 0; e < 2; ++e) {
           bcsc::sgd_epoch(*oracle, w_sgd, data, sgd_cfg, s_sgd, 777);
           bcsc::bcsc_epoch(*oracle, w_bcsc, data, bcsc_cfg, s_bcsc, 777);
         }
         expect(w_sgd == w_bcsc, "identical trajectories under shared seeds");
       }},
      {"adagrad accumulator is non-decreasing",
       [&] {
         bcsc::RngStream data_stream = bcsc::derive_stream(kToolSeed, "synth/train");
         const auto data = bcsc::synth_blobs(data_stream, 30, 3, 2, 3.0);
         const auto oracle = bcsc::logistic_oracle(3, 2);
         bcsc::OptimizerConfig cfg;
         cfg.method = bcsc::Method::kBcsc;
         cfg.blocks = 2;
         cfg.batch_size = 10;
         cfg.adagrad = true;
         cfg.schedule = bcsc::make_schedule(
             std::vector<std::pair<std::size_t, double>>{{1, 0.1}}, 5);
         bcsc::RngStream init = bcsc::derive_stream(kToolSeed, "init");
         bcsc::FlatVector w = oracle->init_params(init);
         bcsc::OptimizerState state(w.size());
         bcsc::FlatVector prev = state.accumulator;
         for (int e = 0; e < 5; ++e) {
           bcsc::bcsc_epoch(*oracle, w, data, cfg, state, kToolSeed);
           for (std::size_t c = 0; c < prev.size(); ++c) {
             expect(state.accumulator[c] >= prev[c], "accumulator never shrinks");
           }
           prev = state.accumulator;
         }
       }},
      {"metrics CSV round-trips",
       [&] {
         const auto path = (std::filesystem::temp_directory_path() /
                            "bcsc_selftest_metrics.csv")
                               .string();
         std::vector<bcsc::MetricsRow> rows(2);
         rows[0] = {1, 0.5, 0.01, 0.6, 0.75, 0.1, 12.5};
         rows[1] = {2, 0.25, 0.005, 0.4, 0.875, 0.1, 11.25};
         bcsc::emit_csv(rows, path);
         const auto back = bcsc::read_csv(path);
         std::filesystem::remove(path);
         expect(back.size() == 2, "row count");
         expect(back[0].test_acc == 0.75 && back[1].test_acc == 0.875, "values survive");
       }},
  };

  int failures = 0;
  for (const auto& [name, body] : checks) {
    try {
      body();
      std::printf("[ok]   %s\n", name);
    } catch (const std::exception& e) {
      std::printf("[fail] %s: %s\n", name, e.what());
      ++failures;
    }
  }
  if (failures == 0) {
    std::printf("selftest: all %zu checks passed\n", checks.size());
    return 0;
  }
  std::printf("selftest: %d of %zu checks failed\n", failures, checks.size());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-cyclic stochastic coordinate descent: training and experiment harness"};
  app.require_subcommand(1);

  std::string train_config, train_out;
  std::uint64_t train_seed = 0;
  auto* train = app.add_subcommand("train", "Run one experiment, emit per-epoch CSV metrics");
  train->add_option("--config", train_config, "Experiment config file")->required();
  auto* seed_opt = train->add_option("--seed", train_seed, "Override the config's seed");
  train->add_option("--out", train_out, "CSV output path (default: stdout)");

  std::vector<std::string> cmp_configs;
  std::string cmp_out;
  std::size_t cmp_repeats = 1;
  auto* cmp = app.add_subcommand("compare",
                                 "Run configs repeatedly, report summary accuracy mean/std");
  cmp->add_option("--config", cmp_configs, "Config file(s), repeatable")->required();
  cmp->add_option("--repeats", cmp_repeats, "Runs per config, seeds seed..seed+N-1")
      ->check(CLI::PositiveNumber);
  cmp->add_option("--out", cmp_out, "CSV output path (default: stdout)");

  std::string grad_model;
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  grad->add_option("--model", grad_model, "Model to check")
      ->required()
      ->check(CLI::IsMember({"logistic", "mlp"}));

  auto* self = app.add_subcommand("selftest", "Run the invariant suite on small instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // malformed command line is a config error
  }

  try {
    if (train->parsed()) {
      bcsc::ExperimentConfig cfg = bcsc::parse_config_file(train_config);
      if (seed_opt->count() > 0) {
        cfg.seed = train_seed;
      }
      const auto rows = bcsc::run_experiment(cfg);
      if (train_out.empty()) {
        bcsc::emit_csv(rows, std::cout);
      } else {
        bcsc::emit_csv(rows, train_out);
      }
      return 0;
    }
    if (cmp->parsed()) {
      std::vector<bcsc::ExperimentConfig> cfgs;
      cfgs.reserve(cmp_configs.size());
      for (const std::string& path : cmp_configs) {
        cfgs.push_back(bcsc::parse_config_file(path));
      }
      const auto rows = bcsc::compare(cfgs, cmp_repeats);
      if (cmp_out.empty()) {
        bcsc::emit_comparison_csv(cmp_configs, rows, std::cout);
      } else {
        std::ofstream out(cmp_out, std::ios::trunc);
        if (!out) {
          throw bcsc::IoError(cmp_out + ": cannot open for writing");
        }
        bcsc::emit_comparison_csv(cmp_configs, rows, out);
      }
      return 0;
    }
    if (grad->parsed()) {
      return run_gradcheck(grad_model);
    }
    if (self->parsed()) {
      return run_selftest();
    }
  } catch (const bcsc::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const bcsc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "loss.hpp"

namespace fiberpinn {

struct TrainConfig {
  double adam_lr = 1e-3;
  int adam_epochs = 10000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int lbfgs_memory = 10;
  double lbfgs_gtol = 1e-8;
  int lbfgs_max_iter = 12000;
  // Relative decrease below which L-BFGS stops; 0 disables the test.
  double lbfgs_ftol = 0.0;
  int restarts = 4;
  std::uint64_t seed = 0;
  // Collocation points per ADAM epoch for the model/TV terms; 0 = full batch.
  int batch_size = 0;
  int jobs = 1;
  // Progress line to stderr every `log_every` iterations; 0 = silent.
  int log_every = 0;

  void validate() const;
};

struct HistoryEntry {
  int epoch = 0;
  std::string phase;  // "adam" or "lbfgs"
  LossTerms terms;
  double grad_norm = 0.0;
};

struct ObjectiveValue {
  double value = 0.0;
  Eigen::VectorXd grad;
  LossTerms terms;
};

// `epoch` lets stochastic objectives pick their mini-batch; deterministic
// objectives ignore it.
using ObjectiveFn = std::function<ObjectiveValue(const Eigen::VectorXd& x, int epoch)>;

struct OptimResult {
  Eigen::VectorXd x;
  std::vector<HistoryEntry> history;
  std::string reason;
  int iterations = 0;
  double final_value = 0.0;
};

OptimResult adam_run(const ObjectiveFn& f, Eigen::VectorXd x0, const TrainConfig& cfg);
// L-BFGS with a strong-Wolfe line search (c1 = 1e-4, c2 = 0.9).
OptimResult lbfgs_run(const ObjectiveFn& f, Eigen::VectorXd x0, const TrainConfig& cfg);

struct TrainProblem {
  CollocationSet colloc;
  LossWeights weights;
  MLPSpec phi_spec = phi_network_spec();
  MLPSpec d_spec = d_network_spec();
  double d_max = 5.0;
  InputNormalization input;
  TimeScaling time;
  NormalEigenvalue normal_eigenvalue = NormalEigenvalue::Zero;
};

struct TrainReport {
  std::vector<HistoryEntry> history;
  PinnModel model;
  LossTerms final_terms;
  double wall_seconds = 0.0;
  int best_restart = 0;
  std::string reason;
  std::vector<double> restart_losses;  // NaN for aborted restarts
};

// Freshly initialized model for restart seed `seed`.
PinnModel initial_model(const TrainProblem& problem, std::uint64_t seed);
ObjectiveFn make_objective(const TrainProblem& problem, const PinnModel& shape, bool minibatch,
                           const TrainConfig& cfg, std::uint64_t seed);

// ADAM then L-BFGS from each restart seed (master seed + r); keeps the restart
// with the lowest final training loss.
TrainReport fit(const TrainProblem& problem, const TrainConfig& cfg);

}  // namespace fiberpinn

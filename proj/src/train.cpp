#include "train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <mutex>
#include <memory>
#include <numeric>
#include <random>
#include <thread>

#include "error.hpp"

namespace fiberpinn {

namespace {

constexpr double kWolfeC1 = 1e-4;
constexpr double kWolfeC2 = 0.9;
constexpr int kMaxLineSearchEvals = 30;

std::string describe_terms(const LossTerms& t) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "total=%.6g data=%.6g model=%.6g weight=%.6g tv=%.6g", t.total, t.data, t.model,
                t.weight, t.tv);
  return buf;
}

void check_finite(const ObjectiveValue& v, const char* phase, int epoch) {
  if (!std::isfinite(v.value) || !v.grad.allFinite()) {
    fail(ErrorKind::Numeric, std::string(phase) + " epoch " + std::to_string(epoch) +
                                 ": non-finite loss or gradient (" + describe_terms(v.terms) + ")");
  }
}

void log_progress(const TrainConfig& cfg, const HistoryEntry& e) {
  if (cfg.log_every <= 0 || e.epoch % cfg.log_every != 0) return;
  std::fprintf(stderr, "[seed %llu] %s %6d  %s  |g|=%.3g\n", static_cast<unsigned long long>(cfg.seed),
               e.phase.c_str(), e.epoch, describe_terms(e.terms).c_str(), e.grad_norm);
}

struct LineSearchResult {
  bool ok = false;
  double alpha = 0.0;
  ObjectiveValue value;
};

// Minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb), or NaN.
double cubic_minimizer(double a, double fa, double ga, double b, double fb, double gb) {
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double denom = gb - ga + 2.0 * d2;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return b - (b - a) * (gb + d2 - d1) / denom;
}

// Strong-Wolfe line search (Nocedal & Wright, Algorithms 3.5 and 3.6).
LineSearchResult strong_wolfe(const ObjectiveFn& f, const Eigen::VectorXd& x, const ObjectiveValue& fx,
                              const Eigen::VectorXd& p, double alpha0, int epoch) {
  const double phi0 = fx.value;
  const double dphi0 = fx.grad.dot(p);
  int evals = 0;

  struct Point {
    double alpha;
    double phi;
    double dphi;
    ObjectiveValue value;
  };
  auto eval = [&](double alpha) {
    ++evals;
    ObjectiveValue v = f(x + alpha * p, epoch);
    const double dphi = v.grad.dot(p);
    return Point{alpha, v.value, dphi, std::move(v)};
  };
  auto sufficient = [&](const Point& pt) { return pt.phi <= phi0 + kWolfeC1 * pt.alpha * dphi0; };
  auto curvature = [&](const Point& pt) { return std::abs(pt.dphi) <= -kWolfeC2 * dphi0; };

  auto zoom = [&](Point lo, Point hi) -> LineSearchResult {
    while (evals < kMaxLineSearchEvals) {
      const double left = std::min(lo.alpha, hi.alpha);
      const double right = std::max(lo.alpha, hi.alpha);
      const double width = right - left;
      double trial = cubic_minimizer(lo.alpha, lo.phi, lo.dphi, hi.alpha, hi.phi, hi.dphi);
      if (!std::isfinite(trial) || trial < left + 0.1 * width || trial > right - 0.1 * width) {
        trial = 0.5 * (lo.alpha + hi.alpha);
      }
      if (width <= 1e-16 * std::max(1.0, right)) break;
      Point pt = eval(trial);
      if (!std::isfinite(pt.phi) || !sufficient(pt) || pt.phi >= lo.phi) {
        hi = std::move(pt);
      } else {
        if (curvature(pt)) return {true, pt.alpha, std::move(pt.value)};
        if (pt.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(pt);
      }
    }
    // Out of budget: accept lo if it is a strict sufficient-decrease point.
    if (lo.alpha > 0.0 && lo.phi < phi0) return {true, lo.alpha, std::move(lo.value)};
    return {};
  };

  Point prev{0.0, phi0, dphi0, fx};
  double alpha = alpha0;
  for (int i = 0; evals < kMaxLineSearchEvals; ++i) {
    Point pt = eval(alpha);
    if (!std::isfinite(pt.phi) || !pt.value.grad.allFinite()) {
      // Overshot into a non-finite region: shrink toward the last good point.
      alpha = 0.5 * (prev.alpha + alpha);
      continue;
    }
    if (!sufficient(pt) || (i > 0 && pt.phi >= prev.phi)) return zoom(std::move(prev), std::move(pt));
    if (curvature(pt)) return {true, pt.alpha, std::move(pt.value)};
    if (pt.dphi >= 0.0) return zoom(std::move(pt), std::move(prev));
    prev = std::move(pt);
    alpha *= 2.0;
  }
  if (prev.alpha > 0.0 && prev.phi < phi0) return {true, prev.alpha, std::move(prev.value)};
  return {};
}

}  // namespace

void TrainConfig::validate() const {
  if (!(adam_lr > 0.0)) fail(ErrorKind::Config, "train.adam_lr must be positive");
  if (adam_epochs < 0) fail(ErrorKind::Config, "train.adam_epochs must be nonnegative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail(ErrorKind::Config, "train.adam_beta1/adam_beta2 must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) fail(ErrorKind::Config, "train.adam_eps must be positive");
  if (lbfgs_memory < 1) fail(ErrorKind::Config, "train.lbfgs_memory must be >= 1");
  if (!(lbfgs_gtol >= 0.0)) fail(ErrorKind::Config, "train.lbfgs_gtol must be nonnegative");
  if (lbfgs_max_iter < 0) fail(ErrorKind::Config, "train.lbfgs_max_iter must be nonnegative");
  if (!(lbfgs_ftol >= 0.0)) fail(ErrorKind::Config, "train.lbfgs_ftol must be nonnegative");
  if (restarts < 1) fail(ErrorKind::Config, "train.restarts must be >= 1");
  if (batch_size < 0) fail(ErrorKind::Config, "train.batch_size must be nonnegative");
  if (jobs < 1) fail(ErrorKind::Config, "run.jobs must be >= 1");
}

OptimResult adam_run(const ObjectiveFn& f, Eigen::VectorXd x, const TrainConfig& cfg) {
  OptimResult res;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
  double b1t = 1.0;
  double b2t = 1.0;
  res.history.reserve(static_cast<std::size_t>(cfg.adam_epochs));
  for (int epoch = 0; epoch < cfg.adam_epochs; ++epoch) {
    const ObjectiveValue val = f(x, epoch);
    check_finite(val, "adam", epoch);
    HistoryEntry e{epoch, "adam", val.terms, val.grad.norm()};
    log_progress(cfg, e);
    res.history.push_back(std::move(e));
    res.final_value = val.value;

    b1t *= cfg.adam_beta1;
    b2t *= cfg.adam_beta2;
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * val.grad;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * val.grad.cwiseAbs2();
    const double c1 = 1.0 / (1.0 - b1t);
    const double c2 = 1.0 / (1.0 - b2t);
    x.array() -= cfg.adam_lr * (m.array() * c1) / ((v.array() * c2).sqrt() + cfg.adam_eps);
    ++res.iterations;
  }
  res.reason = "epochs";
  res.x = std::move(x);
  return res;
}

OptimResult lbfgs_run(const ObjectiveFn& f, Eigen::VectorXd x, const TrainConfig& cfg) {
  OptimResult res;
  ObjectiveValue fx = f(x, 0);
  check_finite(fx, "lbfgs", 0);
  res.final_value = fx.value;

  std::deque<Eigen::VectorXd> S;
  std::deque<Eigen::VectorXd> Y;
  std::deque<double> rho;

  auto converged = [&](const ObjectiveValue& v) { return v.grad.lpNorm<Eigen::Infinity>() <= cfg.lbfgs_gtol; };
  if (converged(fx)) {
    res.reason = "gradient tolerance";
    res.x = std::move(x);
    return res;
  }

  for (int it = 0; it < cfg.lbfgs_max_iter; ++it) {
    // Two-loop recursion for p = -H g.
    Eigen::VectorXd q = fx.grad;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha[i] = rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    if (!S.empty()) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double beta = rho[i] * Y[i].dot(q);
      q += (alpha[i] - beta) * S[i];
    }
    Eigen::VectorXd p = -q;
    if (!(p.dot(fx.grad) < 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      p = -fx.grad;
    }
    const double alpha0 = S.empty() ? std::min(1.0, 1.0 / fx.grad.lpNorm<Eigen::Infinity>()) : 1.0;

    LineSearchResult ls = strong_wolfe(f, x, fx, p, alpha0, it + 1);
    if (!ls.ok) {
      res.reason = "line search failure";
      break;
    }
    if (!(ls.value.value <= fx.value)) {
      fail(ErrorKind::Numeric, "lbfgs iteration " + std::to_string(it) + ": accepted step increased the loss");
    }
    check_finite(ls.value, "lbfgs", it + 1);

    Eigen::VectorXd s = ls.alpha * p;
    Eigen::VectorXd y = ls.value.grad - fx.grad;
    const double sy = s.dot(y);
    const double prev_value = fx.value;
    x += s;
    fx = std::move(ls.value);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > cfg.lbfgs_memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }

    ++res.iterations;
    HistoryEntry e{it + 1, "lbfgs", fx.terms, fx.grad.norm()};
    log_progress(cfg, e);
    res.history.push_back(std::move(e));
    res.final_value = fx.value;

    if (converged(fx)) {
      res.reason = "gradient tolerance";
      break;
    }
    if (cfg.lbfgs_ftol > 0.0 &&
        (prev_value - fx.value) <= cfg.lbfgs_ftol * std::max({std::abs(prev_value), std::abs(fx.value), 1.0})) {
      res.reason = "function tolerance";
      break;
    }
  }
  if (res.reason.empty()) res.reason = "iteration limit";
  res.x = std::move(x);
  return res;
}

PinnModel initial_model(const TrainProblem& problem, std::uint64_t seed) {
  PinnModel model;
  model.phi = init_params(problem.phi_spec, seed);
  // Distinct stream for the second network.
  model.d = init_params(problem.d_spec, seed ^ 0x9E3779B97F4A7C15ull);
  model.d_max = problem.d_max;
  model.input = problem.input;
  model.time = problem.time;
  model.normal_eigenvalue = problem.normal_eigenvalue;
  return model;
}

ObjectiveFn make_objective(const TrainProblem& problem, const PinnModel& shape, bool minibatch,
                           const TrainConfig& cfg, std::uint64_t seed) {
  const auto n_phi = shape.phi.theta().size();
  const int n_colloc = static_cast<int>(problem.colloc.positions.size());
  const bool batched = minibatch && cfg.batch_size > 0 && cfg.batch_size < n_colloc;
  auto workspace = std::make_shared<LossWorkspace>();
  return [&problem, shape, n_phi, n_colloc, batched, batch = cfg.batch_size, seed, workspace](
             const Eigen::VectorXd& x, int epoch) {
    PinnModel model = shape;
    model.phi.theta() = x.head(n_phi);
    model.d.theta() = x.tail(x.size() - n_phi);
    std::vector<int> subset;
    if (batched) {
      std::vector<int> idx(static_cast<std::size_t>(n_colloc));
      std::iota(idx.begin(), idx.end(), 0);
      std::mt19937_64 rng(seed * 1000003ull + static_cast<std::uint64_t>(epoch));
      for (int i = 0; i < batch; ++i) {
        std::uniform_int_distribution<int> pick(i, n_colloc - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
      }
      subset.assign(idx.begin(), idx.begin() + batch);
      std::sort(subset.begin(), subset.end());
    }
    LossEvaluation ev = total_loss(model, problem.colloc, problem.weights, subset, workspace.get());
    ObjectiveValue out;
    out.value = ev.terms.total;
    out.terms = ev.terms;
    out.grad.resize(x.size());
    out.grad << ev.grad_phi, ev.grad_d;
    return out;
  };
}

namespace {

struct RestartOutcome {
  bool ok = false;
  std::string error;
  TrainReport report;
};

RestartOutcome run_restart(const TrainProblem& problem, const TrainConfig& base, int r) {
  RestartOutcome out;
  TrainConfig cfg = base;
  cfg.seed = base.seed + static_cast<std::uint64_t>(r);
  try {
    PinnModel model = initial_model(problem, cfg.seed);
    Eigen::VectorXd x(model.phi.theta().size() + model.d.theta().size());
    x << model.phi.theta(), model.d.theta();

    const ObjectiveFn adam_f = make_objective(problem, model, true, cfg, cfg.seed);
    OptimResult adam = adam_run(adam_f, std::move(x), cfg);
    const ObjectiveFn full_f = make_objective(problem, model, false, cfg, cfg.seed);
    OptimResult lbfgs = lbfgs_run(full_f, std::move(adam.x), cfg);

    auto& rep = out.report;
    rep.history = std::move(adam.history);
    rep.history.insert(rep.history.end(), std::make_move_iterator(lbfgs.history.begin()),
                       std::make_move_iterator(lbfgs.history.end()));
    const auto n_phi = model.phi.theta().size();
    model.phi.theta() = lbfgs.x.head(n_phi);
    model.d.theta() = lbfgs.x.tail(lbfgs.x.size() - n_phi);
    rep.final_terms = total_loss(model, problem.colloc, problem.weights).terms;
    rep.model = std::move(model);
    rep.reason = lbfgs.reason;
    rep.best_restart = r;
    out.ok = std::isfinite(rep.final_terms.total);
    if (!out.ok) out.error = "non-finite final loss";
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

TrainReport fit(const TrainProblem& problem, const TrainConfig& cfg) {
  cfg.validate();
  problem.weights.validate();
  problem.colloc.validate();
  const auto start = std::chrono::steady_clock::now();

  std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(cfg.restarts));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < cfg.restarts; r = next++) outcomes[static_cast<std::size_t>(r)] = run_restart(problem, cfg, r);
  };
  const int threads = std::min(cfg.jobs, cfg.restarts);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  int best = -1;
  std::vector<double> losses;
  std::string errors;
  for (int r = 0; r < cfg.restarts; ++r) {
    const auto& o = outcomes[static_cast<std::size_t>(r)];
    if (!o.ok) {
      losses.push_back(std::numeric_limits<double>::quiet_NaN());
      errors += "\n  restart " + std::to_string(r) + ": " + o.error;
      continue;
    }
    losses.push_back(o.report.final_terms.total);
    if (best < 0 || o.report.final_terms.total < outcomes[static_cast<std::size_t>(best)].report.final_terms.total) {
      best = r;
    }
  }
  if (best < 0) fail(ErrorKind::Numeric, "all restarts aborted:" + errors);

  TrainReport report = std::move(outcomes[static_cast<std::size_t>(best)].report);
  report.restart_losses = std::move(losses);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace fiberpinn

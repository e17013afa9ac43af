#include <doctest.h>

#include <random>

#include "error.hpp"
#include "train.hpp"
#include "toy_problem.hpp"

using namespace fiberpinn;

namespace {

// 0.5 (x - x*)^T A (x - x*) with A x* = b; the minimum value is 0 so the
// line search does not run into cancellation near the optimum.
ObjectiveFn quadratic(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Eigen::VectorXd xs = A.ldlt().solve(b);
  return [A, xs](const Eigen::VectorXd& x, int) {
    ObjectiveValue v;
    const Eigen::VectorXd r = x - xs;
    v.value = 0.5 * r.dot(A * r);
    v.grad = A * r;
    v.terms.total = v.value;
    return v;
  };
}

ObjectiveValue rosenbrock(const Eigen::VectorXd& x, int) {
  ObjectiveValue v;
  const double a = 1.0 - x[0];
  const double b = x[1] - x[0] * x[0];
  v.value = a * a + 100.0 * b * b;
  v.grad = Eigen::Vector2d(-2.0 * a - 400.0 * x[0] * b, 200.0 * b);
  v.terms.total = v.value;
  return v;
}

TrainProblem toy_train_problem() {
  const testutil::ToyProblem p = testutil::toy_problem(11);
  TrainProblem tp;
  tp.colloc = p.colloc;
  tp.weights = p.weights;
  tp.phi_spec = p.model.phi.spec();
  tp.d_spec = p.model.d.spec();
  tp.d_max = p.model.d_max;
  tp.input = p.model.input;
  tp.time = p.model.time;
  return tp;
}

TrainConfig short_schedule() {
  TrainConfig cfg;
  cfg.adam_epochs = 60;
  cfg.adam_lr = 1e-2;
  cfg.lbfgs_max_iter = 25;
  cfg.restarts = 1;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_SUITE("train") {
TEST_CASE("ADAM first step and convergence on a scalar quadratic") {
  const auto f = quadratic(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Constant(1, 3.0));
  TrainConfig cfg;
  cfg.adam_epochs = 1;
  const OptimResult one = adam_run(f, Eigen::VectorXd::Zero(1), cfg);
  CHECK(one.x[0] == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(one.history.size() == 1);

  // Independent scalar recurrence.
  double th = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 10000; ++t) {
    const double g = th - 3.0;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    th -= 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  cfg.adam_epochs = 10000;
  const OptimResult full = adam_run(f, Eigen::VectorXd::Zero(1), cfg);
  CHECK(std::abs(full.x[0] - 3.0) < 1e-2);
  CHECK(full.x[0] == doctest::Approx(th).epsilon(1e-9));
  CHECK(full.history.size() == 10000);
}

TEST_CASE("ADAM leaves a zero-gradient point unchanged") {
  const auto f = [](const Eigen::VectorXd& x, int) {
    ObjectiveValue v;
    v.grad = Eigen::VectorXd::Zero(x.size());
    return v;
  };
  TrainConfig cfg;
  cfg.adam_epochs = 100;
  const Eigen::VectorXd x0 = Eigen::VectorXd::LinSpaced(4, -1, 2);
  CHECK(adam_run(f, x0, cfg).x == x0);
}

TEST_CASE("non-finite loss aborts with a numeric error") {
  const auto f = [](const Eigen::VectorXd& x, int epoch) {
    ObjectiveValue v;
    v.value = epoch == 3 ? std::nan("") : 1.0;
    v.grad = Eigen::VectorXd::Ones(x.size());
    return v;
  };
  TrainConfig cfg;
  cfg.adam_epochs = 10;
  try {
    adam_run(f, Eigen::VectorXd::Zero(2), cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("L-BFGS on an SPD quadratic") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Eigen::MatrixXd B(10, 10);
  for (auto& b : B.reshaped()) b = g(rng);
  const Eigen::MatrixXd A = B * B.transpose() + Eigen::MatrixXd::Identity(10, 10);
  Eigen::VectorXd b(10);
  for (auto& v : b) v = g(rng);
  TrainConfig cfg;
  cfg.lbfgs_max_iter = 50;
  const OptimResult r = lbfgs_run(quadratic(A, b), Eigen::VectorXd::Zero(10), cfg);
  CHECK(r.reason == "gradient tolerance");
  CHECK(r.iterations <= 50);
  CHECK((A * r.x - b).lpNorm<Eigen::Infinity>() <= 1e-8 * (1 + b.lpNorm<Eigen::Infinity>()));
  CHECK((r.x - A.ldlt().solve(b)).norm() < 1e-7);
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i].terms.total <= r.history[i - 1].terms.total);
}

TEST_CASE("L-BFGS on Rosenbrock") {
  TrainConfig cfg;
  cfg.lbfgs_max_iter = 1000;
  const OptimResult r = lbfgs_run(rosenbrock, Eigen::Vector2d(-1.2, 1.0), cfg);
  CHECK((r.x - Eigen::Vector2d(1, 1)).norm() < 1e-6);
  CHECK(r.iterations == static_cast<int>(r.history.size()));
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i].terms.total <= r.history[i - 1].terms.total);
}

TEST_CASE("L-BFGS at tolerance returns immediately") {
  int calls = 0;
  const auto f = [&](const Eigen::VectorXd& x, int) {
    ++calls;
    ObjectiveValue v;
    v.grad = Eigen::VectorXd::Constant(x.size(), 1e-9);
    return v;
  };
  const OptimResult r = lbfgs_run(f, Eigen::VectorXd::Zero(3), TrainConfig{});
  CHECK(r.iterations == 0);
  CHECK(r.history.empty());
  CHECK(calls == 1);
  CHECK(r.reason == "gradient tolerance");
}

TEST_CASE("L-BFGS reports the iteration cap and function tolerance") {
  TrainConfig cfg;
  cfg.lbfgs_max_iter = 3;
  CHECK(lbfgs_run(rosenbrock, Eigen::Vector2d(-1.2, 1.0), cfg).reason == "iteration limit");
  cfg.lbfgs_max_iter = 1000;
  cfg.lbfgs_ftol = 1e-3;
  const OptimResult r = lbfgs_run(rosenbrock, Eigen::Vector2d(-1.2, 1.0), cfg);
  CHECK(r.reason == "function tolerance");
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.adam_lr = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.lbfgs_memory = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.adam_epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("fit is deterministic") {
  const TrainProblem tp = toy_train_problem();
  const TrainConfig cfg = short_schedule();
  const TrainReport a = fit(tp, cfg);
  const TrainReport b = fit(tp, cfg);
  CHECK(a.model.phi.theta() == b.model.phi.theta());
  CHECK(a.model.d.theta() == b.model.d.theta());
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].terms.total == b.history[i].terms.total);
  CHECK(a.history.size() > 60);
  CHECK(a.final_terms.total < a.history.front().terms.total);
}

TEST_CASE("optimizer state does not alter loss evaluation") {
  const TrainProblem tp = toy_train_problem();
  const PinnModel m = initial_model(tp, 5);
  Eigen::VectorXd x(m.phi.theta().size() + m.d.theta().size());
  x << m.phi.theta(), m.d.theta();
  const ObjectiveFn f = make_objective(tp, m, false, short_schedule(), 5);
  const double before = f(x, 0).value;
  TrainConfig cfg = short_schedule();
  adam_run(f, x, cfg);
  CHECK(f(x, 0).value == before);
  CHECK(f(x, 0).value == total_loss(m, tp.colloc, tp.weights).terms.total);
}

TEST_CASE("best restart equals the minimum over single runs") {
  const TrainProblem tp = toy_train_problem();
  TrainConfig cfg = short_schedule();
  cfg.restarts = 3;
  const TrainReport all = fit(tp, cfg);
  REQUIRE(all.restart_losses.size() == 3);
  double best = std::numeric_limits<double>::infinity();
  int best_r = -1;
  for (int r = 0; r < 3; ++r) {
    TrainConfig one = short_schedule();
    one.seed = cfg.seed + static_cast<std::uint64_t>(r);
    const TrainReport rep = fit(tp, one);
    CHECK(rep.final_terms.total == all.restart_losses[static_cast<std::size_t>(r)]);
    if (rep.final_terms.total < best) {
      best = rep.final_terms.total;
      best_r = r;
    }
  }
  CHECK(all.best_restart == best_r);
  CHECK(all.final_terms.total == best);

  cfg.jobs = 3;
  const TrainReport parallel = fit(tp, cfg);
  CHECK(parallel.best_restart == all.best_restart);
  CHECK(parallel.model.phi.theta() == all.model.phi.theta());
}

TEST_CASE("mini-batch objective samples deterministically") {
  const TrainProblem tp = toy_train_problem();
  const PinnModel m = initial_model(tp, 1);
  Eigen::VectorXd x(m.phi.theta().size() + m.d.theta().size());
  x << m.phi.theta(), m.d.theta();
  TrainConfig cfg = short_schedule();
  cfg.batch_size = 4;
  const ObjectiveFn f = make_objective(tp, m, true, cfg, 1);
  const ObjectiveFn g = make_objective(tp, m, true, cfg, 1);
  CHECK(f(x, 7).value == g(x, 7).value);
  CHECK(f(x, 7).value != f(x, 8).value);
}
}

#include <doctest.h>

#include <random>

#include "error.hpp"
#include "loss.hpp"
#include "test_util.hpp"
#include "toy_problem.hpp"

using namespace fiberpinn;

namespace {

Frame planar_frame() {
  Frame P = Frame::Zero();
  P(0, 0) = 1.0;
  P(1, 1) = 1.0;
  return P;
}

PinnModel zero_model() {
  PinnModel m;
  const MLPSpec ps = phi_network_spec(), ds = d_network_spec();
  m.phi = NetParams(ps, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ps.param_count())));
  m.d = NetParams(ds, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.param_count())));
  return m;
}

}  // namespace

TEST_SUITE("loss") {
TEST_CASE("eikonal residual examples") {
  const Frame P = planar_frame();
  CHECK(eikonal_residual(Vec3::UnitX(), Vec3::Zero(), P, 1e-8) == doctest::Approx(0.0));
  CHECK(eikonal_residual(2 * Vec3::UnitX(), Vec3::Zero(), P, 1e-8) == doctest::Approx(1.0));
  CHECK(eikonal_residual(Vec3::Zero(), Vec3::Zero(), P, 1e-8) == doctest::Approx(std::sqrt(1e-8) - 1.0));
  CHECK(eikonal_residual(Vec3::Zero(), Vec3::Zero(), P, 1e-8) == doctest::Approx(-0.9999));
  // Normal gradient is invisible with a zero normal eigenvalue.
  CHECK(eikonal_residual(Vec3(1, 0, 7), Vec3::Zero(), P, 1e-8) == doctest::Approx(0.0));
  CHECK(eikonal_residual(Vec3(0, 0, 2), Vec3::Zero(), P, 1e-8, NormalEigenvalue::One) == doctest::Approx(1.0));
  // D = diag(4, 1): speed 2 along e1.
  const Vec3 d(std::log(4.0), 0.0, 0.0);
  CHECK(eikonal_residual(Vec3(0.5, 0, 0), d, P, 1e-8) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("model residual of a zero model") {
  const PinnModel m = zero_model();
  CHECK(model_residual(m, Vec3(0.3, 0.1, 0), planar_frame(), 1e-8) == doctest::Approx(std::sqrt(1e-8) - 1.0));
}

TEST_CASE("residual gauge invariance") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 50; ++i) {
    const Frame P = testutil::random_frame(rng);
    const Vec3 d(u(rng), u(rng), u(rng));
    const Vec3 g(2 * u(rng), 2 * u(rng), 2 * u(rng));
    const Mat2 R = testutil::rotation(3 * u(rng));
    const Frame Q = P * R;
    const Mat2 L = R.transpose() * sym2(d) * R;
    const Vec3 dq(L(0, 0), L(0, 1), L(1, 1));
    CHECK(eikonal_residual(g, dq, Q, 1e-8) == doctest::Approx(eikonal_residual(g, d, P, 1e-8)).epsilon(1e-11));
  }
}

TEST_CASE("huber examples") {
  const std::vector<double> zero(9, 0.0);
  CHECK(huber(zero, 0.05) == 0.0);
  const std::vector<double> knee = {0.03, 0.04};
  CHECK(huber(knee, 0.05) == doctest::Approx(0.025).epsilon(1e-14));
  const std::vector<double> unit = {0.6, 0.0, 0.8};
  CHECK(huber(unit, 0.05) == doctest::Approx(0.975).epsilon(1e-14));
}

TEST_CASE("huber is C1 across the knee") {
  const double delta = 0.05;
  const Eigen::Vector3d dir = Eigen::Vector3d(1, -2, 0.5).normalized();
  auto f = [&](double r) {
    const Eigen::Vector3d x = r * dir;
    return huber(std::span<const double>(x.data(), 3), delta);
  };
  auto df = [&](double r) {
    const Eigen::Vector3d x = r * dir;
    const auto g = huber_gradient(std::span<const double>(x.data(), 3), delta);
    return Eigen::Vector3d(g[0], g[1], g[2]).dot(dir);
  };
  const double h = 1e-7;
  CHECK(f(delta - 1e-12) == doctest::Approx(f(delta + 1e-12)).epsilon(1e-9));
  CHECK(df(delta - 1e-12) == doctest::Approx(df(delta + 1e-12)).epsilon(1e-9));
  CHECK(df(delta) == doctest::Approx(1.0));
  for (double r : {0.3 * delta, delta - 2 * h, delta, delta + 2 * h, 3 * delta}) {
    const double fd = (f(r + h) - f(r - h)) / (2 * h);
    CHECK(df(r) == doctest::Approx(fd).epsilon(1e-6));
  }
  // The one-sided difference quotients agree at the knee.
  const double left = (f(delta) - f(delta - h)) / h;
  const double right = (f(delta + h) - f(delta)) / h;
  CHECK(left == doctest::Approx(right).epsilon(1e-5));
}

TEST_CASE("total loss examples") {
  PinnModel m = zero_model();
  CollocationSet c;
  c.positions = {Vec3(0.1, 0.2, 0.0)};
  c.frames = {planar_frame()};
  c.data_positions = {Vec3(0.5, 0.5, 0.0)};
  c.data_times = {3.0};
  LossWeights w;
  w.alpha_m = 1.0;
  w.alpha_theta = 0.0;
  w.alpha_d = 0.0;
  w.epsilon = 1e-8;
  const LossEvaluation ev = total_loss(m, c, w);
  CHECK(ev.terms.data == doctest::Approx(9.0));
  CHECK(ev.terms.total == doctest::Approx(9.0 + std::pow(std::sqrt(1e-8) - 1.0, 2)).epsilon(1e-14));
  CHECK(ev.terms.total == doctest::Approx(9.9998).epsilon(1e-5));

  // Degenerate weights leave the pure data misfit.
  testutil::ToyProblem p = testutil::toy_problem(7);
  p.weights.alpha_m = p.weights.alpha_theta = p.weights.alpha_d = 0.0;
  const LossEvaluation pure = total_loss(p.model, p.colloc, p.weights);
  double ms = 0.0;
  for (std::size_t i = 0; i < p.colloc.data_times.size(); ++i) {
    const double r = p.model.phi_at(p.colloc.data_positions[i]) - p.colloc.data_times[i];
    ms += r * r;
  }
  CHECK(pure.terms.total == doctest::Approx(ms / 5.0).epsilon(1e-12));
  CHECK(pure.grad_d.isZero());

  CollocationSet empty = c;
  empty.data_positions.clear();
  empty.data_times.clear();
  CHECK_THROWS_AS(total_loss(m, empty, w), Error);
}

TEST_CASE("terms against pointwise definitions") {
  for (std::uint64_t s = 1; s <= 6; ++s) {
    const testutil::ToyProblem p = testutil::toy_problem(s);
    const LossEvaluation ev = total_loss(p.model, p.colloc, p.weights);
    const auto& t = ev.terms;
    CHECK(t.total >= 0.0);
    const double sum = t.data + p.weights.alpha_m * t.model + p.weights.alpha_theta * t.weight + p.weights.alpha_d * t.tv;
    CHECK(std::abs(sum - t.total) <= 1e-12 * t.total);

    double model = 0.0;
    double tv = 0.0;
    for (std::size_t j = 0; j < p.colloc.positions.size(); ++j) {
      const Frame& P = p.colloc.frames[j];
      const double r = eikonal_residual(p.model.grad_phi(p.colloc.positions[j]), p.model.d_at(p.colloc.positions[j]),
                                        P, p.weights.epsilon, p.model.normal_eigenvalue);
      model += r * r;
      Mat3 G = p.model.grad_d(p.colloc.positions[j]);
      if (p.weights.tv_mode == TvMode::Tangent) G = G * P * P.transpose();
      tv += huber(std::span<const double>(G.data(), 9), p.weights.delta);
    }
    CHECK(t.model == doctest::Approx(model / 10).epsilon(1e-11));
    CHECK(t.tv == doctest::Approx(tv / 10).epsilon(1e-11));
    CHECK(t.weight == doctest::Approx(p.model.phi.theta().squaredNorm() + p.model.d.theta().squaredNorm()));
  }
}

TEST_CASE("batched gradients match the tape route") {
  for (std::uint64_t s = 1; s <= 8; ++s) {
    const testutil::ToyProblem p = testutil::toy_problem(s);
    const LossEvaluation ev = total_loss(p.model, p.colloc, p.weights);
    const ad::ParamGradient g = ad::param_gradient(
        [&](ad::LossContext& ctx) { return total_loss_tape(ctx, p.model, p.colloc, p.weights); }, p.model.phi,
        p.model.d);
    CHECK(g.value == doctest::Approx(ev.terms.total).epsilon(1e-12));
    CHECK((g.phi - ev.grad_phi).norm() <= 1e-10 * (1.0 + g.phi.norm()));
    CHECK((g.d - ev.grad_d).norm() <= 1e-10 * (1.0 + g.d.norm()));
  }
}

TEST_CASE("gradient matches central differences") {
  for (std::uint64_t s = 100; s < 104; ++s) {
    const auto check = testutil::check_total_loss_gradient(testutil::toy_problem(s), 1e-4);
    CHECK(check.components > 20);
    CHECK(check.failures == 0);
  }
}

TEST_CASE("model subset restricts the collocation terms") {
  const testutil::ToyProblem p = testutil::toy_problem(3);
  const std::vector<int> subset = {1, 4, 7};
  const LossEvaluation sub = total_loss(p.model, p.colloc, p.weights, subset);
  CollocationSet c = p.colloc;
  c.positions.clear();
  c.frames.clear();
  for (int i : subset) {
    c.positions.push_back(p.colloc.positions[static_cast<std::size_t>(i)]);
    c.frames.push_back(p.colloc.frames[static_cast<std::size_t>(i)]);
  }
  const LossEvaluation ref = total_loss(p.model, c, p.weights);
  CHECK(sub.terms.total == doctest::Approx(ref.terms.total).epsilon(1e-13));
  CHECK((sub.grad_phi - ref.grad_phi).norm() < 1e-12 * (1 + ref.grad_phi.norm()));
}

TEST_CASE("workspace reuse does not change results") {
  LossWorkspace ws;
  for (std::uint64_t s : {5, 6, 5}) {
    const testutil::ToyProblem p = testutil::toy_problem(s);
    const LossEvaluation a = total_loss(p.model, p.colloc, p.weights, {}, &ws);
    const LossEvaluation b = total_loss(p.model, p.colloc, p.weights);
    CHECK(a.terms.total == b.terms.total);
    CHECK(a.grad_phi == b.grad_phi);
    CHECK(a.grad_d == b.grad_d);
  }
}

TEST_CASE("weight validation") {
  LossWeights w;
  CHECK_NOTHROW(w.validate());
  w.alpha_m = -1;
  CHECK_THROWS_AS(w.validate(), Error);
  w = LossWeights{};
  w.epsilon = 0;
  CHECK_THROWS_AS(w.validate(), Error);
  w = LossWeights{};
  w.delta = -0.1;
  CHECK_THROWS_AS(w.validate(), Error);
}
}

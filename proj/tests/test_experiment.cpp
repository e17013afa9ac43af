#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "eikonal.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "frames.hpp"
#include "test_util.hpp"
#include "train.hpp"

using namespace fiberpinn;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.fiber.angle_deg = 30.0;
  s.sources = {{Vec3(10, 10, 0), 0.0}};
  s.sample_count = 40;
  s.rng_seed = 9;
  return s;
}

std::vector<ActivationSample> dummy_samples(int n) {
  std::vector<ActivationSample> s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)].time_ms = i;
  return s;
}

PinnModel constant_model(const TriMesh& mesh, double value) {
  PinnModel m;
  const MLPSpec ps = phi_network_spec(2, 4), ds = d_network_spec(2, 4);
  m.phi = NetParams(ps, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ps.param_count())));
  m.d = NetParams(ds, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.param_count())));
  m.input = InputNormalization::from_mesh(mesh);
  m.time = TimeScaling{value, 1.0};
  return m;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("experiment") {
TEST_CASE("noiseless samples equal the ground truth") {
  const TriMesh mesh = make_sheet(20, 20, 10, 10);
  const FrameField frames = build_frames(mesh);
  const SyntheticData data = generate_synthetic(mesh, frames, small_spec());
  REQUIRE(data.samples.size() == 40);
  std::vector<int> sorted = data.sample_vertices;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const int v = data.sample_vertices[i];
    CHECK(data.samples[i].time_ms == data.truth.phi[static_cast<std::size_t>(v)]);
    CHECK((data.samples[i].point.position - mesh.vertices()[static_cast<std::size_t>(v)]).norm() < 1e-12);
    CHECK(data.samples[i].offset_mm == doctest::Approx(0.0));
  }
  for (const Vec3& f : data.truth.fiber) {
    CHECK(std::abs(f.dot(Vec3(std::cos(M_PI / 6), std::sin(M_PI / 6), 0))) == doctest::Approx(1.0));
  }
}

TEST_CASE("ground truth matches the planar closed form") {
  const TriMesh mesh = make_sheet(20, 20, 40, 40);
  const FrameField frames = build_frames(mesh);
  SyntheticSpec s;
  s.speed_long = 2.0;
  s.speed_trans = 1.0;
  s.sources = {{Vec3::Zero(), 0.0}};
  s.sample_count = 5;
  const SyntheticData data = generate_synthetic(mesh, frames, s);
  const Mat2 D2 = Vec2(4, 1).asDiagonal();
  double err = 0.0, peak = 0.0;
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    const double ref = analytic_planar(D2, Vec2::Zero(), mesh.vertices()[v].head<2>(), 0.0);
    err = std::max(err, std::abs(data.truth.phi[v] - ref));
    peak = std::max(peak, ref);
  }
  CHECK(err / peak < 0.03);
  CHECK(data.truth.d[0][0] == doctest::Approx(std::log(4.0)));
  CHECK(data.truth.d[0][1] == doctest::Approx(0.0));
  CHECK(data.truth.d[0][2] == doctest::Approx(0.0));
}

TEST_CASE("generation is deterministic and noise only moves times") {
  const TriMesh mesh = make_sheet(20, 20, 10, 10);
  const FrameField frames = build_frames(mesh);
  SyntheticSpec s = small_spec();
  s.noise_sigma_ms = 1.0;
  const SyntheticData a = generate_synthetic(mesh, frames, s);
  const SyntheticData b = generate_synthetic(mesh, frames, s);
  s.noise_sigma_ms = 0.0;
  const SyntheticData clean = generate_synthetic(mesh, frames, s);
  CHECK(a.sample_vertices == b.sample_vertices);
  CHECK(a.sample_vertices == clean.sample_vertices);
  double ss = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].time_ms == b.samples[i].time_ms);
    CHECK(a.samples[i].point.position == clean.samples[i].point.position);
    const double r = a.samples[i].time_ms - clean.samples[i].time_ms;
    ss += r * r;
  }
  CHECK(ss > 0.0);
  CHECK(std::sqrt(ss / 40) == doctest::Approx(1.0).epsilon(0.4));

  s.sample_count = static_cast<int>(mesh.vertex_count()) + 1;
  CHECK_THROWS_AS(generate_synthetic(mesh, frames, s), Error);
}

TEST_CASE("fiber rules") {
  FiberRule r;
  r.angle_deg = 10;
  CHECK(r.angle_at(Vec3(5, 5, 5)) == 10);
  r.kind = FiberRule::Kind::Linear;
  r.slope_deg_per_mm = 0.5;
  r.axis = Vec3::UnitY();
  CHECK(r.angle_at(Vec3(3, 4, 0)) == doctest::Approx(12.0));
}

TEST_CASE("split examples") {
  const auto all = split_samples(dummy_samples(10), 1.0, 3);
  CHECK(std::all_of(all.begin(), all.end(), [](const auto& s) { return s.split == SplitTag::Train; }));

  const auto s = split_samples(dummy_samples(10), 0.8, 3);
  CHECK(std::count_if(s.begin(), s.end(), [](const auto& x) { return x.split == SplitTag::Train; }) == 8);
  for (int i = 0; i < 10; ++i) CHECK(s[static_cast<std::size_t>(i)].time_ms == i);

  // Ties go to train.
  const auto half = split_samples(dummy_samples(5), 0.5, 3);
  CHECK(std::count_if(half.begin(), half.end(), [](const auto& x) { return x.split == SplitTag::Train; }) == 3);

  const auto again = split_samples(dummy_samples(10), 0.8, 3);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(again[i].split == s[i].split);
  bool differs = false;
  for (std::uint64_t seed = 4; seed < 20 && !differs; ++seed) {
    const auto other = split_samples(dummy_samples(10), 0.8, seed);
    for (std::size_t i = 0; i < s.size(); ++i) differs |= other[i].split != s[i].split;
  }
  CHECK(differs);

  CHECK_THROWS_AS(split_samples(dummy_samples(1), 0.5, 1), Error);
  CHECK_THROWS_AS(split_samples(dummy_samples(10), 0.99, 1), Error);
  CHECK_THROWS_AS(split_samples(dummy_samples(10), 0.0, 1), Error);
}

TEST_CASE("rmse properties") {
  const std::vector<double> a = {1, 2}, b = {1, 4};
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, b) == doctest::Approx(std::sqrt(2.0)));
  CHECK(rmse(a, b) == rmse(b, a));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> x(30), y(30);
  for (auto& v : x) v = g(rng);
  for (auto& v : y) v = g(rng);
  const double r = rmse(x, y);
  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> xp, yp;
  for (int i : perm) {
    xp.push_back(x[static_cast<std::size_t>(i)]);
    yp.push_back(y[static_cast<std::size_t>(i)]);
  }
  CHECK(rmse(xp, yp) == doctest::Approx(r).epsilon(1e-14));
  CHECK_THROWS_AS(rmse(a, std::vector<double>{1}), Error);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST_CASE("fiber angle examples and sign invariance") {
  const TriMesh mesh = make_sheet(1, 1, 1, 1);
  const FrameField frames = build_frames(mesh);
  const Vec3 e1 = Vec3::UnitX();
  const Vec3 diag = Vec3(1, 1, 0).normalized();
  const std::vector<Vec3> p = {e1, e1, e1, Vec3::UnitY()};
  const std::vector<Vec3> t = {e1, -e1, diag, -diag};
  const AngleSummary s = fiber_angle_error(p, t, frames);
  CHECK(s.per_vertex[0] == doctest::Approx(0.0));
  CHECK(s.per_vertex[1] == doctest::Approx(0.0));
  CHECK(s.per_vertex[2] == doctest::Approx(45.0));
  CHECK(s.per_vertex[3] == doctest::Approx(45.0));
  CHECK(s.mean == doctest::Approx(22.5));
  CHECK(s.median == doctest::Approx(22.5));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 2 * M_PI);
  std::vector<Vec3> a, b;
  for (int i = 0; i < 4; ++i) {
    const double x = u(rng), y = u(rng);
    a.emplace_back(std::cos(x), std::sin(x), 0);
    b.emplace_back(std::cos(y), std::sin(y), 0);
  }
  const auto base = fiber_angle_error(a, b, frames).per_vertex;
  for (double v : base) CHECK((v >= 0.0 && v <= 90.0));
  std::vector<Vec3> an = a, bn = b;
  an[1] = -an[1];
  bn[2] = -bn[2];
  const auto flipped = fiber_angle_error(an, bn, frames).per_vertex;
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(flipped[i] == doctest::Approx(base[i]));

  const std::vector<Vec3> bad = {2 * e1, e1, e1, e1};
  CHECK_THROWS_AS(fiber_angle_error(bad, t, frames), Error);
  const std::vector<Vec3> normal = {Vec3::UnitZ(), e1, e1, e1};
  CHECK_THROWS_AS(fiber_angle_error(normal, t, frames), Error);
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_THROWS_AS(median({}), Error);
}

TEST_CASE("evaluate a model that reproduces the truth") {
  const TriMesh mesh = make_sheet(10, 10, 5, 5);
  const FrameField frames = build_frames(mesh);
  GroundTruth truth;
  truth.phi.assign(mesh.vertex_count(), 12.5);
  truth.fiber.assign(mesh.vertex_count(), Vec3::UnitX());
  truth.d.assign(mesh.vertex_count(), Vec3::Zero());
  std::vector<ActivationSample> samples = dummy_samples(4);
  for (auto& s : samples) {
    s.point = vertex_point(mesh, 3);
    s.time_ms = 12.5;
  }
  samples[3].split = SplitTag::Test;
  const Evaluation ev = evaluate(constant_model(mesh, 12.5), mesh, frames, &truth, samples);
  REQUIRE(ev.rmse_s.has_value());
  CHECK(*ev.rmse_s == 0.0);
  CHECK(*ev.rmse_o == 0.0);
  CHECK(*ev.rmse_t == 0.0);
  REQUIRE(ev.fiber_error.has_value());
  CHECK(ev.fiber_error->per_vertex.size() == mesh.vertex_count());
  CHECK(ev.D.size() == mesh.vertex_count());
  CHECK(ev.speed_long[0] == doctest::Approx(1.0));

  samples[3].split = SplitTag::Train;
  const Evaluation train_only = evaluate(constant_model(mesh, 12.5), mesh, frames, nullptr, samples);
  CHECK(!train_only.rmse_t.has_value());
  CHECK(!train_only.rmse_s.has_value());
  CHECK(!train_only.fiber_error.has_value());
  CHECK(train_only.rmse_o.has_value());
}

TEST_CASE("checkpoint from another mesh is rejected") {
  const TriMesh a = make_sheet(10, 10, 5, 5);
  const TriMesh b = make_sheet(12, 10, 5, 5);
  const PinnModel m = constant_model(a, 0.0);
  CHECK_NOTHROW(check_model_matches_mesh(m, a));
  CHECK_THROWS_AS(check_model_matches_mesh(m, b), Error);
  CHECK_THROWS_AS(evaluate(m, b, build_frames(b), nullptr, {}), Error);
}

TEST_CASE("export round trip") {
  const auto dir = testutil::scratch_dir("export");
  const TriMesh mesh = make_sheet(20, 20, 10, 10);
  const FrameField frames = build_frames(mesh);
  const SyntheticData data = generate_synthetic(mesh, frames, small_spec());
  PinnModel m = constant_model(mesh, 3.0);
  m.phi = init_params(m.phi.spec(), 4);
  m.d = init_params(m.d.spec(), 5);
  const Evaluation ev = evaluate(m, mesh, frames, &data.truth, data.samples);
  export_results(dir / "r.vtk", dir / "r.csv", mesh, ev, data.samples);

  const VtkPolyData back = load_vtk(dir / "r.vtk");
  REQUIRE(back.point_data.scalar("phi_ms"));
  REQUIRE(back.point_data.scalar("speed_long_mm_per_ms"));
  REQUIRE(back.point_data.vector("fiber"));
  CHECK(back.point_data.scalars.size() == 2);
  CHECK(back.point_data.vectors.size() == 1);
  CHECK(*back.point_data.scalar("phi_ms") == ev.phi);
  CHECK(*back.point_data.scalar("speed_long_mm_per_ms") == ev.speed_long);
  CHECK(*back.point_data.vector("fiber") == ev.fiber);

  const auto lines = lines_of(testutil::read_file(dir / "r.csv"));
  REQUIRE(lines.size() == data.samples.size() + 1);
  CHECK(lines[0] == "x_mm,y_mm,z_mm,t_ms,split,predicted_ms,residual_ms");
}

TEST_CASE("sample CSV round trip and projection") {
  const auto dir = testutil::scratch_dir("samples");
  const TriMesh mesh = make_sheet(20, 20, 10, 10);
  const FrameField frames = build_frames(mesh);
  auto samples = split_samples(generate_synthetic(mesh, frames, small_spec()).samples, 0.8, 1);
  save_samples_csv(dir / "s.csv", samples);
  const auto back = load_samples_csv(dir / "s.csv", mesh);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].time_ms == samples[i].time_ms);
    CHECK(back[i].split == samples[i].split);
    CHECK((back[i].point.position - samples[i].point.position).norm() < 1e-12);
  }

  testutil::write_file(dir / "off.csv", "t_ms,z_mm,y_mm,x_mm,split\n4.5,2.0,3,3,unknown\n1,0,0,0,test\n");
  const auto off = load_samples_csv(dir / "off.csv", mesh);
  REQUIRE(off.size() == 2);
  CHECK(off[0].time_ms == 4.5);
  CHECK(off[0].offset_mm == doctest::Approx(2.0));
  CHECK((off[0].point.position - Vec3(3, 3, 0)).norm() < 1e-12);
  CHECK(off[0].split == SplitTag::Train);
  CHECK(off[1].split == SplitTag::Test);

  testutil::write_file(dir / "bad.csv", "x_mm,y_mm,z_mm,t_ms\n1,2,3,abc\n");
  try {
    load_samples_csv(dir / "bad.csv", mesh);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_samples_csv(dir / "missing.csv", mesh), Error);
}

TEST_CASE("short training beats the initial model") {
  const TriMesh mesh = make_sheet(20, 20, 10, 10);
  const FrameField frames = build_frames(mesh);
  SyntheticSpec spec = small_spec();
  spec.sample_count = 20;
  const SyntheticData data = generate_synthetic(mesh, frames, spec);

  TrainProblem tp;
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    tp.colloc.positions.push_back(mesh.vertices()[v]);
    tp.colloc.frames.push_back(frames.at_vertex(static_cast<int>(v)));
  }
  std::vector<double> times;
  for (const auto& s : data.samples) {
    tp.colloc.data_positions.push_back(s.point.position);
    tp.colloc.data_times.push_back(s.time_ms);
    times.push_back(s.time_ms);
  }
  tp.phi_spec = phi_network_spec(3, 10);
  tp.input = InputNormalization::from_mesh(mesh);
  tp.time = TimeScaling::from_times(times);
  TrainConfig cfg;
  cfg.adam_epochs = 500;
  cfg.adam_lr = 1e-2;
  cfg.lbfgs_max_iter = 100;
  cfg.restarts = 1;
  const TrainReport rep = fit(tp, cfg);
  const double initial = *evaluate(initial_model(tp, 0), mesh, frames, &data.truth, data.samples).rmse_o;
  const double trained = *evaluate(rep.model, mesh, frames, &data.truth, data.samples).rmse_o;
  CHECK(trained < initial);
}
}

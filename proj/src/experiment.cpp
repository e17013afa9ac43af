#include "experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "error.hpp"

namespace fiberpinn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* first = cell.data();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    fail(ErrorKind::Parse, where + ": expected a number, got '" + cell + "'");
  }
  return v;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double FiberRule::angle_at(const Vec3& x) const {
  if (kind == Kind::Constant) return angle_deg;
  return angle_deg + slope_deg_per_mm * axis.dot(x);
}

void SyntheticSpec::validate() const {
  if (!(speed_long > 0.0) || !(speed_trans > 0.0)) fail(ErrorKind::Config, "synthetic speeds must be positive");
  if (sample_count < 1) fail(ErrorKind::Config, "synthetic.sample_count must be >= 1");
  if (!(noise_sigma_ms >= 0.0)) fail(ErrorKind::Config, "synthetic.noise_sigma_ms must be nonnegative");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    fail(ErrorKind::Config, "synthetic.train_fraction must lie in (0, 1]");
  }
  if (sources.empty()) fail(ErrorKind::Config, "synthetic.sources must not be empty");
  for (const auto& [p, t] : sources) {
    if (!p.allFinite() || !std::isfinite(t)) fail(ErrorKind::Config, "synthetic.sources entries must be finite");
  }
}

int nearest_vertex(const TriMesh& mesh, const Vec3& p) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    const double d = (mesh.vertices()[v] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(v);
    }
  }
  if (best < 0) fail(ErrorKind::Invalid, "nearest vertex of an empty mesh");
  return best;
}

SyntheticData generate_synthetic(const TriMesh& mesh, const FrameField& frames, const SyntheticSpec& spec) {
  spec.validate();
  const auto nv = static_cast<int>(mesh.vertex_count());
  if (spec.sample_count > nv) {
    fail(ErrorKind::Config, "sample count " + std::to_string(spec.sample_count) + " exceeds vertex count " +
                                std::to_string(nv));
  }

  SyntheticData out;
  auto& gt = out.truth;
  gt.d.resize(static_cast<std::size_t>(nv));
  gt.fiber.resize(static_cast<std::size_t>(nv));
  for (int v = 0; v < nv; ++v) {
    const double angle = spec.fiber.angle_at(mesh.vertices()[v]) * M_PI / 180.0;
    gt.d[v] = conductivity_from_fiber(angle, spec.speed_long, spec.speed_trans);
    gt.fiber[v] = fiber_direction(gt.d[v], frames.at_vertex(v)).direction;
  }

  for (const auto& [p, t] : spec.sources) out.seeds.emplace_back(nearest_vertex(mesh, p), t);
  const auto metrics = metrics_from_conductivity(mesh, frames, gt.d);
  EikonalSolution sol = solve_eikonal(mesh, metrics, out.seeds);
  if (!sol.unreachable.empty()) {
    fail(ErrorKind::Invalid, std::to_string(sol.unreachable.size()) +
                                 " vertices are not reachable from the activation sources");
  }
  gt.phi = std::move(sol.phi);

  // Positions first, noise from an independent stream, so the sample set
  // does not depend on the noise level.
  std::mt19937_64 rng(spec.rng_seed);
  std::vector<int> idx(static_cast<std::size_t>(nv));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < spec.sample_count; ++i) {
    std::uniform_int_distribution<int> pick(i, nv - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  out.sample_vertices.assign(idx.begin(), idx.begin() + spec.sample_count);

  std::mt19937_64 noise_rng(spec.rng_seed ^ 0xA5A5A5A5DEADBEEFull);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma_ms > 0.0 ? spec.noise_sigma_ms : 1.0);
  for (int v : out.sample_vertices) {
    ActivationSample s;
    s.point = vertex_point(mesh, v);
    s.time_ms = gt.phi[v];
    if (spec.noise_sigma_ms > 0.0) s.time_ms += noise(noise_rng);
    out.samples.push_back(s);
  }
  return out;
}

std::vector<ActivationSample> split_samples(std::vector<ActivationSample> samples, double train_fraction,
                                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) fail(ErrorKind::Invalid, "train fraction must lie in (0, 1]");
  const auto n = static_cast<long>(samples.size());
  const long n_train = static_cast<long>(std::floor(train_fraction * static_cast<double>(n) + 0.5));
  if (n_train < 1) fail(ErrorKind::Invalid, "split leaves the training part empty");
  if (train_fraction < 1.0 && n - n_train < 1) fail(ErrorKind::Invalid, "split leaves the test part empty");

  std::vector<long> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0L);
  std::mt19937_64 rng(seed);
  for (long i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<long> pick(0, i);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
  }
  for (long i = 0; i < n; ++i) {
    samples[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])].split = i < n_train ? SplitTag::Train : SplitTag::Test;
  }
  return samples;
}

double rmse(std::span<const double> predicted, std::span<const double> reference) {
  if (predicted.size() != reference.size()) fail(ErrorKind::Invalid, "rmse: length mismatch");
  if (predicted.empty()) fail(ErrorKind::Invalid, "rmse of an empty set");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - reference[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(predicted.size()));
}

double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorKind::Invalid, "median of an empty set");
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<long>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<long>(mid));
  return 0.5 * (lo + hi);
}

AngleSummary fiber_angle_error(std::span<const Vec3> predicted, std::span<const Vec3> truth,
                               const FrameField& frames) {
  if (predicted.size() != truth.size()) fail(ErrorKind::Invalid, "fiber_angle_error: length mismatch");
  if (predicted.empty()) fail(ErrorKind::Invalid, "fiber_angle_error of an empty set");
  AngleSummary s;
  s.per_vertex.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (const Vec3* v : {&predicted[i], &truth[i]}) {
      if (std::abs(v->norm() - 1.0) > 1e-6) {
        fail(ErrorKind::Invalid, "fiber_angle_error: non-unit vector at index " + std::to_string(i));
      }
      if (i < frames.normal.size() && std::abs(v->dot(frames.normal[i])) > 1e-6) {
        fail(ErrorKind::Invalid, "fiber_angle_error: vector not tangent at index " + std::to_string(i));
      }
    }
    const double c = std::min(1.0, std::abs(predicted[i].dot(truth[i])));
    s.per_vertex.push_back(std::acos(c) * 180.0 / M_PI);
  }
  s.mean = std::accumulate(s.per_vertex.begin(), s.per_vertex.end(), 0.0) / static_cast<double>(s.per_vertex.size());
  s.median = median(s.per_vertex);
  return s;
}

void check_model_matches_mesh(const PinnModel& model, const TriMesh& mesh) {
  if (!InputNormalization::from_mesh(mesh).matches(model.input)) {
    fail(ErrorKind::Invalid, "checkpoint normalization transform does not match this mesh "
                             "(checkpoint was trained on a different mesh)");
  }
}

Evaluation evaluate(const PinnModel& model, const TriMesh& mesh, const FrameField& frames,
                    const GroundTruth* truth, std::span<const ActivationSample> samples) {
  check_model_matches_mesh(model, mesh);
  Evaluation ev;
  const auto nv = mesh.vertex_count();
  ev.phi = model.phi_batch(mesh.vertices());
  ev.d = model.d_batch(mesh.vertices());
  ev.D.resize(nv);
  ev.fiber.resize(nv);
  ev.speed_long.resize(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    const Frame P = frames.at_vertex(static_cast<int>(v));
    ev.D[v] = assemble_tensor(ev.d[v], P, model.normal_eigenvalue);
    ev.fiber[v] = fiber_direction(ev.d[v], P).direction;
    ev.speed_long[v] = speed_along(ev.D[v], ev.fiber[v]);
  }

  std::vector<Vec3> positions;
  for (const auto& s : samples) positions.push_back(s.point.position);
  ev.sample_predictions = model.phi_batch(positions);

  std::vector<double> pred_o, ref_o, pred_t, ref_t;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& pred = samples[i].split == SplitTag::Train ? pred_o : pred_t;
    auto& ref = samples[i].split == SplitTag::Train ? ref_o : ref_t;
    pred.push_back(ev.sample_predictions[i]);
    ref.push_back(samples[i].time_ms);
  }
  if (!pred_o.empty()) ev.rmse_o = rmse(pred_o, ref_o);
  if (!pred_t.empty()) ev.rmse_t = rmse(pred_t, ref_t);

  if (truth != nullptr) {
    if (truth->phi.size() != nv) fail(ErrorKind::Invalid, "ground truth does not match the mesh");
    ev.rmse_s = rmse(ev.phi, truth->phi);
    if (truth->fiber.size() == nv) ev.fiber_error = fiber_angle_error(ev.fiber, truth->fiber, frames);
  }
  return ev;
}

PointData result_fields(const Evaluation& ev) {
  PointData pd;
  pd.scalars.emplace_back("phi_ms", ev.phi);
  pd.scalars.emplace_back("speed_long_mm_per_ms", ev.speed_long);
  pd.vectors.emplace_back("fiber", ev.fiber);
  return pd;
}

void export_results(const std::filesystem::path& vtk_path, const std::filesystem::path& csv_path,
                    const TriMesh& mesh, const Evaluation& ev, std::span<const ActivationSample> samples) {
  save_vtk(vtk_path, mesh, result_fields(ev));
  std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + csv_path.string() + "' for writing");
  out << "x_mm,y_mm,z_mm,t_ms,split,predicted_ms,residual_ms\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const double pred = ev.sample_predictions.at(i);
    out << format_number(s.point.position.x()) << ',' << format_number(s.point.position.y()) << ','
        << format_number(s.point.position.z()) << ',' << format_number(s.time_ms) << ','
        << (s.split == SplitTag::Train ? "train" : "test") << ',' << format_number(pred) << ','
        << format_number(pred - s.time_ms) << '\n';
  }
  if (!out) fail(ErrorKind::Io, "failed writing '" + csv_path.string() + "'");
}

std::vector<ActivationSample> load_samples_csv(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open samples '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Parse, path.string() + ": empty samples file");
  const auto header = split_csv(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int cx = column("x_mm");
  const int cy = column("y_mm");
  const int cz = column("z_mm");
  const int ct = column("t_ms");
  const int cs = column("split");
  if (cx < 0 || cy < 0 || cz < 0 || ct < 0) {
    fail(ErrorKind::Parse, path.string() + ":1: header must contain x_mm,y_mm,z_mm,t_ms");
  }
  std::vector<ActivationSample> samples;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const int needed = std::max({cx, cy, cz, ct});
    if (static_cast<int>(cells.size()) <= needed) fail(ErrorKind::Parse, where + ": too few columns");
    const Vec3 p(parse_cell(cells[cx], where), parse_cell(cells[cy], where), parse_cell(cells[cz], where));
    ActivationSample s;
    s.time_ms = parse_cell(cells[ct], where);
    if (!std::isfinite(s.time_ms)) fail(ErrorKind::Parse, where + ": activation time must be finite");
    s.point = project_point(mesh, p);
    s.offset_mm = (s.point.position - p).norm();
    if (cs >= 0 && cs < static_cast<int>(cells.size()) && cells[cs] == "test") s.split = SplitTag::Test;
    samples.push_back(s);
  }
  return samples;
}

void save_samples_csv(const std::filesystem::path& path, std::span<const ActivationSample> samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << "x_mm,y_mm,z_mm,t_ms,split\n";
  for (const auto& s : samples) {
    out << format_number(s.point.position.x()) << ',' << format_number(s.point.position.y()) << ','
        << format_number(s.point.position.z()) << ',' << format_number(s.time_ms) << ','
        << (s.split == SplitTag::Train ? "train" : "test") << '\n';
  }
  if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

}  // namespace fiberpinn

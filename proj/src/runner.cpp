#include "runner.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace fiberpinn {

namespace {

std::filesystem::path prepare_out(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec) fail(ErrorKind::Io, "cannot create output directory '" + cfg.out.string() + "': " + ec.message());
  return cfg.out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : "n/a"; }

std::pair<std::size_t, std::size_t> split_counts(const std::vector<ActivationSample>& samples) {
  std::size_t train = 0;
  for (const auto& s : samples) train += s.split == SplitTag::Train ? 1 : 0;
  return {train, samples.size() - train};
}

std::filesystem::path checkpoint_path(const RunConfig& cfg) {
  return cfg.checkpoint_path.empty() ? cfg.out / "model.ckpt" : cfg.checkpoint_path;
}

struct Scene {
  TriMesh mesh;
  FrameField frames;
};

Scene build_scene(const RunConfig& cfg) {
  Scene s{build_mesh(cfg.mesh), {}};
  if (cfg.frames.seed_vertex >= static_cast<int>(s.mesh.vertex_count())) {
    fail(ErrorKind::Config, "config field 'frames.seed_vertex': exceeds vertex count " +
                                std::to_string(s.mesh.vertex_count()));
  }
  s.frames = build_frames(s.mesh, cfg.frames);
  return s;
}

}  // namespace

TriMesh build_mesh(const MeshSource& src) {
  if (!src.path.empty()) return load_mesh(src.path, src.format ? *src.format : mesh_format_from_path(src.path));
  if (src.generator == "sheet") return make_sheet(src.width_mm, src.height_mm, src.nx, src.ny);
  if (src.generator == "icosphere") return make_icosphere(src.subdivisions, src.radius_mm);
  return make_cylinder(src.radius_mm, src.length_mm, src.nx, src.ny);
}

SyntheticData synthesize(const RunConfig& cfg, const TriMesh& mesh, const FrameField& frames) {
  SyntheticData data = generate_synthetic(mesh, frames, cfg.synthetic);
  const std::uint64_t split_seed = cfg.synthetic.rng_seed + 0x5851F42D4C957F2Dull;
  data.samples = split_samples(std::move(data.samples), cfg.synthetic.train_fraction, split_seed);
  return data;
}

GroundTruth load_ground_truth(const std::filesystem::path& path, const TriMesh& mesh) {
  VtkPolyData vtk = load_vtk(path);
  const auto nv = mesh.vertex_count();
  if (vtk.mesh.vertex_count() != nv) {
    fail(ErrorKind::Invalid, "ground truth '" + path.string() + "' has " + std::to_string(vtk.mesh.vertex_count()) +
                                 " vertices, mesh has " + std::to_string(nv));
  }
  for (std::size_t v = 0; v < nv; ++v) {
    if ((vtk.mesh.vertices()[v] - mesh.vertices()[v]).norm() > 1e-9) {
      fail(ErrorKind::Invalid, "ground truth '" + path.string() + "' vertex " + std::to_string(v) +
                                   " does not match the mesh");
    }
  }
  GroundTruth gt;
  const auto* phi = vtk.point_data.scalar("phi_ms");
  if (phi == nullptr) fail(ErrorKind::Invalid, "ground truth '" + path.string() + "' lacks the phi_ms field");
  gt.phi = *phi;
  if (const auto* fiber = vtk.point_data.vector("fiber")) gt.fiber = *fiber;
  if (const auto* d = vtk.point_data.vector("d")) gt.d.assign(d->begin(), d->end());
  return gt;
}

Dataset load_dataset(const RunConfig& cfg, const TriMesh& mesh, const FrameField& frames) {
  Dataset ds;
  if (cfg.samples_path.empty()) {
    SyntheticData data = synthesize(cfg, mesh, frames);
    ds.samples = std::move(data.samples);
    ds.truth = std::move(data.truth);
  } else {
    ds.samples = load_samples_csv(cfg.samples_path, mesh);
    if (ds.samples.empty()) fail(ErrorKind::Invalid, "samples file '" + cfg.samples_path.string() + "' has no rows");
  }
  if (!cfg.ground_truth_path.empty()) ds.truth = load_ground_truth(cfg.ground_truth_path, mesh);
  return ds;
}

TrainProblem make_problem(const RunConfig& cfg, const TriMesh& mesh, const FrameField& frames,
                          const std::vector<ActivationSample>& samples) {
  TrainProblem p;
  p.weights = cfg.loss;
  p.phi_spec = phi_network_spec(cfg.phi_layers, cfg.phi_width);
  p.d_spec = d_network_spec(cfg.d_layers, cfg.d_width);
  p.d_max = cfg.d_max;
  p.normal_eigenvalue = cfg.normal_eigenvalue;
  p.input = InputNormalization::from_mesh(mesh);
  p.colloc.positions = mesh.vertices();
  p.colloc.frames.reserve(mesh.vertex_count());
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) p.colloc.frames.push_back(frames.at_vertex(static_cast<int>(v)));
  for (const auto& s : samples) {
    if (s.split != SplitTag::Train) continue;
    p.colloc.data_positions.push_back(s.point.position);
    p.colloc.data_times.push_back(s.time_ms);
  }
  if (p.colloc.data_times.empty()) fail(ErrorKind::Invalid, "no training samples");
  p.time = TimeScaling::from_times(p.colloc.data_times);
  return p;
}

std::string evaluation_metrics(const Evaluation& ev, std::size_t n_train, std::size_t n_test) {
  std::ostringstream os;
  os << "rmse_s_ms=" << opt_number(ev.rmse_s) << '\n'
     << "rmse_o_ms=" << opt_number(ev.rmse_o) << '\n'
     << "rmse_t_ms=" << opt_number(ev.rmse_t) << '\n'
     << "fiber_angle_mean_deg=" << (ev.fiber_error ? format_number(ev.fiber_error->mean) : "n/a") << '\n'
     << "fiber_angle_median_deg=" << (ev.fiber_error ? format_number(ev.fiber_error->median) : "n/a") << '\n'
     << "n_vertices=" << ev.phi.size() << '\n'
     << "n_train=" << n_train << '\n'
     << "n_test=" << n_test << '\n';
  return os.str();
}

void write_manifest(const RunConfig& cfg, const std::string& command) {
  nlohmann::json m;
  m["manifest_version"] = 1;
  m["artifact_version"] = kArtifactVersion;
  m["command"] = command;
  m["config_hash"] = config_hash(cfg.document);
  m["seed"] = cfg.train.seed;
  m["synthetic_rng_seed"] = cfg.synthetic.rng_seed;
  m["config"] = cfg.document;
  write_text(prepare_out(cfg) / ("manifest_" + command + ".json"), m.dump(2) + "\n");
}

void cmd_generate(const RunConfig& cfg) {
  if (!cfg.synthetic_enabled) fail(ErrorKind::Config, "config field 'synthetic.enabled': generate needs a synthetic spec");
  const Scene scene = build_scene(cfg);
  const SyntheticData data = synthesize(cfg, scene.mesh, scene.frames);
  const auto out = prepare_out(cfg);

  PointData pd;
  pd.scalars.emplace_back("phi_ms", data.truth.phi);
  std::vector<double> speed(scene.mesh.vertex_count(), cfg.synthetic.speed_long);
  pd.scalars.emplace_back("speed_long_mm_per_ms", speed);
  pd.vectors.emplace_back("fiber", data.truth.fiber);
  pd.vectors.emplace_back("d", std::vector<Vec3>(data.truth.d.begin(), data.truth.d.end()));
  save_vtk(out / "ground_truth.vtk", scene.mesh, pd);
  save_samples_csv(out / "samples.csv", data.samples);
  write_manifest(cfg, "generate");
}

TrainOutcome cmd_train(const RunConfig& cfg) {
  const Scene scene = build_scene(cfg);
  const Dataset ds = load_dataset(cfg, scene.mesh, scene.frames);
  const auto out = prepare_out(cfg);
  write_manifest(cfg, "train");

  const TrainProblem problem = make_problem(cfg, scene.mesh, scene.frames, ds.samples);
  TrainOutcome res;
  res.report = fit(problem, cfg.train);
  save_checkpoint(checkpoint_path(cfg), res.report.model);

  std::ostringstream hist;
  hist << "epoch,phase,total,data,model,weight,tv,grad_norm\n";
  for (const auto& h : res.report.history) {
    hist << h.epoch << ',' << h.phase << ',' << format_number(h.terms.total) << ',' << format_number(h.terms.data)
         << ',' << format_number(h.terms.model) << ',' << format_number(h.terms.weight) << ','
         << format_number(h.terms.tv) << ',' << format_number(h.grad_norm) << '\n';
  }
  write_text(out / "history.csv", hist.str());

  res.evaluation = evaluate(res.report.model, scene.mesh, scene.frames, ds.truth ? &*ds.truth : nullptr, ds.samples);
  const auto [n_train, n_test] = split_counts(ds.samples);
  std::ostringstream os;
  os << evaluation_metrics(res.evaluation, n_train, n_test);
  const auto& t = res.report.final_terms;
  os << "loss_total=" << format_number(t.total) << '\n'
     << "loss_data=" << format_number(t.data) << '\n'
     << "loss_model=" << format_number(t.model) << '\n'
     << "loss_weight=" << format_number(t.weight) << '\n'
     << "loss_tv=" << format_number(t.tv) << '\n'
     << "best_restart=" << res.report.best_restart << '\n'
     << "restart_losses=";
  for (std::size_t r = 0; r < res.report.restart_losses.size(); ++r) {
    os << (r ? "," : "") << format_number(res.report.restart_losses[r]);
  }
  os << '\n' << "stop_reason=" << res.report.reason << '\n' << "config_hash=" << config_hash(cfg.document) << '\n';
  write_text(out / "metrics.txt", os.str());
  write_text(out / "timing.txt", "wall_seconds=" + format_number(res.report.wall_seconds) + "\n");
  return res;
}

Evaluation cmd_evaluate(const RunConfig& cfg) {
  const Scene scene = build_scene(cfg);
  const Dataset ds = load_dataset(cfg, scene.mesh, scene.frames);
  const PinnModel model = load_checkpoint(checkpoint_path(cfg));
  Evaluation ev = evaluate(model, scene.mesh, scene.frames, ds.truth ? &*ds.truth : nullptr, ds.samples);
  const auto out = prepare_out(cfg);
  const auto [n_train, n_test] = split_counts(ds.samples);
  write_text(out / "eval_metrics.txt", evaluation_metrics(ev, n_train, n_test));
  export_results(out / "results.vtk", out / "predictions.csv", scene.mesh, ev, ds.samples);
  write_manifest(cfg, "evaluate");
  return ev;
}

void cmd_export(const RunConfig& cfg) {
  const Scene scene = build_scene(cfg);
  const Dataset ds = load_dataset(cfg, scene.mesh, scene.frames);
  const PinnModel model = load_checkpoint(checkpoint_path(cfg));
  const Evaluation ev = evaluate(model, scene.mesh, scene.frames, nullptr, ds.samples);
  const auto out = prepare_out(cfg);
  export_results(out / "results.vtk", out / "predictions.csv", scene.mesh, ev, ds.samples);
  write_manifest(cfg, "export");
}

}  // namespace fiberpinn

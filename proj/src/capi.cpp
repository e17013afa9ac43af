#include "fiberpinn/fiberpinn.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "error.hpp"
#include "runner.hpp"

using namespace fiberpinn;

struct fp_options {
  ConfigOverrides overrides;
};

struct fp_mesh {
  TriMesh mesh;
};

struct fp_model {
  PinnModel model;
};

namespace {

thread_local std::string g_last_error;

fp_status status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Invalid:
      return FP_ERR_CONFIG;
    case ErrorKind::Numeric:
      return FP_ERR_NUMERIC;
    case ErrorKind::Io:
    case ErrorKind::Parse:
      return FP_ERR_IO;
  }
  return FP_ERR_INTERNAL;
}

template <class F>
fp_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return FP_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return FP_ERR_INTERNAL;
}

fp_status null_arg(const char* name) {
  g_last_error = std::string("argument '") + name + "' must not be NULL";
  return FP_ERR_CONFIG;
}

RunConfig resolve(const char* config_path, const fp_options* opts) {
  static const ConfigOverrides none;
  return load_config(config_path ? config_path : "", opts ? opts->overrides : none);
}

}  // namespace

extern "C" {

const char* fp_version(void) { return kArtifactVersion; }

const char* fp_last_error(void) { return g_last_error.c_str(); }

fp_status fp_options_new(fp_options** out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = new fp_options(); });
}

void fp_options_free(fp_options* opts) { delete opts; }

fp_status fp_options_set(fp_options* opts, const char* assignment) {
  if (!opts) return null_arg("opts");
  if (!assignment) return null_arg("assignment");
  return guarded([&] { opts->overrides.sets.emplace_back(assignment); });
}

fp_status fp_options_set_seed(fp_options* opts, uint64_t seed) {
  if (!opts) return null_arg("opts");
  opts->overrides.seed = seed;
  return FP_OK;
}

fp_status fp_options_set_out(fp_options* opts, const char* dir) {
  if (!opts) return null_arg("opts");
  if (!dir) return null_arg("dir");
  return guarded([&] { opts->overrides.out = dir; });
}

fp_status fp_options_set_jobs(fp_options* opts, int jobs) {
  if (!opts) return null_arg("opts");
  if (jobs < 1) {
    g_last_error = "jobs must be >= 1";
    return FP_ERR_CONFIG;
  }
  opts->overrides.jobs = jobs;
  return FP_OK;
}

fp_status fp_generate(const char* config_path, const fp_options* opts) {
  return guarded([&] { cmd_generate(resolve(config_path, opts)); });
}

fp_status fp_train(const char* config_path, const fp_options* opts) {
  return guarded([&] { cmd_train(resolve(config_path, opts)); });
}

fp_status fp_evaluate(const char* config_path, const fp_options* opts) {
  return guarded([&] { cmd_evaluate(resolve(config_path, opts)); });
}

fp_status fp_export(const char* config_path, const fp_options* opts) {
  return guarded([&] { cmd_export(resolve(config_path, opts)); });
}

fp_status fp_resolve_config(const char* config_path, const fp_options* opts, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    const std::string text = resolve(config_path, opts).document.dump(2);
    if (needed) *needed = text.size() + 1;
    if (buf && cap > 0) {
      const size_t n = std::min(cap - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

fp_status fp_mesh_load(const char* path, const char* format, fp_mesh** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] {
    const MeshFormat f = format ? parse_mesh_format(format) : mesh_format_from_path(path);
    *out = new fp_mesh{load_mesh(path, f)};
  });
}

fp_status fp_mesh_sheet(double width_mm, double height_mm, int nx, int ny, fp_mesh** out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = new fp_mesh{make_sheet(width_mm, height_mm, nx, ny)}; });
}

void fp_mesh_free(fp_mesh* mesh) { delete mesh; }

size_t fp_mesh_vertex_count(const fp_mesh* mesh) { return mesh ? mesh->mesh.vertex_count() : 0; }

size_t fp_mesh_triangle_count(const fp_mesh* mesh) { return mesh ? mesh->mesh.triangle_count() : 0; }

fp_status fp_mesh_mean_edge_length(const fp_mesh* mesh, double* out) {
  if (!mesh) return null_arg("mesh");
  if (!out) return null_arg("out");
  return guarded([&] { *out = mean_edge_length(mesh->mesh); });
}

fp_status fp_mesh_solve_eikonal(const fp_mesh* mesh, const double d[3], const int* seed_vertices,
                                const double* seed_times, size_t n_seeds, double* phi_out) {
  if (!mesh) return null_arg("mesh");
  if (!d) return null_arg("d");
  if (!phi_out) return null_arg("phi_out");
  if (n_seeds > 0 && (!seed_vertices || !seed_times)) return null_arg("seed_vertices/seed_times");
  return guarded([&] {
    const FrameField frames = build_frames(mesh->mesh);
    const std::vector<ConductivityVector> dv(mesh->mesh.vertex_count(), ConductivityVector(d[0], d[1], d[2]));
    SeedSet seeds;
    for (size_t i = 0; i < n_seeds; ++i) seeds.emplace_back(seed_vertices[i], seed_times[i]);
    const EikonalSolution sol = solve_eikonal(mesh->mesh, metrics_from_conductivity(mesh->mesh, frames, dv), seeds);
    std::copy(sol.phi.begin(), sol.phi.end(), phi_out);
  });
}

fp_status fp_model_load(const char* path, fp_model** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new fp_model{load_checkpoint(path)}; });
}

void fp_model_free(fp_model* model) { delete model; }

fp_status fp_model_eval(const fp_model* model, const double xyz[3], double* phi_ms, double d[3]) {
  if (!model) return null_arg("model");
  if (!xyz) return null_arg("xyz");
  return guarded([&] {
    const Vec3 x(xyz[0], xyz[1], xyz[2]);
    if (phi_ms) *phi_ms = model->model.phi_at(x);
    if (d) {
      const ConductivityVector dv = model->model.d_at(x);
      for (int i = 0; i < 3; ++i) d[i] = dv[i];
    }
  });
}

}  // extern "C"

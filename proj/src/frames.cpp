#include "frames.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace fiberpinn {

namespace {

Vec3 tangent_projection(const Vec3& v, const Vec3& n) { return v - v.dot(n) * n; }

// Unit tangent orthogonal to n, deterministic.
Vec3 any_tangent(const Vec3& n) {
  const Vec3 axis = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return tangent_projection(axis, n).normalized();
}

// Exact orthogonalization after normalization keeps |t1 . n| at rounding level.
Vec3 orthonormal_tangent(const Vec3& v, const Vec3& n) {
  Vec3 t = tangent_projection(v, n).normalized();
  t = tangent_projection(t, n);
  return t.normalized();
}

}  // namespace

FrameField build_frames(const TriMesh& mesh, const FrameSettings& settings) {
  if (settings.smoothing_iters < 0) fail(ErrorKind::Invalid, "smoothing_iters must be nonnegative");
  const auto nv = static_cast<int>(mesh.vertex_count());
  if (settings.seed_vertex < 0 || settings.seed_vertex >= nv) {
    fail(ErrorKind::Invalid, "seed_vertex " + std::to_string(settings.seed_vertex) + " out of range");
  }

  FrameField field;
  field.normal = vertex_normals(mesh);
  field.smoothing_iters = settings.smoothing_iters;

  const Vec3& seed_n = field.normal[settings.seed_vertex];
  const double seed_norm = settings.seed_direction.norm();
  if (!(seed_norm > 0.0) ||
      tangent_projection(settings.seed_direction / seed_norm, seed_n).norm() < 1e-6) {
    fail(ErrorKind::Invalid, "seed_direction is parallel to the normal at seed vertex " +
                                 std::to_string(settings.seed_vertex));
  }
  const Vec3 seed = settings.seed_direction / seed_norm;

  std::vector<Vec3> t1(nv);
  for (int v = 0; v < nv; ++v) {
    const Vec3& n = field.normal[v];
    if (tangent_projection(seed, n).norm() < 1e-6) {
      t1[v] = any_tangent(n);
      field.fallback_vertices.push_back(v);
    } else {
      t1[v] = orthonormal_tangent(seed, n);
    }
  }

  std::vector<Vec3> next(nv);
  const auto& rings = mesh.neighbors();
  for (int it = 0; it < settings.smoothing_iters; ++it) {
    for (int v = 0; v < nv; ++v) {
      Vec3 sum = Vec3::Zero();
      for (int u : rings[v]) sum += t1[u];
      const Vec3& n = field.normal[v];
      const Vec3 proj = tangent_projection(sum, n);
      next[v] = proj.norm() > 1e-12 ? orthonormal_tangent(proj, n) : t1[v];
    }
    t1.swap(next);
  }

  field.t1 = std::move(t1);
  field.t2.resize(nv);
  for (int v = 0; v < nv; ++v) field.t2[v] = field.normal[v].cross(field.t1[v]);
  return field;
}

Frame frame_at(const TriMesh& mesh, const FrameField& frames, const SurfacePoint& sp) {
  const auto& tri = mesh.triangles().at(sp.triangle);
  for (int k = 0; k < 3; ++k) {
    if (sp.barycentric[k] == 1.0) return frames.at_vertex(tri[k]);
  }
  Vec3 n = Vec3::Zero();
  Vec3 t1 = Vec3::Zero();
  for (int k = 0; k < 3; ++k) {
    n += sp.barycentric[k] * frames.normal[tri[k]];
    t1 += sp.barycentric[k] * frames.t1[tri[k]];
  }
  const double nn = n.norm();
  if (nn < 1e-8) {
    fail(ErrorKind::Numeric, "triangle " + std::to_string(sp.triangle) + ": interpolated normal vanishes");
  }
  n /= nn;
  Vec3 t = tangent_projection(t1, n);
  if (t.norm() < 1e-8) {
    fail(ErrorKind::Numeric, "triangle " + std::to_string(sp.triangle) + ": interpolated tangent vanishes");
  }
  t = orthonormal_tangent(t, n);
  Frame P;
  P.col(0) = t;
  P.col(1) = n.cross(t);
  return P;
}

double mean_adjacent_frame_angle(const TriMesh& mesh, const FrameField& frames) {
  double sum = 0.0;
  long count = 0;
  const auto& rings = mesh.neighbors();
  for (std::size_t v = 0; v < rings.size(); ++v) {
    const Vec3& n = frames.normal[v];
    for (int u : rings[v]) {
      const Vec3 proj = tangent_projection(frames.t1[u], n);
      const double len = proj.norm();
      if (len < 1e-12) continue;
      const double c = std::clamp(proj.dot(frames.t1[v]) / len, -1.0, 1.0);
      sum += std::acos(c);
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count) * 180.0 / M_PI;
}

}  // namespace fiberpinn

#include "eikonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace fiberpinn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Local 2D coordinates of each triangle's vertices in its own basis.
struct LocalTriangle {
  std::array<Vec2, 3> p;
};

// min over lambda in [0, 1] of lambda*phi_a + (1-lambda)*phi_b + |v - x_lambda|_M.
double local_solve(const Vec2& v, const Vec2& a, const Vec2& b, double phi_a, double phi_b, const Mat2& M) {
  const bool fa = std::isfinite(phi_a);
  const bool fb = std::isfinite(phi_b);
  if (!fa && !fb) return kInf;
  const Vec2 w0 = v - b;
  const Vec2 e = b - a;
  const double A = e.dot(M * e);
  const double B = e.dot(M * w0);
  const double C = w0.dot(M * w0);
  double best = kInf;
  if (fb) best = std::min(best, phi_b + std::sqrt(std::max(C, 0.0)));
  if (fa) best = std::min(best, phi_a + std::sqrt(std::max(A + 2.0 * B + C, 0.0)));
  if (fa && fb) {
    const double delta = phi_a - phi_b;
    const double denom = A - delta * delta;
    if (denom > 0.0) {
      const double K = std::max(A * C - B * B, 0.0);
      const double lambda = (-B - delta * std::sqrt(K / denom)) / A;
      if (lambda > 0.0 && lambda < 1.0) {
        const double q = A * lambda * lambda + 2.0 * B * lambda + C;
        best = std::min(best, phi_b + lambda * delta + std::sqrt(std::max(q, 0.0)));
      }
    }
  }
  return best;
}

}  // namespace

Frame triangle_basis(const TriMesh& mesh, int tri) {
  const auto& t = mesh.triangles().at(tri);
  const auto& V = mesh.vertices();
  const Vec3 n = mesh.face_normal(tri);
  const Vec3 e1 = (V[t[1]] - V[t[0]]).normalized();
  Frame E;
  E.col(0) = e1;
  E.col(1) = n.cross(e1);
  return E;
}

TriangleMetric metric_from_tensor(const TriMesh& mesh, int tri, const ConductivityTensor& D) {
  const Frame E = triangle_basis(mesh, tri);
  Mat2 D2 = E.transpose() * D * E;
  D2 = 0.5 * (D2 + D2.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat2> es(D2);
  if (!(es.eigenvalues().minCoeff() >= 1e-10)) {
    fail(ErrorKind::Invalid, "triangle " + std::to_string(tri) + ": tangential conductivity block is near-singular");
  }
  Mat2 M = D2.inverse();
  return 0.5 * (M + M.transpose());
}

std::vector<TriangleMetric> metrics_from_conductivity(const TriMesh& mesh, const FrameField& frames,
                                                      const std::vector<ConductivityVector>& d) {
  if (d.size() != mesh.vertex_count()) fail(ErrorKind::Invalid, "one conductivity vector per vertex required");
  std::vector<TriangleMetric> metrics;
  metrics.reserve(mesh.triangle_count());
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const ConductivityVector mean = (d[tri[0]] + d[tri[1]] + d[tri[2]]) / 3.0;
    SurfacePoint sp;
    sp.triangle = static_cast<int>(t);
    sp.barycentric = Vec3::Constant(1.0 / 3.0);
    const Frame P = frame_at(mesh, frames, sp);
    metrics.push_back(metric_from_tensor(mesh, static_cast<int>(t), assemble_tensor(mean, P)));
  }
  return metrics;
}

double default_source_radius(const TriMesh& mesh) {
  if (mesh.vertex_count() == 0) return 0.0;
  Vec3 lo = mesh.vertices().front();
  Vec3 hi = lo;
  for (const auto& v : mesh.vertices()) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return 0.03 * (hi - lo).norm();
}

namespace {

// One connected source: FIM from its seed vertices.
EikonalSolution solve_source(const TriMesh& mesh, const std::vector<TriangleMetric>& metrics,
                             const std::vector<LocalTriangle>& local, const SeedSet& seeds,
                             const EikonalOptions& options) {
  const double tolerance = options.tolerance;
  const auto nv = static_cast<int>(mesh.vertex_count());
  EikonalSolution sol;
  sol.phi.assign(static_cast<std::size_t>(nv), kInf);
  std::vector<char> is_seed(static_cast<std::size_t>(nv), 0);
  for (const auto& [v, t0] : seeds) {
    sol.phi[v] = std::min(sol.phi[v], t0);
    is_seed[v] = 1;
  }

  // Near a point source the wavefront curvature is large and linear
  // interpolation loses accuracy; start from the local closed form instead.
  const double radius = options.source_radius < 0.0 ? default_source_radius(mesh) : options.source_radius;
  if (radius > 0.0) {
    std::vector<int> stamp(static_cast<std::size_t>(nv), -1);
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto [sv, t0] = seeds[s];
      const Vec3& xs = mesh.vertices()[sv];
      Mat3 G = Mat3::Zero();
      for (int t : mesh.vertex_triangles()[sv]) {
        const Frame E = triangle_basis(mesh, t);
        G += E * metrics[t] * E.transpose();
      }
      G /= static_cast<double>(std::max<std::size_t>(1, mesh.vertex_triangles()[sv].size()));
      std::vector<int> stack = {sv};
      stamp[sv] = static_cast<int>(s);
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        const Vec3 r = mesh.vertices()[v] - xs;
        if (!is_seed[v]) sol.phi[v] = std::min(sol.phi[v], t0 + std::sqrt(std::max(r.dot(G * r), 0.0)));
        for (int u : mesh.neighbors()[v]) {
          if (stamp[u] == static_cast<int>(s) || (mesh.vertices()[u] - xs).norm() >= radius) continue;
          stamp[u] = static_cast<int>(s);
          stack.push_back(u);
        }
      }
    }
  }

  auto update = [&](int v) {
    double best = kInf;
    for (int t : mesh.vertex_triangles()[v]) {
      const auto& tri = mesh.triangles()[t];
      int k = 0;
      while (tri[k] != v) ++k;
      const int ia = (k + 1) % 3;
      const int ib = (k + 2) % 3;
      const auto& p = local[t].p;
      best = std::min(best, local_solve(p[k], p[ia], p[ib], sol.phi[tri[ia]], sol.phi[tri[ib]], metrics[t]));
    }
    ++sol.updates;
    return best;
  };

  std::vector<char> active(static_cast<std::size_t>(nv), 0);
  std::vector<int> list;
  for (int v = 0; v < nv; ++v) {
    if (!std::isfinite(sol.phi[v])) continue;
    for (int u : mesh.neighbors()[v]) {
      if (!is_seed[u] && !active[u]) {
        active[u] = 1;
        list.push_back(u);
      }
    }
  }
  std::sort(list.begin(), list.end());

  std::vector<int> next;
  while (!list.empty()) {
    next.clear();
    for (int v : list) {
      const double p = sol.phi[v];
      const double q = update(v);
      if (q < p) sol.phi[v] = q;
      if (!(p - q > tolerance)) {
        // Converged: wake up neighbours that can improve.
        active[v] = 0;
        for (int u : mesh.neighbors()[v]) {
          if (is_seed[u] || active[u]) continue;
          const double qu = update(u);
          if (qu < sol.phi[u] - tolerance) {
            sol.phi[u] = qu;
            active[u] = 1;
            next.push_back(u);
          }
        }
      } else {
        next.push_back(v);
      }
    }
    list.swap(next);
  }

  return sol;
}

}  // namespace

EikonalSolution solve_eikonal(const TriMesh& mesh, const std::vector<TriangleMetric>& metrics, const SeedSet& seeds,
                              const EikonalOptions& options) {
  const auto nv = static_cast<int>(mesh.vertex_count());
  if (metrics.size() != mesh.triangle_count()) fail(ErrorKind::Invalid, "one metric per triangle required");
  if (seeds.empty()) fail(ErrorKind::Invalid, "eikonal solve needs at least one seed");
  std::vector<int> group(static_cast<std::size_t>(nv), -1);
  for (const auto& [v, t0] : seeds) {
    if (v < 0 || v >= nv) fail(ErrorKind::Invalid, "seed vertex " + std::to_string(v) + " out of range");
    if (!std::isfinite(t0)) fail(ErrorKind::Invalid, "seed time must be finite");
    group[v] = -2;
  }

  std::vector<LocalTriangle> local(mesh.triangle_count());
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const Frame E = triangle_basis(mesh, static_cast<int>(t));
    const auto& tri = mesh.triangles()[t];
    const Vec3& origin = mesh.vertices()[tri[0]];
    for (int k = 0; k < 3; ++k) local[t].p[k] = E.transpose() * (mesh.vertices()[tri[k]] - origin);
  }

  // Adjacent seed vertices form one source. Separate sources are solved
  // independently and combined by the pointwise minimum: a joint solve would
  // let a triangle interpolate between two unrelated fronts.
  int groups = 0;
  for (const auto& [v0, t0] : seeds) {
    if (group[v0] != -2) continue;
    std::vector<int> stack = {v0};
    group[v0] = groups;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int u : mesh.neighbors()[v]) {
        if (group[u] == -2) {
          group[u] = groups;
          stack.push_back(u);
        }
      }
    }
    ++groups;
  }

  EikonalSolution sol;
  for (int g = 0; g < groups; ++g) {
    SeedSet part;
    for (const auto& s : seeds)
      if (group[s.first] == g) part.push_back(s);
    EikonalSolution one = solve_source(mesh, metrics, local, part, options);
    if (g == 0) {
      sol.phi = std::move(one.phi);
    } else {
      for (int v = 0; v < nv; ++v) sol.phi[v] = std::min(sol.phi[v], one.phi[v]);
    }
    sol.updates += one.updates;
  }
  if (groups > 1) {
    for (const auto& [v, t0] : seeds) sol.phi[v] = t0;
    for (const auto& [v, t0] : seeds) sol.phi[v] = std::min(sol.phi[v], t0);
  }

  for (int v = 0; v < nv; ++v)
    if (!std::isfinite(sol.phi[v])) sol.unreachable.push_back(v);
  return sol;
}

double analytic_planar(const Mat2& D2, const Vec2& source, const Vec2& x, double t0) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (D2 + D2.transpose()));
  if (!(es.eigenvalues().minCoeff() > 0.0)) fail(ErrorKind::Invalid, "analytic_planar needs an SPD tensor");
  const Vec2 r = x - source;
  return t0 + std::sqrt(r.dot(D2.inverse() * r));
}

}  // namespace fiberpinn

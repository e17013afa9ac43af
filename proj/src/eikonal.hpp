#pragma once

#include <utility>
#include <vector>

#include "conductivity.hpp"
#include "frames.hpp"
#include "mesh.hpp"

namespace fiberpinn {

// (vertex, initial time in ms)
using SeedSet = std::vector<std::pair<int, double>>;

// Travel-time metric of one triangle in its local orthonormal basis
// (e1 along the first edge, e2 = n x e1), ms^2/mm^2.
using TriangleMetric = Mat2;

// Orthonormal in-plane basis of a triangle, as columns.
Frame triangle_basis(const TriMesh& mesh, int tri);

// Inverse of D restricted to the triangle plane.
TriangleMetric metric_from_tensor(const TriMesh& mesh, int tri, const ConductivityTensor& D);

// Per-triangle metrics from per-vertex conductivity vectors: the three vertex
// vectors are averaged and assembled with the frame at the centroid.
std::vector<TriangleMetric> metrics_from_conductivity(const TriMesh& mesh, const FrameField& frames,
                                                      const std::vector<ConductivityVector>& d);

struct EikonalSolution {
  std::vector<double> phi;      // ms, +inf where unreachable
  std::vector<int> unreachable;
  long updates = 0;
};

struct EikonalOptions {
  // Convergence threshold of the active list, ms.
  double tolerance = 1e-9;
  // Point-source treatment: vertices within this distance (mm) of a seed
  // start from the seed's local constant-metric distance. Negative selects
  // 3% of the bounding-box diagonal; 0 disables it.
  double source_radius = -1.0;
};

// Fast iterative method: active-list fixed point of the per-triangle local
// solver, iterated until no vertex changes by more than the tolerance.
EikonalSolution solve_eikonal(const TriMesh& mesh, const std::vector<TriangleMetric>& metrics, const SeedSet& seeds,
                              const EikonalOptions& options = {});

double default_source_radius(const TriMesh& mesh);

// t0 + sqrt((x - s) . D2^-1 (x - s)): exact solution for constant D on the plane.
double analytic_planar(const Mat2& D2, const Vec2& source, const Vec2& x, double t0);

}  // namespace fiberpinn

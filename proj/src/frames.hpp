#pragma once

#include <vector>

#include "mesh.hpp"

namespace fiberpinn {

// Per-vertex orthonormal tangent basis (t1, t2) with normal n = t1 x t2.
struct FrameField {
  std::vector<Vec3> t1;
  std::vector<Vec3> t2;
  std::vector<Vec3> normal;
  int smoothing_iters = 0;
  // Vertices where the seed direction was (nearly) normal and an arbitrary
  // tangent was used as the starting value.
  std::vector<int> fallback_vertices;

  Frame at_vertex(int v) const {
    Frame P;
    P.col(0) = t1[v];
    P.col(1) = t2[v];
    return P;
  }
};

struct FrameSettings {
  int smoothing_iters = 100;
  int seed_vertex = 0;
  Vec3 seed_direction = Vec3::UnitX();
};

// Smooth tangent frames: the seed direction is projected onto every tangent
// plane, then Jacobi-smoothed by one-ring averaging.
FrameField build_frames(const TriMesh& mesh, const FrameSettings& settings = {});

// Barycentric interpolation of the vertex frames, re-orthonormalized.
Frame frame_at(const TriMesh& mesh, const FrameField& frames, const SurfacePoint& sp);

// Mean angle (degrees) between t1 at v and t1 at each neighbour projected
// into v's tangent plane, over all directed edges.
double mean_adjacent_frame_angle(const TriMesh& mesh, const FrameField& frames);

}  // namespace fiberpinn

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "conductivity.hpp"
#include "mesh.hpp"
#include "mlp.hpp"

namespace fiberpinn {

// x_hat = (x - center) / scale: zero mean, max absolute extent 1 on the mesh.
struct InputNormalization {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& x) const { return (x - center) / scale; }
  static InputNormalization from_mesh(const TriMesh& mesh);
  bool matches(const InputNormalization& other, double tol = 1e-9) const;
};

// phi(x) = offset + scale * phi_net(x_hat). Keeps the network output O(1)
// for activation maps spanning tens to hundreds of milliseconds.
struct TimeScaling {
  double offset = 0.0;
  double scale = 1.0;

  static TimeScaling from_times(const std::vector<double>& times);
};

// Both networks plus everything needed to evaluate them in mm / ms units.
struct PinnModel {
  NetParams phi;
  NetParams d;
  double d_max = 5.0;
  InputNormalization input;
  TimeScaling time;
  NormalEigenvalue normal_eigenvalue = NormalEigenvalue::Zero;

  double phi_at(const Vec3& x) const;
  Vec3 grad_phi(const Vec3& x) const;          // ms/mm
  ConductivityVector d_at(const Vec3& x) const;
  Mat3 grad_d(const Vec3& x) const;            // row c = gradient of d_c, 1/mm

  std::vector<double> phi_batch(const std::vector<Vec3>& xs) const;
  std::vector<ConductivityVector> d_batch(const std::vector<Vec3>& xs) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary checkpoint: magic "FPCK", version, both network specs, input
// normalization, time scaling, d_max, normal mode, then both flat parameter
// vectors as little-endian float64.
void save_checkpoint(const std::filesystem::path& path, const PinnModel& model);
PinnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace fiberpinn

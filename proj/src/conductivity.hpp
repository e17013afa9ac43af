#pragma once

#include "mesh.hpp"

namespace fiberpinn {

// Log-scale tensor parameters (d1, d2, d3) = entries of the symmetric 2x2
// matrix [[d1, d2], [d2, d3]].
using ConductivityVector = Eigen::Vector3d;
// 3x3 symmetric tensor in mm^2/ms^2.
using ConductivityTensor = Mat3;

// Eigenvalue assigned to the surface normal direction.
enum class NormalEigenvalue { Zero, One };

// Closed-form exponential of [[a, b], [b, c]].
Mat2 expm2(double a, double b, double c);
// Closed-form logarithm of a symmetric positive-definite 2x2 matrix.
Mat2 logm2(const Mat2& m);

inline Mat2 sym2(const ConductivityVector& d) {
  Mat2 m;
  m << d[0], d[1], d[1], d[2];
  return m;
}

// Derivatives of q = a^T expm2(d) a with respect to (d1, d2, d3).
struct QuadraticFormGrad {
  double value = 0.0;
  Eigen::Vector3d d_grad = Eigen::Vector3d::Zero();
  Vec2 a_grad = Vec2::Zero();
};
QuadraticFormGrad expm2_quadratic_form(const ConductivityVector& d, const Vec2& a);

// Throws if the columns of P deviate from orthonormality by more than 1e-8.
void check_frame(const Frame& P);

ConductivityTensor assemble_tensor(const ConductivityVector& d, const Frame& P,
                                   NormalEigenvalue normal = NormalEigenvalue::Zero);

struct FiberDirection {
  Vec3 direction = Vec3::UnitX();
  bool isotropic = false;
};

// Leading eigenvector of [[d1, d2], [d2, d3]] mapped through P, sign fixed so
// the first nonzero component is positive.
FiberDirection fiber_direction(const ConductivityVector& d, const Frame& P);

// Front speed sqrt(v.Dv)/|v| along v.
double speed_along(const ConductivityTensor& D, const Vec3& v);

// Inverse of the parametrization for a fiber at `angle` (radians, measured
// from the first frame axis) with longitudinal/transverse speeds.
ConductivityVector conductivity_from_fiber(double angle, double speed_long, double speed_trans);

}  // namespace fiberpinn

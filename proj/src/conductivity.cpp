#include "conductivity.hpp"

#include <cmath>

#include "error.hpp"

namespace fiberpinn {

namespace {

// sinh(r)/r
double sinhc(double r) {
  if (std::abs(r) < 1e-4) return 1.0 + r * r / 6.0 + r * r * r * r / 120.0;
  return std::sinh(r) / r;
}

// (r cosh r - sinh r) / r^3, the derivative of sinhc divided by r.
double sinhc_prime_over_r(double r) {
  if (std::abs(r) < 1e-2) {
    const double r2 = r * r;
    return 1.0 / 3.0 + r2 / 30.0 + r2 * r2 / 840.0 + r2 * r2 * r2 / 45360.0;
  }
  return (r * std::cosh(r) - std::sinh(r)) / (r * r * r);
}

bool is_first_nonzero_negative(const Vec3& v) {
  for (int k = 0; k < 3; ++k) {
    if (std::abs(v[k]) > 1e-12) return v[k] < 0.0;
  }
  return false;
}

}  // namespace

Mat2 expm2(double a, double b, double c) {
  // A = m I + B with B traceless; B^2 = r^2 I, so exp(A) = e^m (cosh r I + sinh(r)/r B).
  const double m = 0.5 * (a + c);
  const double p = 0.5 * (a - c);
  const double r = std::hypot(p, b);
  const double em = std::exp(m);
  const double ch = std::cosh(r);
  const double s = sinhc(r);
  Mat2 out;
  out << em * (ch + s * p), em * s * b, em * s * b, em * (ch - s * p);
  return out;
}

Mat2 logm2(const Mat2& mat) {
  const double a = mat(0, 0);
  const double c = mat(1, 1);
  const double b = 0.5 * (mat(0, 1) + mat(1, 0));
  const double m = 0.5 * (a + c);
  const double p = 0.5 * (a - c);
  const double r = std::hypot(p, b);
  const double hi = m + r;
  const double lo = m - r;
  if (!(lo > 0.0)) fail(ErrorKind::Invalid, "matrix logarithm of a non positive-definite matrix");
  const double log_mean = 0.5 * (std::log(hi) + std::log(lo));
  // 0.5 * log(hi/lo) / r, computed stably for nearly isotropic input.
  const double scale = r > 1e-12 * m ? 0.5 * std::log1p(2.0 * r / lo) / r : 1.0 / m;
  Mat2 out;
  out << log_mean + scale * p, scale * b, scale * b, log_mean - scale * p;
  return out;
}

QuadraticFormGrad expm2_quadratic_form(const ConductivityVector& d, const Vec2& a) {
  const double m = 0.5 * (d[0] + d[2]);
  const double p = 0.5 * (d[0] - d[2]);
  const double b = d[1];
  const double r = std::hypot(p, b);
  const double em = std::exp(m);
  const double ch = std::cosh(r);
  const double s = sinhc(r);
  const double t = sinhc_prime_over_r(r);

  const double aa = a.squaredNorm();
  const double diff = a[0] * a[0] - a[1] * a[1];
  const double cross = 2.0 * a[0] * a[1];
  const double aba = p * diff + b * cross;

  QuadraticFormGrad g;
  g.value = em * (ch * aa + s * aba);
  // d cosh(r)/dp = sinhc(r) p, d sinhc(r)/dp = t p (same with b).
  const double dq_dp = em * (s * p * aa + t * p * aba + s * diff);
  const double dq_db = em * (s * b * aa + t * b * aba + s * cross);
  g.d_grad[0] = 0.5 * g.value + 0.5 * dq_dp;
  g.d_grad[1] = dq_db;
  g.d_grad[2] = 0.5 * g.value - 0.5 * dq_dp;

  Mat2 E;
  E << em * (ch + s * p), em * s * b, em * s * b, em * (ch - s * p);
  g.a_grad = 2.0 * E * a;
  return g;
}

void check_frame(const Frame& P) {
  const Mat2 gram = P.transpose() * P;
  const double dev = (gram - Mat2::Identity()).cwiseAbs().maxCoeff();
  if (!(dev <= 1e-8)) {
    fail(ErrorKind::Invalid, "frame columns are not orthonormal (Gram deviation " + std::to_string(dev) + ")");
  }
}

ConductivityTensor assemble_tensor(const ConductivityVector& d, const Frame& P, NormalEigenvalue normal) {
  check_frame(P);
  const Mat2 E = expm2(d[0], d[1], d[2]);
  ConductivityTensor D = P * E * P.transpose();
  D = 0.5 * (D + D.transpose()).eval();
  if (normal == NormalEigenvalue::One) {
    const Vec3 n = P.col(0).cross(P.col(1));
    D += n * n.transpose();
  }
  return D;
}

FiberDirection fiber_direction(const ConductivityVector& d, const Frame& P) {
  check_frame(P);
  FiberDirection out;
  const double p = 0.5 * (d[0] - d[2]);
  const double b = d[1];
  // Eigenvalue gap is 2r.
  if (2.0 * std::hypot(p, b) <= 1e-12) {
    out.isotropic = true;
    out.direction = P.col(0);
  } else {
    const double theta = 0.5 * std::atan2(2.0 * b, d[0] - d[2]);
    const Vec2 v(std::cos(theta), std::sin(theta));
    out.direction = (P * v).normalized();
  }
  if (is_first_nonzero_negative(out.direction)) out.direction = -out.direction;
  return out;
}

double speed_along(const ConductivityTensor& D, const Vec3& v) {
  const double len = v.norm();
  if (!(len > 0.0)) fail(ErrorKind::Invalid, "speed along a zero vector");
  return std::sqrt(std::max(v.dot(D * v), 0.0)) / len;
}

ConductivityVector conductivity_from_fiber(double angle, double speed_long, double speed_trans) {
  if (!(speed_long > 0.0) || !(speed_trans > 0.0)) fail(ErrorKind::Invalid, "speeds must be positive");
  Eigen::Rotation2Dd R(angle);
  const Mat2 Rm = R.toRotationMatrix();
  const Mat2 D2 = Rm * Vec2(speed_long * speed_long, speed_trans * speed_trans).asDiagonal() * Rm.transpose();
  const Mat2 L = logm2(D2);
  return {L(0, 0), 0.5 * (L(0, 1) + L(1, 0)), L(1, 1)};
}

}  // namespace fiberpinn

#pragma once

// Scalar reverse-mode differentiation on a tape, used to differentiate
// losses that contain network input-gradients with respect to the network
// parameters. Only the primitives declared here exist; a loss written with
// anything else does not compile.

#include <array>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mlp.hpp"

namespace fiberpinn::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT: constants mix freely

  double value() const { return value_; }
  bool is_constant() const { return index_ < 0; }
  Tape* tape() const { return tape_; }
  int index() const { return index_; }

 private:
  friend class Tape;
  Var(Tape* tape, int index, double value) : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  int index_ = -1;
  double value_ = 0.0;
};

class Tape {
 public:
  Var variable(double value);
  std::size_t size() const { return nodes_.size(); }

  // Adjoints of every recorded node for d(out)/d(node).
  std::vector<double> adjoints(const Var& out) const;
  double adjoint_of(const std::vector<double>& adjoints, const Var& v) const;

  // Records out = f(a, b) with local partials.
  Var record(double value, const Var& a, double da, const Var& b = Var(), double db = 0.0);

 private:
  struct Node {
    int a;
    int b;
    double da;
    double db;
  };
  std::vector<Node> nodes_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator-(const Var& a);
Var& operator+=(Var& a, const Var& b);

Var square(const Var& a);
Var sqrt(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
// max(a, c) for a constant c.
Var max(const Var& a, double c);
// cosh(sqrt(u)) and sinh(sqrt(u))/sqrt(u): smooth in u >= 0, used by the 2x2
// matrix exponential.
Var cosh_sqrt(const Var& u);
Var sinhc_sqrt(const Var& u);
// Huber function of the Frobenius norm of the entries.
Var huber(std::span<const Var> x, double delta);
Var sum(std::span<const Var> xs);

// Network evaluated on tape variables.
class VarNet {
 public:
  VarNet(const MLPSpec& spec, std::span<const Var> theta);

  const MLPSpec& spec() const { return spec_; }
  std::span<const Var> theta() const { return theta_; }

  std::vector<Var> forward(const Eigen::Vector3d& x) const;
  // Output values and Jacobian rows (output x 3).
  std::pair<std::vector<Var>, std::vector<std::array<Var, 3>>> forward_with_jacobian(
      const Eigen::Vector3d& x) const;

 private:
  MLPSpec spec_;
  std::span<const Var> theta_;
  std::vector<std::size_t> offsets_;
};

// Handed to a loss closure: both networks bound to tape variables.
class LossContext {
 public:
  LossContext(Tape& tape, VarNet phi, VarNet d) : tape_(tape), phi_(std::move(phi)), d_(std::move(d)) {}

  Tape& tape() { return tape_; }
  const VarNet& phi_net() const { return phi_; }
  const VarNet& d_net() const { return d_; }

  Var eval_phi(const Eigen::Vector3d& x) const;
  std::array<Var, 3> eval_d(const Eigen::Vector3d& x, double d_max) const;
  std::array<Var, 3> phi_input_gradient(const Eigen::Vector3d& x) const;
  // Row c holds the gradient of component c of d = d_max * tanh(raw).
  std::array<std::array<Var, 3>, 3> d_input_gradient(const Eigen::Vector3d& x, double d_max) const;

 private:
  Tape& tape_;
  VarNet phi_;
  VarNet d_;
};

struct ParamGradient {
  double value = 0.0;
  Eigen::VectorXd phi;
  Eigen::VectorXd d;
};

using LossClosure = std::function<Var(LossContext&)>;

ParamGradient param_gradient(const LossClosure& loss, const NetParams& phi, const NetParams& d);

}  // namespace fiberpinn::ad

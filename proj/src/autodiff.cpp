#include "autodiff.hpp"

#include <cmath>

#include "error.hpp"

namespace fiberpinn::ad {

namespace {

Tape* tape_of(const Var& a, const Var& b) {
  Tape* t = a.tape() ? a.tape() : b.tape();
  if (a.tape() && b.tape() && a.tape() != b.tape()) {
    fail(ErrorKind::Invalid, "variables from different tapes combined");
  }
  return t;
}

double sinhc(double r) {
  if (r < 1e-4) return 1.0 + r * r / 6.0;
  return std::sinh(r) / r;
}

double sinhc_prime_over_r(double r) {
  if (r < 1e-2) {
    const double r2 = r * r;
    return 1.0 / 3.0 + r2 / 30.0 + r2 * r2 / 840.0 + r2 * r2 * r2 / 45360.0;
  }
  return (r * std::cosh(r) - std::sinh(r)) / (r * r * r);
}

}  // namespace

Var Tape::variable(double value) {
  nodes_.push_back({-1, -1, 0.0, 0.0});
  return Var(this, static_cast<int>(nodes_.size()) - 1, value);
}

Var Tape::record(double value, const Var& a, double da, const Var& b, double db) {
  if (a.is_constant() && b.is_constant()) return Var(value);
  nodes_.push_back({a.index(), b.index(), da, db});
  return Var(this, static_cast<int>(nodes_.size()) - 1, value);
}

std::vector<double> Tape::adjoints(const Var& out) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  if (out.is_constant()) return adj;
  if (out.tape() != this) fail(ErrorKind::Invalid, "output variable belongs to another tape");
  adj[static_cast<std::size_t>(out.index())] = 1.0;
  for (auto i = static_cast<std::ptrdiff_t>(out.index()); i >= 0; --i) {
    const double g = adj[static_cast<std::size_t>(i)];
    if (g == 0.0) continue;
    const Node& node = nodes_[static_cast<std::size_t>(i)];
    if (node.a >= 0) adj[static_cast<std::size_t>(node.a)] += node.da * g;
    if (node.b >= 0) adj[static_cast<std::size_t>(node.b)] += node.db * g;
  }
  return adj;
}

double Tape::adjoint_of(const std::vector<double>& adjoints, const Var& v) const {
  return v.is_constant() ? 0.0 : adjoints[static_cast<std::size_t>(v.index())];
}

Var operator+(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  return t ? t->record(a.value() + b.value(), a, 1.0, b, 1.0) : Var(a.value() + b.value());
}

Var operator-(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  return t ? t->record(a.value() - b.value(), a, 1.0, b, -1.0) : Var(a.value() - b.value());
}

Var operator*(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  return t ? t->record(a.value() * b.value(), a, b.value(), b, a.value()) : Var(a.value() * b.value());
}

Var operator-(const Var& a) { return a.tape() ? a.tape()->record(-a.value(), a, -1.0) : Var(-a.value()); }

Var& operator+=(Var& a, const Var& b) {
  a = a + b;
  return a;
}

Var square(const Var& a) {
  const double v = a.value();
  return a.tape() ? a.tape()->record(v * v, a, 2.0 * v) : Var(v * v);
}

Var sqrt(const Var& a) {
  const double s = std::sqrt(a.value());
  if (!a.tape()) return Var(s);
  if (!(s > 0.0)) fail(ErrorKind::Numeric, "sqrt of a nonpositive tape variable is not differentiable");
  return a.tape()->record(s, a, 0.5 / s);
}

Var tanh(const Var& a) {
  const double y = std::tanh(a.value());
  return a.tape() ? a.tape()->record(y, a, 1.0 - y * y) : Var(y);
}

Var exp(const Var& a) {
  const double y = std::exp(a.value());
  return a.tape() ? a.tape()->record(y, a, y) : Var(y);
}

Var max(const Var& a, double c) {
  if (a.value() > c) return a;
  return Var(c);
}

Var cosh_sqrt(const Var& u) {
  const double r = std::sqrt(std::max(u.value(), 0.0));
  const double y = std::cosh(r);
  return u.tape() ? u.tape()->record(y, u, 0.5 * sinhc(r)) : Var(y);
}

Var sinhc_sqrt(const Var& u) {
  const double r = std::sqrt(std::max(u.value(), 0.0));
  const double y = sinhc(r);
  return u.tape() ? u.tape()->record(y, u, 0.5 * sinhc_prime_over_r(r)) : Var(y);
}

Var huber(std::span<const Var> x, double delta) {
  Var sq(0.0);
  for (const Var& v : x) sq += square(v);
  if (sq.value() <= delta * delta) return sq * Var(0.5 / delta);
  return sqrt(sq) - Var(0.5 * delta);
}

Var sum(std::span<const Var> xs) {
  Var s(0.0);
  for (const Var& v : xs) s += v;
  return s;
}

VarNet::VarNet(const MLPSpec& spec, std::span<const Var> theta) : spec_(spec), theta_(theta) {
  if (theta.size() != spec.param_count()) fail(ErrorKind::Invalid, "tape parameters do not match the spec");
  std::size_t off = 0;
  for (int l = 0; l < spec.layer_count(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(spec.fan_in(l) * spec.fan_out(l) + spec.fan_out(l));
  }
}

std::vector<Var> VarNet::forward(const Eigen::Vector3d& x) const {
  return forward_with_jacobian(x).first;
}

std::pair<std::vector<Var>, std::vector<std::array<Var, 3>>> VarNet::forward_with_jacobian(
    const Eigen::Vector3d& x) const {
  std::vector<Var> h{Var(x[0]), Var(x[1]), Var(x[2])};
  // Forward-mode tangents written in tape arithmetic: dh[i][k] = d h_i / d x_k.
  std::vector<std::array<Var, 3>> dh(3);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) dh[i][k] = Var(i == k ? 1.0 : 0.0);

  for (int l = 0; l < spec_.layer_count(); ++l) {
    const int in = spec_.fan_in(l);
    const int out = spec_.fan_out(l);
    const std::size_t w0 = offsets_[l];
    const std::size_t b0 = w0 + static_cast<std::size_t>(in * out);
    std::vector<Var> z(out);
    std::vector<std::array<Var, 3>> dz(out);
    for (int i = 0; i < out; ++i) {
      Var acc = theta_[b0 + i];
      std::array<Var, 3> dacc{Var(0.0), Var(0.0), Var(0.0)};
      for (int j = 0; j < in; ++j) {
        const Var& w = theta_[w0 + static_cast<std::size_t>(j * out + i)];
        acc += w * h[j];
        for (int k = 0; k < 3; ++k) dacc[k] += w * dh[j][k];
      }
      z[i] = acc;
      dz[i] = dacc;
    }
    if (spec_.tanh_after(l)) {
      for (int i = 0; i < out; ++i) {
        z[i] = tanh(z[i]);
        const Var s = Var(1.0) - square(z[i]);
        for (int k = 0; k < 3; ++k) dz[i][k] = s * dz[i][k];
      }
    }
    h = std::move(z);
    dh = std::move(dz);
  }
  return {std::move(h), std::move(dh)};
}

Var LossContext::eval_phi(const Eigen::Vector3d& x) const { return phi_.forward(x).at(0); }

std::array<Var, 3> LossContext::eval_d(const Eigen::Vector3d& x, double d_max) const {
  const auto y = d_.forward(x);
  std::array<Var, 3> out;
  for (int c = 0; c < 3; ++c) {
    const Var t = d_.spec().head == OutputHead::Tanh ? y.at(c) : tanh(y.at(c));
    out[c] = Var(d_max) * t;
  }
  return out;
}

std::array<Var, 3> LossContext::phi_input_gradient(const Eigen::Vector3d& x) const {
  return phi_.forward_with_jacobian(x).second.at(0);
}

std::array<std::array<Var, 3>, 3> LossContext::d_input_gradient(const Eigen::Vector3d& x, double d_max) const {
  auto [y, J] = d_.forward_with_jacobian(x);
  std::array<std::array<Var, 3>, 3> out;
  for (int c = 0; c < 3; ++c) {
    if (d_.spec().head == OutputHead::Tanh) {
      for (int k = 0; k < 3; ++k) out[c][k] = Var(d_max) * J.at(c)[k];
    } else {
      const Var s = Var(d_max) * (Var(1.0) - square(tanh(y.at(c))));
      for (int k = 0; k < 3; ++k) out[c][k] = s * J.at(c)[k];
    }
  }
  return out;
}

ParamGradient param_gradient(const LossClosure& loss, const NetParams& phi, const NetParams& d) {
  Tape tape;
  std::vector<Var> phi_vars;
  std::vector<Var> d_vars;
  phi_vars.reserve(static_cast<std::size_t>(phi.theta().size()));
  d_vars.reserve(static_cast<std::size_t>(d.theta().size()));
  for (Eigen::Index i = 0; i < phi.theta().size(); ++i) phi_vars.push_back(tape.variable(phi.theta()[i]));
  for (Eigen::Index i = 0; i < d.theta().size(); ++i) d_vars.push_back(tape.variable(d.theta()[i]));

  LossContext ctx(tape, VarNet(phi.spec(), phi_vars), VarNet(d.spec(), d_vars));
  const Var out = loss(ctx);
  const auto adj = tape.adjoints(out);

  ParamGradient g;
  g.value = out.value();
  g.phi.resize(phi.theta().size());
  g.d.resize(d.theta().size());
  for (std::size_t i = 0; i < phi_vars.size(); ++i) g.phi[static_cast<Eigen::Index>(i)] = tape.adjoint_of(adj, phi_vars[i]);
  for (std::size_t i = 0; i < d_vars.size(); ++i) g.d[static_cast<Eigen::Index>(i)] = tape.adjoint_of(adj, d_vars[i]);
  return g;
}

}  // namespace fiberpinn::ad

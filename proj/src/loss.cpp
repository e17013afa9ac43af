#include "loss.hpp"

#include <cmath>

#include "error.hpp"

namespace fiberpinn {

void LossWeights::validate() const {
  if (!(alpha_m >= 0.0) || !(alpha_theta >= 0.0) || !(alpha_d >= 0.0)) {
    fail(ErrorKind::Config, "loss weights alpha_m, alpha_theta, alpha_d must be nonnegative");
  }
  if (!(epsilon > 0.0)) fail(ErrorKind::Config, "loss epsilon must be positive");
  if (!(delta > 0.0)) fail(ErrorKind::Config, "loss delta must be positive");
}

void CollocationSet::validate() const {
  if (data_positions.empty()) fail(ErrorKind::Invalid, "empty data set");
  if (data_positions.size() != data_times.size()) fail(ErrorKind::Invalid, "data positions and times differ in length");
  if (positions.size() != frames.size()) fail(ErrorKind::Invalid, "collocation positions and frames differ in length");
}

double eikonal_residual(const Vec3& grad_phi, const ConductivityVector& d, const Frame& P, double epsilon,
                        NormalEigenvalue normal) {
  const ConductivityTensor D = assemble_tensor(d, P, normal);
  return std::sqrt(std::max(grad_phi.dot(D * grad_phi), epsilon)) - 1.0;
}

double model_residual(const PinnModel& model, const Vec3& x, const Frame& P, double epsilon) {
  return eikonal_residual(model.grad_phi(x), model.d_at(x), P, epsilon, model.normal_eigenvalue);
}

double huber(std::span<const double> x, double delta) {
  double sq = 0.0;
  for (double v : x) sq += v * v;
  if (sq <= delta * delta) return sq / (2.0 * delta);
  return std::sqrt(sq) - 0.5 * delta;
}

std::vector<double> huber_gradient(std::span<const double> x, double delta) {
  double sq = 0.0;
  for (double v : x) sq += v * v;
  const double scale = sq <= delta * delta ? 1.0 / delta : 1.0 / std::sqrt(sq);
  std::vector<double> g(x.begin(), x.end());
  for (double& v : g) v *= scale;
  return g;
}

LossEvaluation total_loss(const PinnModel& model, const CollocationSet& colloc, const LossWeights& w,
                          std::span<const int> model_subset, LossWorkspace* workspace) {
  colloc.validate();
  LossWorkspace local;
  LossWorkspace& ws = workspace ? *workspace : local;
  const double ts = model.time.scale;
  const double xs = model.input.scale;
  const double dmax = model.d_max;
  const bool d_squash = model.d.spec().head == OutputHead::Linear;

  LossEvaluation ev;
  ev.grad_phi = Eigen::VectorXd::Zero(model.phi.theta().size());
  ev.grad_d = Eigen::VectorXd::Zero(model.d.theta().size());

  // Data fidelity.
  {
    const int n = static_cast<int>(colloc.data_positions.size());
    Eigen::Matrix3Xd& X = ws.data_x;
    X.resize(3, n);
    for (int j = 0; j < n; ++j) X.col(j) = model.input.apply(colloc.data_positions[j]);
    BatchPass& pass = ws.data_pass;
    forward_batch(model.phi, X, false, pass);
    RowMatrix& adj = ws.data_adj;
    adj.resize(1, n);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      const double r = model.time.offset + ts * pass.value(0, j) - colloc.data_times[j];
      sum += r * r;
      adj(0, j) = 2.0 * r * ts / n;
    }
    ev.terms.data = sum / n;
    backward_batch(model.phi, pass, adj, ev.grad_phi);
  }

  // Eikonal residual and TV on the collocation points.
  std::vector<int> all;
  if (model_subset.empty()) {
    all.resize(colloc.positions.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    model_subset = all;
  }
  const int m = static_cast<int>(model_subset.size());
  if (m > 0 && (w.alpha_m > 0.0 || w.alpha_d > 0.0)) {
    Eigen::Matrix3Xd& X = ws.colloc_x;
    X.resize(3, m);
    for (int j = 0; j < m; ++j) X.col(j) = model.input.apply(colloc.positions.at(model_subset[j]));
    BatchPass& phi_pass = ws.phi_pass;
    BatchPass& d_pass = ws.d_pass;
    forward_batch(model.phi, X, true, phi_pass);
    forward_batch(model.d, X, true, d_pass);
    RowMatrix& phi_adj = ws.phi_adj;
    RowMatrix& d_adj = ws.d_adj;
    phi_adj.setZero(1, 4 * m);
    d_adj.setZero(3, 4 * m);

    double model_sum = 0.0;
    double tv_sum = 0.0;
    for (int j = 0; j < m; ++j) {
      const Frame& P = colloc.frames[model_subset[j]];
      Vec3 g;
      for (int k = 0; k < 3; ++k) g[k] = ts / xs * phi_pass.tangent(0, k, j);
      // d = d_max * y (tanh head) or d_max * tanh(y); ds/dy is the chain factor.
      ConductivityVector dv;
      Vec3 dd_dy;
      for (int c = 0; c < 3; ++c) {
        const double y = d_pass.value(c, j);
        if (d_squash) {
          const double t = std::tanh(y);
          dv[c] = dmax * t;
          dd_dy[c] = dmax * (1.0 - t * t);
        } else {
          dv[c] = dmax * y;
          dd_dy[c] = dmax;
        }
      }

      const Vec2 a = P.transpose() * g;
      const QuadraticFormGrad qf = expm2_quadratic_form(dv, a);
      double q = qf.value;
      Vec3 dq_dg = P * qf.a_grad;
      if (model.normal_eigenvalue == NormalEigenvalue::One) {
        const Vec3 nrm = P.col(0).cross(P.col(1));
        q += nrm.dot(g) * nrm.dot(g);
        dq_dg += 2.0 * nrm.dot(g) * nrm;
      }
      const double sq = std::sqrt(std::max(q, w.epsilon));
      const double R = sq - 1.0;
      model_sum += R * R;

      const double dR = w.alpha_m * 2.0 * R / m;
      const double dq = q > w.epsilon ? dR * 0.5 / sq : 0.0;
      for (int k = 0; k < 3; ++k) phi_adj(0, (k + 1) * m + j) += dq * dq_dg[k] * ts / xs;
      for (int c = 0; c < 3; ++c) d_adj(c, j) += dq * qf.d_grad[c] * dd_dy[c];

      // TV: G(c, k) = d d_c / d x_k in mm^-1.
      if (w.alpha_d > 0.0) {
        Mat3 G;
        for (int c = 0; c < 3; ++c)
          for (int k = 0; k < 3; ++k) G(c, k) = d_pass.tangent(c, k, j) / xs;
        double tanh_factor[3];
        for (int c = 0; c < 3; ++c) {
          // For a linear head, the tangent is of y; chain through d_max*tanh.
          tanh_factor[c] = d_squash ? dd_dy[c] : dmax;
          G.row(c) *= tanh_factor[c];
        }
        Mat3 proj = Mat3::Identity();
        if (w.tv_mode == TvMode::Tangent) proj = P * P.transpose();
        const Mat3 Gt = G * proj;
        const double h = huber(std::span<const double>(Gt.data(), 9), w.delta);
        tv_sum += h;
        const auto hg = huber_gradient(std::span<const double>(Gt.data(), 9), w.delta);
        const Mat3 Gt_bar = Eigen::Map<const Mat3>(hg.data()) * (w.alpha_d / m);
        const Mat3 G_bar = Gt_bar * proj.transpose();
        for (int c = 0; c < 3; ++c) {
          for (int k = 0; k < 3; ++k) {
            d_adj(c, (k + 1) * m + j) += G_bar(c, k) * tanh_factor[c] / xs;
          }
          if (d_squash) {
            // d(d_max(1 - tanh^2))/dy = -2 d_max tanh (1 - tanh^2)
            const double t = std::tanh(d_pass.value(c, j));
            double gdot = 0.0;
            for (int k = 0; k < 3; ++k) gdot += G_bar(c, k) * d_pass.tangent(c, k, j) / xs;
            d_adj(c, j) += gdot * (-2.0 * dmax * t * (1.0 - t * t));
          }
        }
      }
    }
    ev.terms.model = model_sum / m;
    ev.terms.tv = tv_sum / m;
    backward_batch(model.phi, phi_pass, phi_adj, ev.grad_phi);
    backward_batch(model.d, d_pass, d_adj, ev.grad_d);
  }

  ev.terms.weight = model.phi.theta().squaredNorm() + model.d.theta().squaredNorm();
  ev.grad_phi += 2.0 * w.alpha_theta * model.phi.theta();
  ev.grad_d += 2.0 * w.alpha_theta * model.d.theta();

  ev.terms.total = ev.terms.data + w.alpha_m * ev.terms.model + w.alpha_theta * ev.terms.weight +
                   w.alpha_d * ev.terms.tv;
  return ev;
}

ad::Var total_loss_tape(ad::LossContext& ctx, const PinnModel& model, const CollocationSet& colloc,
                        const LossWeights& w) {
  using ad::Var;
  colloc.validate();
  const double ts = model.time.scale;
  const double xs = model.input.scale;

  Var data(0.0);
  for (std::size_t i = 0; i < colloc.data_positions.size(); ++i) {
    const Var phi = Var(model.time.offset) + Var(ts) * ctx.eval_phi(model.input.apply(colloc.data_positions[i]));
    data += ad::square(phi - Var(colloc.data_times[i]));
  }
  data = data * Var(1.0 / static_cast<double>(colloc.data_positions.size()));

  Var model_term(0.0);
  Var tv(0.0);
  const auto m = colloc.positions.size();
  for (std::size_t j = 0; j < m; ++j) {
    const Vec3 xh = model.input.apply(colloc.positions[j]);
    const Frame& P = colloc.frames[j];
    const auto J = ctx.phi_input_gradient(xh);
    std::array<Var, 3> g;
    for (int k = 0; k < 3; ++k) g[k] = Var(ts / xs) * J[k];
    std::array<Var, 2> a;
    for (int c = 0; c < 2; ++c) a[c] = Var(P(0, c)) * g[0] + Var(P(1, c)) * g[1] + Var(P(2, c)) * g[2];

    const auto d = ctx.eval_d(xh, model.d_max);
    const Var mean = Var(0.5) * (d[0] + d[2]);
    const Var p = Var(0.5) * (d[0] - d[2]);
    const Var u = ad::square(p) + ad::square(d[1]);
    const Var aa = ad::square(a[0]) + ad::square(a[1]);
    const Var aba = p * (ad::square(a[0]) - ad::square(a[1])) + Var(2.0) * d[1] * a[0] * a[1];
    Var q = ad::exp(mean) * (ad::cosh_sqrt(u) * aa + ad::sinhc_sqrt(u) * aba);
    if (model.normal_eigenvalue == NormalEigenvalue::One) {
      const Vec3 n = P.col(0).cross(P.col(1));
      q += ad::square(Var(n[0]) * g[0] + Var(n[1]) * g[1] + Var(n[2]) * g[2]);
    }
    const Var R = ad::sqrt(ad::max(q, w.epsilon)) - Var(1.0);
    model_term += ad::square(R);

    const auto Gd = ctx.d_input_gradient(xh, model.d_max);
    std::array<Var, 9> G;
    Mat3 proj = Mat3::Identity();
    if (w.tv_mode == TvMode::Tangent) proj = P * P.transpose();
    for (int c = 0; c < 3; ++c) {
      for (int k = 0; k < 3; ++k) {
        Var acc(0.0);
        for (int l = 0; l < 3; ++l) acc += Var(proj(l, k) / xs) * Gd[c][l];
        G[static_cast<std::size_t>(c * 3 + k)] = acc;
      }
    }
    tv += ad::huber(G, w.delta);
  }
  const double inv_m = m > 0 ? 1.0 / static_cast<double>(m) : 0.0;

  Var weight(0.0);
  for (const Var& t : ctx.phi_net().theta()) weight += ad::square(t);
  for (const Var& t : ctx.d_net().theta()) weight += ad::square(t);

  return data + Var(w.alpha_m * inv_m) * model_term + Var(w.alpha_theta) * weight + Var(w.alpha_d * inv_m) * tv;
}

}  // namespace fiberpinn

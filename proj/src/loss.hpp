#pragma once

#include <span>
#include <vector>

#include "autodiff.hpp"
#include "model.hpp"

namespace fiberpinn {

enum class TvMode { World, Tangent };

struct LossWeights {
  double alpha_m = 1e4;
  double alpha_theta = 1e-4;
  double alpha_d = 1e-3;
  double epsilon = 1e-8;
  double delta = 5e-2;
  TvMode tv_mode = TvMode::World;

  void validate() const;
};

// Model/TV terms are evaluated on `positions` (mesh vertices) with their
// tangent frames; the data term on the measurement points.
struct CollocationSet {
  std::vector<Vec3> positions;
  std::vector<Frame> frames;
  std::vector<Vec3> data_positions;
  std::vector<double> data_times;

  void validate() const;
};

// Unweighted terms; total = data + alpha_m*model + alpha_theta*weight + alpha_d*tv.
struct LossTerms {
  double total = 0.0;
  double data = 0.0;    // mean squared misfit, ms^2
  double model = 0.0;   // mean squared eikonal residual
  double weight = 0.0;  // |theta_phi|^2 + |theta_d|^2
  double tv = 0.0;      // mean Huber TV of grad d
};

struct LossEvaluation {
  LossTerms terms;
  Eigen::VectorXd grad_phi;
  Eigen::VectorXd grad_d;
};

// sqrt(max(D g . g, eps)) - 1 for D assembled from d in frame P.
double eikonal_residual(const Vec3& grad_phi, const ConductivityVector& d, const Frame& P, double epsilon,
                        NormalEigenvalue normal = NormalEigenvalue::Zero);
double model_residual(const PinnModel& model, const Vec3& x, const Frame& P, double epsilon);

// Huber function of the Frobenius norm.
double huber(std::span<const double> x, double delta);
// Its gradient with respect to the entries.
std::vector<double> huber_gradient(std::span<const double> x, double delta);

// Buffers reused across total_loss calls; one per thread.
struct LossWorkspace {
  BatchPass data_pass;
  BatchPass phi_pass;
  BatchPass d_pass;
  RowMatrix data_adj;
  RowMatrix phi_adj;
  RowMatrix d_adj;
  Eigen::Matrix3Xd data_x;
  Eigen::Matrix3Xd colloc_x;
};

// Full loss and parameter gradients. `model_subset` restricts the model and
// TV terms to the listed collocation indices (empty = all).
LossEvaluation total_loss(const PinnModel& model, const CollocationSet& colloc, const LossWeights& w,
                          std::span<const int> model_subset = {}, LossWorkspace* workspace = nullptr);

// The same loss written with tape primitives; an independent route for
// checking total_loss gradients.
ad::Var total_loss_tape(ad::LossContext& ctx, const PinnModel& model, const CollocationSet& colloc,
                        const LossWeights& w);

}  // namespace fiberpinn

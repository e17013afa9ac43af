#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fiberpinn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class OutputHead { Linear, Tanh };

// Fully connected tanh network; the output layer is affine followed by the head.
struct MLPSpec {
  int input = 3;
  std::vector<int> hidden;
  int output = 1;
  OutputHead head = OutputHead::Linear;

  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  int fan_in(int layer) const { return layer == 0 ? input : hidden[layer - 1]; }
  int fan_out(int layer) const { return layer + 1 == layer_count() ? output : hidden[layer]; }
  bool tanh_after(int layer) const { return layer + 1 < layer_count() || head == OutputHead::Tanh; }
  std::size_t param_count() const;
  void validate() const;

  bool operator==(const MLPSpec&) const = default;
};

// The networks of the method: phi is 3 -> [20]x7 -> 1 (linear head),
// d is 3 -> [5]x5 -> 3 (tanh head, scaled by d_max outside the network).
MLPSpec phi_network_spec(int layers = 7, int width = 20);
MLPSpec d_network_spec(int layers = 5, int width = 5);

// Flat parameter vector. Layer l stores W (fan_out x fan_in, column-major)
// followed by its bias.
class NetParams {
 public:
  NetParams() = default;
  NetParams(MLPSpec spec, Eigen::VectorXd theta);

  const MLPSpec& spec() const { return spec_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  Eigen::VectorXd& theta() { return theta_; }

  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const {
    return offsets_[layer] + static_cast<std::size_t>(spec_.fan_in(layer) * spec_.fan_out(layer));
  }
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<Eigen::VectorXd> bias(int layer);

 private:
  MLPSpec spec_;
  Eigen::VectorXd theta_;
  std::vector<std::size_t> offsets_;
};

// Xavier/Glorot uniform weights, zero biases.
NetParams init_params(const MLPSpec& spec, std::uint64_t seed);

// Elementwise tanh, vectorized; within a few ulp of std::tanh.
void tanh_inplace(double* p, std::size_t n);

Eigen::VectorXd forward(const NetParams& params, const MLPSpec& spec, const Eigen::Vector3d& x);
double eval_phi(const NetParams& params, const Eigen::Vector3d& x);
Eigen::Vector3d eval_d(const NetParams& params, const Eigen::Vector3d& x, double d_max);
// Jacobian (output x 3) of forward with respect to x.
Eigen::MatrixXd input_gradient(const NetParams& params, const MLPSpec& spec, const Eigen::Vector3d& x);

// Batched evaluation with cached activations for the reverse sweep. Columns
// are points; with tangents each matrix is laid out [value | d/dx0 | d/dx1 | d/dx2].
struct BatchPass {
  int points = 0;
  bool tangents = false;
  std::vector<RowMatrix> inputs;  // input of each layer
  std::vector<RowMatrix> pre;     // pre-activation of each layer
  RowMatrix output;
  // Reverse-sweep buffers, kept so repeated passes reuse their storage.
  mutable RowMatrix adjoint_scratch;
  mutable RowMatrix zbar_scratch;

  int blocks() const { return tangents ? 4 : 1; }
  // Output value of component c at point j, and its derivative along x_k.
  double value(int c, int j) const { return output(c, j); }
  double tangent(int c, int k, int j) const { return output(c, (k + 1) * points + j); }
};

BatchPass forward_batch(const NetParams& params, const Eigen::Ref<const Eigen::Matrix3Xd>& x, bool tangents);
// Same, reusing the storage already held by `pass`.
void forward_batch(const NetParams& params, const Eigen::Ref<const Eigen::Matrix3Xd>& x, bool tangents,
                   BatchPass& pass);

// Accumulates into `grad` the parameter gradient of a scalar whose adjoint
// with respect to pass.output is `output_adjoint` (same layout).
void backward_batch(const NetParams& params, const BatchPass& pass, const RowMatrix& output_adjoint,
                    Eigen::Ref<Eigen::VectorXd> grad);

}  // namespace fiberpinn

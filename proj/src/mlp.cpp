#include "mlp.hpp"

#include <algorithm>
#if defined(__AVX__) && defined(__FMA__)
#include <immintrin.h>
#endif
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "error.hpp"

namespace fiberpinn {

namespace {

inline double madd(double a, double b, double c) {
#ifdef __FMA__
  return std::fma(a, b, c);
#else
  return a * b + c;
#endif
}

#ifdef __AVX512F__
constexpr Eigen::Index kTileCols = 16;
#else
constexpr Eigen::Index kTileCols = 8;
#endif

// Rows row0..row0+R-1 of W * in + b for one tile of kTileCols columns. Every
// entry starts from its bias (or +0 past `value_cols`) and adds W(r, k) * in(k, c)
// for k ascending, one fused multiply-add per term, so the bits of an entry do
// not depend on the tile it falls in. The vector and scalar paths agree.
template <int R>
inline void affine_rows(const double* w, Eigen::Index ldw, Eigen::Index depth, const double* bias, const double* in,
                        Eigen::Index stride, Eigen::Index j, Eigen::Index width, Eigen::Index value_cols, double* out,
                        Eigen::Index out_cols) {
#if defined(__AVX512F__)
  const auto lanes = [&](Eigen::Index first) {
    const Eigen::Index live = std::clamp<Eigen::Index>(value_cols - (j + first), 0, 8);
    return static_cast<__mmask8>((1u << live) - 1u);
  };
  const __mmask8 m0 = lanes(0);
  const __mmask8 m1 = lanes(8);
  __m512d lo[R];
  __m512d hi[R];
  for (int a = 0; a < R; ++a) {
    const __m512d bv = _mm512_set1_pd(bias[a]);
    lo[a] = _mm512_maskz_mov_pd(m0, bv);
    hi[a] = _mm512_maskz_mov_pd(m1, bv);
  }
  for (Eigen::Index k = 0; k < depth; ++k) {
    const double* r = in + k * stride;
    const __m512d r0 = _mm512_loadu_pd(r);
    const __m512d r1 = _mm512_loadu_pd(r + 8);
    for (int a = 0; a < R; ++a) {
      const __m512d wk = _mm512_set1_pd(w[a + k * ldw]);
      lo[a] = _mm512_fmadd_pd(wk, r0, lo[a]);
      hi[a] = _mm512_fmadd_pd(wk, r1, hi[a]);
    }
  }
  if (width == kTileCols) {
    for (int a = 0; a < R; ++a) {
      _mm512_storeu_pd(out + a * out_cols + j, lo[a]);
      _mm512_storeu_pd(out + a * out_cols + j + 8, hi[a]);
    }
    return;
  }
  double acc[R][kTileCols];
  for (int a = 0; a < R; ++a) {
    _mm512_storeu_pd(acc[a], lo[a]);
    _mm512_storeu_pd(acc[a] + 8, hi[a]);
  }
#elif defined(__AVX__) && defined(__FMA__)
  alignas(32) std::int64_t mask[kTileCols];
  for (Eigen::Index c = 0; c < kTileCols; ++c) mask[c] = (j + c < value_cols) ? -1 : 0;
  const __m256d m0 = _mm256_castsi256_pd(_mm256_load_si256(reinterpret_cast<const __m256i*>(mask)));
  const __m256d m1 = _mm256_castsi256_pd(_mm256_load_si256(reinterpret_cast<const __m256i*>(mask + 4)));
  __m256d lo[R];
  __m256d hi[R];
  for (int a = 0; a < R; ++a) {
    const __m256d bv = _mm256_broadcast_sd(bias + a);
    lo[a] = _mm256_and_pd(bv, m0);
    hi[a] = _mm256_and_pd(bv, m1);
  }
  for (Eigen::Index k = 0; k < depth; ++k) {
    const double* r = in + k * stride;
    const __m256d r0 = _mm256_loadu_pd(r);
    const __m256d r1 = _mm256_loadu_pd(r + 4);
    for (int a = 0; a < R; ++a) {
      const __m256d wk = _mm256_broadcast_sd(w + a + k * ldw);
      lo[a] = _mm256_fmadd_pd(wk, r0, lo[a]);
      hi[a] = _mm256_fmadd_pd(wk, r1, hi[a]);
    }
  }
  if (width == kTileCols) {
    for (int a = 0; a < R; ++a) {
      _mm256_storeu_pd(out + a * out_cols + j, lo[a]);
      _mm256_storeu_pd(out + a * out_cols + j + 4, hi[a]);
    }
    return;
  }
  double acc[R][kTileCols];
  for (int a = 0; a < R; ++a) {
    _mm256_storeu_pd(acc[a], lo[a]);
    _mm256_storeu_pd(acc[a] + 4, hi[a]);
  }
#else
  double acc[R][kTileCols];
  for (int a = 0; a < R; ++a)
    for (Eigen::Index c = 0; c < kTileCols; ++c) acc[a][c] = (j + c < value_cols) ? bias[a] : 0.0;
  for (Eigen::Index k = 0; k < depth; ++k) {
    const double* r = in + k * stride;
    for (int a = 0; a < R; ++a) {
      const double wk = w[a + k * ldw];
      for (Eigen::Index c = 0; c < kTileCols; ++c) acc[a][c] = madd(wk, r[c], acc[a][c]);
    }
  }
#endif
  for (int a = 0; a < R; ++a)
    for (Eigen::Index c = 0; c < width; ++c) out[a * out_cols + j + c] = acc[a][c];
}

// out = W * in (+ b on the first `value_cols` columns). A batch of one
// produces the same bits as a large batch.
void affine(const Eigen::Map<const Eigen::MatrixXd>& W, const Eigen::Map<const Eigen::VectorXd>& b,
            const RowMatrix& in, Eigen::Index value_cols, RowMatrix& out) {
  const Eigen::Index rows = W.rows();
  const Eigen::Index depth = W.cols();
  const Eigen::Index cols = in.cols();
  out.resize(rows, cols);
  double pad[64 * kTileCols];
  std::vector<double> big_pad;
  double* pad_ptr = pad;
  if (depth > 64) {
    big_pad.resize(static_cast<std::size_t>(depth * kTileCols));
    pad_ptr = big_pad.data();
  }
  for (Eigen::Index j = 0; j < cols; j += kTileCols) {
    const Eigen::Index width = std::min(kTileCols, cols - j);
    const double* src = in.data() + j;
    Eigen::Index stride = cols;
    if (width < kTileCols) {
      std::fill(pad_ptr, pad_ptr + depth * kTileCols, 0.0);
      for (Eigen::Index k = 0; k < depth; ++k)
        for (Eigen::Index c = 0; c < width; ++c) pad_ptr[k * kTileCols + c] = in(k, j + c);
      src = pad_ptr;
      stride = kTileCols;
    }
    Eigen::Index i = 0;
    for (; i + 4 <= rows; i += 4)
      affine_rows<4>(W.data() + i, rows, depth, b.data() + i, src, stride, j, width, value_cols,
                     out.data() + i * cols, cols);
    for (; i < rows; ++i)
      affine_rows<1>(W.data() + i, rows, depth, b.data() + i, src, stride, j, width, value_cols,
                     out.data() + i * cols, cols);
  }
}

constexpr Eigen::Index kTanhChunk = 64;

void tanh_chunk(double* p) {
  using Chunk = Eigen::Array<double, kTanhChunk, 1>;
  Eigen::Map<Chunk> a(p);
  const Chunk ax = a.abs();
  const Chunk e = (-2.0 * ax).exp();
  const Chunk large = (1.0 - e) / (1.0 + e);
  const Chunk x2 = a.square();
  // Taylor series where 1 - exp(-2|x|) would cancel.
  const Chunk small =
      ax * (1.0 + x2 * (-1.0 / 3 + x2 * (2.0 / 15 + x2 * (-17.0 / 315 + x2 * (62.0 / 2835 +
          x2 * (-1382.0 / 155925 + x2 * (21844.0 / 6081075 + x2 * (-929569.0 / 638512875))))))));
  a = (ax < 0.1).select(small, large) * a.sign();
}

}  // namespace

void tanh_inplace(double* p, std::size_t n) {
  std::size_t i = 0;
  for (; i + kTanhChunk <= n; i += kTanhChunk) tanh_chunk(p + i);
  if (i < n) {
    double buf[kTanhChunk] = {};
    std::copy(p + i, p + n, buf);
    tanh_chunk(buf);
    std::copy(buf, buf + (n - i), p + i);
  }
}

namespace {

void check_spec_matches(const NetParams& params, const MLPSpec& spec) {
  if (!(params.spec() == spec)) fail(ErrorKind::Invalid, "parameter vector does not match the network spec");
}

}  // namespace

std::size_t MLPSpec::param_count() const {
  std::size_t n = 0;
  for (int l = 0; l < layer_count(); ++l) {
    n += static_cast<std::size_t>(fan_in(l) * fan_out(l) + fan_out(l));
  }
  return n;
}

void MLPSpec::validate() const {
  if (input < 1 || output < 1) fail(ErrorKind::Invalid, "network widths must be >= 1");
  for (int w : hidden) {
    if (w < 1) fail(ErrorKind::Invalid, "hidden layer widths must be >= 1");
  }
}

MLPSpec phi_network_spec(int layers, int width) {
  return MLPSpec{3, std::vector<int>(static_cast<std::size_t>(layers), width), 1, OutputHead::Linear};
}

MLPSpec d_network_spec(int layers, int width) {
  return MLPSpec{3, std::vector<int>(static_cast<std::size_t>(layers), width), 3, OutputHead::Tanh};
}

NetParams::NetParams(MLPSpec spec, Eigen::VectorXd theta) : spec_(std::move(spec)), theta_(std::move(theta)) {
  spec_.validate();
  if (static_cast<std::size_t>(theta_.size()) != spec_.param_count()) {
    fail(ErrorKind::Invalid, "parameter vector has length " + std::to_string(theta_.size()) + ", expected " +
                                 std::to_string(spec_.param_count()));
  }
  std::size_t off = 0;
  for (int l = 0; l < spec_.layer_count(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(spec_.fan_in(l) * spec_.fan_out(l) + spec_.fan_out(l));
  }
}

Eigen::Map<const Eigen::MatrixXd> NetParams::weight(int layer) const {
  return {theta_.data() + weight_offset(layer), spec_.fan_out(layer), spec_.fan_in(layer)};
}

Eigen::Map<const Eigen::VectorXd> NetParams::bias(int layer) const {
  return {theta_.data() + bias_offset(layer), spec_.fan_out(layer)};
}

Eigen::Map<Eigen::MatrixXd> NetParams::weight(int layer) {
  return {theta_.data() + weight_offset(layer), spec_.fan_out(layer), spec_.fan_in(layer)};
}

Eigen::Map<Eigen::VectorXd> NetParams::bias(int layer) {
  return {theta_.data() + bias_offset(layer), spec_.fan_out(layer)};
}

NetParams init_params(const MLPSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetParams params(spec, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.param_count())));
  std::mt19937_64 rng(seed);
  for (int l = 0; l < spec.layer_count(); ++l) {
    const double limit = std::sqrt(6.0 / (spec.fan_in(l) + spec.fan_out(l)));
    std::uniform_real_distribution<double> dist(-limit, limit);
    auto W = params.weight(l);
    for (Eigen::Index c = 0; c < W.cols(); ++c)
      for (Eigen::Index r = 0; r < W.rows(); ++r) W(r, c) = dist(rng);
  }
  return params;
}

BatchPass forward_batch(const NetParams& params, const Eigen::Ref<const Eigen::Matrix3Xd>& x, bool tangents) {
  BatchPass pass;
  forward_batch(params, x, tangents, pass);
  return pass;
}

void forward_batch(const NetParams& params, const Eigen::Ref<const Eigen::Matrix3Xd>& x, bool tangents,
                   BatchPass& pass) {
  const MLPSpec& spec = params.spec();
  if (spec.input != 3) fail(ErrorKind::Invalid, "batched evaluation expects 3 inputs");
  pass.points = static_cast<int>(x.cols());
  pass.tangents = tangents;
  const int n = pass.points;
  const int cols = n * pass.blocks();
  const int layers = spec.layer_count();
  pass.inputs.resize(static_cast<std::size_t>(layers));
  pass.pre.resize(static_cast<std::size_t>(layers));

  RowMatrix& x0 = pass.inputs[0];
  x0.setZero(3, cols);
  x0.leftCols(n) = x;
  if (tangents) {
    for (int k = 0; k < 3; ++k) x0.row(k).segment((k + 1) * n, n).setOnes();
  }

  for (int l = 0; l < layers; ++l) {
    RowMatrix& z = pass.pre[l];
    affine(params.weight(l), params.bias(l), pass.inputs[l], n, z);
    RowMatrix& act = (l + 1 == layers) ? pass.output : pass.inputs[l + 1];
    act.resize(z.rows(), z.cols());
    act = z;
    if (spec.tanh_after(l)) {
      for (Eigen::Index i = 0; i < act.rows(); ++i) {
        double* row = act.data() + i * cols;
        tanh_inplace(row, static_cast<std::size_t>(n));
        if (tangents) {
          for (int j = 0; j < n; ++j) {
            const double s = 1.0 - row[j] * row[j];
            row[n + j] *= s;
            row[2 * n + j] *= s;
            row[3 * n + j] *= s;
          }
        }
      }
    }
  }
}

void backward_batch(const NetParams& params, const BatchPass& pass, const RowMatrix& output_adjoint,
                    Eigen::Ref<Eigen::VectorXd> grad) {
  const MLPSpec& spec = params.spec();
  const int n = pass.points;
  const int cols = n * pass.blocks();
  if (output_adjoint.rows() != pass.output.rows() || output_adjoint.cols() != cols) {
    fail(ErrorKind::Invalid, "output adjoint has the wrong shape");
  }
  if (static_cast<std::size_t>(grad.size()) != spec.param_count()) {
    fail(ErrorKind::Invalid, "gradient buffer has the wrong length");
  }

  RowMatrix& adj = pass.adjoint_scratch;
  RowMatrix& zbar = pass.zbar_scratch;
  adj = output_adjoint;
  for (int l = spec.layer_count() - 1; l >= 0; --l) {
    if (spec.tanh_after(l)) {
      const RowMatrix& act = (l + 1 == spec.layer_count()) ? pass.output : pass.inputs[l + 1];
      const RowMatrix& z = pass.pre[l];
      zbar.resize(adj.rows(), cols);
      for (Eigen::Index i = 0; i < adj.rows(); ++i) {
        const double* a = adj.data() + i * cols;
        const double* h = act.data() + i * cols;
        const double* zr = z.data() + i * cols;
        double* out = zbar.data() + i * cols;
        if (!pass.tangents) {
          for (int j = 0; j < n; ++j) out[j] = a[j] * (1.0 - h[j] * h[j]);
          continue;
        }
        // Tangents are s * zdot; s = 1 - h^2 feeds back into the value path.
        const double* __restrict a1 = a + n;
        const double* __restrict a2 = a + 2 * n;
        const double* __restrict a3 = a + 3 * n;
        const double* __restrict z1 = zr + n;
        const double* __restrict z2 = zr + 2 * n;
        const double* __restrict z3 = zr + 3 * n;
        double* __restrict o0 = out;
        double* __restrict o1 = out + n;
        double* __restrict o2 = out + 2 * n;
        double* __restrict o3 = out + 3 * n;
        for (int j = 0; j < n; ++j) {
          const double s = 1.0 - h[j] * h[j];
          const double sbar = a1[j] * z1[j] + a2[j] * z2[j] + a3[j] * z3[j];
          o1[j] = s * a1[j];
          o2[j] = s * a2[j];
          o3[j] = s * a3[j];
          o0[j] = (a[j] - 2.0 * h[j] * sbar) * s;
        }
      }
    } else {
      zbar = adj;
    }

    Eigen::Map<Eigen::MatrixXd> gW(grad.data() + params.weight_offset(l), spec.fan_out(l), spec.fan_in(l));
    gW.noalias() += zbar * pass.inputs[l].transpose();
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + params.bias_offset(l), spec.fan_out(l));
    gb += zbar.leftCols(n).rowwise().sum();
    if (l > 0) {
      const Eigen::MatrixXd Wt = params.weight(l).transpose();
      const Eigen::VectorXd no_bias = Eigen::VectorXd::Zero(Wt.rows());
      affine(Eigen::Map<const Eigen::MatrixXd>(Wt.data(), Wt.rows(), Wt.cols()),
             Eigen::Map<const Eigen::VectorXd>(no_bias.data(), no_bias.size()), zbar, 0, adj);
    }
  }
}

Eigen::VectorXd forward(const NetParams& params, const MLPSpec& spec, const Eigen::Vector3d& x) {
  check_spec_matches(params, spec);
  const BatchPass pass = forward_batch(params, x, false);
  return pass.output.col(0);
}

double eval_phi(const NetParams& params, const Eigen::Vector3d& x) {
  if (params.spec().output != 1) fail(ErrorKind::Invalid, "phi network must have a scalar output");
  return forward(params, params.spec(), x)[0];
}

Eigen::Vector3d eval_d(const NetParams& params, const Eigen::Vector3d& x, double d_max) {
  if (!(d_max > 0.0)) fail(ErrorKind::Invalid, "d_max must be positive");
  if (params.spec().output != 3) fail(ErrorKind::Invalid, "d network must have three outputs");
  Eigen::Vector3d y = forward(params, params.spec(), x);
  if (params.spec().head == OutputHead::Linear) y = y.array().tanh();
  return d_max * y;
}

Eigen::MatrixXd input_gradient(const NetParams& params, const MLPSpec& spec, const Eigen::Vector3d& x) {
  check_spec_matches(params, spec);
  const BatchPass pass = forward_batch(params, x, true);
  Eigen::MatrixXd J(spec.output, 3);
  for (int c = 0; c < spec.output; ++c)
    for (int k = 0; k < 3; ++k) J(c, k) = pass.tangent(c, k, 0);
  return J;
}

}  // namespace fiberpinn

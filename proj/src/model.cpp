#include "model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "error.hpp"

namespace fiberpinn {

namespace {

constexpr char kMagic[4] = {'F', 'P', 'C', 'K'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}
  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) fail(ErrorKind::Parse, source_ + ": truncated checkpoint");
    return to_little(v);
  }

 private:
  std::istream& in_;
  std::string source_;
};

void write_spec(Writer& w, const MLPSpec& spec) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.input));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.output));
  w.put<std::uint32_t>(spec.head == OutputHead::Tanh ? 1u : 0u);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.hidden.size()));
  for (int h : spec.hidden) w.put<std::uint32_t>(static_cast<std::uint32_t>(h));
}

MLPSpec read_spec(Reader& r) {
  MLPSpec spec;
  spec.input = static_cast<int>(r.get<std::uint32_t>());
  spec.output = static_cast<int>(r.get<std::uint32_t>());
  spec.head = r.get<std::uint32_t>() == 1u ? OutputHead::Tanh : OutputHead::Linear;
  const auto layers = r.get<std::uint32_t>();
  if (layers > 1024) fail(ErrorKind::Parse, "checkpoint: implausible layer count");
  for (std::uint32_t i = 0; i < layers; ++i) spec.hidden.push_back(static_cast<int>(r.get<std::uint32_t>()));
  spec.validate();
  return spec;
}

void write_theta(Writer& w, const Eigen::VectorXd& theta) {
  w.put<std::uint64_t>(static_cast<std::uint64_t>(theta.size()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) w.put<double>(theta[i]);
}

Eigen::VectorXd read_theta(Reader& r, std::size_t expected) {
  const auto n = r.get<std::uint64_t>();
  if (n != expected) fail(ErrorKind::Parse, "checkpoint: parameter count does not match the stored spec");
  Eigen::VectorXd theta(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = r.get<double>();
  return theta;
}

}  // namespace

InputNormalization InputNormalization::from_mesh(const TriMesh& mesh) {
  const auto& V = mesh.vertices();
  if (V.empty()) fail(ErrorKind::Invalid, "normalization of an empty mesh");
  InputNormalization norm;
  Vec3 sum = Vec3::Zero();
  for (const auto& v : V) sum += v;
  norm.center = sum / static_cast<double>(V.size());
  double extent = 0.0;
  for (const auto& v : V) extent = std::max(extent, (v - norm.center).cwiseAbs().maxCoeff());
  norm.scale = extent > 0.0 ? extent : 1.0;
  return norm;
}

bool InputNormalization::matches(const InputNormalization& other, double tol) const {
  const double ref = std::max(1.0, std::abs(scale));
  return (center - other.center).cwiseAbs().maxCoeff() <= tol * ref && std::abs(scale - other.scale) <= tol * ref;
}

TimeScaling TimeScaling::from_times(const std::vector<double>& times) {
  TimeScaling ts;
  if (times.empty()) return ts;
  const double n = static_cast<double>(times.size());
  ts.offset = std::accumulate(times.begin(), times.end(), 0.0) / n;
  double var = 0.0;
  for (double t : times) var += (t - ts.offset) * (t - ts.offset);
  ts.scale = std::max(1.0, std::sqrt(var / n));
  return ts;
}

double PinnModel::phi_at(const Vec3& x) const { return time.offset + time.scale * eval_phi(phi, input.apply(x)); }

Vec3 PinnModel::grad_phi(const Vec3& x) const {
  const Eigen::MatrixXd J = input_gradient(phi, phi.spec(), input.apply(x));
  return (time.scale / input.scale) * J.row(0).transpose();
}

ConductivityVector PinnModel::d_at(const Vec3& x) const { return eval_d(d, input.apply(x), d_max); }

Mat3 PinnModel::grad_d(const Vec3& x) const {
  const Vec3 xh = input.apply(x);
  const Eigen::MatrixXd J = input_gradient(d, d.spec(), xh);
  Mat3 G = J / input.scale;
  if (d.spec().head == OutputHead::Linear) {
    const Eigen::VectorXd y = forward(d, d.spec(), xh);
    for (int c = 0; c < 3; ++c) G.row(c) *= 1.0 - std::tanh(y[c]) * std::tanh(y[c]);
  }
  return d_max * G;
}

std::vector<double> PinnModel::phi_batch(const std::vector<Vec3>& xs) const {
  Eigen::Matrix3Xd X(3, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = input.apply(xs[i]);
  const BatchPass pass = forward_batch(phi, X, false);
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = time.offset + time.scale * pass.value(0, static_cast<int>(i));
  return out;
}

std::vector<ConductivityVector> PinnModel::d_batch(const std::vector<Vec3>& xs) const {
  Eigen::Matrix3Xd X(3, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = input.apply(xs[i]);
  const BatchPass pass = forward_batch(d, X, false);
  std::vector<ConductivityVector> out(xs.size());
  const bool squash = d.spec().head == OutputHead::Linear;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double y = pass.value(c, static_cast<int>(i));
      out[i][c] = d_max * (squash ? std::tanh(y) : y);
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const PinnModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out.write(kMagic, 4);
  Writer w(out);
  w.put<std::uint32_t>(kCheckpointVersion);
  write_spec(w, model.phi.spec());
  write_spec(w, model.d.spec());
  for (int k = 0; k < 3; ++k) w.put<double>(model.input.center[k]);
  w.put<double>(model.input.scale);
  w.put<double>(model.time.offset);
  w.put<double>(model.time.scale);
  w.put<double>(model.d_max);
  w.put<std::uint32_t>(model.normal_eigenvalue == NormalEigenvalue::One ? 1u : 0u);
  write_theta(w, model.phi.theta());
  write_theta(w, model.d.theta());
  if (!out) fail(ErrorKind::Io, "failed writing checkpoint '" + path.string() + "'");
}

PinnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint '" + path.string() + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) fail(ErrorKind::Parse, path.string() + ": not a checkpoint file");
  Reader r(in, path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::Parse, path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const MLPSpec phi_spec = read_spec(r);
  const MLPSpec d_spec = read_spec(r);
  PinnModel model;
  for (int k = 0; k < 3; ++k) model.input.center[k] = r.get<double>();
  model.input.scale = r.get<double>();
  model.time.offset = r.get<double>();
  model.time.scale = r.get<double>();
  model.d_max = r.get<double>();
  model.normal_eigenvalue = r.get<std::uint32_t>() == 1u ? NormalEigenvalue::One : NormalEigenvalue::Zero;
  model.phi = NetParams(phi_spec, read_theta(r, phi_spec.param_count()));
  model.d = NetParams(d_spec, read_theta(r, d_spec.param_count()));
  return model;
}

}  // namespace fiberpinn

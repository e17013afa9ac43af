#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eikonal.hpp"
#include "frames.hpp"
#include "model.hpp"

namespace fiberpinn {

enum class SplitTag { Train, Test };

struct ActivationSample {
  SurfacePoint point;      // projected onto the mesh
  double offset_mm = 0.0;  // distance from the raw position to the surface
  double time_ms = 0.0;
  SplitTag split = SplitTag::Train;
};

// Fiber angle (degrees) in the local frame gauge, measured from t1 toward t2.
struct FiberRule {
  enum class Kind { Constant, Linear };
  Kind kind = Kind::Constant;
  double angle_deg = 0.0;
  // Linear rule: angle_deg + slope_deg_per_mm * (axis . x).
  double slope_deg_per_mm = 0.0;
  Vec3 axis = Vec3::UnitX();

  double angle_at(const Vec3& x) const;
};

struct SyntheticSpec {
  FiberRule fiber;
  double speed_long = 0.6;   // mm/ms
  double speed_trans = 0.4;  // mm/ms
  // Activation sources as positions (snapped to the nearest vertex) and times.
  std::vector<std::pair<Vec3, double>> sources = {{Vec3(50.0, 50.0, 0.0), 0.0}};
  int sample_count = 200;
  double noise_sigma_ms = 0.0;
  std::uint64_t rng_seed = 1;
  double train_fraction = 1.0;

  void validate() const;
};

struct GroundTruth {
  std::vector<double> phi;
  std::vector<Vec3> fiber;
  std::vector<ConductivityVector> d;
};

struct SyntheticData {
  GroundTruth truth;
  SeedSet seeds;
  std::vector<int> sample_vertices;
  std::vector<ActivationSample> samples;
};

int nearest_vertex(const TriMesh& mesh, const Vec3& p);

SyntheticData generate_synthetic(const TriMesh& mesh, const FrameField& frames, const SyntheticSpec& spec);

// Uniform random partition; round(train_fraction * n) samples (ties toward
// train) are tagged train.
std::vector<ActivationSample> split_samples(std::vector<ActivationSample> samples, double train_fraction,
                                            std::uint64_t seed);

double rmse(std::span<const double> predicted, std::span<const double> reference);

struct AngleSummary {
  std::vector<double> per_vertex;  // degrees in [0, 90]
  double mean = 0.0;
  double median = 0.0;
};

double median(std::vector<double> values);

// Axial angle arccos(|p . t|) in degrees per vertex.
AngleSummary fiber_angle_error(std::span<const Vec3> predicted, std::span<const Vec3> truth,
                               const FrameField& frames);

struct Evaluation {
  std::vector<double> phi;
  std::vector<ConductivityVector> d;
  std::vector<ConductivityTensor> D;
  std::vector<Vec3> fiber;
  std::vector<double> speed_long;
  std::vector<double> sample_predictions;
  std::optional<double> rmse_s;
  std::optional<double> rmse_o;
  std::optional<double> rmse_t;
  std::optional<AngleSummary> fiber_error;
};

// Throws if the model's normalization does not belong to this mesh.
void check_model_matches_mesh(const PinnModel& model, const TriMesh& mesh);

Evaluation evaluate(const PinnModel& model, const TriMesh& mesh, const FrameField& frames,
                    const GroundTruth* truth, std::span<const ActivationSample> samples);

// Per-vertex fields named phi_ms, fiber, speed_long_mm_per_ms.
PointData result_fields(const Evaluation& ev);
void export_results(const std::filesystem::path& vtk_path, const std::filesystem::path& csv_path,
                    const TriMesh& mesh, const Evaluation& ev, std::span<const ActivationSample> samples);

// Sample CSV: header x_mm,y_mm,z_mm,t_ms[,split]; unknown split means train.
std::vector<ActivationSample> load_samples_csv(const std::filesystem::path& path, const TriMesh& mesh);
void save_samples_csv(const std::filesystem::path& path, std::span<const ActivationSample> samples);

std::string format_number(double v);

}  // namespace fiberpinn

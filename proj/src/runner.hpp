#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace fiberpinn {

TriMesh build_mesh(const MeshSource& source);

struct Dataset {
  std::vector<ActivationSample> samples;
  std::optional<GroundTruth> truth;
};

// Synthetic samples with their split applied, exactly as `generate` writes them.
SyntheticData synthesize(const RunConfig& cfg, const TriMesh& mesh, const FrameField& frames);
Dataset load_dataset(const RunConfig& cfg, const TriMesh& mesh, const FrameField& frames);
GroundTruth load_ground_truth(const std::filesystem::path& path, const TriMesh& mesh);

TrainProblem make_problem(const RunConfig& cfg, const TriMesh& mesh, const FrameField& frames,
                          const std::vector<ActivationSample>& samples);

std::string evaluation_metrics(const Evaluation& ev, std::size_t n_train, std::size_t n_test);

struct TrainOutcome {
  TrainReport report;
  Evaluation evaluation;
};

void cmd_generate(const RunConfig& cfg);
TrainOutcome cmd_train(const RunConfig& cfg);
Evaluation cmd_evaluate(const RunConfig& cfg);
void cmd_export(const RunConfig& cfg);

void write_manifest(const RunConfig& cfg, const std::string& command);

}  // namespace fiberpinn

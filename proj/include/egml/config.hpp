#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "egml/model.hpp"
#include "egml/simulate.hpp"
#include "egml/solver.hpp"

namespace egml {

struct GridConfig {
  int savings_points = 2000;
  double s_max = 1000.0;
  double s_median = 150.0;
  int belief_resolution = 99;
  int quadrature_return = 7;
  int quadrature_income = 7;
  std::int64_t simplex_cap = 10'000'000;
};

struct SolverConfig {
  double tolerance = 1e-4;
  long max_iterations = 20'000;
};

struct SimulationBlock {
  long n_paths = 50'000;
  int horizon = 600;
  Eigen::VectorXd prior;
  std::optional<double> initial_wealth;  // absent: max binding threshold + 1
  std::optional<int> initial_state;      // absent: stationary draw
  int true_kernel_index = 1;
  std::uint64_t seed = 12345;
  bool rao_blackwell = false;
  DataGeneratingProcess dgp = DataGeneratingProcess::kTrueKernel;
  bool project_and_propagate = false;
};

struct RunConfig {
  CalibratedHouseholdModel model;
  CandidateSet candidates;
  std::optional<Eigen::MatrixXd> p_star;
  GridConfig grids;
  SolverConfig solver;
  SimulationBlock simulation;
  std::string output_dir = ".";

  void validate() const;  // throws config_error with a path into the document
};

// The full calibration shipped with the tool.
RunConfig preset_paper_2026();

// Parses and validates a JSON config; unknown keys are errors.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text);

// CI scaling: G -> 200, H -> 20, K -> 5000.
void apply_reduced(RunConfig& cfg);

// FNV-1a hash (hex) of the canonical serialization of the blocks a policy
// depends on: model, candidates, p_star, grids, solver.
std::string config_hash(const RunConfig& cfg);

std::string config_to_json_text(const RunConfig& cfg);

// Builds the solver context from the config (quadrature, shocks, grids,
// Bayes-projection tables).
ModelContext build_context(const RunConfig& cfg);

}  // namespace egml

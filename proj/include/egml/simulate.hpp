#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "egml/solver.hpp"

namespace egml {

// Unique stationary row vector of an irreducible stochastic matrix.
// Throws std::domain_error when the chain is reducible.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p, double tol = 1e-12,
                                        long max_iter = 1'000'000);

enum class DataGeneratingProcess {
  kTrueKernel,   // states drawn from the configured true candidate
  kSubjective,   // diagnostic: states drawn from the mixture P_theta
};

struct PanelConfig {
  long n_paths = 1;
  int horizon = 1;                    // months
  Eigen::VectorXd prior;              // belief at t = 0
  double initial_wealth = 1.0;
  std::optional<int> initial_state;   // absent: drawn from the true kernel's stationary law
  int true_kernel_index = 0;
  std::uint64_t seed = 0;
  bool rao_blackwell = false;
  DataGeneratingProcess dgp = DataGeneratingProcess::kTrueKernel;
  // Diagnostic: skip Bayes updates so beliefs stay at the prior. With a
  // vertex prior this reproduces the run with learning bit-exactly.
  bool freeze_beliefs = false;
  // Ablation: carry the projected grid belief forward instead of the exact
  // posterior.
  bool project_and_propagate = false;
};

struct PathStatistics {
  Eigen::VectorXd mean_consumption, se_consumption;
  Eigen::VectorXd mean_savings, se_savings;
  Eigen::VectorXd consumption_volatility, se_volatility;
  Eigen::MatrixXd mean_posterior;     // T x N
  Eigen::MatrixXd se_posterior;       // T x N
  Eigen::MatrixXd state_frequency;    // T x M
  Eigen::MatrixXd se_state_frequency; // T x M

  int horizon() const { return static_cast<int>(mean_consumption.size()); }
};

// K independent paths under the configured data-generating process; shocks
// are drawn from the continuous laws, beliefs propagate exactly and are
// projected only for policy lookup. Identical (seed, config, policy) give
// bit-identical statistics regardless of thread count.
PathStatistics simulate_panel(const PolicyTable& policy, const ModelContext& ctx,
                              const CalibratedHouseholdModel& household,
                              const PanelConfig& cfg);

struct PairedPathStatistics {
  PathStatistics learning;
  PathStatistics benchmark;
  Eigen::VectorXd mean_diff_consumption, se_diff_consumption;
  Eigen::VectorXd mean_diff_savings, se_diff_savings;
};

// Learning economy vs full-information benchmark on common random numbers:
// both economies see the same state path (true kernel) and shock draws, so
// per-period differences isolate the policy effect.
PairedPathStatistics compare_learning_benchmark(
    const PolicyTable& learning_policy, const ModelContext& learning_ctx,
    const PolicyTable& benchmark_policy, const ModelContext& benchmark_ctx,
    const CalibratedHouseholdModel& household, const PanelConfig& cfg);

}  // namespace egml

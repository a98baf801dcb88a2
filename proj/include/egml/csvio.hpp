#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "egml/analysis.hpp"
#include "egml/simulate.hpp"
#include "egml/solver.hpp"
#include "egml/stability.hpp"

namespace egml {

// Shortest decimal that parses back to the same double (round-trip exact).
std::string format_double(double v);
double parse_double(std::string_view s);

struct PolicyMeta {
  std::string version;
  std::string config_hash;
  int n_states = 0;
  int n_candidates = 0;
  int belief_resolution = 0;
  ConvergenceReport convergence;  // wall time is not serialized
};

// policy CSV columns: z, ell, theta_0.., s, wealth_knot, consumption;
// the JSON sidecar carries grids, hash, and the convergence report.
void save_policy(const std::filesystem::path& csv_path,
                 const std::filesystem::path& meta_path, const PolicyTable& policy,
                 const SimplexGrid& beliefs, const PolicyMeta& meta);

struct LoadedPolicy {
  PolicyTable policy;
  PolicyMeta meta;
};

LoadedPolicy load_policy(const std::filesystem::path& csv_path,
                         const std::filesystem::path& meta_path);

void write_simplex_grid_csv(const std::filesystem::path& path, const SimplexGrid& grid,
                            const std::string& header_comment = "");
void write_savings_grid_csv(const std::filesystem::path& path, const SavingsGrid& grid,
                            const std::string& header_comment = "");

void write_stability_json(const std::filesystem::path& path, const StabilityReport& report,
                          const std::string& config_hash);

// header comments carry the run provenance (config hash, seed, w0, z0).
void write_path_statistics_csv(const std::filesystem::path& path, const PathStatistics& stats,
                               const std::string& header_comment);
void write_paired_statistics_csv(const std::filesystem::path& path,
                                 const PairedPathStatistics& stats,
                                 const std::string& header_comment);

void write_policy_certification_csv(const std::filesystem::path& path,
                                    const PolicyCertification& cert,
                                    const std::string& header_comment);

}  // namespace egml

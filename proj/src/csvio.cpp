#include "egml/csvio.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "egml/errors.hpp"
#include "egml/version.hpp"

namespace egml {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw config_error("malformed number in CSV: '" + std::string(s) + "'");
  return v;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // '\n' line endings everywhere
  if (!out) throw config_error("cannot open output file: " + path.string());
  return out;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

}  // namespace

void save_policy(const std::filesystem::path& csv_path,
                 const std::filesystem::path& meta_path, const PolicyTable& policy,
                 const SimplexGrid& beliefs, const PolicyMeta& meta) {
  std::ofstream out = open_out(csv_path);
  const int n = beliefs.n_candidates();
  out << "# config_hash=" << meta.config_hash << " version=" << meta.version << '\n';
  out << "z,ell";
  for (int i = 0; i < n; ++i) out << ",theta_" << i;
  out << ",s,wealth_knot,consumption\n";
  for (int z = 0; z < policy.n_states(); ++z)
    for (Eigen::Index ell = 0; ell < policy.belief_count(); ++ell)
      for (Eigen::Index g = 0; g < policy.knot_count(); ++g) {
        out << z << ',' << ell;
        for (int i = 0; i < n; ++i) out << ',' << format_double(beliefs.points()(ell, i));
        out << ',' << format_double(policy.savings(g)) << ','
            << format_double(policy.wealth[z](g, ell)) << ','
            << format_double(policy.consumption[z](g, ell)) << '\n';
      }

  json doc;
  doc["version"] = meta.version;
  doc["config_hash"] = meta.config_hash;
  doc["n_states"] = meta.n_states;
  doc["n_candidates"] = meta.n_candidates;
  doc["belief_resolution"] = meta.belief_resolution;
  doc["savings_points"] = policy.knot_count();
  doc["convergence"] = {{"iterations", meta.convergence.iterations},
                        {"final_delta", meta.convergence.final_delta},
                        {"rho_delta", meta.convergence.rho_delta},
                        {"converged", meta.convergence.converged}};
  std::ofstream mout = open_out(meta_path);
  mout << doc.dump(2) << '\n';
}

LoadedPolicy load_policy(const std::filesystem::path& csv_path,
                         const std::filesystem::path& meta_path) {
  std::ifstream min(meta_path);
  if (!min) throw config_error("cannot open policy sidecar: " + meta_path.string());
  json doc;
  try {
    doc = json::parse(min);
  } catch (const json::exception& e) {
    throw config_error(std::string("policy sidecar parse error: ") + e.what());
  }
  LoadedPolicy lp;
  try {
    lp.meta.version = doc.at("version").get<std::string>();
    lp.meta.config_hash = doc.at("config_hash").get<std::string>();
    lp.meta.n_states = doc.at("n_states").get<int>();
    lp.meta.n_candidates = doc.at("n_candidates").get<int>();
    lp.meta.belief_resolution = doc.at("belief_resolution").get<int>();
    lp.meta.convergence.iterations = doc.at("convergence").at("iterations").get<long>();
    lp.meta.convergence.final_delta = doc.at("convergence").at("final_delta").get<double>();
    lp.meta.convergence.rho_delta = doc.at("convergence").at("rho_delta").get<double>();
    lp.meta.convergence.converged = doc.at("convergence").at("converged").get<bool>();
  } catch (const json::exception& e) {
    throw config_error(std::string("policy sidecar is missing fields: ") + e.what());
  }
  const long g_count = doc.at("savings_points").get<long>();
  const int m = lp.meta.n_states;
  const std::int64_t l_count = simplex_point_count(lp.meta.n_candidates,
                                                   lp.meta.belief_resolution);

  std::ifstream in(csv_path);
  if (!in) throw config_error("cannot open policy CSV: " + csv_path.string());
  std::string line;
  do {
    if (!std::getline(in, line)) throw config_error("policy CSV is empty");
  } while (!line.empty() && line[0] == '#');  // comment lines, then the header

  PolicyTable& p = lp.policy;
  p.savings.resize(g_count);
  p.wealth.assign(m, Eigen::MatrixXd(g_count, l_count));
  p.consumption.assign(m, Eigen::MatrixXd(g_count, l_count));
  const int n = lp.meta.n_candidates;
  long rows = 0;
  const long expected = static_cast<long>(m) * l_count * g_count;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) != 5 + n)
      throw config_error("policy CSV: wrong column count at data row " + std::to_string(rows));
    long z = 0, ell = 0;
    std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), z);
    std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), ell);
    if (z < 0 || z >= m || ell < 0 || ell >= l_count)
      throw config_error("policy CSV: index out of range at data row " + std::to_string(rows));
    if (z != rows / (l_count * g_count) || ell != (rows / g_count) % l_count)
      throw config_error("policy CSV: rows out of order at data row " + std::to_string(rows));
    long g = rows % g_count;
    p.savings(g) = parse_double(fields[2 + n]);
    p.wealth[z](g, ell) = parse_double(fields[3 + n]);
    p.consumption[z](g, ell) = parse_double(fields[4 + n]);
    ++rows;
  }
  if (rows != expected)
    throw config_error("policy CSV: expected " + std::to_string(expected) + " rows, got " +
                       std::to_string(rows));
  for (Eigen::Index g = 1; g < g_count; ++g)
    if (!(p.savings(g) > p.savings(g - 1)))
      throw config_error("policy CSV: savings grid not strictly increasing");
  return lp;
}

void write_simplex_grid_csv(const std::filesystem::path& path, const SimplexGrid& grid,
                            const std::string& header_comment) {
  std::ofstream out = open_out(path);
  out << header_comment;
  const int n = grid.n_candidates();
  out << "index";
  for (int i = 0; i < n; ++i) out << ",h_" << i;
  for (int i = 0; i < n; ++i) out << ",theta_" << i;
  out << '\n';
  for (Eigen::Index ell = 0; ell < grid.size(); ++ell) {
    out << ell;
    for (int i = 0; i < n; ++i) out << ',' << grid.compositions()(ell, i);
    for (int i = 0; i < n; ++i) out << ',' << format_double(grid.points()(ell, i));
    out << '\n';
  }
}

void write_savings_grid_csv(const std::filesystem::path& path, const SavingsGrid& grid,
                            const std::string& header_comment) {
  std::ofstream out = open_out(path);
  out << header_comment;
  out << "index,s\n";
  for (Eigen::Index g = 0; g < grid.size(); ++g)
    out << g << ',' << format_double(grid.points(g)) << '\n';
}

void write_stability_json(const std::filesystem::path& path, const StabilityReport& report,
                          const std::string& config_hash) {
  json doc;
  doc["version"] = kVersion;
  doc["config_hash"] = config_hash;
  json p = json::array();
  for (Eigen::Index r = 0; r < report.p_star.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < report.p_star.cols(); ++c) row.push_back(report.p_star(r, c));
    p.push_back(row);
  }
  doc["p_star"] = p;
  doc["spectral_radius_0"] = report.spectral_radius_0;
  doc["spectral_radius_1"] = report.spectral_radius_1;
  doc["perron_vector_0"] = std::vector<double>(report.perron_vector_0.data(),
                                               report.perron_vector_0.data() + report.perron_vector_0.size());
  doc["perron_vector_1"] = std::vector<double>(report.perron_vector_1.data(),
                                               report.perron_vector_1.data() + report.perron_vector_1.size());
  doc["contraction_factor_0"] = report.contraction_factor_0;
  doc["contraction_factor_1"] = report.contraction_factor_1;
  doc["irreducible"] = report.irreducible;
  doc["monotone"] = report.monotone;
  doc["dominates"] = report.dominates;
  doc["certified"] = report.certified();
  if (!report.certified()) doc["first_failure"] = report.first_failure();
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_path_statistics_csv(const std::filesystem::path& path, const PathStatistics& stats,
                               const std::string& header_comment) {
  std::ofstream out = open_out(path);
  out << header_comment;
  const int n = static_cast<int>(stats.mean_posterior.cols());
  const int m = static_cast<int>(stats.state_frequency.cols());
  out << "t,mean_c,se_c,mean_s,se_s,vol_c";
  for (int i = 0; i < n; ++i) out << ",mean_theta_" << (i + 1);
  for (int z = 0; z < m; ++z) out << ",freq_z_" << (z + 1);
  out << '\n';
  for (int t = 0; t < stats.horizon(); ++t) {
    out << t << ',' << format_double(stats.mean_consumption(t)) << ','
        << format_double(stats.se_consumption(t)) << ',' << format_double(stats.mean_savings(t))
        << ',' << format_double(stats.se_savings(t)) << ','
        << format_double(stats.consumption_volatility(t));
    for (int i = 0; i < n; ++i) out << ',' << format_double(stats.mean_posterior(t, i));
    for (int z = 0; z < m; ++z) out << ',' << format_double(stats.state_frequency(t, z));
    out << '\n';
  }
}

void write_paired_statistics_csv(const std::filesystem::path& path,
                                 const PairedPathStatistics& stats,
                                 const std::string& header_comment) {
  std::ofstream out = open_out(path);
  out << header_comment;
  const int n = static_cast<int>(stats.learning.mean_posterior.cols());
  out << "t,mean_c,se_c,mean_s,se_s,vol_c,bench_mean_c,bench_se_c,bench_mean_s,bench_se_s,"
         "bench_vol_c,diff_c,se_diff_c,diff_s,se_diff_s";
  for (int i = 0; i < n; ++i) out << ",mean_theta_" << (i + 1);
  out << '\n';
  for (int t = 0; t < stats.learning.horizon(); ++t) {
    out << t << ',' << format_double(stats.learning.mean_consumption(t)) << ','
        << format_double(stats.learning.se_consumption(t)) << ','
        << format_double(stats.learning.mean_savings(t)) << ','
        << format_double(stats.learning.se_savings(t)) << ','
        << format_double(stats.learning.consumption_volatility(t)) << ','
        << format_double(stats.benchmark.mean_consumption(t)) << ','
        << format_double(stats.benchmark.se_consumption(t)) << ','
        << format_double(stats.benchmark.mean_savings(t)) << ','
        << format_double(stats.benchmark.se_savings(t)) << ','
        << format_double(stats.benchmark.consumption_volatility(t)) << ','
        << format_double(stats.mean_diff_consumption(t)) << ','
        << format_double(stats.se_diff_consumption(t)) << ','
        << format_double(stats.mean_diff_savings(t)) << ','
        << format_double(stats.se_diff_savings(t));
    for (int i = 0; i < n; ++i) out << ',' << format_double(stats.learning.mean_posterior(t, i));
    out << '\n';
  }
}

void write_policy_certification_csv(const std::filesystem::path& path,
                                    const PolicyCertification& cert,
                                    const std::string& header_comment) {
  std::ofstream out = open_out(path);
  out << header_comment;
  out << "z,ell,binding_threshold,mpc_top_decile,mpc_top_segment,max_residual\n";
  for (Eigen::Index z = 0; z < cert.binding_thresholds.rows(); ++z)
    for (Eigen::Index ell = 0; ell < cert.binding_thresholds.cols(); ++ell)
      out << z << ',' << ell << ',' << format_double(cert.binding_thresholds(z, ell)) << ','
          << format_double(cert.mpc_top_decile(z, ell)) << ','
          << format_double(cert.mpc_top_segment(z, ell)) << ','
          << format_double(cert.residuals.max_per_cell(z, ell)) << '\n';
}

}  // namespace egml

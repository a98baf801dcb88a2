// Command-line driver: config ingestion, subcommand dispatch, artifact
// emission. Numerical work lives in the library; this file only wires it.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "egml/analysis.hpp"
#include "egml/config.hpp"
#include "egml/csvio.hpp"
#include "egml/errors.hpp"
#include "egml/simulate.hpp"
#include "egml/solver.hpp"
#include "egml/stability.hpp"
#include "egml/version.hpp"

namespace fs = std::filesystem;
using namespace egml;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::string out_dir = ".";
  std::string policy_path;
  std::string benchmark_policy_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> known_kernel;
  bool reduced = false;
};

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.preset.empty()) {
    if (args.preset != "paper-2026")
      throw config_error("unknown preset '" + args.preset + "' (available: paper-2026)");
    if (!args.config_path.empty())
      throw config_error("--config and --preset are mutually exclusive");
    cfg = preset_paper_2026();
  } else if (!args.config_path.empty()) {
    cfg = load_config(args.config_path);
  } else {
    throw config_error("one of --config or --preset is required");
  }
  if (args.reduced) apply_reduced(cfg);
  if (args.seed) cfg.simulation.seed = *args.seed;
  if (args.known_kernel) {
    int k = *args.known_kernel;
    if (k < 0 || k >= cfg.candidates.n_candidates())
      throw config_error("--known-kernel index out of range");
    cfg.candidates.matrices = {cfg.candidates.matrices[k]};
    cfg.p_star.reset();
    cfg.simulation.prior = Eigen::VectorXd::Ones(1);
    cfg.simulation.true_kernel_index = 0;
  }
  cfg.validate();
  return cfg;
}

void print_shock_warnings(const StateShockMap& shocks) {
  for (const std::string& w : shocks.warnings) std::cerr << "warning: " << w << "\n";
}

void print_stability_report(const StabilityReport& rep) {
  std::printf("stability report\n");
  std::printf("  P*:\n");
  for (Eigen::Index r = 0; r < rep.p_star.rows(); ++r) {
    std::printf("   ");
    for (Eigen::Index c = 0; c < rep.p_star.cols(); ++c) std::printf(" %10.6f", rep.p_star(r, c));
    std::printf("\n");
  }
  std::printf("  irreducible: %s\n", rep.irreducible ? "yes" : "no");
  std::printf("  monotone:    %s\n", rep.monotone ? "yes" : "no");
  for (std::size_t i = 0; i < rep.dominates.size(); ++i)
    std::printf("  P* >= P_%zu (FOSD): %s\n", i + 1, rep.dominates[i] ? "yes" : "no");
  std::printf("  r(P* D_0) = %.12f\n", rep.spectral_radius_0);
  std::printf("  r(P* D_1) = %.12f\n", rep.spectral_radius_1);
  std::printf("  eta_0     = %.12f\n", rep.contraction_factor_0);
  std::printf("  eta_1     = %.12f\n", rep.contraction_factor_1);
  std::printf("  certified: %s\n", rep.certified() ? "yes" : "no");
  if (!rep.certified()) std::printf("  failure: %s\n", rep.first_failure().c_str());
}

int cmd_grid_info(const CommonArgs& args) {
  RunConfig cfg = resolve_config(args);
  SimplexGrid grid(cfg.candidates.n_candidates(), cfg.grids.belief_resolution,
                   cfg.grids.simplex_cap);
  SavingsGrid savings = build_savings_grid(cfg.grids.savings_points, cfg.grids.s_max,
                                           cfg.grids.s_median);
  std::printf("simplex grid: N=%d H=%d L=%lld\n", grid.n_candidates(), grid.resolution(),
              static_cast<long long>(grid.size()));
  std::printf("savings grid: G=%lld s_max=%s s_median=%s\n",
              static_cast<long long>(savings.size()), format_double(cfg.grids.s_max).c_str(),
              format_double(cfg.grids.s_median).c_str());
  fs::create_directories(args.out_dir);
  std::string header = "# config_hash=" + config_hash(cfg) + " version=" + kVersion + "\n";
  write_simplex_grid_csv(fs::path(args.out_dir) / "simplex_grid.csv", grid, header);
  write_savings_grid_csv(fs::path(args.out_dir) / "savings_grid.csv", savings, header);
  return 0;
}

int cmd_check(const CommonArgs& args) {
  RunConfig cfg = resolve_config(args);
  ModelContext ctx = build_context(cfg);
  print_shock_warnings(ctx.shocks);
  StabilityReport rep = certify(ctx.candidates, ctx.shocks, cfg.model.state_order, cfg.p_star);
  print_stability_report(rep);
  fs::create_directories(args.out_dir);
  write_stability_json(fs::path(args.out_dir) / "stability_report.json", rep, config_hash(cfg));
  if (!rep.certified()) {
    std::cerr << "error: certification failed: " << rep.first_failure() << "\n";
    return 3;
  }
  return 0;
}

int cmd_solve(const CommonArgs& args) {
  RunConfig cfg = resolve_config(args);
  ModelContext ctx = build_context(cfg);
  print_shock_warnings(ctx.shocks);
  StabilityReport rep = certify(ctx.candidates, ctx.shocks, cfg.model.state_order, cfg.p_star);
  if (!rep.certified())
    std::cerr << "warning: stability certificate failed (" << rep.first_failure()
              << "); solving anyway\n";
  SolveResult res = solve(ctx, cfg.solver.tolerance, cfg.solver.max_iterations);
  std::printf("converged in %ld iterations (delta %.3e, rho %.3e, %.1fs)\n",
              res.report.iterations, res.report.final_delta, res.report.rho_delta,
              res.report.wall_time_seconds);
  if (evaluate_clamp_count() > 0)
    std::cerr << "warning: extrapolation clamp c <= w fired " << evaluate_clamp_count()
              << " times; slopes should make it unreachable\n";
  fs::create_directories(args.out_dir);
  PolicyMeta meta;
  meta.version = kVersion;
  meta.config_hash = config_hash(cfg);
  meta.n_states = ctx.n_states();
  meta.n_candidates = ctx.candidates.n_candidates();
  meta.belief_resolution = ctx.beliefs.resolution();
  meta.convergence = res.report;
  save_policy(fs::path(args.out_dir) / "policy.csv", fs::path(args.out_dir) / "policy_meta.json",
              res.policy, ctx.beliefs, meta);
  return 0;
}

LoadedPolicy load_matching_policy(const std::string& path, const RunConfig& cfg) {
  if (path.empty()) throw config_error("--policy PATH is required for this subcommand");
  fs::path csv(path);
  fs::path meta = csv;
  meta.replace_filename(csv.stem().string() + "_meta.json");
  LoadedPolicy lp = load_policy(csv, meta);
  if (lp.meta.config_hash != config_hash(cfg))
    throw config_error("policy was solved under a different configuration (hash mismatch)");
  return lp;
}

int cmd_analyze(const CommonArgs& args) {
  RunConfig cfg = resolve_config(args);
  ModelContext ctx = build_context(cfg);
  LoadedPolicy lp = load_matching_policy(args.policy_path, cfg);
  PolicyCertification cert = certify_policy(lp.policy, ctx);
  std::printf("policy certification\n");
  std::printf("  consumption monotone: %s\n", cert.consumption_monotone ? "pass" : "FAIL");
  std::printf("  savings monotone:     %s\n", cert.savings_monotone ? "pass" : "FAIL");
  std::printf("  evaluation monotone:  %s\n", cert.evaluation_monotone ? "pass" : "FAIL");
  std::printf("  concave:              %s\n", cert.concave ? "pass" : "FAIL");
  std::printf("  slope cap:            %s\n", cert.slope_cap_ok ? "pass" : "FAIL");
  std::printf("  threshold consistent: %s (gap %.3e; vs stored knot %.3e)\n",
              cert.threshold_consistent ? "pass" : "FAIL", cert.threshold_gap_refreshed,
              cert.threshold_gap_table);
  if (cert.s_bar)
    std::printf("  lower bound (s*=%.6f): %s\n", *cert.s_bar, cert.lower_bound_ok ? "pass" : "FAIL");
  else
    std::printf("  lower bound: no certificate (s* >= 1)\n");
  std::printf("  max |Euler residual| at knots: %.3e (mean %.3e over %ld probes)\n",
              cert.residuals.max_abs, cert.residuals.mean_abs, cert.residuals.n_interior);
  ResidualStats mid = euler_residuals_at_knots(lp.policy, ctx, true);
  std::printf("  with segment midpoints:        %.3e (interpolation-class error)\n", mid.max_abs);
  std::printf("  all structural checks: %s\n", cert.all_pass() ? "pass" : "FAIL");
  fs::create_directories(args.out_dir);
  std::string header = "# config_hash=" + config_hash(cfg) + " version=" + kVersion + "\n";
  write_policy_certification_csv(fs::path(args.out_dir) / "analysis.csv", cert, header);
  return 0;
}

PanelConfig make_panel_config(const RunConfig& cfg, const PolicyTable& policy) {
  PanelConfig pc;
  pc.n_paths = cfg.simulation.n_paths;
  pc.horizon = cfg.simulation.horizon;
  pc.prior = cfg.simulation.prior;
  pc.initial_state = cfg.simulation.initial_state;
  pc.true_kernel_index = cfg.simulation.true_kernel_index;
  pc.seed = cfg.simulation.seed;
  pc.rao_blackwell = cfg.simulation.rao_blackwell;
  pc.dgp = cfg.simulation.dgp;
  pc.project_and_propagate = cfg.simulation.project_and_propagate;
  if (cfg.simulation.initial_wealth) {
    pc.initial_wealth = *cfg.simulation.initial_wealth;
  } else {
    double wbar_max = 0.0;
    for (int z = 0; z < policy.n_states(); ++z)
      for (Eigen::Index ell = 0; ell < policy.belief_count(); ++ell)
        wbar_max = std::max(wbar_max, policy.first_knot(z, ell));
    pc.initial_wealth = wbar_max + 1.0;
  }
  return pc;
}

std::string panel_header(const RunConfig& cfg, const PanelConfig& pc) {
  std::string header = "# config_hash=" + config_hash(cfg) + " version=" + kVersion +
                       " seed=" + std::to_string(pc.seed) +
                       " w0=" + format_double(pc.initial_wealth) + " z0=";
  header += pc.initial_state ? std::to_string(*pc.initial_state) : std::string("stationary");
  header += " K=" + std::to_string(pc.n_paths) + " T=" + std::to_string(pc.horizon);
  header += pc.rao_blackwell ? " rao_blackwell=1" : " rao_blackwell=0";
  header += pc.dgp == DataGeneratingProcess::kSubjective ? " dgp=subjective" : " dgp=true-kernel";
  header += "\n";
  return header;
}

int cmd_simulate(const CommonArgs& args) {
  RunConfig cfg = resolve_config(args);
  ModelContext ctx = build_context(cfg);
  LoadedPolicy lp = load_matching_policy(args.policy_path, cfg);
  PanelConfig pc = make_panel_config(cfg, lp.policy);
  fs::create_directories(args.out_dir);
  if (args.benchmark_policy_path.empty()) {
    PathStatistics stats = simulate_panel(lp.policy, ctx, cfg.model, pc);
    write_path_statistics_csv(fs::path(args.out_dir) / "path_stats.csv", stats,
                              panel_header(cfg, pc));
    std::printf("simulated %ld paths x %d months\n", pc.n_paths, pc.horizon);
  } else {
    RunConfig bench_cfg = cfg;
    int k = cfg.simulation.true_kernel_index;
    bench_cfg.candidates.matrices = {cfg.candidates.matrices[k]};
    bench_cfg.p_star.reset();
    bench_cfg.simulation.prior = Eigen::VectorXd::Ones(1);
    bench_cfg.simulation.true_kernel_index = 0;
    ModelContext bench_ctx = build_context(bench_cfg);
    fs::path bcsv(args.benchmark_policy_path);
    fs::path bmeta = bcsv;
    bmeta.replace_filename(bcsv.stem().string() + "_meta.json");
    LoadedPolicy bench = load_policy(bcsv, bmeta);
    if (bench.meta.config_hash != config_hash(bench_cfg))
      throw config_error("benchmark policy hash mismatch (expected an N=1 solve of the true kernel)");
    PairedPathStatistics stats =
        compare_learning_benchmark(lp.policy, ctx, bench.policy, bench_ctx, cfg.model, pc);
    write_paired_statistics_csv(fs::path(args.out_dir) / "path_stats_paired.csv", stats,
                                panel_header(cfg, pc));
    std::printf("simulated %ld paired paths x %d months\n", pc.n_paths, pc.horizon);
  }
  return 0;
}

int cmd_oracle_compare(const CommonArgs& args) {
  RunConfig cfg = resolve_config(args);
  ModelContext ctx = build_context(cfg);
  SolveResult res = solve(ctx, cfg.solver.tolerance, cfg.solver.max_iterations);

  // Oracle wealth grid: 50 log-spaced nodes spanning the policy's knot range.
  double w_lo = 1e300, w_hi = 0.0;
  for (int z = 0; z < ctx.n_states(); ++z) {
    w_lo = std::min(w_lo, 0.5 * res.policy.first_knot(z, 0));
    w_hi = std::max(w_hi, res.policy.wealth[z](res.policy.knot_count() - 1, 0));
  }
  for (int z = 0; z < ctx.n_states(); ++z) {
    const StateAtoms& at = ctx.shocks.states[z];
    w_lo = std::min(w_lo, 0.9 * at.income.minCoeff());
  }
  Eigen::VectorXd wealth_grid(50);
  for (int i = 0; i < 50; ++i)
    wealth_grid(i) = w_lo * std::pow(w_hi / w_lo, static_cast<double>(i) / 49.0);
  const int n_consumption = 200;
  BruteForceResult oracle = brute_force_policy(ctx, wealth_grid, n_consumption, 1e-8, 200'000);
  PolicyGap gap = compare_policies(res.policy, oracle.policy, ctx, wealth_grid);
  double worst_steps = 0.0;
  for (int z = 0; z < ctx.n_states(); ++z)
    for (Eigen::Index ell = 0; ell < ctx.beliefs.size(); ++ell)
      for (Eigen::Index i = 0; i < wealth_grid.size(); ++i) {
        double w = wealth_grid(i);
        double d = std::abs(evaluate_policy(res.policy, w, z, ell) -
                            evaluate_tabulated(oracle.policy, w, z, ell));
        worst_steps = std::max(worst_steps, d / (w / n_consumption));
      }
  std::printf("oracle comparison over %lld nodes\n", static_cast<long long>(wealth_grid.size()));
  std::printf("  sup |c_egm - c_oracle| = %.6e\n", gap.sup_consumption);
  std::printf("  sup |u' gap| (rho)     = %.6e\n", gap.sup_marginal_utility);
  std::printf("  worst gap in oracle consumption-grid steps (w/%d): %.3f\n", n_consumption,
              worst_steps);
  fs::create_directories(args.out_dir);
  std::ofstream out(fs::path(args.out_dir) / "oracle_compare.csv", std::ios::binary);
  out << "# config_hash=" << config_hash(cfg) << " version=" << kVersion << "\n";
  out << "w,z,ell,c_egm,c_oracle\n";
  for (int z = 0; z < ctx.n_states(); ++z)
    for (Eigen::Index ell = 0; ell < ctx.beliefs.size(); ++ell)
      for (Eigen::Index i = 0; i < wealth_grid.size(); ++i)
        out << format_double(wealth_grid(i)) << ',' << z << ',' << ell << ','
            << format_double(evaluate_policy(res.policy, wealth_grid(i), z, ell)) << ','
            << format_double(evaluate_tabulated(oracle.policy, wealth_grid(i), z, ell)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consumption-savings solver with Bayesian learning over transition kernels"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* cmd, bool needs_policy = false) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--preset", args.preset, "named preset (paper-2026)");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_flag("--reduced", args.reduced, "CI scale: G=200, H=20, K=5000");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { args.seed = s; }, "override simulation seed");
    if (needs_policy) cmd->add_option("--policy", args.policy_path, "saved policy CSV");
  };

  CLI::App* c_grid = app.add_subcommand("grid-info", "print and dump grid summaries");
  add_common(c_grid);
  CLI::App* c_check = app.add_subcommand("check", "verify the stability assumptions");
  add_common(c_check);
  CLI::App* c_solve = app.add_subcommand("solve", "compute the optimal policy");
  add_common(c_solve);
  c_solve->add_option_function<int>(
      "--known-kernel", [&](int k) { args.known_kernel = k; },
      "solve the full-information benchmark with this candidate as the known kernel");
  CLI::App* c_analyze = app.add_subcommand("analyze", "certify structural properties of a policy");
  add_common(c_analyze, true);
  CLI::App* c_sim = app.add_subcommand("simulate", "Monte Carlo panel simulation");
  add_common(c_sim, true);
  c_sim->add_option("--benchmark-policy", args.benchmark_policy_path,
                    "full-information policy for a paired comparison");
  CLI::App* c_oracle = app.add_subcommand("oracle-compare",
                                          "value-iteration oracle vs the EGM policy (small instances)");
  add_common(c_oracle);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_grid->parsed()) return cmd_grid_info(args);
    if (c_check->parsed()) return cmd_check(args);
    if (c_solve->parsed()) return cmd_solve(args);
    if (c_analyze->parsed()) return cmd_analyze(args);
    if (c_sim->parsed()) return cmd_simulate(args);
    if (c_oracle->parsed()) return cmd_oracle_compare(args);
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const certification_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const convergence_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const numerical_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  }
  return 0;
}

#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "egml/solver.hpp"

namespace egml {

struct ResidualStats {
  double max_abs = 0.0;
  double mean_abs = 0.0;
  long n_interior = 0;
  Eigen::MatrixXd max_per_cell;  // M x L, max |residual| among interior probes
};

// Relative Euler residual 1 - (u')^{-1}(clamp(rhs, u'(w), u'(0))) / c at each
// probe wealth, aggregated over interior probes (w above the first knot).
// The same probe vector is applied to every (z, ell).
ResidualStats euler_residuals(const PolicyTable& p, const ModelContext& ctx,
                              const Eigen::VectorXd& probe_wealths);

// Interior probes tailored per (z, ell): the policy's own knots above the
// first one, plus segment midpoints when requested.
ResidualStats euler_residuals_at_knots(const PolicyTable& p, const ModelContext& ctx,
                                       bool include_midpoints);

// Prop.-6 threshold (u')^{-1}(min{euler_rhs at s = 0, u'(0)}).
double binding_threshold(const PolicyTable& p, const ModelContext& ctx, int z,
                         Eigen::Index ell);

struct MpcEstimate {
  double top_decile = 0.0;   // secant over the top decile of knots
  double top_segment = 0.0;  // last-segment slope, stability check
};

MpcEstimate asymptotic_mpc(const PolicyTable& p, int z, Eigen::Index ell);

// Consumption policy tabulated on a fixed wealth grid (value-iteration
// output); evaluated by linear interpolation/extrapolation clamped to (0, w].
struct TabulatedPolicy {
  Eigen::VectorXd wealth_nodes;
  std::vector<Eigen::MatrixXd> consumption;  // per z: W x L
};

double evaluate_tabulated(const TabulatedPolicy& p, double w, int z, Eigen::Index ell);

struct BruteForceResult {
  TabulatedPolicy policy;
  std::vector<double> deltas;  // sup-norm value-function changes
  long iterations = 0;
};

// Independent optimality oracle: value-function iteration over a consumption
// grid c = w j / n_consumption, linear interpolation of V in wealth. Only for
// small instances (wealth x states x beliefs <= 1e6).
BruteForceResult brute_force_policy(const ModelContext& ctx,
                                    const Eigen::VectorXd& wealth_grid,
                                    int n_consumption, double tol, long max_iter);

struct PolicyGap {
  double sup_consumption = 0.0;
  double sup_marginal_utility = 0.0;  // the rho distance restricted to probes
};

PolicyGap compare_policies(const PolicyTable& a, const TabulatedPolicy& b,
                           const ModelContext& ctx, const Eigen::VectorXd& probes);

struct PolicyCertification {
  bool consumption_monotone = false;
  bool savings_monotone = false;
  bool evaluation_monotone = false;
  bool concave = false;
  bool slope_cap_ok = false;
  bool threshold_consistent = false;  // Prop.-6 formula vs refreshed first knot, 1e-10
  std::optional<double> s_bar;        // Prop.-7 certificate when it exists
  bool lower_bound_ok = false;        // c >= (1 - s_bar) w - 1e-8 at knots (true if no s_bar)
  double threshold_gap_refreshed = 0.0;  // |formula - first knot after one sweep|
  double threshold_gap_table = 0.0;      // |formula - stored first knot| (tolerance-scale)
  Eigen::MatrixXd binding_thresholds;    // M x L
  Eigen::MatrixXd mpc_top_decile;        // M x L
  Eigen::MatrixXd mpc_top_segment;       // M x L
  ResidualStats residuals;

  bool all_pass() const {
    return consumption_monotone && savings_monotone && evaluation_monotone && concave &&
           slope_cap_ok && threshold_consistent && lower_bound_ok;
  }
};

// Structural certification of a converged policy (wealth/savings
// monotonicity, concavity, slope cap, threshold consistency, consumption
// lower bound, Euler residuals at knots).
PolicyCertification certify_policy(const PolicyTable& p, const ModelContext& ctx);

// a(w) >= b(w) - tol at every probe for every (z, ell); used for the
// income-monotonicity check between a higher-income and a baseline solve.
bool pointwise_weakly_higher(const PolicyTable& a, const PolicyTable& b,
                             const Eigen::VectorXd& probes, double tol);

}  // namespace egml

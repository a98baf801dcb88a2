#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "egml/belief.hpp"
#include "egml/model.hpp"

namespace egml {

struct SavingsGrid {
  Eigen::VectorXd points;  // strictly increasing, points(0) = 0

  Eigen::Index size() const { return points.size(); }
};

// Exponentially warped grid on [0, s_max] whose u = 0.5 point equals
// s_median. Throws std::domain_error when s_median >= s_max/2 (the warp
// would need lambda <= 0; use a linear grid instead).
SavingsGrid build_savings_grid(int count, double s_max, double s_median);

// Everything a sweep needs, plus the iteration-invariant Bayes-and-project
// table for grid beliefs.
struct ModelContext {
  CrraUtility utility;
  CandidateSet candidates;
  StateShockMap shocks;
  SimplexGrid beliefs;
  SavingsGrid savings;

  // posterior_index[z * M + z_next](ell) = grid index of the projected
  // posterior, or -1 when the transition has zero subjective probability.
  std::vector<Eigen::VectorXi> posterior_index;
  // mixture_row[z](ell, z_next) = P_{theta_ell}(z, z_next).
  std::vector<Eigen::MatrixXd> mixture_row;
  // Per z_next: the distinct projected indices appearing anywhere in
  // posterior_index (sorted), and the inverse map grid-index -> slot.
  std::vector<std::vector<int>> needed_posteriors;
  std::vector<Eigen::VectorXi> posterior_slot;

  int n_states() const { return candidates.n_states(); }
};

ModelContext make_model_context(CrraUtility utility, CandidateSet candidates,
                                StateShockMap shocks, SimplexGrid beliefs,
                                SavingsGrid savings);

// Piecewise-linear consumption policy: per (state, belief index), endogenous
// wealth knots and consumption values over the shared savings grid.
struct PolicyTable {
  Eigen::VectorXd savings;                   // G
  std::vector<Eigen::MatrixXd> wealth;       // per z: G x L
  std::vector<Eigen::MatrixXd> consumption;  // per z: G x L

  int n_states() const { return static_cast<int>(wealth.size()); }
  Eigen::Index knot_count() const { return wealth.empty() ? 0 : wealth.front().rows(); }
  Eigen::Index belief_count() const { return wealth.empty() ? 0 : wealth.front().cols(); }
  double first_knot(int z, Eigen::Index ell) const { return wealth[z](0, ell); }
  // EGM-output invariants: knots strictly increasing, 0 < c <= w and
  // nondecreasing, w - c = s within 1e-12. Throws numerical_error.
  void validate_egm_invariants() const;
};

// c = w below the first knot, linear interpolation between knots, linear
// extrapolation above the last knot, clamped to (0, w].
double evaluate_policy(const PolicyTable& p, double w, int z, Eigen::Index ell);

// Times the extrapolation guard c <= w fired since process start; with
// segment slopes <= 1 it is provably inactive, so a nonzero count is a
// diagnostic.
long evaluate_clamp_count();

// c0(w) = w represented on the savings grid (knots = consumption = s_g).
// Only an iteration seed: its first knot has c = 0, so it does not satisfy
// the strict EGM-output invariants.
PolicyTable initial_policy(const ModelContext& ctx);

// sum_a p_a beta_a R_a u'(c_prev(R_a s + Y_a, z_next, ell_next)).
double expected_marginal_utility(const PolicyTable& prev, const ModelContext& ctx,
                                 double s, int z_next, Eigen::Index ell_next);

// Right side of the Euler equation at savings s from state (z, theta):
// sum_zn P_theta(z, zn) E_zn[beta R u'(c_prev(R s + Y, zn, proj(bayes)))].
// The Bayes update and projection happen once per (z, zn) pair.
double euler_rhs(const PolicyTable& prev, double s, int z, const Eigen::VectorXd& theta,
                 const ModelContext& ctx);

// One endogenous-grid sweep: c~ = (u')^{-1}(min{euler_rhs, u'(0)}), knot
// w = s + c~. Throws numerical_error naming (g, z, ell) on a non-finite or
// non-monotone update.
PolicyTable egm_step(const PolicyTable& prev, const ModelContext& ctx);

struct ConvergenceReport {
  long iterations = 0;
  double final_delta = 0.0;  // max |c_t - c_{t-1}| at fixed (g, z, ell)
  double rho_delta = 0.0;    // max |u'(c_t) - u'(c_{t-1})|, reported as a diagnostic
  bool converged = false;
  double wall_time_seconds = 0.0;
  std::vector<double> delta_history;
  std::vector<double> rho_history;
};

struct SolveResult {
  PolicyTable policy;
  ConvergenceReport report;
};

// Time iteration to max |c_t - c_{t-1}| < tol. Throws convergence_error
// (carrying the delta history) when max_iter is exhausted.
SolveResult solve(const ModelContext& ctx, double tol, long max_iter,
                  const std::optional<PolicyTable>& initial = std::nullopt);

}  // namespace egml

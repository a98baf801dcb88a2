#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egml/quadrature.hpp"

namespace egml {

// CRRA preferences. gamma within 1e-10 of 1 is snapped to exactly 1 so the
// log branch is used instead of (c^(1-g))/(1-g) near the pole.
struct CrraUtility {
  double gamma;

  explicit CrraUtility(double g);

  double utility(double c) const;
  // u'(c) = c^(-gamma); throws std::domain_error for c <= 0.
  double marginal(double c) const;
  // (u')^{-1}(m) = m^(-1/gamma).
  double inverse_marginal(double m) const;
  // u'(0+) = +infinity under CRRA, represented explicitly.
  double marginal_at_zero() const { return std::numeric_limits<double>::infinity(); }
};

// Calibrated monthly environment: constant discounting, two-component income
// Y = y(z) * exp(sigma_Y * eps_Y), portfolio return
// R = alpha * R_f * exp(mu(z) + sigma(z) * eps_R) + (1 - alpha) * R_f.
struct CalibratedHouseholdModel {
  double beta = 0.0;
  double gamma = 0.0;
  double alpha_portfolio = 0.0;
  double log_rf = 0.0;
  Eigen::VectorXd mu;           // per-state log risk premium
  Eigen::VectorXd sigma;        // per-state return volatility, > 0
  Eigen::VectorXd y_persistent; // per-state persistent income, > 0
  double sigma_y2 = 0.0;        // log-variance of the transitory income shock
  std::vector<int> state_order; // permutation of states, best first

  int n_states() const { return static_cast<int>(mu.size()); }
  double risk_free() const;
  double gross_return(int z, double eps_r) const;
  double income(int z, double eps_y) const;
  void validate() const;  // throws std::domain_error
};

// Finite set of candidate transition matrices sharing one state ordering.
struct CandidateSet {
  std::vector<Eigen::MatrixXd> matrices;
  std::vector<int> state_order;  // best first

  int n_candidates() const { return static_cast<int>(matrices.size()); }
  int n_states() const { return matrices.empty() ? 0 : static_cast<int>(matrices.front().rows()); }
  void validate() const;  // throws std::domain_error
};

// Discretized shock law for one exogenous state.
struct StateAtoms {
  Eigen::ArrayXd prob;
  Eigen::ArrayXd discount;      // beta(z, eps)
  Eigen::ArrayXd gross_return;  // R(z, eps)
  Eigen::ArrayXd income;        // Y(z, eps)

  Eigen::Index size() const { return prob.size(); }
};

struct StateShockMap {
  std::vector<StateAtoms> states;
  // Diagnostics produced at construction (e.g. R(z,eps) ordering violations).
  std::vector<std::string> warnings;

  int n_states() const { return static_cast<int>(states.size()); }
  // E_z[beta * R^alpha] for alpha in {0, 1} (or any real exponent).
  double expected_discount_return_pow(int z, double alpha) const;
  // Throws std::domain_error if probabilities, positivity, or the
  // finite-expectation guards fail.
  void validate(const CrraUtility& u) const;
};

// Tensor product of the return and income quadrature rules per state.
StateShockMap discretize_model(const CalibratedHouseholdModel& m,
                               const QuadratureRule& rule_r,
                               const QuadratureRule& rule_y);

}  // namespace egml

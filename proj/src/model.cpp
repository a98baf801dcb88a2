#include "egml/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace egml {

CrraUtility::CrraUtility(double g) : gamma(g) {
  if (!(g > 0.0) || !std::isfinite(g))
    throw std::domain_error("CrraUtility: gamma must be positive");
  if (std::abs(g - 1.0) <= 1e-10) gamma = 1.0;
}

double CrraUtility::utility(double c) const {
  if (!(c > 0.0)) throw std::domain_error("CrraUtility::utility: c must be positive");
  if (gamma == 1.0) return std::log(c);
  return std::pow(c, 1.0 - gamma) / (1.0 - gamma);
}

double CrraUtility::marginal(double c) const {
  if (!(c > 0.0)) throw std::domain_error("CrraUtility::marginal: c must be positive");
  if (gamma == 2.0) return 1.0 / (c * c);
  if (gamma == 1.0) return 1.0 / c;
  return std::pow(c, -gamma);
}

double CrraUtility::inverse_marginal(double m) const {
  if (!(m > 0.0)) throw std::domain_error("CrraUtility::inverse_marginal: m must be positive");
  if (gamma == 2.0) return 1.0 / std::sqrt(m);
  if (gamma == 1.0) return 1.0 / m;
  return std::pow(m, -1.0 / gamma);
}

double CalibratedHouseholdModel::risk_free() const { return std::exp(log_rf); }

double CalibratedHouseholdModel::gross_return(int z, double eps_r) const {
  double rf = risk_free();
  return alpha_portfolio * rf * std::exp(mu(z) + sigma(z) * eps_r) + (1.0 - alpha_portfolio) * rf;
}

double CalibratedHouseholdModel::income(int z, double eps_y) const {
  return y_persistent(z) * std::exp(std::sqrt(sigma_y2) * eps_y);
}

namespace {

bool is_permutation_of_states(const std::vector<int>& order, int m) {
  if (static_cast<int>(order.size()) != m) return false;
  std::vector<bool> seen(m, false);
  for (int s : order) {
    if (s < 0 || s >= m || seen[s]) return false;
    seen[s] = true;
  }
  return true;
}

}  // namespace

void CalibratedHouseholdModel::validate() const {
  const int m = n_states();
  if (m < 1) throw std::domain_error("model: needs at least one exogenous state");
  if (sigma.size() != m || y_persistent.size() != m)
    throw std::domain_error("model: mu, sigma, y_persistent must share length");
  if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error("model: beta must lie in (0,1)");
  if (!(gamma > 0.0)) throw std::domain_error("model: gamma must be positive");
  if (!(alpha_portfolio >= 0.0 && alpha_portfolio <= 1.0))
    throw std::domain_error("model: alpha_portfolio must lie in [0,1]");
  if (!std::isfinite(log_rf)) throw std::domain_error("model: log_rf must be finite");
  if (!(sigma_y2 > 0.0)) throw std::domain_error("model: sigma_y2 must be positive");
  for (int z = 0; z < m; ++z) {
    if (!(sigma(z) > 0.0)) throw std::domain_error("model: sigma(z) must be positive");
    if (!(y_persistent(z) > 0.0)) throw std::domain_error("model: y_persistent(z) must be positive");
  }
  if (!is_permutation_of_states(state_order, m))
    throw std::domain_error("model: state_order must be a permutation of 0..M-1");
}

void CandidateSet::validate() const {
  if (matrices.empty()) throw std::domain_error("candidates: need at least one matrix");
  const int m = n_states();
  if (!is_permutation_of_states(state_order, m))
    throw std::domain_error("candidates: state_order must be a permutation of 0..M-1");
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const Eigen::MatrixXd& p = matrices[i];
    if (p.rows() != m || p.cols() != m)
      throw std::domain_error("candidates: all matrices must be square and share dimension");
    for (int r = 0; r < m; ++r) {
      double row_sum = 0.0;
      for (int c = 0; c < m; ++c) {
        if (!(p(r, c) >= 0.0))
          throw std::domain_error("candidates: P_" + std::to_string(i + 1) + " has a negative entry in row " + std::to_string(r));
        row_sum += p(r, c);
      }
      if (std::abs(row_sum - 1.0) > 1e-12)
        throw std::domain_error("candidates: P_" + std::to_string(i + 1) + " row " + std::to_string(r) + " sums to " + std::to_string(row_sum));
    }
  }
}

double StateShockMap::expected_discount_return_pow(int z, double alpha) const {
  const StateAtoms& a = states.at(z);
  if (alpha == 0.0) return (a.prob * a.discount).sum();
  if (alpha == 1.0) return (a.prob * a.discount * a.gross_return).sum();
  return (a.prob * a.discount * a.gross_return.pow(alpha)).sum();
}

void StateShockMap::validate(const CrraUtility& u) const {
  if (states.empty()) throw std::domain_error("shocks: no states");
  for (int z = 0; z < n_states(); ++z) {
    const StateAtoms& a = states[z];
    const Eigen::Index n = a.size();
    if (n == 0 || a.discount.size() != n || a.gross_return.size() != n || a.income.size() != n)
      throw std::domain_error("shocks: atom arrays must be nonempty and share length");
    double total = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!(a.prob(k) > 0.0 && a.prob(k) <= 1.0))
        throw std::domain_error("shocks: atom probabilities must lie in (0,1]");
      if (!(a.discount(k) > 0.0) || !(a.gross_return(k) > 0.0))
        throw std::domain_error("shocks: beta and R atoms must be strictly positive");
      if (!(a.income(k) >= 0.0)) throw std::domain_error("shocks: Y atoms must be nonnegative");
      total += a.prob(k);
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::domain_error("shocks: state " + std::to_string(z) + " probabilities sum to " + std::to_string(total));
    // Finite-expectation guards; they reject Y = 0 atoms since u'(0) = inf.
    double e_by = 0.0, e_buy = 0.0, e_bruy = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      double upy = a.income(k) > 0.0 ? u.marginal(a.income(k)) : u.marginal_at_zero();
      e_by += a.prob(k) * a.discount(k) * a.income(k);
      e_buy += a.prob(k) * a.discount(k) * upy;
      e_bruy += a.prob(k) * a.discount(k) * a.gross_return(k) * upy;
    }
    if (!std::isfinite(e_by) || !std::isfinite(e_buy) || !std::isfinite(e_bruy))
      throw std::domain_error("shocks: state " + std::to_string(z) +
                              " violates the finite-expectation conditions (Y = 0 atom?)");
  }
}

StateShockMap discretize_model(const CalibratedHouseholdModel& m,
                               const QuadratureRule& rule_r,
                               const QuadratureRule& rule_y) {
  m.validate();
  if (rule_r.size() < 1 || rule_y.size() < 1)
    throw std::domain_error("discretize_model: quadrature rules must be nonempty");

  const int M = m.n_states();
  const Eigen::Index nr = rule_r.size();
  const Eigen::Index ny = rule_y.size();

  StateShockMap out;
  out.states.resize(M);
  for (int z = 0; z < M; ++z) {
    StateAtoms& a = out.states[z];
    const Eigen::Index n = nr * ny;
    a.prob.resize(n);
    a.discount.resize(n);
    a.gross_return.resize(n);
    a.income.resize(n);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < nr; ++i) {
      for (Eigen::Index j = 0; j < ny; ++j, ++k) {
        a.prob(k) = rule_r.weights(i) * rule_y.weights(j);
        a.discount(k) = m.beta;
        a.gross_return(k) = m.gross_return(z, rule_r.nodes(i));
        a.income(k) = m.income(z, rule_y.nodes(j));
      }
    }
  }

  // R(z, eps) should be nondecreasing in z (worst to best) at each eps node.
  // The calibrated sigma(z) can break this for large positive eps; warn with
  // the violating nodes instead of rejecting.
  for (std::size_t r = 0; r + 1 < m.state_order.size(); ++r) {
    int better = m.state_order[r];
    int worse = m.state_order[r + 1];
    for (Eigen::Index i = 0; i < nr; ++i) {
      double eps = rule_r.nodes(i);
      double r_better = m.gross_return(better, eps);
      double r_worse = m.gross_return(worse, eps);
      if (r_better < r_worse) {
        std::ostringstream os;
        os << "R(z,eps) not nondecreasing in z at eps=" << eps << ": R(z" << better
           << ")=" << r_better << " < R(z" << worse << ")=" << r_worse;
        out.warnings.push_back(os.str());
      }
    }
  }

  out.validate(CrraUtility(m.gamma));
  return out;
}

}  // namespace egml

#include "egml/stability.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "egml/errors.hpp"

namespace egml {

DiscountedReturnDiagonal compute_discount_diagonal(const StateShockMap& shocks) {
  const int m = shocks.n_states();
  DiscountedReturnDiagonal d;
  d.d0.resize(m);
  d.d1.resize(m);
  for (int z = 0; z < m; ++z) {
    d.d0(z) = shocks.expected_discount_return_pow(z, 0.0);
    d.d1(z) = shocks.expected_discount_return_pow(z, 1.0);
    if (!(d.d0(z) > 0.0) || !(d.d1(z) > 0.0) || !std::isfinite(d.d0(z)) || !std::isfinite(d.d1(z)))
      throw numerical_error("discount diagonal: entries must be positive and finite");
  }
  return d;
}

namespace {

double power_iteration_radius(const Eigen::MatrixXd& a, double tol, long max_iter) {
  const Eigen::Index m = a.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Ones(m);
  double est = 0.0, est1 = -1.0, est2 = -2.0;
  for (long it = 0; it < max_iter; ++it) {
    Eigen::VectorXd y = a * x;
    double xy = x.dot(y);
    double xx = x.dot(x);
    est2 = est1;
    est1 = est;
    est = xy / xx;
    double scale = std::max(1.0, std::abs(est));
    if (it > 0 && std::abs(est - est1) <= tol * scale) return est;
    // Two-cycle in the estimate: the matrix is periodic along the iteration.
    if (it > 2 && std::abs(est - est2) <= tol * scale && std::abs(est - est1) > tol * scale)
      return -std::numeric_limits<double>::infinity();  // signal: needs shift
    double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
  }
  throw numerical_error("spectral_radius: power iteration did not converge");
}

}  // namespace

double spectral_radius(const Eigen::MatrixXd& a, double tol, long max_iter) {
  if (a.rows() != a.cols()) throw std::domain_error("spectral_radius: matrix must be square");
  if (a.size() == 0) throw std::domain_error("spectral_radius: empty matrix");
  if ((a.array() < 0.0).any()) throw std::domain_error("spectral_radius: matrix must be nonnegative");
  double r = power_iteration_radius(a, tol, max_iter);
  if (std::isfinite(r)) return std::abs(r);
  // (A + I)/2 shift removes periodicity without moving the Perron vector.
  Eigen::MatrixXd b = 0.5 * (a + Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  double rb = power_iteration_radius(b, tol, max_iter);
  if (!std::isfinite(rb)) throw numerical_error("spectral_radius: shifted iteration cycled");
  return std::abs(2.0 * rb - 1.0);
}

namespace {

// Cumulative mass over next states ordered best first; FOSD dominance of row
// a over row b means a's cumulative mass is pointwise >= b's.
Eigen::VectorXd best_first_cumulative(const Eigen::MatrixXd& p, int row,
                                      const std::vector<int>& order) {
  const int m = static_cast<int>(order.size());
  Eigen::VectorXd cum(m);
  double acc = 0.0;
  for (int k = 0; k < m; ++k) {
    acc += p(row, order[k]);
    cum(k) = acc;
  }
  return cum;
}

bool row_dominates(const Eigen::MatrixXd& p, int rp, const Eigen::MatrixXd& q, int rq,
                   const std::vector<int>& order, double tol) {
  Eigen::VectorXd cp = best_first_cumulative(p, rp, order);
  Eigen::VectorXd cq = best_first_cumulative(q, rq, order);
  for (int k = 0; k < cp.size(); ++k)
    if (cp(k) < cq(k) - tol) return false;
  return true;
}

}  // namespace

bool check_monotone(const Eigen::MatrixXd& p, const std::vector<int>& order, double tol) {
  const int m = static_cast<int>(order.size());
  if (p.rows() != m || p.cols() != m) throw std::domain_error("check_monotone: dimension mismatch");
  // Adjacent pairs in the order: order[k] is better than order[k+1].
  for (int k = 0; k + 1 < m; ++k) {
    int better = order[k];
    int worse = order[k + 1];
    if (!row_dominates(p, better, p, worse, order, tol)) return false;
  }
  return true;
}

bool check_fosd_dominates(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
                          const std::vector<int>& order, double tol) {
  if (p.rows() != q.rows() || p.cols() != q.cols())
    throw std::domain_error("check_fosd_dominates: dimension mismatch");
  for (int z = 0; z < p.rows(); ++z)
    if (!row_dominates(p, z, q, z, order, tol)) return false;
  return true;
}

Eigen::MatrixXd upper_envelope(const CandidateSet& cands, const std::vector<int>& order) {
  cands.validate();
  const int m = cands.n_states();
  const int n = cands.n_candidates();
  if (static_cast<int>(order.size()) != m)
    throw std::domain_error("upper_envelope: order size mismatch");
  Eigen::MatrixXd env(m, m);
  for (int z = 0; z < m; ++z) {
    // Pointwise max of best-first cumulative masses is the least upper
    // bound. While one candidate provides the running max, its entries are
    // copied verbatim so short-decimal inputs survive exactly.
    Eigen::MatrixXd cum(n, m);
    for (int i = 0; i < n; ++i)
      cum.row(i) = best_first_cumulative(cands.matrices[i], z, order).transpose();
    int provider = -1;
    double prev_max = 0.0;
    for (int k = 0; k < m; ++k) {
      int best = 0;
      for (int i = 1; i < n; ++i)
        if (cum(i, k) > cum(best, k)) best = i;
      if (provider >= 0 && cum(provider, k) == cum(best, k)) best = provider;
      double entry = (best == provider || k == 0) ? cands.matrices[best](z, order[k])
                                                  : cum(best, k) - prev_max;
      env(z, order[k]) = entry < 0.0 ? 0.0 : entry;
      prev_max = cum(best, k);
      provider = best;
    }
  }
  return env;
}

bool check_irreducible(const Eigen::MatrixXd& p) {
  const int m = static_cast<int>(p.rows());
  if (p.cols() != m) throw std::domain_error("check_irreducible: matrix must be square");
  if (m == 1) return true;  // a single-state chain communicates with itself
  auto reachable_from_0 = [&](bool transpose) {
    std::vector<bool> seen(m, false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w = 0; w < m; ++w) {
        double edge = transpose ? p(w, v) : p(v, w);
        if (edge > 0.0 && !seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
    for (bool s : seen)
      if (!s) return false;
    return true;
  };
  return reachable_from_0(false) && reachable_from_0(true);
}

bool StabilityReport::structure_ok() const {
  if (!irreducible || !monotone) return false;
  for (bool d : dominates)
    if (!d) return false;
  return true;
}

bool StabilityReport::certified() const {
  return structure_ok() && spectral_radius_0 < 1.0 && spectral_radius_1 < 1.0 &&
         contraction_factor_0 < 1.0 && contraction_factor_1 < 1.0;
}

std::string StabilityReport::first_failure() const {
  if (!irreducible) return "P* is not irreducible";
  if (!monotone) return "P* is not monotone";
  for (std::size_t i = 0; i < dominates.size(); ++i)
    if (!dominates[i]) return "P* does not FOSD-dominate candidate " + std::to_string(i + 1);
  if (!(spectral_radius_0 < 1.0)) return "r(P* D_0) >= 1";
  if (!(spectral_radius_1 < 1.0)) return "r(P* D_1) >= 1";
  if (!(contraction_factor_0 < 1.0)) return "contraction factor eta_0 >= 1";
  if (!(contraction_factor_1 < 1.0)) return "contraction factor eta_1 >= 1";
  return "";
}

double StabilityReport::forward_coefficient_bound(int alpha, int t) const {
  const Eigen::VectorXd& x = alpha == 0 ? perron_vector_0 : perron_vector_1;
  double eta = alpha == 0 ? contraction_factor_0 : contraction_factor_1;
  return std::pow(eta, t) * x.maxCoeff() / x.minCoeff();
}

namespace {

// Perron vector via power iteration on (K + I)/2, started from the constant
// function; the shift keeps the same eigenvector and rules out cycling.
// Normalized to max = 1.
Eigen::VectorXd perron_vector(const Eigen::MatrixXd& k, double tol = 1e-12,
                              long max_iter = 1'000'000) {
  const Eigen::Index m = k.rows();
  Eigen::MatrixXd b = 0.5 * (k + Eigen::MatrixXd::Identity(m, m));
  Eigen::VectorXd x = Eigen::VectorXd::Ones(m);
  for (long it = 0; it < max_iter; ++it) {
    Eigen::VectorXd y = b * x;
    double mx = y.maxCoeff();
    if (!(mx > 0.0)) throw numerical_error("perron_vector: iteration collapsed to zero");
    y /= mx;
    double diff = (y - x).cwiseAbs().maxCoeff();
    x = y;
    if (diff <= tol) return x;
  }
  throw numerical_error("perron_vector: power iteration did not converge");
}

}  // namespace

StabilityReport certify(const CandidateSet& cands, const StateShockMap& shocks,
                        const std::vector<int>& order,
                        const std::optional<Eigen::MatrixXd>& p_star) {
  cands.validate();
  const int m = cands.n_states();
  if (shocks.n_states() != m) throw std::domain_error("certify: shocks/candidates state mismatch");

  StabilityReport rep;
  rep.p_star = p_star ? *p_star : upper_envelope(cands, order);
  if (rep.p_star.rows() != m || rep.p_star.cols() != m)
    throw std::domain_error("certify: p_star dimension mismatch");

  rep.irreducible = check_irreducible(rep.p_star);
  rep.monotone = check_monotone(rep.p_star, order);
  rep.dominates.resize(cands.n_candidates());
  for (int i = 0; i < cands.n_candidates(); ++i)
    rep.dominates[i] = check_fosd_dominates(rep.p_star, cands.matrices[i], order);

  DiscountedReturnDiagonal d = compute_discount_diagonal(shocks);
  for (int alpha = 0; alpha <= 1; ++alpha) {
    const Eigen::VectorXd& diag = alpha == 0 ? d.d0 : d.d1;
    Eigen::MatrixXd k_star = rep.p_star * diag.asDiagonal();
    double radius = spectral_radius(k_star);
    Eigen::VectorXd x = perron_vector(k_star);
    double eta = 0.0;
    for (int i = 0; i < cands.n_candidates(); ++i) {
      Eigen::VectorXd kx = cands.matrices[i] * (diag.asDiagonal() * x);
      for (int z = 0; z < m; ++z) eta = std::max(eta, kx(z) / x(z));
    }
    if (alpha == 0) {
      rep.spectral_radius_0 = radius;
      rep.perron_vector_0 = x;
      rep.contraction_factor_0 = eta;
    } else {
      rep.spectral_radius_1 = radius;
      rep.perron_vector_1 = x;
      rep.contraction_factor_1 = eta;
    }
  }
  return rep;
}

void require_certified(const StabilityReport& report) {
  if (!report.certified()) throw certification_error("stability certification failed: " + report.first_failure());
}

std::optional<double> consumption_lower_bound_certificate(const CandidateSet& cands,
                                                          const StateShockMap& shocks,
                                                          const CrraUtility& u) {
  const int m = cands.n_states();
  if (shocks.n_states() != m)
    throw std::domain_error("consumption_lower_bound_certificate: state mismatch");
  // E_z[beta R^(1-gamma)] per state; linearity in theta puts the maximum of
  // the share condition at a candidate vertex.
  Eigen::VectorXd v(m);
  for (int z = 0; z < m; ++z) {
    v(z) = shocks.expected_discount_return_pow(z, 1.0 - u.gamma);
    if (!std::isfinite(v(z)))
      throw numerical_error("consumption_lower_bound_certificate: E[beta R^(1-gamma)] not finite");
  }
  double s_bar = 0.0;
  for (int i = 0; i < cands.n_candidates(); ++i)
    for (int z = 0; z < m; ++z) {
      double e = cands.matrices[i].row(z).dot(v);
      s_bar = std::max(s_bar, std::pow(e, 1.0 / u.gamma));
    }
  if (s_bar < 1.0) return s_bar;
  return std::nullopt;
}

}  // namespace egml

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egml/model.hpp"

namespace egml {

// D_alpha(z) = E_z[beta * R^alpha] for alpha in {0, 1}.
struct DiscountedReturnDiagonal {
  Eigen::VectorXd d0;
  Eigen::VectorXd d1;
};

DiscountedReturnDiagonal compute_discount_diagonal(const StateShockMap& shocks);

// Perron root of a nonnegative matrix by power iteration (all-ones start,
// relative tolerance on the Rayleigh quotient). A (A+I)/2 shift is applied
// if the estimate cycles, which handles periodic matrices. Throws
// numerical_error if max_iter is exhausted.
double spectral_radius(const Eigen::MatrixXd& a, double tol = 1e-12,
                       long max_iter = 1'000'000);

// Row z' FOSD-dominates row z for adjacent z <= z' in the state order.
bool check_monotone(const Eigen::MatrixXd& p, const std::vector<int>& order,
                    double tol = 1e-12);

// Every row of p FOSD-dominates the corresponding row of q.
bool check_fosd_dominates(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
                          const std::vector<int>& order, double tol = 1e-12);

// Rowwise FOSD least upper bound of the candidate set.
Eigen::MatrixXd upper_envelope(const CandidateSet& cands, const std::vector<int>& order);

// Strong connectivity of the positive-entry graph.
bool check_irreducible(const Eigen::MatrixXd& p);

struct StabilityReport {
  Eigen::MatrixXd p_star;
  double spectral_radius_0 = 0.0;
  double spectral_radius_1 = 0.0;
  Eigen::VectorXd perron_vector_0;
  Eigen::VectorXd perron_vector_1;
  double contraction_factor_0 = 0.0;  // eta_alpha = max_i max_z (K_i x)(z)/x(z)
  double contraction_factor_1 = 0.0;
  bool irreducible = false;
  bool monotone = false;
  std::vector<bool> dominates;  // per candidate: P_i FOSD-dominated by P*

  bool structure_ok() const;
  bool certified() const;
  std::string first_failure() const;
  // Bound f_t^alpha(z,theta) <= eta^t * max(x)/min(x), valid for all theta.
  double forward_coefficient_bound(int alpha, int t) const;
};

// Verifies the uniform stability condition: P* irreducible, monotone, FOSD
// above every candidate, with r(P* D_alpha) < 1 and a common upper
// eigenvector for alpha in {0, 1}. When p_star is absent the rowwise FOSD
// envelope is used.
StabilityReport certify(const CandidateSet& cands, const StateShockMap& shocks,
                        const std::vector<int>& order,
                        const std::optional<Eigen::MatrixXd>& p_star = std::nullopt);

// Throws certification_error naming the first failing check.
void require_certified(const StabilityReport& report);

// Largest consumption-share certificate: s* = max_{i,z}
// (sum_zn P_i(z,zn) E_zn[beta R^(1-gamma)])^(1/gamma). Returns s* when < 1,
// certifying c*(w,z,theta) >= (1-s*) w; absent otherwise.
std::optional<double> consumption_lower_bound_certificate(const CandidateSet& cands,
                                                          const StateShockMap& shocks,
                                                          const CrraUtility& u);

}  // namespace egml

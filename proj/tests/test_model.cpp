#include <doctest.h>

#include <cmath>

#include "egml/config.hpp"
#include "egml/model.hpp"

using namespace egml;

TEST_CASE("marginal utility and its inverse") {
  CrraUtility u2(2.0);
  CHECK(u2.marginal(2.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(u2.inverse_marginal(0.25) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(u2.marginal(u2.inverse_marginal(0.25)) == doctest::Approx(0.25).epsilon(1e-14));

  CrraUtility u1(1.0);
  CHECK(u1.marginal(5.0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(u1.utility(std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(u2.marginal(0.0), std::domain_error);
  CHECK_THROWS_AS(u2.marginal(-1.0), std::domain_error);
  CHECK_THROWS_AS(CrraUtility(0.0), std::domain_error);
  CHECK(std::isinf(u2.marginal_at_zero()));
}

TEST_CASE("gamma near one snaps to the log branch") {
  CrraUtility u(1.0 + 5e-11);
  CHECK(u.gamma == 1.0);
  CHECK(u.utility(2.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("marginal utility is strictly decreasing") {
  CrraUtility u(2.0);
  double prev = u.marginal(1e-3);
  for (double c = 2e-3; c < 10.0; c *= 1.7) {
    double cur = u.marginal(c);
    CHECK(cur < prev);
    prev = cur;
  }
}

namespace {

CalibratedHouseholdModel preset_model() { return preset_paper_2026().model; }

}  // namespace

TEST_CASE("discretize_model: 7x7 atoms with unit mass per state") {
  CalibratedHouseholdModel m = preset_model();
  QuadratureRule r7 = gauss_hermite_normal(7);
  StateShockMap shocks = discretize_model(m, r7, r7);
  REQUIRE(shocks.n_states() == 2);
  for (int z = 0; z < 2; ++z) {
    CHECK(shocks.states[z].size() == 49);
    CHECK(std::abs(shocks.states[z].prob.sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("discretize_model: income mean matches the lognormal closed form") {
  CalibratedHouseholdModel m = preset_model();
  QuadratureRule r7 = gauss_hermite_normal(7);
  StateShockMap shocks = discretize_model(m, r7, r7);
  for (int z = 0; z < 2; ++z) {
    double quad = (shocks.states[z].prob * shocks.states[z].income).sum();
    double truth = m.y_persistent(z) * std::exp(0.5 * m.sigma_y2);
    CHECK(std::abs(quad - truth) <= 1e-9 * truth);
  }
}

TEST_CASE("discretize_model: E_0[beta R] below one and at the closed form") {
  CalibratedHouseholdModel m = preset_model();
  QuadratureRule r7 = gauss_hermite_normal(7);
  StateShockMap shocks = discretize_model(m, r7, r7);
  double ebr = shocks.expected_discount_return_pow(0, 1.0);
  CHECK(ebr < 1.0);
  double rf = std::exp(m.log_rf);
  double truth = m.beta * (m.alpha_portfolio * rf * std::exp(m.mu(0) + 0.5 * m.sigma(0) * m.sigma(0)) +
                           (1.0 - m.alpha_portfolio) * rf);
  CHECK(std::abs(ebr - truth) <= 1e-9 * truth);
}

TEST_CASE("discretize_model: every atom return exceeds the risk-free floor") {
  CalibratedHouseholdModel m = preset_model();
  QuadratureRule r7 = gauss_hermite_normal(7);
  StateShockMap shocks = discretize_model(m, r7, r7);
  double floor = (1.0 - m.alpha_portfolio) * std::exp(m.log_rf);
  for (int z = 0; z < 2; ++z) CHECK(shocks.states[z].gross_return.minCoeff() > floor);
}

TEST_CASE("discretize_model warns about R(z,eps) ordering violations at large eps") {
  CalibratedHouseholdModel m = preset_model();
  QuadratureRule r7 = gauss_hermite_normal(7);
  StateShockMap shocks = discretize_model(m, r7, r7);
  // sigma(recession) > sigma(expansion) breaks the ordering for eps above
  // (mu0 - mu1)/(sigma1 - sigma0) ~ 0.477; three of the seven nodes qualify.
  CHECK(shocks.warnings.size() == 3);
}

TEST_CASE("state shock map validation rejects broken inputs") {
  CrraUtility u(2.0);
  StateShockMap ok;
  ok.states.resize(1);
  ok.states[0].prob = Eigen::ArrayXd::Constant(1, 1.0);
  ok.states[0].discount = Eigen::ArrayXd::Constant(1, 0.9);
  ok.states[0].gross_return = Eigen::ArrayXd::Constant(1, 1.1);
  ok.states[0].income = Eigen::ArrayXd::Constant(1, 1.0);
  CHECK_NOTHROW(ok.validate(u));

  StateShockMap bad_prob = ok;
  bad_prob.states[0].prob(0) = 0.5;
  CHECK_THROWS_AS(bad_prob.validate(u), std::domain_error);

  StateShockMap zero_income = ok;
  zero_income.states[0].income(0) = 0.0;
  CHECK_THROWS_AS(zero_income.validate(u), std::domain_error);

  StateShockMap neg_return = ok;
  neg_return.states[0].gross_return(0) = 0.0;
  CHECK_THROWS_AS(neg_return.validate(u), std::domain_error);
}

TEST_CASE("model validation rejects bad calibrations") {
  CalibratedHouseholdModel m = preset_model();
  CHECK_NOTHROW(m.validate());
  CalibratedHouseholdModel bad = m;
  bad.beta = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::domain_error);
  bad = m;
  bad.sigma(0) = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::domain_error);
  bad = m;
  bad.state_order = {0, 0};
  CHECK_THROWS_AS(bad.validate(), std::domain_error);
}

TEST_CASE("candidate set validation") {
  CandidateSet cands = preset_paper_2026().candidates;
  CHECK_NOTHROW(cands.validate());
  CHECK(cands.n_candidates() == 2);
  CHECK(cands.n_states() == 2);

  CandidateSet bad = cands;
  bad.matrices[0](0, 0) = 0.79;  // row sums to 0.99
  CHECK_THROWS_AS(bad.validate(), std::domain_error);
}

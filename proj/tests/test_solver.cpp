#include <doctest.h>

#include <cmath>
#include <limits>

#include "egml/errors.hpp"
#include "egml/solver.hpp"
#include "egml/stability.hpp"

using namespace egml;

namespace {

StateShockMap single_atom_map(double beta, double r, double y) {
  StateShockMap map;
  map.states.resize(1);
  map.states[0].prob = Eigen::ArrayXd::Constant(1, 1.0);
  map.states[0].discount = Eigen::ArrayXd::Constant(1, beta);
  map.states[0].gross_return = Eigen::ArrayXd::Constant(1, r);
  map.states[0].income = Eigen::ArrayXd::Constant(1, y);
  return map;
}

CandidateSet single_candidate() {
  CandidateSet cands;
  Eigen::MatrixXd p(1, 1);
  p << 1.0;
  cands.matrices = {p};
  cands.state_order = {0};
  return cands;
}

ModelContext deterministic_ctx(double beta, double r, double y, const SavingsGrid& grid) {
  return make_model_context(CrraUtility(2.0), single_candidate(), single_atom_map(beta, r, y),
                            SimplexGrid(1, 1), grid);
}

SavingsGrid manual_grid(std::initializer_list<double> pts) {
  SavingsGrid g;
  g.points.resize(static_cast<Eigen::Index>(pts.size()));
  Eigen::Index i = 0;
  for (double p : pts) g.points(i++) = p;
  return g;
}

// Small two-state learning instance used across the solve tests.
struct SmallModel {
  CalibratedHouseholdModel household;
  CandidateSet candidates;

  SmallModel() {
    household.beta = 0.9;
    household.gamma = 2.0;
    household.alpha_portfolio = 0.5;
    household.log_rf = 0.01;
    household.mu = (Eigen::VectorXd(2) << 0.02, -0.02).finished();
    household.sigma = (Eigen::VectorXd(2) << 0.10, 0.15).finished();
    household.y_persistent = (Eigen::VectorXd(2) << 1.0, 0.4).finished();
    household.sigma_y2 = 0.09;
    household.state_order = {0, 1};
    Eigen::MatrixXd pa(2, 2), pb(2, 2);
    pa << 0.9, 0.1, 0.4, 0.6;
    pb << 0.7, 0.3, 0.2, 0.8;
    candidates.matrices = {pa, pb};
    candidates.state_order = household.state_order;
  }

  ModelContext context(int n_keep = 2, int h = 8) const {
    CandidateSet cands = candidates;
    if (n_keep == 1) cands.matrices = {candidates.matrices[0]};
    QuadratureRule r3 = gauss_hermite_normal(3);
    StateShockMap shocks = discretize_model(household, r3, r3);
    return make_model_context(CrraUtility(household.gamma), cands, std::move(shocks),
                              SimplexGrid(n_keep == 1 ? 1 : 2, h),
                              build_savings_grid(80, 30.0, 4.0));
  }
};

}  // namespace

TEST_CASE("savings grid: pinned points and warp") {
  SavingsGrid g3 = build_savings_grid(3, 1000.0, 150.0);
  CHECK(g3.points(0) == 0.0);
  CHECK(g3.points(1) == doctest::Approx(150.0).epsilon(1e-12));
  CHECK(g3.points(2) == 1000.0);

  SavingsGrid g2 = build_savings_grid(2, 1.0, 0.2);
  CHECK(g2.points(0) == 0.0);
  CHECK(g2.points(1) == 1.0);

  SavingsGrid big = build_savings_grid(2000, 1000.0, 150.0);
  CHECK(big.size() == 2000);
  for (Eigen::Index i = 1; i < big.size(); ++i) CHECK(big.points(i) > big.points(i - 1));
  // u = 0.5 falls between indices 999 and 1000; they bracket the median
  // within one grid step.
  CHECK(big.points(999) <= 150.0 + (big.points(1000) - big.points(999)));
  CHECK(big.points(1000) >= 150.0 - (big.points(1000) - big.points(999)));

  CHECK_THROWS_AS(build_savings_grid(10, 1.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(build_savings_grid(10, 1.0, 0.7), std::domain_error);
  CHECK_THROWS_AS(build_savings_grid(1, 1.0, 0.1), std::domain_error);
}

TEST_CASE("evaluate_policy: knots, constrained region, interpolation, extrapolation") {
  // interpolation mechanics on the two-knot segment {2, 4} -> {1.5, 2.5}
  PolicyTable p;
  p.savings = (Eigen::VectorXd(2) << 0.5, 1.5).finished();
  p.wealth.assign(1, (Eigen::MatrixXd(2, 1) << 2.0, 4.0).finished());
  p.consumption.assign(1, (Eigen::MatrixXd(2, 1) << 1.5, 2.5).finished());
  CHECK(evaluate_policy(p, 3.0, 0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(evaluate_policy(p, 4.0, 0, 0) == 2.5);  // knot value, exact
  // extrapolation with the last segment slope 0.5
  CHECK(evaluate_policy(p, 6.0, 0, 0) == doctest::Approx(3.5).epsilon(1e-14));
  CHECK_THROWS_AS(evaluate_policy(p, 0.0, 0, 0), std::domain_error);

  // EGM-identity table: first knot carries c = w, constrained region below
  PolicyTable q;
  q.savings = (Eigen::VectorXd(3) << 0.0, 1.0, 3.0).finished();
  q.wealth.assign(1, (Eigen::MatrixXd(3, 1) << 1.2, 2.8, 5.5).finished());
  q.consumption.assign(1, (Eigen::MatrixXd(3, 1) << 1.2, 1.8, 2.5).finished());
  CHECK_NOTHROW(q.validate_egm_invariants());
  CHECK(evaluate_policy(q, 1.2, 0, 0) == 1.2);   // first knot: c = w
  CHECK(evaluate_policy(q, 0.6, 0, 0) == 0.6);   // constrained: c = w
  CHECK(evaluate_policy(q, 2.8, 0, 0) == 1.8);   // interior knot, exact
  CHECK(evaluate_policy(q, 5.5, 0, 0) == 2.5);
}

TEST_CASE("euler_rhs: hand-computed single-atom value") {
  ModelContext ctx = deterministic_ctx(0.95, 1.0, 1.0, manual_grid({0.0, 1.0, 3.0}));
  PolicyTable prev = initial_policy(ctx);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  // next wealth 1*1 + 1 = 2, u'(2) = 0.25, rhs = 0.95*0.25
  CHECK(euler_rhs(prev, 1.0, 0, one, ctx) == doctest::Approx(0.2375).epsilon(1e-14));
}

TEST_CASE("euler_rhs: probe landing on a knot uses the knot value exactly") {
  ModelContext ctx = deterministic_ctx(0.9, 1.0, 1.0, manual_grid({0.0, 1.0, 3.0}));
  PolicyTable prev;
  prev.savings = ctx.savings.points;
  prev.wealth.assign(1, (Eigen::MatrixXd(3, 1) << 1.0, 2.0, 4.0).finished());
  prev.consumption.assign(1, (Eigen::MatrixXd(3, 1) << 0.8, 1.5, 2.8).finished());
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  // s = 1 -> next wealth exactly 2.0 -> c = 1.5 bitwise
  double expected = 0.9 * (1.0 / (1.5 * 1.5));
  CHECK(euler_rhs(prev, 1.0, 0, one, ctx) == expected);
}

TEST_CASE("euler_rhs: vertex belief equals the known-kernel computation") {
  SmallModel sm;
  ModelContext learn = sm.context(2, 8);
  ModelContext known = sm.context(1, 8);
  PolicyTable prev_learn = initial_policy(learn);
  PolicyTable prev_known = initial_policy(known);
  Eigen::VectorXd vertex(2);
  vertex << 1.0, 0.0;
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  for (double s : {0.0, 0.7, 5.0, 20.0})
    for (int z = 0; z < 2; ++z)
      CHECK(euler_rhs(prev_learn, s, z, vertex, learn) ==
            euler_rhs(prev_known, s, z, one, known));
}

TEST_CASE("egm_step: continues the hand example and pins the binding knot") {
  ModelContext ctx = deterministic_ctx(0.95, 1.0, 1.0, manual_grid({0.0, 1.0, 3.0}));
  PolicyTable next = egm_step(initial_policy(ctx), ctx);
  double c_tilde = 1.0 / std::sqrt(0.2375);
  CHECK(next.consumption[0](1, 0) == doctest::Approx(c_tilde).epsilon(1e-14));
  CHECK(next.wealth[0](1, 0) == doctest::Approx(1.0 + c_tilde).epsilon(1e-14));
  // s_1 = 0 row: the knot is the binding threshold; below it c = w.
  double w1 = next.wealth[0](0, 0);
  CHECK(w1 == next.consumption[0](0, 0));
  CHECK(evaluate_policy(next, 0.5 * w1, 0, 0) == 0.5 * w1);
  CHECK(evaluate_policy(next, w1, 0, 0) == next.consumption[0](0, 0));
  CHECK_NOTHROW(next.validate_egm_invariants());
}

TEST_CASE("solve: converged table is a fixed point of the sweep") {
  SmallModel sm;
  ModelContext ctx = sm.context();
  SolveResult res = solve(ctx, 1e-8, 10000);
  CHECK(res.report.converged);
  PolicyTable again = egm_step(res.policy, ctx);
  double delta = 0.0;
  for (int z = 0; z < 2; ++z)
    delta = std::max(delta,
                     (again.consumption[z] - res.policy.consumption[z]).cwiseAbs().maxCoeff());
  CHECK(delta < 1e-8);

  // restarting from the converged table stops after one sweep
  SolveResult restart = solve(ctx, 1e-8, 10, res.policy);
  CHECK(restart.report.iterations == 1);
  CHECK(restart.report.converged);
}

TEST_CASE("solve: non-convergence carries the delta history") {
  SmallModel sm;
  ModelContext ctx = sm.context();
  try {
    solve(ctx, 1e-8, 3);
    FAIL("expected convergence_error");
  } catch (const convergence_error& e) {
    CHECK(e.delta_history.size() == 3);
    for (double d : e.delta_history) CHECK(d > 1e-8);
  }
}

TEST_CASE("solve: deterministic case matches the permanent-income slope") {
  // beta R < 1, gamma = 2: asymptotic consumption slope 1 - (beta R)^(1/2)/R.
  const double beta = 0.95, r = 1.02;
  ModelContext ctx = deterministic_ctx(beta, r, 1.0, build_savings_grid(400, 2000.0, 200.0));
  SolveResult res = solve(ctx, 1e-10, 20000);
  double kappa = 1.0 - std::sqrt(beta * r) / r;
  Eigen::Index g = res.policy.knot_count();
  Eigen::Index g0 = static_cast<Eigen::Index>(0.9 * (g - 1));
  double slope = (res.policy.consumption[0](g - 1, 0) - res.policy.consumption[0](g0, 0)) /
                 (res.policy.wealth[0](g - 1, 0) - res.policy.wealth[0](g0, 0));
  CHECK(std::abs(slope - kappa) < 1e-3);
}

TEST_CASE("solve: structural properties of the converged policy") {
  SmallModel sm;
  ModelContext ctx = sm.context();
  SolveResult res = solve(ctx, 1e-8, 10000);
  const PolicyTable& p = res.policy;
  const Eigen::Index g = p.knot_count();

  for (int z = 0; z < 2; ++z) {
    for (Eigen::Index ell = 0; ell < p.belief_count(); ++ell) {
      double prev_slope = std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k + 1 < g; ++k) {
        double dc = p.consumption[z](k + 1, ell) - p.consumption[z](k, ell);
        double dw = p.wealth[z](k + 1, ell) - p.wealth[z](k, ell);
        CHECK(dc >= -1e-10);                       // consumption monotone
        double slope = dc / dw;
        CHECK(slope >= 0.0);                       // slope cap, lower end
        CHECK(slope <= 1.0 + 1e-10);               // slope cap, upper end
        CHECK(slope <= prev_slope + 1e-8);         // concavity
        prev_slope = slope;
      }
      // evaluation monotone on a fine probe
      double lo = 0.5 * p.first_knot(z, ell);
      double hi = p.wealth[z](g - 1, ell);
      double prev_c = 0.0;
      for (int k = 0; k < 1000; ++k) {
        double w = lo + (hi - lo) * k / 999.0;
        double c = evaluate_policy(p, w, z, ell);
        CHECK(c >= prev_c - 1e-10);
        prev_c = c;
      }
    }
  }

  // rho deltas nonincreasing over the last 10 iterations
  const auto& rho = res.report.rho_history;
  REQUIRE(rho.size() >= 11);
  for (std::size_t i = rho.size() - 10; i < rho.size(); ++i)
    CHECK(rho[i] <= rho[i - 1] * (1.0 + 1e-9));

  // Prop.-7 lower bound at every knot when the certificate exists
  auto s_bar = consumption_lower_bound_certificate(ctx.candidates, ctx.shocks, ctx.utility);
  REQUIRE(s_bar.has_value());
  for (int z = 0; z < 2; ++z)
    for (Eigen::Index ell = 0; ell < p.belief_count(); ++ell)
      for (Eigen::Index k = 0; k < g; ++k)
        CHECK(p.consumption[z](k, ell) >= (1.0 - *s_bar) * p.wealth[z](k, ell) - 1e-8);
}

TEST_CASE("solve: income monotonicity") {
  SmallModel base;
  SmallModel rich = base;
  rich.household.y_persistent *= 1.1;
  ModelContext ctx_base = base.context();
  ModelContext ctx_rich = rich.context();
  PolicyTable p_base = solve(ctx_base, 1e-6, 10000).policy;
  PolicyTable p_rich = solve(ctx_rich, 1e-6, 10000).policy;
  Eigen::VectorXd probes(60);
  for (int i = 0; i < 60; ++i) probes(i) = 0.05 + i * 0.6;
  for (int z = 0; z < 2; ++z)
    for (Eigen::Index ell = 0; ell < p_base.belief_count(); ++ell)
      for (Eigen::Index i = 0; i < probes.size(); ++i)
        CHECK(evaluate_policy(p_rich, probes(i), z, ell) >=
              evaluate_policy(p_base, probes(i), z, ell) - 1e-6);
}

TEST_CASE("solve: vertex prior matches the known-kernel solve") {
  SmallModel sm;
  ModelContext learn = sm.context(2, 8);
  ModelContext known = sm.context(1, 8);
  PolicyTable p_learn = solve(learn, 1e-10, 20000).policy;
  PolicyTable p_known = solve(known, 1e-10, 20000).policy;
  Eigen::VectorXd vertex(2);
  vertex << 1.0, 0.0;
  Eigen::Index ell = project_to_grid(learn.beliefs, vertex);
  CHECK(learn.beliefs.point(ell)(0) == 1.0);
  for (int z = 0; z < 2; ++z)
    for (Eigen::Index k = 0; k < p_learn.knot_count(); ++k) {
      CHECK(std::abs(p_learn.consumption[z](k, ell) - p_known.consumption[z](k, 0)) < 1e-6);
      CHECK(std::abs(p_learn.wealth[z](k, ell) - p_known.wealth[z](k, 0)) < 1e-6);
    }
}

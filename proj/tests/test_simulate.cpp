#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "egml/config.hpp"
#include "egml/errors.hpp"
#include "egml/rng.hpp"
#include "egml/simulate.hpp"

using namespace egml;

namespace {

// Small learning instance solved once and reused across the panel tests.
struct SimFixture {
  CalibratedHouseholdModel household;
  CandidateSet candidates;
  ModelContext ctx;
  PolicyTable policy;

  static CalibratedHouseholdModel make_household() {
    CalibratedHouseholdModel h;
    h.beta = 0.9;
    h.gamma = 2.0;
    h.alpha_portfolio = 0.5;
    h.log_rf = 0.01;
    h.mu = (Eigen::VectorXd(2) << 0.02, -0.02).finished();
    h.sigma = (Eigen::VectorXd(2) << 0.10, 0.15).finished();
    h.y_persistent = (Eigen::VectorXd(2) << 1.0, 0.4).finished();
    h.sigma_y2 = 0.09;
    h.state_order = {0, 1};
    return h;
  }

  static CandidateSet make_candidates() {
    CandidateSet c;
    Eigen::MatrixXd pa(2, 2), pb(2, 2);
    pa << 0.9, 0.1, 0.4, 0.6;
    pb << 0.7, 0.3, 0.2, 0.8;
    c.matrices = {pa, pb};
    c.state_order = {0, 1};
    return c;
  }

  static ModelContext make_ctx() {
    QuadratureRule r3 = gauss_hermite_normal(3);
    StateShockMap shocks = discretize_model(make_household(), r3, r3);
    return make_model_context(CrraUtility(2.0), make_candidates(), std::move(shocks),
                              SimplexGrid(2, 10), build_savings_grid(80, 30.0, 4.0));
  }

  SimFixture()
      : household(make_household()),
        candidates(make_candidates()),
        ctx(make_ctx()),
        policy(solve(ctx, 1e-8, 10000).policy) {}
};

const SimFixture& fixture() {
  static SimFixture f;
  return f;
}

PanelConfig base_config() {
  PanelConfig cfg;
  cfg.n_paths = 2000;
  cfg.horizon = 120;
  cfg.prior = (Eigen::VectorXd(2) << 0.5, 0.5).finished();
  cfg.initial_wealth = 2.0;
  cfg.true_kernel_index = 1;
  cfg.seed = 777;
  return cfg;
}

}  // namespace

TEST_CASE("stationary distribution") {
  Eigen::MatrixXd uniform(2, 2);
  uniform << 0.5, 0.5, 0.5, 0.5;
  Eigen::VectorXd pi = stationary_distribution(uniform);
  CHECK(pi(0) == doctest::Approx(0.5).epsilon(1e-12));

  Eigen::MatrixXd p2(2, 2);
  p2 << 0.9855, 0.0145, 0.0968, 0.9032;
  Eigen::VectorXd pi2 = stationary_distribution(p2);
  CHECK(pi2(0) == doctest::Approx(0.0968 / (0.0968 + 0.0145)).epsilon(1e-10));
  CHECK(pi2.sum() == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(stationary_distribution(Eigen::MatrixXd::Identity(2, 2)), std::domain_error);
}

TEST_CASE("single path, single period: myopic policy consumes initial wealth") {
  const SimFixture& f = fixture();
  PolicyTable myopic = initial_policy(f.ctx);
  PanelConfig cfg = base_config();
  cfg.n_paths = 1;
  cfg.horizon = 1;
  cfg.initial_state = 0;
  cfg.initial_wealth = 2.5;
  PathStatistics st = simulate_panel(myopic, f.ctx, f.household, cfg);
  CHECK(st.mean_consumption(0) == 2.5);
  CHECK(st.mean_savings(0) == 0.0);
  CHECK(st.state_frequency(0, 0) == 1.0);
}

TEST_CASE("budget identity and feasibility hold path by path") {
  const SimFixture& f = fixture();
  PanelConfig cfg = base_config();
  cfg.n_paths = 1;
  cfg.horizon = 40;
  cfg.initial_state = 1;
  PathStatistics st = simulate_panel(f.policy, f.ctx, f.household, cfg);

  // replay the documented draw layout: per period one state uniform and two
  // Box-Muller normals
  DrawStream stream(cfg.seed, 0);
  int z = 1;
  double w = cfg.initial_wealth;
  Eigen::VectorXd theta = cfg.prior;
  for (int t = 0; t < cfg.horizon; ++t) {
    Eigen::Index ell = project_to_grid(f.ctx.beliefs, theta);
    double c = evaluate_policy(f.policy, w, z, ell);
    CHECK(c > 0.0);
    CHECK(c <= w);
    CHECK(st.mean_consumption(t) == c);        // K = 1: bitwise replay
    CHECK(st.mean_savings(t) == w - c);
    if (t + 1 == cfg.horizon) break;
    double u = stream.uniform();
    const Eigen::MatrixXd& ptrue = f.ctx.candidates.matrices[1];
    double acc = 0.0;
    int zn = 1;
    for (int k = 0; k < 2; ++k) {
      acc += ptrue(z, k);
      if (u <= acc) {
        zn = k;
        break;
      }
    }
    double er = stream.normal();
    double ey = stream.normal();
    double r = f.household.gross_return(zn, er);
    double y = f.household.income(zn, ey);
    theta = bayes_update(f.ctx.candidates, theta, z, zn);
    double w_next = r * (w - c) + y;
    CHECK(w_next == r * (w - c) + y);          // identity, exactly as computed
    w = w_next;
    z = zn;
  }
}

TEST_CASE("bit-identical statistics across runs and thread counts") {
  const SimFixture& f = fixture();
  PanelConfig cfg = base_config();
  cfg.n_paths = 700;  // not a multiple of the chunk size
  cfg.horizon = 30;
  PathStatistics a = simulate_panel(f.policy, f.ctx, f.household, cfg);
  PathStatistics b = simulate_panel(f.policy, f.ctx, f.household, cfg);
  CHECK(a.mean_consumption == b.mean_consumption);
  CHECK(a.consumption_volatility == b.consumption_volatility);
  CHECK(a.mean_posterior == b.mean_posterior);

  setenv("EGML_THREADS", "3", 1);
  PathStatistics c = simulate_panel(f.policy, f.ctx, f.household, cfg);
  setenv("EGML_THREADS", "1", 1);
  PathStatistics d = simulate_panel(f.policy, f.ctx, f.household, cfg);
  unsetenv("EGML_THREADS");
  CHECK(a.mean_consumption == c.mean_consumption);
  CHECK(a.mean_savings == c.mean_savings);
  CHECK(a.se_consumption == c.se_consumption);
  CHECK(a.mean_posterior == c.mean_posterior);
  CHECK(a.mean_consumption == d.mean_consumption);
}

TEST_CASE("vertex prior with learning reproduces frozen beliefs bit-exactly") {
  const SimFixture& f = fixture();
  PanelConfig cfg = base_config();
  cfg.n_paths = 500;
  cfg.horizon = 60;
  cfg.prior = (Eigen::VectorXd(2) << 0.0, 1.0).finished();  // vertex on the true kernel
  PathStatistics learn = simulate_panel(f.policy, f.ctx, f.household, cfg);
  cfg.freeze_beliefs = true;
  PathStatistics frozen = simulate_panel(f.policy, f.ctx, f.household, cfg);
  CHECK(learn.mean_consumption == frozen.mean_consumption);
  CHECK(learn.mean_savings == frozen.mean_savings);
  CHECK(learn.consumption_volatility == frozen.consumption_volatility);
  CHECK(learn.mean_posterior == frozen.mean_posterior);
  CHECK(learn.state_frequency == frozen.state_frequency);
}

TEST_CASE("posterior martingale under the subjective kernel") {
  const SimFixture& f = fixture();
  PanelConfig cfg = base_config();
  cfg.n_paths = 4000;
  cfg.horizon = 30;
  cfg.dgp = DataGeneratingProcess::kSubjective;
  PathStatistics st = simulate_panel(f.policy, f.ctx, f.household, cfg);
  int last = cfg.horizon - 1;
  for (int i = 0; i < 2; ++i) {
    double drift = std::abs(st.mean_posterior(last, i) - cfg.prior(i));
    CHECK(drift <= 3.0 * st.se_posterior(last, i));
  }
}

TEST_CASE("posterior concentrates on the true kernel") {
  const SimFixture& f = fixture();
  PanelConfig cfg = base_config();
  cfg.n_paths = 2000;
  cfg.horizon = 240;
  PathStatistics st = simulate_panel(f.policy, f.ctx, f.household, cfg);
  int last = cfg.horizon - 1;
  double gain = st.mean_posterior(last, 1) - cfg.prior(1);
  CHECK(gain >= 5.0 * st.se_posterior(last, 1));
  // above its starting value from t = 24 on, rising on average early
  for (int t = 24; t < cfg.horizon; ++t)
    CHECK(st.mean_posterior(t, 1) > st.mean_posterior(0, 1));
  CHECK(st.mean_posterior(119, 1) > st.mean_posterior(24, 1));
  // mean posterior stays on the simplex
  for (int t = 0; t < cfg.horizon; ++t)
    CHECK(std::abs(st.mean_posterior.row(t).sum() - 1.0) <= 1e-10);
}

TEST_CASE("Rao-Blackwellized means agree with raw means within Monte Carlo error") {
  const SimFixture& f = fixture();
  PanelConfig cfg = base_config();
  cfg.n_paths = 3000;
  cfg.horizon = 24;
  PathStatistics raw = simulate_panel(f.policy, f.ctx, f.household, cfg);
  cfg.rao_blackwell = true;
  PathStatistics rb = simulate_panel(f.policy, f.ctx, f.household, cfg);
  for (int t = 1; t < cfg.horizon; t += 5) {
    double tol = 4.0 * (raw.se_consumption(t) + rb.se_consumption(t));
    CHECK(std::abs(raw.mean_consumption(t) - rb.mean_consumption(t)) <= tol);
  }
  // conditioning on the previous period cannot raise the estimator variance
  double se_raw_sum = 0.0, se_rb_sum = 0.0;
  for (int t = 1; t < cfg.horizon; ++t) {
    se_raw_sum += raw.se_consumption(t);
    se_rb_sum += rb.se_consumption(t);
  }
  CHECK(se_rb_sum < se_raw_sum);
}

TEST_CASE("paired comparison with identical policies is exactly zero") {
  const SimFixture& f = fixture();
  // learning side also N = 1: same policy, same kernel
  QuadratureRule r3 = gauss_hermite_normal(3);
  CandidateSet single;
  single.matrices = {f.candidates.matrices[1]};
  single.state_order = {0, 1};
  StateShockMap shocks = discretize_model(f.household, r3, r3);
  ModelContext ctx1 = make_model_context(CrraUtility(2.0), single, std::move(shocks),
                                         SimplexGrid(1, 10), build_savings_grid(80, 30.0, 4.0));
  PolicyTable p1 = solve(ctx1, 1e-8, 10000).policy;
  PanelConfig cfg = base_config();
  cfg.n_paths = 400;
  cfg.horizon = 50;
  cfg.prior = Eigen::VectorXd::Ones(1);
  cfg.true_kernel_index = 0;
  PairedPathStatistics st =
      compare_learning_benchmark(p1, ctx1, p1, ctx1, f.household, cfg);
  CHECK(st.mean_diff_consumption.cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.mean_diff_savings.cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.learning.mean_consumption == st.benchmark.mean_consumption);
}

TEST_CASE("paired comparison validates the benchmark kernel") {
  const SimFixture& f = fixture();
  QuadratureRule r3 = gauss_hermite_normal(3);
  CandidateSet wrong;
  wrong.matrices = {f.candidates.matrices[0]};  // not the true kernel (index 1)
  wrong.state_order = {0, 1};
  StateShockMap shocks = discretize_model(f.household, r3, r3);
  ModelContext ctx_wrong = make_model_context(CrraUtility(2.0), wrong, std::move(shocks),
                                              SimplexGrid(1, 10), build_savings_grid(80, 30.0, 4.0));
  PolicyTable p_wrong = solve(ctx_wrong, 1e-6, 10000).policy;
  PanelConfig cfg = base_config();
  cfg.n_paths = 10;
  cfg.horizon = 5;
  CHECK_THROWS_AS(
      compare_learning_benchmark(f.policy, f.ctx, p_wrong, ctx_wrong, f.household, cfg),
      config_error);
}

TEST_CASE("panel config validation") {
  const SimFixture& f = fixture();
  PanelConfig cfg = base_config();
  cfg.n_paths = 0;
  CHECK_THROWS_AS(simulate_panel(f.policy, f.ctx, f.household, cfg), std::domain_error);
  cfg = base_config();
  cfg.initial_wealth = 0.0;
  CHECK_THROWS_AS(simulate_panel(f.policy, f.ctx, f.household, cfg), std::domain_error);
  cfg = base_config();
  cfg.prior = (Eigen::VectorXd(2) << 0.7, 0.7).finished();
  CHECK_THROWS_AS(simulate_panel(f.policy, f.ctx, f.household, cfg), std::domain_error);
  cfg = base_config();
  cfg.true_kernel_index = 5;
  CHECK_THROWS_AS(simulate_panel(f.policy, f.ctx, f.household, cfg), std::domain_error);
}

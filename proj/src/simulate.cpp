#include "egml/simulate.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "egml/errors.hpp"
#include "egml/parallel.hpp"
#include "egml/rng.hpp"
#include "egml/stability.hpp"

namespace egml {

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p, double tol, long max_iter) {
  if (p.rows() != p.cols() || p.rows() < 1)
    throw std::domain_error("stationary_distribution: matrix must be square");
  if (!check_irreducible(p))
    throw std::domain_error("stationary_distribution: chain is reducible");
  const Eigen::Index m = p.rows();
  // Power iteration on (P + I)/2: same stationary vector, never periodic.
  Eigen::MatrixXd b = 0.5 * (p + Eigen::MatrixXd::Identity(m, m));
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  for (long it = 0; it < max_iter; ++it) {
    Eigen::VectorXd next = b.transpose() * pi;
    next /= next.sum();
    double diff = (next - pi).cwiseAbs().maxCoeff();
    pi = next;
    if (diff <= tol) return pi;
  }
  throw numerical_error("stationary_distribution: power iteration did not converge");
}

namespace {

constexpr long kChunk = 256;

template <typename Derived>
int draw_state(double u, const Eigen::MatrixBase<Derived>& row) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < row.size(); ++k) {
    acc += row(k);
    if (u <= acc) return static_cast<int>(k);
  }
  return static_cast<int>(row.size() - 1);
}

struct Sums {
  Eigen::VectorXd c1, c2, c3, c4, s1, s2;
  Eigen::MatrixXd th1, th2, zc;
  Eigen::VectorXd rb_c1, rb_c2, rb_s1, rb_s2;

  void init(int t, int n, int m, bool rb) {
    c1.setZero(t); c2.setZero(t); c3.setZero(t); c4.setZero(t);
    s1.setZero(t); s2.setZero(t);
    th1.setZero(t, n); th2.setZero(t, n); zc.setZero(t, m);
    if (rb) { rb_c1.setZero(t); rb_c2.setZero(t); rb_s1.setZero(t); rb_s2.setZero(t); }
  }
  void add(const Sums& o, bool rb) {
    c1 += o.c1; c2 += o.c2; c3 += o.c3; c4 += o.c4; s1 += o.s1; s2 += o.s2;
    th1 += o.th1; th2 += o.th2; zc += o.zc;
    if (rb) { rb_c1 += o.rb_c1; rb_c2 += o.rb_c2; rb_s1 += o.rb_s1; rb_s2 += o.rb_s2; }
  }
  void record(int t, double c, double s, const Eigen::VectorXd& theta, int z) {
    c1(t) += c; double cc = c * c; c2(t) += cc; c3(t) += cc * c; c4(t) += cc * cc;
    s1(t) += s; s2(t) += s * s;
    th1.row(t) += theta.transpose();
    th2.row(t) += theta.array().square().matrix().transpose();
    zc(t, z) += 1.0;
  }
  void record_rb(int t, double ec, double es) {
    rb_c1(t) += ec; rb_c2(t) += ec * ec; rb_s1(t) += es; rb_s2(t) += es * es;
  }
};

struct EconomyState {
  const PolicyTable* policy;
  const ModelContext* ctx;
  Eigen::VectorXd theta;
  double wealth;
  bool freeze;
  bool project_and_propagate;
};

// One period of one economy: look up consumption, then (optionally) report
// the Rao-Blackwell one-step conditional means before the transition.
double economy_consumption(EconomyState& e, int z) {
  Eigen::Index ell = project_to_grid(e.ctx->beliefs, e.theta);
  double c = evaluate_policy(*e.policy, e.wealth, z, ell);
  if (!(c > 0.0 && c <= e.wealth))
    throw numerical_error("simulate: consumption left (0, w]");
  return c;
}

void economy_rb_means(const EconomyState& e, int z, double savings,
                      const Eigen::RowVectorXd& true_row, double& ec, double& es) {
  ec = 0.0;
  es = 0.0;
  const ModelContext& ctx = *e.ctx;
  for (int zn = 0; zn < ctx.n_states(); ++zn) {
    double weight = true_row(zn);
    if (weight == 0.0) continue;
    Eigen::VectorXd post = e.freeze ? e.theta : bayes_update(ctx.candidates, e.theta, z, zn);
    Eigen::Index ell = project_to_grid(ctx.beliefs, post);
    const StateAtoms& at = ctx.shocks.states[zn];
    double inner_c = 0.0, inner_s = 0.0;
    for (Eigen::Index a = 0; a < at.size(); ++a) {
      double w_next = at.gross_return(a) * savings + at.income(a);
      double c_next = evaluate_policy(*e.policy, w_next, zn, ell);
      inner_c += at.prob(a) * c_next;
      inner_s += at.prob(a) * (w_next - c_next);
    }
    ec += weight * inner_c;
    es += weight * inner_s;
  }
}

void economy_transition(EconomyState& e, int z, int zn, double r, double y, double c) {
  if (!e.freeze) {
    Eigen::VectorXd post = bayes_update(e.ctx->candidates, e.theta, z, zn);
    if (e.project_and_propagate)
      e.theta = e.ctx->beliefs.point(project_to_grid(e.ctx->beliefs, post));
    else
      e.theta = post;
  }
  e.wealth = r * (e.wealth - c) + y;
}

void validate_panel_config(const PanelConfig& cfg, const ModelContext& ctx,
                           const CalibratedHouseholdModel& household) {
  if (cfg.n_paths < 1 || cfg.horizon < 1)
    throw std::domain_error("simulate: need n_paths >= 1 and horizon >= 1");
  validate_belief(cfg.prior);
  if (cfg.prior.size() != ctx.candidates.n_candidates())
    throw std::domain_error("simulate: prior dimension mismatch");
  if (!(cfg.initial_wealth > 0.0))
    throw std::domain_error("simulate: initial wealth must be positive");
  if (cfg.true_kernel_index < 0 || cfg.true_kernel_index >= ctx.candidates.n_candidates())
    throw std::domain_error("simulate: true_kernel_index out of range");
  if (cfg.initial_state && (*cfg.initial_state < 0 || *cfg.initial_state >= ctx.n_states()))
    throw std::domain_error("simulate: initial_state out of range");
  if (household.n_states() != ctx.n_states())
    throw std::domain_error("simulate: household model state mismatch");
}

PathStatistics finalize(const Sums& total, long k, int t_count, bool rb) {
  PathStatistics st;
  const double kd = static_cast<double>(k);
  const int n = static_cast<int>(total.th1.cols());
  const int m = static_cast<int>(total.zc.cols());
  st.mean_consumption.resize(t_count); st.se_consumption.resize(t_count);
  st.mean_savings.resize(t_count); st.se_savings.resize(t_count);
  st.consumption_volatility.resize(t_count); st.se_volatility.resize(t_count);
  st.mean_posterior.resize(t_count, n); st.se_posterior.resize(t_count, n);
  st.state_frequency.resize(t_count, m);
  st.se_state_frequency.resize(t_count, m);
  for (int t = 0; t < t_count; ++t) {
    double m1 = total.c1(t) / kd, m2 = total.c2(t) / kd;
    double m3 = total.c3(t) / kd, m4 = total.c4(t) / kd;
    double var = m2 - m1 * m1;
    if (var < -1e-12) throw numerical_error("simulate: negative consumption variance");
    if (var < 0.0) var = 0.0;
    double sm1 = total.s1(t) / kd, sm2 = total.s2(t) / kd;
    double svar = std::max(0.0, sm2 - sm1 * sm1);

    bool use_rb = rb && t > 0;
    double mean_c = use_rb ? total.rb_c1(t) / kd : m1;
    double var_c_est = use_rb ? std::max(0.0, total.rb_c2(t) / kd - mean_c * mean_c) : var;
    double mean_s = use_rb ? total.rb_s1(t) / kd : sm1;
    double var_s_est = use_rb ? std::max(0.0, total.rb_s2(t) / kd - mean_s * mean_s) : svar;

    st.mean_consumption(t) = mean_c;
    st.se_consumption(t) = std::sqrt(var_c_est / kd);
    st.mean_savings(t) = mean_s;
    st.se_savings(t) = std::sqrt(var_s_est / kd);

    double vol = std::sqrt(var);
    st.consumption_volatility(t) = vol;
    double mu4 = m4 - 4.0 * m3 * m1 + 6.0 * m2 * m1 * m1 - 3.0 * m1 * m1 * m1 * m1;
    double se_var = std::sqrt(std::max(0.0, mu4 - var * var) / kd);
    st.se_volatility(t) = vol > 0.0 ? se_var / (2.0 * vol) : 0.0;

    for (int i = 0; i < n; ++i) {
      double tm = total.th1(t, i) / kd;
      double tv = std::max(0.0, total.th2(t, i) / kd - tm * tm);
      st.mean_posterior(t, i) = tm;
      st.se_posterior(t, i) = std::sqrt(tv / kd);
    }
    for (int z = 0; z < m; ++z) {
      double f = total.zc(t, z) / kd;
      st.state_frequency(t, z) = f;
      st.se_state_frequency(t, z) = std::sqrt(std::max(0.0, f * (1.0 - f)) / kd);
    }
  }
  return st;
}

}  // namespace

PathStatistics simulate_panel(const PolicyTable& policy, const ModelContext& ctx,
                              const CalibratedHouseholdModel& household,
                              const PanelConfig& cfg) {
  validate_panel_config(cfg, ctx, household);
  const int t_count = cfg.horizon;
  const int n = ctx.candidates.n_candidates();
  const int m = ctx.n_states();
  const Eigen::MatrixXd& p_true = ctx.candidates.matrices[cfg.true_kernel_index];
  Eigen::VectorXd stationary;
  if (!cfg.initial_state) stationary = stationary_distribution(p_true);

  const long n_chunks = (cfg.n_paths + kChunk - 1) / kChunk;
  std::vector<Sums> chunks(n_chunks);
  parallel_for(static_cast<std::size_t>(n_chunks), [&](std::size_t ci) {
    Sums& sums = chunks[ci];
    sums.init(t_count, n, m, cfg.rao_blackwell);
    const long lo = static_cast<long>(ci) * kChunk;
    const long hi = std::min(cfg.n_paths, lo + kChunk);
    for (long path = lo; path < hi; ++path) {
      DrawStream stream(cfg.seed, static_cast<std::uint64_t>(path));
      int z = cfg.initial_state ? *cfg.initial_state : draw_state(stream.uniform(), stationary);
      EconomyState econ{&policy, &ctx, cfg.prior, cfg.initial_wealth, cfg.freeze_beliefs,
                        cfg.project_and_propagate};
      for (int t = 0;; ++t) {
        double c = economy_consumption(econ, z);
        sums.record(t, c, econ.wealth - c, econ.theta, z);
        if (t + 1 == t_count) break;
        if (cfg.rao_blackwell) {
          double ec, es;
          economy_rb_means(econ, z, econ.wealth - c, p_true.row(z), ec, es);
          sums.record_rb(t + 1, ec, es);
        }
        Eigen::RowVectorXd row(m);
        if (cfg.dgp == DataGeneratingProcess::kTrueKernel) {
          row = p_true.row(z);
        } else {
          for (int zn = 0; zn < m; ++zn)
            row(zn) = mixture_weight(ctx.candidates, econ.theta, z, zn);
        }
        int zn = draw_state(stream.uniform(), row);
        double er = stream.normal();
        double ey = stream.normal();
        double r = household.gross_return(zn, er);
        double y = household.income(zn, ey);
        economy_transition(econ, z, zn, r, y, c);
        z = zn;
      }
    }
  });
  Sums total;
  total.init(t_count, n, m, cfg.rao_blackwell);
  for (const Sums& s : chunks) total.add(s, cfg.rao_blackwell);
  return finalize(total, cfg.n_paths, t_count, cfg.rao_blackwell);
}

PairedPathStatistics compare_learning_benchmark(
    const PolicyTable& learning_policy, const ModelContext& learning_ctx,
    const PolicyTable& benchmark_policy, const ModelContext& benchmark_ctx,
    const CalibratedHouseholdModel& household, const PanelConfig& cfg) {
  validate_panel_config(cfg, learning_ctx, household);
  if (cfg.dgp != DataGeneratingProcess::kTrueKernel)
    throw std::domain_error("compare_learning_benchmark: paired runs use the true kernel");
  if (benchmark_ctx.candidates.n_candidates() != 1)
    throw config_error("compare_learning_benchmark: benchmark must be solved with N = 1");
  const Eigen::MatrixXd& p_true = learning_ctx.candidates.matrices[cfg.true_kernel_index];
  if (benchmark_ctx.candidates.matrices[0] != p_true)
    throw config_error("compare_learning_benchmark: benchmark kernel differs from the true kernel");

  const int t_count = cfg.horizon;
  const int n = learning_ctx.candidates.n_candidates();
  const int m = learning_ctx.n_states();
  Eigen::VectorXd stationary;
  if (!cfg.initial_state) stationary = stationary_distribution(p_true);
  const Eigen::VectorXd bench_prior = Eigen::VectorXd::Ones(1);

  struct PairedSums {
    Sums learn, bench;
    Eigen::VectorXd dc1, dc2, ds1, ds2;
  };
  const long n_chunks = (cfg.n_paths + kChunk - 1) / kChunk;
  std::vector<PairedSums> chunks(n_chunks);
  parallel_for(static_cast<std::size_t>(n_chunks), [&](std::size_t ci) {
    PairedSums& ps = chunks[ci];
    ps.learn.init(t_count, n, m, cfg.rao_blackwell);
    ps.bench.init(t_count, 1, m, cfg.rao_blackwell);
    ps.dc1.setZero(t_count); ps.dc2.setZero(t_count);
    ps.ds1.setZero(t_count); ps.ds2.setZero(t_count);
    const long lo = static_cast<long>(ci) * kChunk;
    const long hi = std::min(cfg.n_paths, lo + kChunk);
    for (long path = lo; path < hi; ++path) {
      DrawStream stream(cfg.seed, static_cast<std::uint64_t>(path));
      int z = cfg.initial_state ? *cfg.initial_state : draw_state(stream.uniform(), stationary);
      EconomyState learn{&learning_policy, &learning_ctx, cfg.prior, cfg.initial_wealth,
                         cfg.freeze_beliefs, cfg.project_and_propagate};
      EconomyState bench{&benchmark_policy, &benchmark_ctx, bench_prior, cfg.initial_wealth,
                         true, false};
      for (int t = 0;; ++t) {
        double cl = economy_consumption(learn, z);
        double cb = economy_consumption(bench, z);
        ps.learn.record(t, cl, learn.wealth - cl, learn.theta, z);
        ps.bench.record(t, cb, bench.wealth - cb, bench.theta, z);
        double dc = cl - cb;
        double ds = (learn.wealth - cl) - (bench.wealth - cb);
        ps.dc1(t) += dc; ps.dc2(t) += dc * dc;
        ps.ds1(t) += ds; ps.ds2(t) += ds * ds;
        if (t + 1 == t_count) break;
        if (cfg.rao_blackwell) {
          double ec, es;
          economy_rb_means(learn, z, learn.wealth - cl, p_true.row(z), ec, es);
          ps.learn.record_rb(t + 1, ec, es);
          economy_rb_means(bench, z, bench.wealth - cb, p_true.row(z), ec, es);
          ps.bench.record_rb(t + 1, ec, es);
        }
        int zn = draw_state(stream.uniform(), p_true.row(z));
        double er = stream.normal();
        double ey = stream.normal();
        double r = household.gross_return(zn, er);
        double y = household.income(zn, ey);
        economy_transition(learn, z, zn, r, y, cl);
        economy_transition(bench, z, zn, r, y, cb);
        z = zn;
      }
    }
  });

  Sums tl, tb;
  tl.init(t_count, n, m, cfg.rao_blackwell);
  tb.init(t_count, 1, m, cfg.rao_blackwell);
  Eigen::VectorXd dc1 = Eigen::VectorXd::Zero(t_count), dc2 = Eigen::VectorXd::Zero(t_count);
  Eigen::VectorXd ds1 = Eigen::VectorXd::Zero(t_count), ds2 = Eigen::VectorXd::Zero(t_count);
  for (const PairedSums& ps : chunks) {
    tl.add(ps.learn, cfg.rao_blackwell);
    tb.add(ps.bench, cfg.rao_blackwell);
    dc1 += ps.dc1; dc2 += ps.dc2; ds1 += ps.ds1; ds2 += ps.ds2;
  }
  PairedPathStatistics out;
  out.learning = finalize(tl, cfg.n_paths, t_count, cfg.rao_blackwell);
  out.benchmark = finalize(tb, cfg.n_paths, t_count, cfg.rao_blackwell);
  const double kd = static_cast<double>(cfg.n_paths);
  out.mean_diff_consumption = dc1 / kd;
  out.mean_diff_savings = ds1 / kd;
  out.se_diff_consumption.resize(t_count);
  out.se_diff_savings.resize(t_count);
  for (int t = 0; t < t_count; ++t) {
    double vc = std::max(0.0, dc2(t) / kd - out.mean_diff_consumption(t) * out.mean_diff_consumption(t));
    double vs = std::max(0.0, ds2(t) / kd - out.mean_diff_savings(t) * out.mean_diff_savings(t));
    out.se_diff_consumption(t) = std::sqrt(vc / kd);
    out.se_diff_savings(t) = std::sqrt(vs / kd);
  }
  return out;
}

}  // namespace egml

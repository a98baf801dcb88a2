#include "egml/solver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "egml/errors.hpp"
#include "egml/parallel.hpp"

namespace egml {

SavingsGrid build_savings_grid(int count, double s_max, double s_median) {
  if (count < 2) throw std::domain_error("build_savings_grid: need at least 2 points");
  if (!(s_max > 0.0) || !(s_median > 0.0) || !(s_median < s_max))
    throw std::domain_error("build_savings_grid: need 0 < s_median < s_max");
  if (s_median >= 0.5 * s_max)
    throw std::domain_error(
        "build_savings_grid: s_median >= s_max/2 makes the exponential warp "
        "infeasible (lambda <= 0); use a linear grid");
  // s(u) = s_max (e^{lambda u} - 1)/(e^{lambda} - 1); pinning s(1/2) =
  // s_median gives lambda = 2 log(s_max/s_median - 1).
  const double lambda = 2.0 * std::log(s_max / s_median - 1.0);
  const double denom = std::expm1(lambda);
  SavingsGrid grid;
  grid.points.resize(count);
  grid.points(0) = 0.0;
  for (int g = 1; g + 1 < count; ++g) {
    double u = static_cast<double>(g) / (count - 1);
    grid.points(g) = s_max * std::expm1(lambda * u) / denom;
  }
  grid.points(count - 1) = s_max;
  for (int g = 1; g < count; ++g)
    if (!(grid.points(g) > grid.points(g - 1)))
      throw std::domain_error("build_savings_grid: grid is not strictly increasing");
  return grid;
}

ModelContext make_model_context(CrraUtility utility, CandidateSet candidates,
                                StateShockMap shocks, SimplexGrid beliefs,
                                SavingsGrid savings) {
  candidates.validate();
  shocks.validate(utility);
  if (shocks.n_states() != candidates.n_states())
    throw std::domain_error("make_model_context: shocks/candidates state mismatch");
  if (beliefs.n_candidates() != candidates.n_candidates())
    throw std::domain_error("make_model_context: belief grid dimension mismatch");

  ModelContext ctx{std::move(utility), std::move(candidates), std::move(shocks),
                   std::move(beliefs),  std::move(savings),   {},
                   {},                  {},                   {}};
  const int m = ctx.n_states();
  const Eigen::Index ell_count = ctx.beliefs.size();

  ctx.mixture_row.resize(m);
  for (int z = 0; z < m; ++z) {
    ctx.mixture_row[z].resize(ell_count, m);
    for (Eigen::Index ell = 0; ell < ell_count; ++ell) {
      Eigen::VectorXd theta = ctx.beliefs.point(ell);
      for (int zn = 0; zn < m; ++zn)
        ctx.mixture_row[z](ell, zn) = mixture_weight(ctx.candidates, theta, z, zn);
    }
  }

  ctx.posterior_index.resize(static_cast<std::size_t>(m) * m);
  for (int z = 0; z < m; ++z)
    for (int zn = 0; zn < m; ++zn) {
      Eigen::VectorXi& idx = ctx.posterior_index[static_cast<std::size_t>(z) * m + zn];
      idx.resize(ell_count);
      for (Eigen::Index ell = 0; ell < ell_count; ++ell) {
        if (ctx.mixture_row[z](ell, zn) > 0.0) {
          Eigen::VectorXd post = bayes_update(ctx.candidates, ctx.beliefs.point(ell), z, zn);
          idx(ell) = static_cast<int>(project_to_grid(ctx.beliefs, post));
        } else {
          idx(ell) = -1;
        }
      }
    }

  ctx.needed_posteriors.assign(m, {});
  ctx.posterior_slot.assign(m, Eigen::VectorXi::Constant(ell_count, -1));
  for (int zn = 0; zn < m; ++zn) {
    std::vector<bool> used(ell_count, false);
    for (int z = 0; z < m; ++z) {
      const Eigen::VectorXi& idx = ctx.posterior_index[static_cast<std::size_t>(z) * m + zn];
      for (Eigen::Index ell = 0; ell < ell_count; ++ell)
        if (idx(ell) >= 0) used[idx(ell)] = true;
    }
    for (Eigen::Index ell = 0; ell < ell_count; ++ell)
      if (used[ell]) {
        ctx.posterior_slot[zn](ell) = static_cast<int>(ctx.needed_posteriors[zn].size());
        ctx.needed_posteriors[zn].push_back(static_cast<int>(ell));
      }
  }
  return ctx;
}

namespace {

std::atomic<long> g_clamp_count{0};

// Shared interpolation core so every evaluation path produces identical bits.
inline double interp_segment(double wl, double wr, double cl, double cr, double w) {
  return cl + (cr - cl) * ((w - wl) / (wr - wl));
}

inline double eval_column(const double* wk, const double* ck, Eigen::Index n, double w,
                          Eigen::Index seg_hint = -1) {
  if (w <= wk[0]) return w;
  if (w >= wk[n - 1]) {
    if (w == wk[n - 1]) return ck[n - 1];
    double c = interp_segment(wk[n - 2], wk[n - 1], ck[n - 2], ck[n - 1], w);
    if (c > w) {
      g_clamp_count.fetch_add(1, std::memory_order_relaxed);
      c = w;
    }
    return c;
  }
  Eigen::Index j;
  if (seg_hint >= 1 && seg_hint < n && wk[seg_hint - 1] < w && w <= wk[seg_hint]) {
    j = seg_hint;
  } else {
    j = std::lower_bound(wk, wk + n, w) - wk;  // smallest j with wk[j] >= w
  }
  if (wk[j] == w) return ck[j];
  return interp_segment(wk[j - 1], wk[j], ck[j - 1], ck[j], w);
}

}  // namespace

double evaluate_policy(const PolicyTable& p, double w, int z, Eigen::Index ell) {
  if (!(w > 0.0)) throw std::domain_error("evaluate_policy: wealth must be positive");
  const Eigen::MatrixXd& wk = p.wealth[z];
  const Eigen::MatrixXd& ck = p.consumption[z];
  return eval_column(wk.col(ell).data(), ck.col(ell).data(), wk.rows(), w);
}

long evaluate_clamp_count() { return g_clamp_count.load(std::memory_order_relaxed); }

PolicyTable initial_policy(const ModelContext& ctx) {
  PolicyTable p;
  p.savings = ctx.savings.points;
  const int m = ctx.n_states();
  const Eigen::Index g = ctx.savings.size();
  const Eigen::Index l = ctx.beliefs.size();
  p.wealth.assign(m, Eigen::MatrixXd(g, l));
  p.consumption.assign(m, Eigen::MatrixXd(g, l));
  for (int z = 0; z < m; ++z) {
    p.wealth[z] = ctx.savings.points.replicate(1, l);
    p.consumption[z] = p.wealth[z];
  }
  return p;
}

void PolicyTable::validate_egm_invariants() const {
  const Eigen::Index g = knot_count();
  for (int z = 0; z < n_states(); ++z) {
    for (Eigen::Index ell = 0; ell < belief_count(); ++ell) {
      for (Eigen::Index k = 0; k < g; ++k) {
        double w = wealth[z](k, ell);
        double c = consumption[z](k, ell);
        if (!(c > 0.0) || !(c <= w) || !std::isfinite(c))
          throw numerical_error("policy table: consumption out of (0, w] at (g=" +
                                std::to_string(k) + ", z=" + std::to_string(z) +
                                ", ell=" + std::to_string(ell) + ")");
        if (std::abs((w - c) - savings(k)) > 1e-12 * std::max(1.0, std::abs(savings(k))))
          throw numerical_error("policy table: EGM identity w = s + c violated at (g=" +
                                std::to_string(k) + ", z=" + std::to_string(z) +
                                ", ell=" + std::to_string(ell) + ")");
        if (k > 0) {
          if (!(w > wealth[z](k - 1, ell)))
            throw numerical_error("policy table: wealth knots not strictly increasing at (g=" +
                                  std::to_string(k) + ", z=" + std::to_string(z) +
                                  ", ell=" + std::to_string(ell) + ")");
          if (c < consumption[z](k - 1, ell))
            throw numerical_error("policy table: consumption not nondecreasing at (g=" +
                                  std::to_string(k) + ", z=" + std::to_string(z) +
                                  ", ell=" + std::to_string(ell) + ")");
        }
      }
    }
  }
}

double expected_marginal_utility(const PolicyTable& prev, const ModelContext& ctx,
                                 double s, int z_next, Eigen::Index ell_next) {
  const StateAtoms& at = ctx.shocks.states[z_next];
  const Eigen::MatrixXd& wk = prev.wealth[z_next];
  const Eigen::MatrixXd& ck = prev.consumption[z_next];
  const double* wkp = wk.col(ell_next).data();
  const double* ckp = ck.col(ell_next).data();
  const Eigen::Index n = wk.rows();
  double acc = 0.0;
  for (Eigen::Index a = 0; a < at.size(); ++a) {
    double w_next = at.gross_return(a) * s + at.income(a);
    double c = eval_column(wkp, ckp, n, w_next);
    acc += at.prob(a) * at.discount(a) * at.gross_return(a) * ctx.utility.marginal(c);
  }
  return acc;
}

double euler_rhs(const PolicyTable& prev, double s, int z, const Eigen::VectorXd& theta,
                 const ModelContext& ctx) {
  if (!(s >= 0.0)) throw std::domain_error("euler_rhs: savings must be nonnegative");
  const int m = ctx.n_states();
  double acc = 0.0;
  for (int zn = 0; zn < m; ++zn) {
    double weight = mixture_weight(ctx.candidates, theta, z, zn);
    if (weight == 0.0) continue;
    Eigen::VectorXd post = bayes_update(ctx.candidates, theta, z, zn);
    Eigen::Index ell_next = project_to_grid(ctx.beliefs, post);
    acc += weight * expected_marginal_utility(prev, ctx, s, zn, ell_next);
  }
  return acc;
}

namespace {

// Fills emu(g, slot) = E[beta R u'(c_prev(R s_g + Y, z_next, ell_next))] for
// every needed (z_next, ell_next). Probes are increasing in g for each atom,
// so the interpolation segment advances monotonically.
void fill_expected_marginal_table(const PolicyTable& prev, const ModelContext& ctx,
                                  std::vector<Eigen::MatrixXd>& emu) {
  const int m = ctx.n_states();
  const Eigen::Index g_count = ctx.savings.size();
  emu.resize(m);
  std::vector<std::pair<int, int>> jobs;  // (z_next, slot)
  for (int zn = 0; zn < m; ++zn) {
    emu[zn].setZero(g_count, static_cast<Eigen::Index>(ctx.needed_posteriors[zn].size()));
    for (std::size_t s = 0; s < ctx.needed_posteriors[zn].size(); ++s)
      jobs.emplace_back(zn, static_cast<int>(s));
  }
  parallel_for(jobs.size(), [&](std::size_t j) {
    const int zn = jobs[j].first;
    const int slot = jobs[j].second;
    const Eigen::Index ell = ctx.needed_posteriors[zn][slot];
    const StateAtoms& at = ctx.shocks.states[zn];
    const double* wkp = prev.wealth[zn].col(ell).data();
    const double* ckp = prev.consumption[zn].col(ell).data();
    const Eigen::Index n = prev.wealth[zn].rows();
    double* out = emu[zn].col(slot).data();
    for (Eigen::Index a = 0; a < at.size(); ++a) {
      const double r = at.gross_return(a);
      const double y = at.income(a);
      const double pbr = at.prob(a) * at.discount(a) * r;
      Eigen::Index seg = 1;
      for (Eigen::Index g = 0; g < g_count; ++g) {
        double w_next = r * ctx.savings.points(g) + y;
        while (seg < n && wkp[seg] < w_next) ++seg;
        double c = eval_column(wkp, ckp, n, w_next, seg < n ? seg : -1);
        out[g] += pbr * ctx.utility.marginal(c);
      }
    }
  });
}

}  // namespace

PolicyTable egm_step(const PolicyTable& prev, const ModelContext& ctx) {
  const int m = ctx.n_states();
  const Eigen::Index g_count = ctx.savings.size();
  const Eigen::Index ell_count = ctx.beliefs.size();
  if (prev.n_states() != m || prev.knot_count() != g_count || prev.belief_count() != ell_count)
    throw std::domain_error("egm_step: policy shape does not match context");

  std::vector<Eigen::MatrixXd> emu;
  fill_expected_marginal_table(prev, ctx, emu);

  PolicyTable out;
  out.savings = ctx.savings.points;
  out.wealth.assign(m, Eigen::MatrixXd(g_count, ell_count));
  out.consumption.assign(m, Eigen::MatrixXd(g_count, ell_count));

  const double m0 = ctx.utility.marginal_at_zero();
  parallel_for(static_cast<std::size_t>(m) * ell_count, [&](std::size_t job) {
    const int z = static_cast<int>(job / ell_count);
    const Eigen::Index ell = static_cast<Eigen::Index>(job % ell_count);
    for (Eigen::Index g = 0; g < g_count; ++g) {
      double rhs = 0.0;
      for (int zn = 0; zn < m; ++zn) {
        double weight = ctx.mixture_row[z](ell, zn);
        if (weight == 0.0) continue;
        int idx = ctx.posterior_index[static_cast<std::size_t>(z) * m + zn](ell);
        rhs += weight * emu[zn](g, ctx.posterior_slot[zn](idx));
      }
      if (m0 < rhs) rhs = m0;  // vacuous under CRRA (u'(0) = inf)
      double c = ctx.utility.inverse_marginal(rhs);
      if (!std::isfinite(c) || !(c > 0.0))
        throw numerical_error("egm_step: non-finite consumption update at (g=" +
                              std::to_string(g) + ", z=" + std::to_string(z) +
                              ", ell=" + std::to_string(ell) + ")");
      out.consumption[z](g, ell) = c;
      out.wealth[z](g, ell) = ctx.savings.points(g) + c;
    }
  });
  out.validate_egm_invariants();
  return out;
}

SolveResult solve(const ModelContext& ctx, double tol, long max_iter,
                  const std::optional<PolicyTable>& initial) {
  if (!(tol > 0.0)) throw std::domain_error("solve: tolerance must be positive");
  if (max_iter < 1) throw std::domain_error("solve: max_iter must be at least 1");
  auto t0 = std::chrono::steady_clock::now();

  PolicyTable cur = initial ? *initial : initial_policy(ctx);
  ConvergenceReport rep;
  for (long it = 1; it <= max_iter; ++it) {
    PolicyTable next = egm_step(cur, ctx);
    double delta = 0.0;
    double rho = 0.0;
    for (int z = 0; z < ctx.n_states(); ++z) {
      delta = std::max(delta,
                       (next.consumption[z] - cur.consumption[z]).cwiseAbs().maxCoeff());
      for (Eigen::Index ell = 0; ell < next.belief_count(); ++ell)
        for (Eigen::Index g = 0; g < next.knot_count(); ++g) {
          double cn = next.consumption[z](g, ell);
          double co = cur.consumption[z](g, ell);
          if (co > 0.0)
            rho = std::max(rho, std::abs(ctx.utility.marginal(cn) - ctx.utility.marginal(co)));
        }
    }
    rep.delta_history.push_back(delta);
    rep.rho_history.push_back(rho);
    cur = std::move(next);
    if (delta < tol) {
      rep.iterations = it;
      rep.final_delta = delta;
      rep.rho_delta = rho;
      rep.converged = true;
      rep.wall_time_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return SolveResult{std::move(cur), std::move(rep)};
    }
  }
  throw convergence_error("solve: no convergence after " + std::to_string(max_iter) +
                              " iterations (last delta " +
                              std::to_string(rep.delta_history.back()) + ")",
                          rep.delta_history);
}

}  // namespace egml

#ifndef OBO_OPTIMIZERS_HPP
#define OBO_OPTIMIZERS_HPP

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "obo/hypergrad.hpp"
#include "obo/metrics.hpp"
#include "obo/oracle.hpp"
#include "obo/window.hpp"

namespace obo {

struct OptimizerState {
  Vector x;
  Vector y;
  Vector v;
  long round = 1;
  std::optional<WindowBuffer> window;  // WOBO
  Vector sobow_v0;                     // fixed CG start point
};

struct StepReport {
  Vector x_next, y_next, v_next;
  long inner_iters = 0;  // y-updates (WOBO: full sweeps)
  long v_iters = 0;      // v-updates / CG iterations
  long grad_y_g_queries = 0;
  long grad_y_f_queries = 0;
  long grad_x_f_queries = 0;
  long hvp_queries = 0;
  long jvp_queries = 0;
  Vector hypergrad_used;
  double condition_lhs = std::numeric_limits<double>::quiet_NaN();
  bool cg_breakdown = false;
};

namespace detail {

inline void fill_query_delta(StepReport& rep, const QueryCounts& before,
                             const QueryCounts& after) {
  rep.grad_y_g_queries = after.grad_y_g - before.grad_y_g;
  rep.grad_y_f_queries = after.grad_y_f - before.grad_y_f;
  rep.grad_x_f_queries = after.grad_x_f - before.grad_x_f;
  rep.hvp_queries = after.hvp - before.hvp;
  rep.jvp_queries = after.jvp - before.jvp;
}

inline Vector clamp_to_ball(Vector v, double radius) {
  const double n = v.norm();
  if (n > radius) v *= radius / n;
  return v;
}

}  // namespace detail

// Adaptive inner-loop optimizer: run inner GD until the inner gradient norm
// drops to delta, then M projected v-steps, then the prox x-update with the
// assembled hypergradient. The gradient evaluated for the loop guard is
// reused for the update, so k updates cost k+1 queries.
inline StepReport aobo_step(OptimizerState& st, const CountingProblem& p,
                            const HyperParams& hp, const DerivedConstants& dc) {
  const long t = st.round;
  const QueryCounts before = p.counts();
  StepReport rep;

  Vector y = st.y;
  Vector g = p.grad_y_g(t, st.x, y);
  while (g.norm() > hp.delta) {
    if (rep.inner_iters >= hp.cap_inner)
      throw CappedLoopError("aobo inner loop hit cap_inner; residual " +
                                std::to_string(g.norm()),
                            g.norm());
    y -= hp.alpha * g;
    ++rep.inner_iters;
    g = p.grad_y_g(t, st.x, y);
  }

  const VState vs = solve_v_projected_gd(p, t, st.x, y, st.v, hp.beta,
                                         hp.m_iters, dc.v_radius);
  rep.v_iters = vs.iters;
  rep.hypergrad_used = aid_hypergrad(p, t, st.x, y, vs.v);
  const auto gm =
      gradient_mapping(p.x_set(), st.x, rep.hypergrad_used, hp.gamma);

  st.x = gm.x_plus;
  st.y = y;
  st.v = vs.v;
  ++st.round;
  rep.x_next = st.x;
  rep.y_next = st.y;
  rep.v_next = st.v;
  detail::fill_query_delta(rep, before, p.counts());
  return rep;
}

// Fully single-loop: exactly one inner GD step and one projected v-step per
// round.
inline StepReport fsobo_step(OptimizerState& st, const CountingProblem& p,
                             const HyperParams& hp,
                             const DerivedConstants& dc) {
  const long t = st.round;
  const QueryCounts before = p.counts();
  StepReport rep;

  const Vector y = st.y - hp.alpha * p.grad_y_g(t, st.x, st.y);
  rep.inner_iters = 1;
  const VState vs = solve_v_projected_gd(p, t, st.x, y, st.v, hp.beta, 1,
                                         dc.v_radius);
  rep.v_iters = 1;
  rep.hypergrad_used = aid_hypergrad(p, t, st.x, y, vs.v);
  const auto gm =
      gradient_mapping(p.x_set(), st.x, rep.hypergrad_used, hp.gamma);

  st.x = gm.x_plus;
  st.y = y;
  st.v = vs.v;
  ++st.round;
  rep.x_next = st.x;
  rep.y_next = st.y;
  rep.v_next = st.v;
  detail::fill_query_delta(rep, before, p.counts());
  return rep;
}

// Stopping certificate of the window algorithm:
//   ||hg||^2 + kappa_F ||grad_y g_hat||^2 + 8 kappa_g^2 ||grad_v Phi_hat||^2
//     <= delta^2 / W^2.
inline std::pair<bool, double> wobo_condition(const WindowBuffer& buf,
                                              const Vector& x, const Vector& y,
                                              const Vector& v,
                                              const DerivedConstants& dc,
                                              const HyperParams& hp) {
  const Vector hg = buf.hypergrad(x, y, v, hp.wobo_hg_form);
  const Vector gy = buf.grad_y_g(x, y);
  const Vector pg = buf.phi_grad(x, y, v);
  const double lhs = hg.squaredNorm() + dc.kappa_f * gy.squaredNorm() +
                     8.0 * dc.kappa_g * dc.kappa_g * pg.squaredNorm();
  const double W = WindowSpec{hp.window_w, hp.eta_weight}.normalizer();
  return {lhs <= hp.delta * hp.delta / (W * W), lhs};
}

// Window-averaged optimizer: sweeps of (y, v, x) updates on the averaged
// objectives until the certificate holds. The v-update is unprojected; the
// constraint domain of the inner optima is prior information the algorithm
// is not shown. Zero sweeps are possible when the entry point already
// certifies.
inline StepReport wobo_step(OptimizerState& st, const CountingProblem& p,
                            const HyperParams& hp, const DerivedConstants& dc) {
  if (!st.window) throw ParameterError("wobo_step requires a window buffer");
  WindowBuffer& buf = *st.window;
  if (buf.newest() != st.round)
    throw ParameterError("window buffer must be advanced to the round");
  const QueryCounts before = p.counts();
  StepReport rep;

  const double W = WindowSpec{hp.window_w, hp.eta_weight}.normalizer();
  const double thresh = hp.delta * hp.delta / (W * W);

  while (true) {
    const Vector gy = buf.grad_y_g(st.x, st.y);
    const Vector pg = buf.phi_grad(st.x, st.y, st.v);
    rep.hypergrad_used = buf.hypergrad(st.x, st.y, st.v, hp.wobo_hg_form);
    rep.condition_lhs = rep.hypergrad_used.squaredNorm() +
                        dc.kappa_f * gy.squaredNorm() +
                        8.0 * dc.kappa_g * dc.kappa_g * pg.squaredNorm();
    if (rep.condition_lhs <= thresh) break;
    if (rep.inner_iters >= hp.cap_inner)
      throw CappedLoopError("wobo sweep loop hit cap_inner; lhs " +
                                std::to_string(rep.condition_lhs),
                            rep.condition_lhs);
    st.y -= hp.alpha * gy;  // the certificate's gradient is current here
    st.v -= hp.beta * buf.phi_grad(st.x, st.y, st.v);
    const Vector h = buf.hypergrad(st.x, st.y, st.v, hp.wobo_hg_form);
    st.x = gradient_mapping(p.x_set(), st.x, h, hp.gamma).x_plus;
    ++rep.inner_iters;
    ++rep.v_iters;
  }

  ++st.round;
  rep.x_next = st.x;
  rep.y_next = st.y;
  rep.v_next = st.v;
  detail::fill_query_delta(rep, before, p.counts());
  return rep;
}

// One inner GD step, then M_t = m_iters * t conjugate-gradient iterations
// restarted from the fixed start point each round; cumulative CG work grows
// quadratically in the horizon.
inline StepReport sobow_step(OptimizerState& st, const CountingProblem& p,
                             const HyperParams& hp,
                             const DerivedConstants& dc) {
  const long t = st.round;
  const QueryCounts before = p.counts();
  StepReport rep;

  if (st.sobow_v0.size() != p.dim_y()) st.sobow_v0 = Vector::Zero(p.dim_y());
  const Vector y = st.y - hp.alpha * p.grad_y_g(t, st.x, st.y);
  rep.inner_iters = 1;
  const long m_t = hp.m_iters * t;
  VState vs = solve_v_cg(p, t, st.x, y, st.sobow_v0, m_t);
  rep.v_iters = vs.iters;
  rep.cg_breakdown = vs.breakdown;
  const Vector v = detail::clamp_to_ball(std::move(vs.v), dc.v_radius);
  rep.hypergrad_used = aid_hypergrad(p, t, st.x, y, v);
  const auto gm =
      gradient_mapping(p.x_set(), st.x, rep.hypergrad_used, hp.gamma);

  st.x = gm.x_plus;
  st.y = y;
  st.v = v;
  ++st.round;
  rep.x_next = st.x;
  rep.y_next = st.y;
  rep.v_next = st.v;
  detail::fill_query_delta(rep, before, p.counts());
  return rep;
}

// K unrolled inner GD steps with the ITD hypergradient; y carries over as
// the final inner iterate.
inline StepReport obbo_step(OptimizerState& st, const CountingProblem& p,
                            const HyperParams& hp, const DerivedConstants&) {
  const long t = st.round;
  const QueryCounts before = p.counts();
  StepReport rep;

  const ItdResult itd =
      itd_hypergrad(p, t, st.x, st.y, hp.alpha, hp.m_iters);
  rep.inner_iters = hp.m_iters;
  rep.hypergrad_used = itd.hypergrad;
  const auto gm =
      gradient_mapping(p.x_set(), st.x, rep.hypergrad_used, hp.gamma);

  st.x = gm.x_plus;
  st.y = itd.y_final;
  ++st.round;
  rep.x_next = st.x;
  rep.y_next = st.y;
  rep.v_next = st.v;
  detail::fill_query_delta(rep, before, p.counts());
  return rep;
}

inline StepReport dispatch_step(AlgoId algo, OptimizerState& st,
                                const CountingProblem& p,
                                const HyperParams& hp,
                                const DerivedConstants& dc) {
  switch (algo) {
    case AlgoId::aobo: return aobo_step(st, p, hp, dc);
    case AlgoId::fsobo: return fsobo_step(st, p, hp, dc);
    case AlgoId::wobo: return wobo_step(st, p, hp, dc);
    case AlgoId::sobow: return sobow_step(st, p, hp, dc);
    case AlgoId::obbo: return obbo_step(st, p, hp, dc);
  }
  throw ParameterError("unknown algorithm id");
}

struct RunHooks {
  std::function<void(long t, const OptimizerState& st, const StepReport& rep)>
      on_round;
};

struct RunOptions {
  std::optional<Vector> x0, y0, v0;
  std::optional<SupEstimator> estimator;  // default: analytic when available
  long t_max = -1;                        // default: instance horizon
  bool keep_reports = false;
  RunHooks hooks;
};

struct RunRecord {
  MetricsLedger ledger;
  std::vector<StepReport> reports;  // when keep_reports
  bool failed = false;
  std::string error;
  double capped_residual = 0.0;
};

// Drives rounds 1..T of the online protocol: the regret charged at round t
// is measured at the decision x_t before the step consumes round t. All
// measurement goes through the raw instance and is excluded from tallies.
inline RunRecord run(const BilevelProblem& inst, AlgoId algo,
                     const HyperParams& params, const RunOptions& opts = {}) {
  params.validate();
  const long T = opts.t_max >= 0 ? std::min(opts.t_max, inst.horizon())
                                 : inst.horizon();
  const DerivedConstants dc =
      derive_constants(inst.constants(), params.alpha, params.beta);

  SupEstimator est;
  if (opts.estimator) {
    est = *opts.estimator;
  } else {
    est.mode = inst.capabilities().analytic_variation
                   ? SupEstimator::Mode::analytic
                   : SupEstimator::Mode::sampled;
  }

  CountingProblem counted(inst);
  OptimizerState st;
  st.x = project(inst.x_set(),
                 opts.x0 ? *opts.x0 : Vector(Vector::Zero(inst.dim_x())));
  st.y = opts.y0 ? *opts.y0 : Vector(Vector::Zero(inst.dim_y()));
  st.v = opts.v0 ? *opts.v0 : Vector(Vector::Zero(inst.dim_y()));
  if (algo != AlgoId::wobo)
    st.v = detail::clamp_to_ball(st.v, dc.v_radius);
  st.sobow_v0 = st.v;
  if (algo == AlgoId::wobo)
    st.window.emplace(counted, params.window_w, params.eta_weight);

  WindowBuffer measure_buf(inst, params.window_w, params.eta_weight);
  const bool window_trivial = params.window_w == 1;

  RunRecord rec;
  for (long t = 1; t <= T; ++t) {
    try {
      measure_buf.push(t);
      LedgerRow row;
      row.t = t;
      row.regret_inc = regret_increment(inst, t, st.x, params.gamma);
      row.win_regret_inc =
          window_trivial ? row.regret_inc
                         : window_regret_increment(measure_buf, t, st.x,
                                                   params.gamma);
      const VariationIncrements vi =
          estimate_variation(inst, t, est, st.x, st.y);
      row.v_inc = vi.v_inc;
      row.h2_inc = vi.h2_inc;
      row.e2_inc = vi.e2_inc;
      row.p_inc = vi.p_inc;

      if (st.window) st.window->push(t);
      counted.set_reveal_limit(t);  // decision-before-reveal guard
      StepReport rep = dispatch_step(algo, st, counted, params, dc);
      row.inner_iters = rep.inner_iters;
      row.grad_queries = rep.grad_y_g_queries;
      row.hvp_queries = rep.hvp_queries;
      row.jvp_queries = rep.jvp_queries;
      row.v_iters = rep.v_iters;
      row.condition_lhs = rep.condition_lhs;
      rec.ledger.append(row);
      if (opts.hooks.on_round) opts.hooks.on_round(t, st, rep);
      if (opts.keep_reports) rec.reports.push_back(std::move(rep));
    } catch (const CappedLoopError& e) {
      rec.failed = true;
      rec.error = e.what();
      rec.capped_residual = e.residual;
      break;
    }
  }
  return rec;
}

}  // namespace obo

#endif  // OBO_OPTIMIZERS_HPP

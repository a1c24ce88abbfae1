#ifndef OBO_METRICS_HPP
#define OBO_METRICS_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "obo/geometry.hpp"
#include "obo/hypergrad.hpp"
#include "obo/oracle.hpp"
#include "obo/window.hpp"

namespace obo {

// ---------------------------------------------------------------------------
// High-precision measurement solvers. These are apparatus, not algorithm:
// they always query the raw (uncounted) oracle and are cost-exempt.
// ---------------------------------------------------------------------------

inline Vector solve_inner_high_precision(const BilevelProblem& p, long t,
                                         const Vector& x, double tol = 1e-10,
                                         long cap = 2000000) {
  if (p.capabilities().analytic_inner) return p.inner_opt(t, x);
  const double step = 1.0 / p.constants().l_g1;
  Vector y = Vector::Zero(p.dim_y());
  for (long i = 0; i < cap; ++i) {
    const Vector g = p.grad_y_g(t, x, y);
    if (g.norm() <= tol) return y;
    y -= step * g;
  }
  throw CappedLoopError("measurement inner solve did not reach tolerance",
                        p.grad_y_g(t, x, y).norm());
}

inline Vector solve_v_measure(const BilevelProblem& p, long t, const Vector& x,
                              const Vector& y, double tol = 1e-12) {
  Vector v = Vector::Zero(p.dim_y());
  const Vector b = p.grad_y_f(t, x, y);
  Vector r = b - p.hvp_yy_g(t, x, y, v);
  Vector d = r;
  double rs = r.squaredNorm();
  const long cap = 4L * p.dim_y() + 64;
  for (long m = 0; m < cap && std::sqrt(rs) > tol; ++m) {
    const Vector hd = p.hvp_yy_g(t, x, y, d);
    const double curv = d.dot(hd);
    if (!(curv > 0.0)) break;
    const double step = rs / curv;
    v += step * d;
    r -= step * hd;
    const double rs_new = r.squaredNorm();
    d = r + (rs_new / rs) * d;
    rs = rs_new;
  }
  return v;
}

// True hypergradient at x: analytic when the family provides it, otherwise
// assembled from 1e-10 subproblem solves.
inline Vector measured_hypergrad(const BilevelProblem& p, long t,
                                 const Vector& x) {
  if (p.capabilities().analytic_hypergrad) return p.true_hypergrad(t, x);
  const Vector y = solve_inner_high_precision(p, t, x);
  const Vector v = solve_v_measure(p, t, x, y);
  return aid_hypergrad(p, t, x, y, v);
}

// One term of the standard bilevel local regret:
//   || G_X(x_t, grad F_t(x_t), gamma) ||^2, always at the true hypergradient.
inline double regret_increment(const BilevelProblem& p, long t,
                               const Vector& x, double gamma) {
  const Vector h = measured_hypergrad(p, t, x);
  return gradient_mapping(p.x_set(), x, h, gamma).mapping.squaredNorm();
}

inline Vector win_inner_high_precision(const WindowBuffer& buf,
                                       const Vector& x, double tol = 1e-10,
                                       long cap = 2000000) {
  const double step = 1.0 / buf.problem().constants().l_g1;
  Vector y = Vector::Zero(buf.problem().dim_y());
  for (long i = 0; i < cap; ++i) {
    const Vector g = buf.grad_y_g(x, y);
    if (g.norm() <= tol) return y;
    y -= step * g;
  }
  throw CappedLoopError("window measurement inner solve did not converge",
                        buf.grad_y_g(x, y).norm());
}

inline Vector win_solve_v_measure(const WindowBuffer& buf, const Vector& x,
                                  const Vector& y, double tol = 1e-12) {
  Vector v = Vector::Zero(buf.problem().dim_y());
  const Vector b = buf.grad_y_f(x, y);
  Vector r = b - buf.hvp_yy_g(x, y, v);
  Vector d = r;
  double rs = r.squaredNorm();
  const long cap = 4L * buf.problem().dim_y() + 64;
  for (long m = 0; m < cap && std::sqrt(rs) > tol; ++m) {
    const Vector hd = buf.hvp_yy_g(x, y, d);
    const double curv = d.dot(hd);
    if (!(curv > 0.0)) break;
    const double step = rs / curv;
    v += step * d;
    r -= step * hd;
    const double rs_new = r.squaredNorm();
    d = r + (rs_new / rs) * d;
    rs = rs_new;
  }
  return v;
}

// True window hypergradient at x (always the cross-Jacobian assembly).
inline Vector measured_window_hypergrad(const WindowBuffer& buf,
                                        const Vector& x) {
  const Vector y = win_inner_high_precision(buf, x);
  const Vector v = win_solve_v_measure(buf, x, y);
  return buf.grad_x_f(x, y) - buf.jvp_xy_g(x, y, v);
}

// One term of the window-averaged bilevel local regret at round t. The
// buffer must already contain rounds down to max(1, t-w+1).
inline double window_regret_increment(const WindowBuffer& buf, long t,
                                      const Vector& x, double gamma) {
  if (buf.newest() != t)
    throw ParameterError("window buffer is not positioned at round t");
  const Vector h = measured_window_hypergrad(buf, x);
  return gradient_mapping(buf.problem().x_set(), x, h, gamma)
      .mapping.squaredNorm();
}

// ---------------------------------------------------------------------------
// Environmental-variation estimation
// ---------------------------------------------------------------------------

struct SupEstimator {
  enum class Mode { analytic, grid, sampled };
  Mode mode = Mode::analytic;
  int samples = 64;            // sampled mode
  std::uint64_t seed = 0;      // sampled mode
  int grid_resolution = 16;    // grid mode, points per axis
  int probes = 8;              // random directions for operator-norm terms

  static Mode parse_mode(const std::string& s) {
    if (s == "analytic") return Mode::analytic;
    if (s == "grid") return Mode::grid;
    if (s == "sampled") return Mode::sampled;
    throw ParameterError("unknown estimator mode: " + s);
  }
  const char* mode_name() const {
    switch (mode) {
      case Mode::analytic: return "analytic";
      case Mode::grid: return "grid";
      case Mode::sampled: return "sampled";
    }
    return "?";
  }
};

namespace detail {

inline std::vector<Vector> sample_points(const BilevelProblem& p, int dim,
                                         int n, Rng& rng) {
  const double R = p.x_set().is_bounded() ? p.x_set().bounding_radius()
                                          : p.reference_radius();
  std::vector<Vector> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vector u = rng.unit_vector(dim);
    const double r =
        R * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
    Vector cand = r * u;
    if (dim == p.dim_x()) cand = project(p.x_set(), cand);
    pts.push_back(std::move(cand));
  }
  return pts;
}

inline std::vector<Vector> grid_points(const BilevelProblem& p, int dim,
                                       int res) {
  if (dim > 3)
    throw ParameterError("grid estimator supports dimension <= 3 only");
  const double R = p.x_set().is_bounded() ? p.x_set().bounding_radius()
                                          : p.reference_radius();
  std::vector<Vector> pts;
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  const int n = std::max(2, res);
  while (true) {
    Vector v(dim);
    for (int k = 0; k < dim; ++k)
      v[k] = -R + 2.0 * R * idx[static_cast<std::size_t>(k)] / (n - 1);
    if (dim == p.dim_x()) v = project(p.x_set(), v);
    pts.push_back(v);
    int k = 0;
    while (k < dim && ++idx[static_cast<std::size_t>(k)] == n) {
      idx[static_cast<std::size_t>(k)] = 0;
      ++k;
    }
    if (k == dim) break;
  }
  return pts;
}

}  // namespace detail

// Per-step variation estimate. Analytic delegates to the family; grid and
// sampled modes maximize the defining expressions over a point set and are
// *lower* estimates of the true suprema. G-terms are evaluated at the
// played iterate (x_t, y_t) in every mode.
inline VariationIncrements estimate_variation(const BilevelProblem& p, long t,
                                              const SupEstimator& est,
                                              const Vector& x_t,
                                              const Vector& y_t) {
  VariationIncrements inc;
  if (t <= 1) return inc;
  if (est.mode == SupEstimator::Mode::analytic) {
    if (!p.capabilities().analytic_variation)
      throw CapabilityError(
          "analytic variation estimator requires the capability flag");
    return p.variation_increments(t);
  }

  Rng rng(mix_seed(est.seed, static_cast<std::uint64_t>(t)));
  std::vector<Vector> xs =
      est.mode == SupEstimator::Mode::grid
          ? detail::grid_points(p, p.dim_x(), est.grid_resolution)
          : detail::sample_points(p, p.dim_x(), est.samples, rng);
  std::vector<Vector> ys =
      detail::sample_points(p, p.dim_y(),
                            est.mode == SupEstimator::Mode::grid
                                ? static_cast<int>(xs.size())
                                : est.samples,
                            rng);

  for (const Vector& x : xs) {
    const Vector y_now = solve_inner_high_precision(p, t, x, 1e-10);
    const Vector y_prev = solve_inner_high_precision(p, t - 1, x, 1e-10);
    inc.v_inc = std::max(inc.v_inc, std::abs(p.f_value(t - 1, x, y_prev) -
                                             p.f_value(t, x, y_now)));
    inc.h2_inc = std::max(inc.h2_inc, (y_prev - y_now).squaredNorm());
  }

  double e_fy = 0.0, e_gyy = 0.0, d_x = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Vector& x = xs[i];
    const Vector& y = ys[i % ys.size()];
    e_fy = std::max(e_fy, (p.grad_y_f(t, x, y) - p.grad_y_f(t - 1, x, y))
                              .squaredNorm());
    d_x = std::max(d_x, (p.grad_x_f(t, x, y) - p.grad_x_f(t - 1, x, y))
                            .squaredNorm());
    for (int k = 0; k < est.probes; ++k) {
      const Vector u = rng.unit_vector(p.dim_y());
      e_gyy = std::max(e_gyy, (p.hvp_yy_g(t, x, y, u) -
                               p.hvp_yy_g(t - 1, x, y, u))
                                  .squaredNorm());
    }
  }
  inc.e2_inc = e_fy + e_gyy;

  // G terms at the iterate; the cross-Jacobian operator norm is probed
  const double g_y =
      (p.grad_y_g(t, x_t, y_t) - p.grad_y_g(t - 1, x_t, y_t)).squaredNorm();
  double g_xy = 0.0;
  for (int k = 0; k < est.probes; ++k) {
    const Vector u = rng.unit_vector(p.dim_y());
    g_xy = std::max(g_xy, (p.jvp_xy_g(t, x_t, y_t, u) -
                           p.jvp_xy_g(t - 1, x_t, y_t, u))
                              .squaredNorm());
  }
  inc.p_inc = d_x + g_y + g_xy;
  return inc;
}

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

struct LedgerRow {
  long t = 0;
  double regret_inc = 0.0;
  double cum_regret = 0.0;
  double win_regret_inc = 0.0;
  double cum_win_regret = 0.0;
  long inner_iters = 0;
  long grad_queries = 0;  // inner-level gradient queries this round
  long hvp_queries = 0;
  long jvp_queries = 0;
  long v_iters = 0;
  double v_inc = 0.0;
  double h2_inc = 0.0;
  double e2_inc = 0.0;
  double p_inc = 0.0;
  double condition_lhs = std::numeric_limits<double>::quiet_NaN();
};

struct SummaryRecord {
  long rounds = 0;
  double reg_T = 0.0;
  double win_reg_T = 0.0;
  double v_T = 0.0;
  double h2_T = 0.0;
  double e2_T = 0.0;
  double p_T = 0.0;
  long i_T = 0;
  long grad_queries = 0;
  long hvp_queries = 0;
  long jvp_queries = 0;
  long v_iters = 0;
  std::optional<double> slope;  // log-log fit of cum regret over [T/2, T]
};

class MetricsLedger {
 public:
  // Appends a row, filling the cumulative columns as exact prefix sums.
  void append(LedgerRow row) {
    if (!rows_.empty()) {
      row.cum_regret = rows_.back().cum_regret + row.regret_inc;
      row.cum_win_regret = rows_.back().cum_win_regret + row.win_regret_inc;
    } else {
      row.cum_regret = row.regret_inc;
      row.cum_win_regret = row.win_regret_inc;
    }
    rows_.push_back(std::move(row));
  }

  const std::vector<LedgerRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }

 private:
  std::vector<LedgerRow> rows_;
};

// Ordinary least squares of ln(cum regret) on ln(t) over the last half of
// the horizon; absent when fewer than two usable points exist.
inline std::optional<double> fit_loglog_slope(
    const std::vector<LedgerRow>& rows, long horizon) {
  const long lo = std::max(1L, (horizon + 1) / 2);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long n = 0;
  for (const LedgerRow& r : rows) {
    if (r.t < lo || r.t > horizon || !(r.cum_regret > 0.0)) continue;
    const double lx = std::log(static_cast<double>(r.t));
    const double ly = std::log(r.cum_regret);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::nullopt;
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-30) return std::nullopt;
  return (n * sxy - sx * sy) / denom;
}

inline SummaryRecord summarize(const MetricsLedger& ledger, long horizon) {
  if (ledger.empty()) throw ParameterError("cannot summarize an empty ledger");
  SummaryRecord s;
  for (const LedgerRow& r : ledger.rows()) {
    s.reg_T += r.regret_inc;
    s.win_reg_T += r.win_regret_inc;
    s.v_T += r.v_inc;
    s.h2_T += r.h2_inc;
    s.e2_T += r.e2_inc;
    s.p_T += r.p_inc;
    s.i_T += r.inner_iters;
    s.grad_queries += r.grad_queries;
    s.hvp_queries += r.hvp_queries;
    s.jvp_queries += r.jvp_queries;
    s.v_iters += r.v_iters;
    ++s.rounds;
  }
  s.slope = fit_loglog_slope(ledger.rows(), horizon);
  return s;
}

}  // namespace obo

#endif  // OBO_METRICS_HPP

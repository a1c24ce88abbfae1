#ifndef OBO_CONSTANTS_HPP
#define OBO_CONSTANTS_HPP

#include <cmath>
#include <optional>
#include <string>

#include "obo/common.hpp"

namespace obo {

// Base smoothness/convexity parameters of a problem family. All values are
// dimensionless upper bounds (lower bound for mu_g); tighter is better but
// any valid bound is acceptable.
struct SmoothnessConstants {
  double l_f0 = 1.0;  // Lipschitz constant of f_t
  double l_f1 = 1.0;  // Lipschitz constant of grad f_t
  double l_g1 = 1.0;  // Lipschitz constant of grad_y g_t
  double l_g2 = 1.0;  // Lipschitz constant of second derivatives of g_t
  double mu_g = 1.0;  // strong-convexity modulus of g_t in y
  double q = 1.0;     // bound on |f_t(x, y*_t(x))|
  std::optional<double> d_diam;  // diameter of the inner-optima domain

  void validate() const {
    if (!(mu_g > 0.0)) throw ParameterError("mu_g must be positive");
    if (!(l_f0 > 0.0 && l_f1 > 0.0 && l_g1 > 0.0 && l_g2 > 0.0))
      throw ParameterError("Lipschitz constants must be positive");
    if (!(l_g1 >= mu_g)) throw ParameterError("l_g1 must be >= mu_g");
    if (!(q > 0.0)) throw ParameterError("q must be positive");
    if (d_diam && !(*d_diam > 0.0))
      throw ParameterError("d_diam must be positive when present");
  }
};

struct DerivedConstants {
  double kappa_g;    // l_g1 / mu_g
  double l_f_outer;  // smoothness of F_t w.r.t. x
  double kappa_f;    // hypergradient-error amplification constant
  double l_v;        // sensitivity of the v-system solution
  double v_radius;   // l_f0 / mu_g, radius of the v ball
  double rho_y;      // inner GD contraction factor at step alpha
  double rho_v;      // v-iteration contraction factor at step beta
};

inline DerivedConstants derive_constants(const SmoothnessConstants& c,
                                         double alpha, double beta) {
  c.validate();
  if (!(alpha > 0.0) || alpha > 1.0 / c.l_g1 + 1e-15)
    throw ParameterError("alpha must lie in (0, 1/l_g1]");
  if (!(beta > 0.0) || beta > 1.0 / c.l_g1 + 1e-15)
    throw ParameterError("beta must lie in (0, 1/l_g1]");
  const double mu = c.mu_g;
  DerivedConstants d;
  d.kappa_g = c.l_g1 / mu;
  d.l_f_outer = c.l_f1 + c.l_f0 * c.l_g2 / mu + 2.0 * c.l_g1 * c.l_f1 / mu +
                c.l_g1 * c.l_g1 * c.l_f1 / (mu * mu) +
                2.0 * c.l_f0 * c.l_g1 * c.l_g2 / (mu * mu) +
                c.l_f0 * c.l_g1 * c.l_g1 * c.l_g2 / (mu * mu * mu);
  d.kappa_f = 2.0 * c.l_f1 * c.l_f1 / (mu * mu) +
              4.0 * c.l_f0 * c.l_f0 * c.l_g2 * c.l_g2 / std::pow(mu, 4) +
              16.0 * c.l_f1 * c.l_f1 * c.l_g1 * c.l_g1 / std::pow(mu, 4) +
              16.0 * c.l_f0 * c.l_f0 * c.l_g1 * c.l_g1 * c.l_g2 * c.l_g2 /
                  std::pow(mu, 6);
  d.l_v = c.l_f1 / mu + c.l_f0 * c.l_g2 / (mu * mu);
  d.v_radius = c.l_f0 / mu;
  d.rho_y = 1.0 - alpha * mu;
  d.rho_v = 1.0 - beta * mu;
  return d;
}

enum class AlgoId { aobo, fsobo, wobo, sobow, obbo };

inline const char* to_string(AlgoId a) {
  switch (a) {
    case AlgoId::aobo: return "aobo";
    case AlgoId::fsobo: return "fsobo";
    case AlgoId::wobo: return "wobo";
    case AlgoId::sobow: return "sobow";
    case AlgoId::obbo: return "obbo";
  }
  return "?";
}

inline AlgoId parse_algo_id(const std::string& s) {
  if (s == "aobo") return AlgoId::aobo;
  if (s == "fsobo") return AlgoId::fsobo;
  if (s == "wobo") return AlgoId::wobo;
  if (s == "sobow") return AlgoId::sobow;
  if (s == "obbo") return AlgoId::obbo;
  throw ParameterError("unknown algorithm id: " + s);
}

struct WindowSpec {
  int w = 1;
  double eta = 1.0;

  void validate() const {
    if (w < 1) throw ParameterError("window size w must be >= 1");
    if (!(eta > 0.0) || eta > 1.0)
      throw ParameterError("window weight eta must lie in (0, 1]");
  }

  // W = sum_{i=0}^{w-1} eta^i, always over the full window length
  double normalizer() const {
    double s = 0.0, p = 1.0;
    for (int i = 0; i < w; ++i) {
      s += p;
      p *= eta;
    }
    return s;
  }
};

// How the window hypergradient is assembled. The averaged analogue of the
// per-round formula subtracts the cross-Jacobian product; the printed window
// formula subtracts the Hessian product instead. Both are available; the
// cross-Jacobian form is the default.
enum class WindowHgForm { cross_jacobian, hessian };

inline const char* to_string(WindowHgForm f) {
  return f == WindowHgForm::cross_jacobian ? "xy" : "yy";
}

struct HyperParams {
  double alpha = 0.0;       // inner step size
  double beta = 0.0;        // v step size
  double gamma = 0.0;       // outer step size
  double delta = 0.0;       // error tolerance
  long m_iters = 1;         // v-solve iteration count (per-round base)
  double eta_weight = 1.0;  // window weight
  int window_w = 1;         // window size
  long cap_inner = 1000000; // safety cap on inner iterations per round
  WindowHgForm wobo_hg_form = WindowHgForm::cross_jacobian;

  void validate() const {
    if (!(alpha > 0.0 && beta > 0.0 && gamma > 0.0 && delta > 0.0))
      throw ParameterError("alpha, beta, gamma, delta must be positive");
    if (m_iters < 1) throw ParameterError("m_iters must be >= 1");
    if (window_w < 1) throw ParameterError("window_w must be >= 1");
    if (!(eta_weight > 0.0) || eta_weight > 1.0)
      throw ParameterError("eta_weight must lie in (0, 1]");
    if (cap_inner < 1) throw ParameterError("cap_inner must be >= 1");
  }
};

// M = ceil(-ln T / ln rho) with a floor of one v-step; rho = 1 - beta*mu_g.
inline long aobo_m_iters(double rho, long horizon_T) {
  if (horizon_T < 1) throw ParameterError("horizon_T must be >= 1");
  if (rho <= 0.0) return 1;
  if (rho >= 1.0) throw ParameterError("rho must be < 1");
  const double m =
      std::ceil(-std::log(static_cast<double>(horizon_T)) / std::log(rho));
  return std::max(1L, static_cast<long>(m));
}

// K = ceil(log T / log((1 - eta*mu_g)^{-1})) + 1.
inline long obbo_k_iters(double shrink, long horizon_T) {
  if (horizon_T < 1) throw ParameterError("horizon_T must be >= 1");
  if (shrink <= 0.0) return 1;
  if (shrink >= 1.0) throw ParameterError("1 - eta*mu_g must be < 1");
  if (horizon_T == 1) return 1;
  const double k = std::ceil(std::log(static_cast<double>(horizon_T)) /
                             std::log(1.0 / shrink));
  return static_cast<long>(k) + 1;
}

// C_beta from the single-loop analysis, evaluated at the user's beta.
inline double fsobo_c_beta(const SmoothnessConstants& c, double beta) {
  const double mu = c.mu_g;
  return 8.0 * c.l_g1 * c.l_g1 *
         (4.0 * c.l_f1 * c.l_f1 / (mu * mu) +
          4.0 * c.l_f0 * c.l_f0 * c.l_g2 * c.l_g2 / std::pow(mu, 4)) *
         (1.0 + 2.0 / (beta * mu));
}

struct FsoboBounds {
  double c_beta;
  double c_x;
  double c_alpha;
  double c_p;
  double rho;        // max(rho_y', rho_v')
  double alpha_max;  // admissible inner step
  double gamma_max;  // admissible outer step
};

// The single-loop step bounds. The gamma bound is stated against a constant
// C_1 that itself depends on gamma; substituting C_1 = 1 - 2*gamma^2*C_x/(1-rho)
// into gamma^2 <= (1-rho)*C_1/(12*C_x) gives the fixed point
// gamma^2 = (1-rho)/(14*C_x), which we take with a small strictness margin.
inline FsoboBounds fsobo_bounds(const SmoothnessConstants& c, double beta) {
  c.validate();
  if (!(beta > 0.0) || beta > 1.0 / c.l_g1 + 1e-15)
    throw ParameterError("beta must lie in (0, 1/l_g1]");
  const double mu = c.mu_g;
  const double L = c.l_g1;
  const DerivedConstants d = derive_constants(c, 1.0 / L, beta);
  FsoboBounds b;
  b.c_beta = fsobo_c_beta(c, beta);
  b.alpha_max = std::min(2.0 * d.kappa_f * mu * mu /
                             ((mu + L) * (d.kappa_f * mu * mu + b.c_beta)),
                         1.0 / L);
  const double alpha = b.alpha_max;
  const double one_plus = 1.0 + (mu + L) / (alpha * mu * L);
  b.c_alpha = 2.0 * d.kappa_f * mu * mu * one_plus;
  b.c_x = 2.0 * d.kappa_g * d.kappa_g * d.kappa_f * mu * mu * one_plus + b.c_beta;
  b.c_p = 32.0 * d.kappa_g * d.kappa_g * (1.0 + 2.0 / (beta * mu));
  const double rho_y = 1.0 - alpha * mu * L / (mu + L);
  const double rho_v = 1.0 - beta * mu / 2.0;
  b.rho = std::max(rho_y, rho_v);
  b.gamma_max = std::min(1.0 / (2.0 * d.l_f_outer),
                         std::sqrt((1.0 - b.rho) / (14.0 * b.c_x)) *
                             (1.0 - 1e-9));
  return b;
}

// Theorem-prescribed default hyperparameters per algorithm.
inline HyperParams default_schedule(const SmoothnessConstants& c, AlgoId algo,
                                    long horizon_T,
                                    std::optional<WindowSpec> window = {}) {
  c.validate();
  if (horizon_T < 1) throw ParameterError("horizon_T must be >= 1");
  const double T = static_cast<double>(horizon_T);
  HyperParams p;
  p.delta = 1.0 / std::sqrt(T);
  if (window) {
    window->validate();
    p.window_w = window->w;
    p.eta_weight = window->eta;
  }
  switch (algo) {
    case AlgoId::aobo: {
      p.alpha = 1.0 / c.l_g1;
      p.beta = 1.0 / c.l_g1;
      const DerivedConstants d = derive_constants(c, p.alpha, p.beta);
      p.gamma = 1.0 / (2.0 * d.l_f_outer);
      p.m_iters = aobo_m_iters(d.rho_v, horizon_T);
      break;
    }
    case AlgoId::fsobo: {
      p.beta = 1.0 / c.l_g1;
      const FsoboBounds b = fsobo_bounds(c, p.beta);
      p.alpha = b.alpha_max;
      p.gamma = b.gamma_max;
      p.m_iters = 1;
      break;
    }
    case AlgoId::wobo: {
      p.alpha = 1.0 / c.l_g1;
      p.beta = 1.0 / c.l_g1;
      const DerivedConstants d = derive_constants(c, p.alpha, p.beta);
      p.gamma = std::min(1.0 / (4.0 * d.l_f_outer),
                         1.0 / (456.0 * std::pow(d.kappa_g, 4) * c.l_g1 *
                                d.l_v * std::sqrt(d.kappa_f)));
      // delta is a free tolerance here; the regret bound scales with
      // delta^2/W^2, so an O(1) default keeps the stopping rule feasible.
      p.delta = 1.0;
      p.m_iters = 1;
      break;
    }
    case AlgoId::sobow: {
      p.alpha = 1.0 / c.l_g1;
      p.beta = 1.0 / c.l_g1;
      const DerivedConstants d = derive_constants(c, p.alpha, p.beta);
      p.gamma = 1.0 / (2.0 * d.l_f_outer);
      // Per-round CG budget M_t = m_iters * t; the slope honours the
      // required schedule increment log(1-alpha*mu/2)/(2 log(1-lambda*mu))
      // with lambda = 1/l_g1 (increment 0 when the CG step contracts
      // exactly, giving the plain linear schedule M_t = t).
      const double lam_factor = 1.0 - p.beta * c.mu_g;
      double incr = 0.0;
      if (lam_factor > 0.0) {
        incr = std::log(1.0 - p.alpha * c.mu_g / 2.0) /
               (2.0 * std::log(lam_factor));
      }
      p.m_iters = std::max(1L, static_cast<long>(std::ceil(incr)));
      break;
    }
    case AlgoId::obbo: {
      p.alpha = std::min(1.0 / c.mu_g, 1.0 / c.l_g1);  // inner/ITD step
      p.beta = p.alpha;
      const DerivedConstants d = derive_constants(c, p.alpha, p.alpha);
      p.gamma = 1.0 / (2.0 * d.l_f_outer);
      p.m_iters = obbo_k_iters(1.0 - p.alpha * c.mu_g, horizon_T);
      break;
    }
    default:
      throw ParameterError("unknown algorithm id");
  }
  return p;
}

}  // namespace obo

#endif  // OBO_CONSTANTS_HPP

#ifndef OBO_CHECKS_HPP
#define OBO_CHECKS_HPP

#include <algorithm>
#include <cmath>

#include "obo/oracle.hpp"

namespace obo {

// Finite-difference probes used to spot-check oracle consistency. Central
// differences at step h; relative error against a baseline scale.

inline double rel_err(double got, double want, double scale = 1.0) {
  return std::abs(got - want) / std::max({1.0, scale, std::abs(want)});
}

inline double fd_dir_grad_x_f(const BilevelProblem& p, long t, const Vector& x,
                              const Vector& y, const Vector& u,
                              double h = 1e-6) {
  return (p.f_value(t, x + h * u, y) - p.f_value(t, x - h * u, y)) / (2 * h);
}

inline double fd_dir_grad_y_f(const BilevelProblem& p, long t, const Vector& x,
                              const Vector& y, const Vector& u,
                              double h = 1e-6) {
  return (p.f_value(t, x, y + h * u) - p.f_value(t, x, y - h * u)) / (2 * h);
}

inline double fd_dir_grad_y_g(const BilevelProblem& p, long t, const Vector& x,
                              const Vector& y, const Vector& u,
                              double h = 1e-6) {
  return (p.g_value(t, x, y + h * u) - p.g_value(t, x, y - h * u)) / (2 * h);
}

inline Vector fd_hvp_yy(const BilevelProblem& p, long t, const Vector& x,
                        const Vector& y, const Vector& v, double h = 1e-6) {
  return (p.grad_y_g(t, x, y + h * v) - p.grad_y_g(t, x, y - h * v)) / (2 * h);
}

// u' J_xy v  ~  d/ds <grad_y g(x + s u, y), v>
inline double fd_jvp_bilinear(const BilevelProblem& p, long t, const Vector& x,
                              const Vector& y, const Vector& u,
                              const Vector& v, double h = 1e-6) {
  return (p.grad_y_g(t, x + h * u, y).dot(v) -
          p.grad_y_g(t, x - h * u, y).dot(v)) /
         (2 * h);
}

// Central differences of F_t(x) = f_t(x, y*_t(x)); requires the analytic
// inner optimum (or a solver supplied by the caller through y_of).
template <typename InnerSolver>
Vector fd_true_hypergrad(const BilevelProblem& p, long t, const Vector& x,
                         InnerSolver&& y_of, double h = 1e-6) {
  Vector g(p.dim_x());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (p.f_value(t, xp, y_of(t, xp)) - p.f_value(t, xm, y_of(t, xm))) /
           (2 * h);
  }
  return g;
}

}  // namespace obo

#endif  // OBO_CHECKS_HPP

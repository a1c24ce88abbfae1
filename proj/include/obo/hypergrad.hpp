#ifndef OBO_HYPERGRAD_HPP
#define OBO_HYPERGRAD_HPP

#include <utility>
#include <vector>

#include "obo/geometry.hpp"
#include "obo/oracle.hpp"

namespace obo {

// Gradient of the quadratic surrogate Phi_t(x, y, v) in v:
//   grad = H_yy(x, y) v - grad_y f_t(x, y)
// costing one HVP and one gradient query.
inline Vector phi_grad(const BilevelProblem& p, long t, const Vector& x,
                       const Vector& y, const Vector& v) {
  return p.hvp_yy_g(t, x, y, v) - p.grad_y_f(t, x, y);
}

struct VState {
  Vector v;
  bool breakdown = false;  // CG hit a zero-curvature direction
  long iters = 0;          // iterations actually performed
};

// Projected gradient descent on Phi_t(x, y, .) over the ball ||v|| <= radius.
inline VState solve_v_projected_gd(const BilevelProblem& p, long t,
                                   const Vector& x, const Vector& y,
                                   const Vector& v0, double beta, long m_iters,
                                   double radius) {
  if (!(beta > 0.0)) throw ParameterError("beta must be positive");
  if (!(radius > 0.0)) throw ParameterError("radius must be positive");
  VState s;
  s.v = v0;
  for (long m = 0; m < m_iters; ++m) {
    Vector w = s.v - beta * phi_grad(p, t, x, y, s.v);
    const double n = w.norm();
    s.v = n <= radius ? std::move(w) : Vector(w * (radius / n));
    ++s.iters;
  }
  return s;
}

// Conjugate gradient on H_yy(x, y) v = grad_y f_t(x, y), m_iters iterations
// from v0. Exact in dim_y iterations on exact arithmetic. A non-positive
// curvature direction flags a breakdown and returns the current iterate.
inline VState solve_v_cg(const BilevelProblem& p, long t, const Vector& x,
                         const Vector& y, const Vector& v0, long m_iters) {
  VState s;
  s.v = v0;
  const Vector b = p.grad_y_f(t, x, y);
  Vector r = b - p.hvp_yy_g(t, x, y, s.v);
  Vector d = r;
  double rs = r.squaredNorm();
  for (long m = 0; m < m_iters; ++m) {
    const Vector hd = p.hvp_yy_g(t, x, y, d);
    const double curv = d.dot(hd);
    if (!(curv > 0.0)) {
      s.breakdown = true;
      return s;
    }
    const double step = rs / curv;
    s.v += step * d;
    r -= step * hd;
    const double rs_new = r.squaredNorm();
    d = r + (rs_new / rs) * d;
    rs = rs_new;
    ++s.iters;
  }
  return s;
}

// AID assembly: grad_x f_t(x, y) - J_xy(x, y) v.
inline Vector aid_hypergrad(const BilevelProblem& p, long t, const Vector& x,
                            const Vector& y, const Vector& v) {
  return p.grad_x_f(t, x, y) - p.jvp_xy_g(t, x, y, v);
}

struct ItdResult {
  Vector hypergrad;
  Vector y_final;
  long hvp_count = 0;
  long jvp_count = 0;
  long grad_y_g_count = 0;
};

// Iterative differentiation through K unrolled inner GD steps:
//   grad_x f(x, y^K)
//     - eta * sum_{k=0}^{K-1} J_xy(x, y^k) [ prod_{j=k+1}^{K-1}
//           (I - eta H_yy(x, y^j)) ] grad_y f(x, y^K).
// The sum is accumulated in a single backward sweep with a running vector,
// so the cost is K JVPs and K-1 HVPs with no matrix ever formed.
inline ItdResult itd_hypergrad(const BilevelProblem& p, long t,
                               const Vector& x, const Vector& y0,
                               double eta_step, long k_iters) {
  if (k_iters < 1) throw ParameterError("k_iters must be >= 1");
  if (!(eta_step > 0.0)) throw ParameterError("eta_step must be positive");
  ItdResult out;
  std::vector<Vector> traj;
  traj.reserve(static_cast<std::size_t>(k_iters) + 1);
  traj.push_back(y0);
  for (long k = 0; k < k_iters; ++k) {
    traj.push_back(traj.back() -
                   eta_step * p.grad_y_g(t, x, traj.back()));
    ++out.grad_y_g_count;
  }
  Vector z = p.grad_y_f(t, x, traj.back());
  Vector acc = Vector::Zero(p.dim_x());
  for (long k = k_iters - 1; k >= 0; --k) {
    acc += p.jvp_xy_g(t, x, traj[static_cast<std::size_t>(k)], z);
    ++out.jvp_count;
    if (k > 0) {
      z -= eta_step * p.hvp_yy_g(t, x, traj[static_cast<std::size_t>(k)], z);
      ++out.hvp_count;
    }
  }
  out.hypergrad = p.grad_x_f(t, x, traj.back()) - eta_step * acc;
  out.y_final = traj.back();
  return out;
}

}  // namespace obo

#endif  // OBO_HYPERGRAD_HPP

#ifndef OBO_PROBLEMS_WINDOW_ADVERSARY_HPP
#define OBO_PROBLEMS_WINDOW_ADVERSARY_HPP

#include <algorithm>
#include <cmath>
#include <memory>

#include "obo/oracle.hpp"

namespace obo {

// Lower-bound construction for the window-averaged regret: one fresh
// coordinate per round,
//   f_t(x, y) = c*sigmoid([y]_t) + c*sigmoid([x]_t),
//   g(x, y)   = mu/2 * ||y - phi(x)||^2,  [phi(x)]_i = sigmoid([x]_i)/sqrt(d),
// with d = T. The inner optimum phi(x) is time-invariant (H_{2,T} = 0) and
// lies in a set of diameter 1, yet the outer objective moves linearly, so the
// per-round window regret cannot drop below (c*sigmoid'(0))^2 / W^2.
class WindowAdversary final : public BilevelProblem {
 public:
  static std::shared_ptr<WindowAdversary> make(long T, double c_scale,
                                               double mu,
                                               long d_max = 4096) {
    if (T < 1) throw ParameterError("T must be >= 1");
    if (T > d_max)
      throw ParameterError("T exceeds the memory-feasible dimension cap");
    if (!(c_scale > 0.0)) throw ParameterError("c_scale must be positive");
    if (!(mu > 0.0)) throw ParameterError("mu must be positive");

    const double sqrt_d = std::sqrt(static_cast<double>(T));
    SmoothnessConstants sc;
    sc.mu_g = mu;
    sc.l_g1 = mu;  // exact y-smoothness; the cross block is mu/(4*sqrt(d)) < mu
    sc.l_g2 = mu / (6.0 * std::sqrt(3.0) * sqrt_d);
    sc.l_f0 = std::sqrt(2.0) * c_scale / 4.0;
    sc.l_f1 = std::sqrt(3.0) * c_scale / 18.0;
    sc.q = 2.0 * c_scale;
    sc.d_diam = 1.0;  // ||phi(x)|| <= 1 componentwise range 1/sqrt(d)

    Capabilities caps;
    caps.analytic_inner = true;
    caps.analytic_hypergrad = true;
    caps.analytic_variation = true;

    return std::shared_ptr<WindowAdversary>(
        new WindowAdversary(T, c_scale, mu, sc, caps));
  }

  // c = min{Q/2, 2*sqrt(2)*L_f0, 6*sqrt(3)*L_f1} for reference constants
  static double c_from_caps(double q, double l_f0_ref, double l_f1_ref) {
    return std::min({q / 2.0, 2.0 * std::sqrt(2.0) * l_f0_ref,
                     6.0 * std::sqrt(3.0) * l_f1_ref});
  }

  double c_value() const { return c_; }

  Vector phi(const Vector& x) const {
    Vector p(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
      p[i] = sigmoid(x[i]) / sqrt_d_;
    return p;
  }

  double f_value(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    const int k = coord(t);
    return c_ * sigmoid(y[k]) + c_ * sigmoid(x[k]);
  }

  double g_value(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    return 0.5 * mu_ * (y - phi(x)).squaredNorm();
  }

  Vector grad_x_f(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    Vector g = Vector::Zero(dim_x());
    g[coord(t)] = c_ * sigmoid_d1(x[coord(t)]);
    return g;
  }

  Vector grad_y_f(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    Vector g = Vector::Zero(dim_y());
    g[coord(t)] = c_ * sigmoid_d1(y[coord(t)]);
    return g;
  }

  Vector grad_y_g(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    return mu_ * (y - phi(x));
  }

  Vector hvp_yy_g(long t, const Vector& x, const Vector& y,
                  const Vector& v) const override {
    check_t(t);
    check_xy(x, y);
    check_v(v);
    return mu_ * v;
  }

  Vector jvp_xy_g(long t, const Vector& x, const Vector& y,
                  const Vector& v) const override {
    check_t(t);
    check_xy(x, y);
    check_v(v);
    Vector out(dim_x());
    for (Eigen::Index i = 0; i < out.size(); ++i)
      out[i] = -mu_ * sigmoid_d1(x[i]) / sqrt_d_ * v[i];
    return out;
  }

  Vector inner_opt(long t, const Vector& x) const override {
    check_t(t);
    if (x.size() != dim_x()) throw DimensionError("x has wrong dimension");
    return phi(x);
  }

  Vector true_hypergrad(long t, const Vector& x) const override {
    check_t(t);
    if (x.size() != dim_x()) throw DimensionError("x has wrong dimension");
    const int k = coord(t);
    Vector g = Vector::Zero(dim_x());
    const double phi_k = sigmoid(x[k]) / sqrt_d_;
    g[k] = c_ * sigmoid_d1(phi_k) * sigmoid_d1(x[k]) / sqrt_d_ +
           c_ * sigmoid_d1(x[k]);
    return g;
  }

  VariationIncrements variation_increments(long t) const override {
    check_t(t);
    VariationIncrements inc;
    if (t == 1) return inc;
    // coordinates t-1 and t are independent, so the sup splits; the sigmoid
    // terms are globally bounded
    inc.v_inc = c_ * (sigmoid(1.0 / sqrt_d_) + 0.5);
    inc.h2_inc = 0.0;  // y* is time-invariant
    const double grad_jump = 2.0 * c_ * c_ * sigmoid_d1(0.0) * sigmoid_d1(0.0);
    inc.e2_inc = grad_jump;
    inc.p_inc = grad_jump;
    return inc;
  }

 private:
  WindowAdversary(long T, double c, double mu, SmoothnessConstants sc,
                  Capabilities caps)
      : BilevelProblem("window_adversary", static_cast<int>(T),
                       static_cast<int>(T), T, ConstraintSet::unconstrained(),
                       sc, caps, 10.0),
        c_(c),
        mu_(mu),
        sqrt_d_(std::sqrt(static_cast<double>(T))) {}

  int coord(long t) const { return static_cast<int>(t) - 1; }

  double c_;
  double mu_;
  double sqrt_d_;
};

}  // namespace obo

#endif  // OBO_PROBLEMS_WINDOW_ADVERSARY_HPP

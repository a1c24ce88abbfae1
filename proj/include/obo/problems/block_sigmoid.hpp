#ifndef OBO_PROBLEMS_BLOCK_SIGMOID_HPP
#define OBO_PROBLEMS_BLOCK_SIGMOID_HPP

#include <algorithm>
#include <cmath>
#include <memory>

#include "obo/oracle.hpp"

namespace obo {

// Lower-bound construction for the standard regret: the horizon splits into
// N = ceil((1+V)/Q) blocks of size B = floor(Q*T/(1+V)); inside block k
//   f_t(x, y) = c*sigmoid([y]_k) + c*sigmoid([x]_k),
//   g(x, y)   = mu/2 * ||y - x||^2,
// so y*(x) = x and the true hypergradient is 2c*sigmoid'([x]_k) e_k. A fresh
// coordinate activates per block, forcing every hypergradient-based method to
// pay ||2c*sigmoid'(0) e_k||^2 on the block's first round.
class BlockSigmoidAdversary final : public BilevelProblem {
 public:
  static std::shared_ptr<BlockSigmoidAdversary> make(long T, double v_budget,
                                                     double q, double mu = 1.0,
                                                     double l_f0_ref = 1.0,
                                                     double l_f1_ref = 1.0) {
    if (T < 1) throw ParameterError("T must be >= 1");
    if (v_budget < 0.0) throw ParameterError("v_budget must be >= 0");
    if (!(q > 0.0)) throw ParameterError("q must be positive");
    if (!(mu > 0.0)) throw ParameterError("mu must be positive");
    const long n_blocks =
        static_cast<long>(std::ceil((1.0 + v_budget) / q));
    if (n_blocks > T)
      throw ParameterError("variation budget too large for horizon: N > T");
    const long block =
        std::max(1L, static_cast<long>(std::floor(
                         q * static_cast<double>(T) / (1.0 + v_budget))));
    double c = std::min({q / 2.0, 2.0 * std::sqrt(2.0) * l_f0_ref,
                         6.0 * std::sqrt(3.0) * l_f1_ref});
    if (n_blocks >= 2)  // keep the construction's exact V_T within budget
      c = std::min(c, v_budget / (2.0 * static_cast<double>(n_blocks - 1)));

    SmoothnessConstants sc;
    sc.mu_g = mu;
    sc.l_g1 = mu;
    sc.l_g2 = 1e-12;  // constant second derivatives
    sc.l_f0 = std::sqrt(2.0) * c / 4.0;
    sc.l_f1 = std::sqrt(3.0) * c / 18.0;
    sc.q = q;

    Capabilities caps;
    caps.analytic_inner = true;
    caps.analytic_hypergrad = true;
    caps.analytic_variation = true;

    return std::shared_ptr<BlockSigmoidAdversary>(new BlockSigmoidAdversary(
        T, static_cast<int>(n_blocks), block, c, mu, sc, caps));
  }

  long n_blocks() const { return n_blocks_; }
  long block_size() const { return block_; }
  double c_value() const { return c_; }
  long block_of(long t) const {
    check_t(t);
    return std::min<long>(n_blocks_, (t - 1) / block_ + 1);
  }
  long block_first_round(long k) const { return (k - 1) * block_ + 1; }

  double f_value(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    const int k = coord(t);
    return c_ * sigmoid(y[k]) + c_ * sigmoid(x[k]);
  }

  double g_value(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    return 0.5 * mu_ * (y - x).squaredNorm();
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
    return mu_ * (y - x);
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
    return -mu_ * v;
  }

  Vector inner_opt(long t, const Vector& x) const override {
    check_t(t);
    if (x.size() != dim_x()) throw DimensionError("x has wrong dimension");
    return x;
  }

  Vector true_hypergrad(long t, const Vector& x) const override {
    check_t(t);
    if (x.size() != dim_x()) throw DimensionError("x has wrong dimension");
    Vector g = Vector::Zero(dim_x());
    g[coord(t)] = 2.0 * c_ * sigmoid_d1(x[coord(t)]);
    return g;
  }

  VariationIncrements variation_increments(long t) const override {
    check_t(t);
    VariationIncrements inc;
    if (t == 1 || block_of(t) == block_of(t - 1)) return inc;
    // sigmoids are globally bounded, so the suprema are finite without a
    // reference ball
    inc.v_inc = 2.0 * c_;
    inc.h2_inc = 0.0;
    const double grad_jump = 2.0 * c_ * c_ * sigmoid_d1(0.0) * sigmoid_d1(0.0);
    inc.e2_inc = grad_jump;  // E^f_y; the Hessian term vanishes
    inc.p_inc = grad_jump;   // D_x; G terms vanish (g is time-invariant)
    return inc;
  }

 private:
  BlockSigmoidAdversary(long T, int n, long block, double c, double mu,
                        SmoothnessConstants sc, Capabilities caps)
      : BilevelProblem("block_sigmoid", n, n, T,
                       ConstraintSet::unconstrained(), sc, caps, 10.0),
        n_blocks_(n),
        block_(block),
        c_(c),
        mu_(mu) {}

  int coord(long t) const { return static_cast<int>(block_of(t)) - 1; }

  long n_blocks_;
  long block_;
  double c_;
  double mu_;
};

}  // namespace obo

#endif  // OBO_PROBLEMS_BLOCK_SIGMOID_HPP

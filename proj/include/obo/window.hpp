#ifndef OBO_WINDOW_HPP
#define OBO_WINDOW_HPP

#include <deque>

#include "obo/oracle.hpp"

namespace obo {

// Exponentially weighted view over the last w revealed rounds. Entry i
// (0 = newest) carries weight eta^i; every aggregate divides by the
// full-length normalizer W = sum_{i=0}^{w-1} eta^i even while fewer than w
// rounds exist, treating the missing rounds as zero functions. Single-owner
// mutable state, advanced once per round.
class WindowBuffer {
 public:
  WindowBuffer(const BilevelProblem& p, int w, double eta)
      : p_(&p), w_(w), eta_(eta) {
    WindowSpec spec{w, eta};
    spec.validate();
    w_norm_ = spec.normalizer();
  }

  int w() const { return w_; }
  double eta() const { return eta_; }
  double normalizer() const { return w_norm_; }
  bool empty() const { return rounds_.empty(); }
  int live() const { return static_cast<int>(rounds_.size()); }
  long newest() const { return rounds_.empty() ? 0 : rounds_.front(); }
  const BilevelProblem& problem() const { return *p_; }

  void push(long t) {
    if (!rounds_.empty() && t <= rounds_.front())
      throw ParameterError("rounds must be pushed in increasing order");
    rounds_.push_front(t);
    if (static_cast<int>(rounds_.size()) > w_) rounds_.pop_back();
  }

  Vector grad_y_g(const Vector& x, const Vector& y) const {
    return weighted([&](long t) { return p_->grad_y_g(t, x, y); });
  }
  Vector grad_x_f(const Vector& x, const Vector& y) const {
    return weighted([&](long t) { return p_->grad_x_f(t, x, y); });
  }
  Vector grad_y_f(const Vector& x, const Vector& y) const {
    return weighted([&](long t) { return p_->grad_y_f(t, x, y); });
  }
  Vector hvp_yy_g(const Vector& x, const Vector& y, const Vector& v) const {
    return weighted([&](long t) { return p_->hvp_yy_g(t, x, y, v); });
  }
  Vector jvp_xy_g(const Vector& x, const Vector& y, const Vector& v) const {
    return weighted([&](long t) { return p_->jvp_xy_g(t, x, y, v); });
  }
  double f_value(const Vector& x, const Vector& y) const {
    require_live();
    double s = 0.0, wgt = 1.0;
    for (long t : rounds_) {
      s += wgt * p_->f_value(t, x, y);
      wgt *= eta_;
    }
    return s / w_norm_;
  }

  // grad_v of the averaged surrogate Phi-hat
  Vector phi_grad(const Vector& x, const Vector& y, const Vector& v) const {
    return hvp_yy_g(x, y, v) - grad_y_f(x, y);
  }

  // Averaged hypergradient assembly. The cross-Jacobian form mirrors the
  // per-round formula; the Hessian form reproduces the update as printed in
  // the window algorithm (only meaningful when dim_x == dim_y).
  Vector hypergrad(const Vector& x, const Vector& y, const Vector& v,
                   WindowHgForm form = WindowHgForm::cross_jacobian) const {
    if (form == WindowHgForm::hessian) {
      if (p_->dim_x() != p_->dim_y())
        throw ParameterError(
            "hessian-form window hypergradient requires dim_x == dim_y");
      return grad_x_f(x, y) - hvp_yy_g(x, y, v);
    }
    return grad_x_f(x, y) - jvp_xy_g(x, y, v);
  }

 private:
  void require_live() const {
    if (rounds_.empty()) throw ParameterError("window buffer is empty");
  }

  template <typename Query>
  Vector weighted(Query&& q) const {
    require_live();
    double wgt = 1.0;
    Vector acc;
    bool first = true;
    for (long t : rounds_) {
      Vector term = q(t);
      if (first) {
        acc = wgt * term;
        first = false;
      } else {
        acc += wgt * term;
      }
      wgt *= eta_;
    }
    return acc / w_norm_;
  }

  const BilevelProblem* p_;
  int w_;
  double eta_;
  double w_norm_;
  std::deque<long> rounds_;  // newest first
};

}  // namespace obo

#endif  // OBO_WINDOW_HPP

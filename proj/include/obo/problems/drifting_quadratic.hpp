#ifndef OBO_PROBLEMS_DRIFTING_QUADRATIC_HPP
#define OBO_PROBLEMS_DRIFTING_QUADRATIC_HPP

#include <algorithm>
#include <memory>
#include <utility>
#include <vector>

#include "obo/drift.hpp"
#include "obo/oracle.hpp"

namespace obo {

// Benign fully-analytic family:
//   g_t(x, y) = 1/2 (y - x - d_t)' A (y - x - d_t),   A = diag(a), a in [mu_g, l_g1]
//   f_t(x, y) = 1/2 ||y - c_t||^2
// so y*_t(x) = x + d_t and F_t(x) = 1/2 ||x + d_t - c_t||^2 regardless of A.
// The default A = mu_g * I; an anisotropic spectrum exercises solvers whose
// behaviour degenerates on scalar Hessians (CG in particular).
struct DriftingQuadraticSpec {
  int d = 2;
  long T = 1;
  DriftPath drift_d;
  DriftPath drift_c;
  double mu_g = 1.0;
  double l_g1 = 0.0;  // 0 => isotropic (= mu_g)
  ConstraintSet x_set = ConstraintSet::unconstrained();
  double ref_radius = 10.0;  // variation domain when x_set is unbounded
};

class DriftingQuadratic final : public BilevelProblem {
 public:
  static std::shared_ptr<DriftingQuadratic> make(DriftingQuadraticSpec spec) {
    if (spec.d < 1 || spec.T < 1)
      throw ParameterError("drifting quadratic needs d, T >= 1");
    if (!(spec.mu_g > 0.0)) throw ParameterError("mu_g must be positive");
    const double top = spec.l_g1 <= 0.0 ? spec.mu_g : spec.l_g1;
    if (top < spec.mu_g) throw ParameterError("l_g1 must be >= mu_g");

    auto d_path = spec.drift_d.materialize(spec.d, spec.T);
    auto c_path = spec.drift_c.materialize(spec.d, spec.T);

    const double sup_radius =
        spec.x_set.is_bounded() ? spec.x_set.bounding_radius() : spec.ref_radius;
    double e_max = 0.0, d_spread = 0.0;
    for (long t = 1; t <= spec.T; ++t)
      e_max = std::max(e_max, (d_path[t] - c_path[t]).norm());
    if (spec.x_set.is_bounded()) {
      for (long t = 1; t <= spec.T; ++t)
        for (long s = 1; s < t; ++s)
          d_spread = std::max(d_spread, (d_path[t] - d_path[s]).norm());
    }

    SmoothnessConstants c;
    c.mu_g = spec.mu_g;
    c.l_g1 = top;
    c.l_g2 = 1e-12;  // second derivatives are constant matrices
    c.l_f1 = 1.0;
    // the f-gradient is y - c_t; bound it over the region iterates live in
    c.l_f0 = sup_radius + e_max + 1.0;
    c.q = 0.5 * c.l_f0 * c.l_f0;
    if (spec.x_set.is_bounded())
      c.d_diam = 2.0 * spec.x_set.bounding_radius() + d_spread;

    Capabilities caps;
    caps.analytic_inner = true;
    caps.analytic_hypergrad = true;
    caps.analytic_variation = true;

    return std::shared_ptr<DriftingQuadratic>(new DriftingQuadratic(
        std::move(spec), std::move(d_path), std::move(c_path), c, caps,
        sup_radius, top));
  }

  double f_value(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    return 0.5 * (y - c_[t]).squaredNorm();
  }

  double g_value(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    const Vector r = y - x - d_[t];
    return 0.5 * r.dot(a_.cwiseProduct(r));
  }

  Vector grad_x_f(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    return Vector::Zero(dim_x());
  }

  Vector grad_y_f(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    return y - c_[t];
  }

  Vector grad_y_g(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    return a_.cwiseProduct(y - x - d_[t]);
  }

  Vector hvp_yy_g(long t, const Vector& x, const Vector& y,
                  const Vector& v) const override {
    check_t(t);
    check_xy(x, y);
    check_v(v);
    return a_.cwiseProduct(v);
  }

  Vector jvp_xy_g(long t, const Vector& x, const Vector& y,
                  const Vector& v) const override {
    check_t(t);
    check_xy(x, y);
    check_v(v);
    return -a_.cwiseProduct(v);
  }

  Vector inner_opt(long t, const Vector& x) const override {
    check_t(t);
    if (x.size() != dim_x()) throw DimensionError("x has wrong dimension");
    return x + d_[t];
  }

  Vector true_hypergrad(long t, const Vector& x) const override {
    check_t(t);
    if (x.size() != dim_x()) throw DimensionError("x has wrong dimension");
    return x + d_[t] - c_[t];
  }

  VariationIncrements variation_increments(long t) const override {
    check_t(t);
    VariationIncrements inc;
    if (t == 1) return inc;
    const Vector e_now = d_[t] - c_[t];
    const Vector e_prev = d_[t - 1] - c_[t - 1];
    // F_{t-1} - F_t = <x, e_prev - e_now> + (||e_prev||^2 - ||e_now||^2)/2
    inc.v_inc = sup_abs_affine(e_prev - e_now,
                               0.5 * (e_prev.squaredNorm() - e_now.squaredNorm()));
    const Vector dd = d_[t] - d_[t - 1];
    inc.h2_inc = dd.squaredNorm();
    inc.e2_inc = (c_[t] - c_[t - 1]).squaredNorm();  // E^g_yy term vanishes
    // G terms are evaluated at the iterate but are point-independent here
    inc.p_inc = a_.cwiseProduct(dd).squaredNorm();
    return inc;
  }

  const Vector& d_at(long t) const { return d_[t]; }
  const Vector& c_at(long t) const { return c_[t]; }
  const Vector& hessian_diag() const { return a_; }
  double sup_radius() const { return sup_radius_; }

 private:
  DriftingQuadratic(DriftingQuadraticSpec spec, std::vector<Vector> d_path,
                    std::vector<Vector> c_path, SmoothnessConstants c,
                    Capabilities caps, double sup_radius, double top)
      : BilevelProblem("drifting_quadratic", spec.d, spec.d, spec.T,
                       spec.x_set, c, caps,
                       spec.x_set.is_bounded() ? spec.x_set.bounding_radius()
                                               : spec.ref_radius),
        d_(std::move(d_path)),
        c_(std::move(c_path)),
        sup_radius_(sup_radius) {
    a_.resize(spec.d);
    if (spec.d == 1) {
      a_[0] = spec.mu_g;
    } else {
      for (int i = 0; i < spec.d; ++i)
        a_[i] = spec.mu_g + (top - spec.mu_g) * static_cast<double>(i) /
                                static_cast<double>(spec.d - 1);
    }
  }

  // sup over the decision domain of |<x, a> + b|
  double sup_abs_affine(const Vector& a, double b) const {
    const ConstraintSet& s = x_set();
    switch (s.kind()) {
      case ConstraintSet::Kind::ball:
        return std::abs(s.center().dot(a) + b) + s.radius() * a.norm();
      case ConstraintSet::Kind::box: {
        double lo = b, hi = b;
        for (Eigen::Index i = 0; i < a.size(); ++i) {
          hi += a[i] * (a[i] >= 0.0 ? s.upper()[i] : s.lower()[i]);
          lo += a[i] * (a[i] >= 0.0 ? s.lower()[i] : s.upper()[i]);
        }
        return std::max(std::abs(lo), std::abs(hi));
      }
      default:
        return std::abs(b) + sup_radius_ * a.norm();
    }
  }

  std::vector<Vector> d_, c_;
  Vector a_;
  double sup_radius_;
};

}  // namespace obo

#endif  // OBO_PROBLEMS_DRIFTING_QUADRATIC_HPP

#ifndef OBO_ORACLE_HPP
#define OBO_ORACLE_HPP

#include <memory>
#include <string>

#include "obo/common.hpp"
#include "obo/constants.hpp"
#include "obo/geometry.hpp"

namespace obo {

struct Capabilities {
  bool analytic_inner = false;
  bool analytic_hypergrad = false;
  bool analytic_variation = false;
};

// Exact per-step environmental variation. All increments are zero at t = 1.
struct VariationIncrements {
  double v_inc = 0.0;   // sup_x |F_{t-1}(x) - F_t(x)|
  double h2_inc = 0.0;  // sup_x ||y*_{t-1}(x) - y*_t(x)||^2
  double e2_inc = 0.0;  // gradient-variation terms of the single-loop bound
  double p_inc = 0.0;   // D_x + G_y + G_xy contribution
};

// One oracle query point; bundles the arguments the verification harness
// samples when spot-checking a family.
struct StageQuery {
  long t = 1;
  Vector x;
  Vector y;
  Vector v;
};

// Time-indexed bilevel oracle. Rounds run t = 1..T. Queries expose only
// first-order gradients plus Hessian- and cross-Jacobian-vector products;
// full second-order matrices are never materialized. Implementations are
// immutable after construction and safe for concurrent queries.
class BilevelProblem {
 public:
  virtual ~BilevelProblem() = default;

  int dim_x() const { return dim_x_; }
  int dim_y() const { return dim_y_; }
  long horizon() const { return horizon_; }
  const ConstraintSet& x_set() const { return x_set_; }
  const SmoothnessConstants& constants() const { return constants_; }
  const Capabilities& capabilities() const { return caps_; }
  const std::string& family() const { return family_; }

  // Radius of the reference ball used when suprema must be taken over an
  // unconstrained decision set.
  double reference_radius() const { return ref_radius_; }

  virtual double f_value(long t, const Vector& x, const Vector& y) const = 0;
  virtual double g_value(long t, const Vector& x, const Vector& y) const = 0;
  virtual Vector grad_x_f(long t, const Vector& x, const Vector& y) const = 0;
  virtual Vector grad_y_f(long t, const Vector& x, const Vector& y) const = 0;
  virtual Vector grad_y_g(long t, const Vector& x, const Vector& y) const = 0;
  virtual Vector hvp_yy_g(long t, const Vector& x, const Vector& y,
                          const Vector& v) const = 0;
  virtual Vector jvp_xy_g(long t, const Vector& x, const Vector& y,
                          const Vector& v) const = 0;

  virtual Vector inner_opt(long t, const Vector& x) const {
    (void)t;
    (void)x;
    throw CapabilityError("instance does not expose an analytic inner optimum");
  }

  virtual Vector true_hypergrad(long t, const Vector& x) const {
    (void)t;
    (void)x;
    throw CapabilityError("instance does not expose an analytic hypergradient");
  }

  virtual VariationIncrements variation_increments(long t) const {
    (void)t;
    throw CapabilityError("instance does not expose analytic variation");
  }

 protected:
  BilevelProblem(std::string family, int dim_x, int dim_y, long horizon,
                 ConstraintSet x_set, SmoothnessConstants constants,
                 Capabilities caps, double ref_radius)
      : family_(std::move(family)),
        dim_x_(dim_x),
        dim_y_(dim_y),
        horizon_(horizon),
        x_set_(std::move(x_set)),
        constants_(std::move(constants)),
        caps_(caps),
        ref_radius_(ref_radius) {
    if (dim_x_ < 1 || dim_y_ < 1) throw ParameterError("dimensions must be >= 1");
    if (horizon_ < 1) throw ParameterError("horizon must be >= 1");
    constants_.validate();
  }

  void check_t(long t) const {
    if (t < 1 || t > horizon_)
      throw DimensionError("round index " + std::to_string(t) +
                           " outside [1, " + std::to_string(horizon_) + "]");
  }

  void check_xy(const Vector& x, const Vector& y) const {
    if (x.size() != dim_x_) throw DimensionError("x has wrong dimension");
    if (y.size() != dim_y_) throw DimensionError("y has wrong dimension");
  }

  void check_v(const Vector& v) const {
    if (v.size() != dim_y_) throw DimensionError("v has wrong dimension");
  }

 private:
  std::string family_;
  int dim_x_;
  int dim_y_;
  long horizon_;
  ConstraintSet x_set_;
  SmoothnessConstants constants_;
  Capabilities caps_;
  double ref_radius_;
};

using ProblemPtr = std::shared_ptr<const BilevelProblem>;

struct QueryCounts {
  long f_value = 0;
  long g_value = 0;
  long grad_x_f = 0;
  long grad_y_f = 0;
  long grad_y_g = 0;
  long hvp = 0;
  long jvp = 0;
};

// Forwarding decorator that tallies every oracle query and enforces the
// online protocol: rounds beyond the reveal limit cannot be queried. The
// measurement apparatus (regret, variation) bypasses it and queries the raw
// instance.
class CountingProblem final : public BilevelProblem {
 public:
  explicit CountingProblem(const BilevelProblem& p)
      : BilevelProblem(p.family(), p.dim_x(), p.dim_y(), p.horizon(),
                       p.x_set(), p.constants(), p.capabilities(),
                       p.reference_radius()),
        p_(p),
        reveal_limit_(p.horizon()) {}

  const QueryCounts& counts() const { return counts_; }
  void reset_counts() { counts_ = QueryCounts{}; }

  // Rounds > limit are not yet revealed; querying them is a protocol
  // violation.
  void set_reveal_limit(long t) { reveal_limit_ = t; }

  double f_value(long t, const Vector& x, const Vector& y) const override {
    guard(t);
    ++counts_.f_value;
    return p_.f_value(t, x, y);
  }
  double g_value(long t, const Vector& x, const Vector& y) const override {
    guard(t);
    ++counts_.g_value;
    return p_.g_value(t, x, y);
  }
  Vector grad_x_f(long t, const Vector& x, const Vector& y) const override {
    guard(t);
    ++counts_.grad_x_f;
    return p_.grad_x_f(t, x, y);
  }
  Vector grad_y_f(long t, const Vector& x, const Vector& y) const override {
    guard(t);
    ++counts_.grad_y_f;
    return p_.grad_y_f(t, x, y);
  }
  Vector grad_y_g(long t, const Vector& x, const Vector& y) const override {
    guard(t);
    ++counts_.grad_y_g;
    return p_.grad_y_g(t, x, y);
  }
  Vector hvp_yy_g(long t, const Vector& x, const Vector& y,
                  const Vector& v) const override {
    guard(t);
    ++counts_.hvp;
    return p_.hvp_yy_g(t, x, y, v);
  }
  Vector jvp_xy_g(long t, const Vector& x, const Vector& y,
                  const Vector& v) const override {
    guard(t);
    ++counts_.jvp;
    return p_.jvp_xy_g(t, x, y, v);
  }
  Vector inner_opt(long t, const Vector& x) const override {
    guard(t);
    return p_.inner_opt(t, x);
  }
  Vector true_hypergrad(long t, const Vector& x) const override {
    guard(t);
    return p_.true_hypergrad(t, x);
  }
  VariationIncrements variation_increments(long t) const override {
    guard(t);
    return p_.variation_increments(t);
  }

 private:
  void guard(long t) const {
    if (t > reveal_limit_)
      throw DimensionError("round " + std::to_string(t) +
                           " queried before it was revealed");
  }

  const BilevelProblem& p_;
  long reveal_limit_;
  mutable QueryCounts counts_;
};

}  // namespace obo

#endif  // OBO_ORACLE_HPP

#ifndef OBO_GEOMETRY_HPP
#define OBO_GEOMETRY_HPP

#include <cmath>
#include <string>

#include "obo/common.hpp"

namespace obo {

// Constraint sets supported by the x-update and the v-ball: the whole space,
// a Euclidean ball, or an axis-aligned box.
class ConstraintSet {
 public:
  enum class Kind { unconstrained, ball, box };

  static ConstraintSet unconstrained() { return ConstraintSet(); }

  static ConstraintSet make_ball(Vector center, double radius) {
    if (!(radius > 0.0)) throw ParameterError("ball radius must be positive");
    ConstraintSet s;
    s.kind_ = Kind::ball;
    s.center_ = std::move(center);
    s.radius_ = radius;
    return s;
  }

  static ConstraintSet make_box(Vector lower, Vector upper) {
    if (lower.size() != upper.size())
      throw DimensionError("box bounds have mismatched dimensions");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (!(lower[i] <= upper[i]))
        throw ParameterError("box lower bound exceeds upper bound");
    ConstraintSet s;
    s.kind_ = Kind::box;
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    return s;
  }

  Kind kind() const { return kind_; }
  const Vector& center() const { return center_; }
  double radius() const { return radius_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  bool is_bounded() const { return kind_ != Kind::unconstrained; }

  // Radius of a ball around the origin containing the set (bounded sets only).
  double bounding_radius() const {
    switch (kind_) {
      case Kind::ball:
        return center_.norm() + radius_;
      case Kind::box: {
        double s = 0.0;
        for (Eigen::Index i = 0; i < lower_.size(); ++i) {
          const double m = std::max(std::abs(lower_[i]), std::abs(upper_[i]));
          s += m * m;
        }
        return std::sqrt(s);
      }
      default:
        throw ParameterError("unbounded set has no bounding radius");
    }
  }

 private:
  Kind kind_ = Kind::unconstrained;
  Vector center_;
  double radius_ = 0.0;
  Vector lower_, upper_;
};

inline void check_dim(const ConstraintSet& s, const Vector& p) {
  switch (s.kind()) {
    case ConstraintSet::Kind::ball:
      if (p.size() != s.center().size())
        throw DimensionError("point dimension does not match ball");
      break;
    case ConstraintSet::Kind::box:
      if (p.size() != s.lower().size())
        throw DimensionError("point dimension does not match box");
      break;
    default:
      break;
  }
}

inline Vector project(const ConstraintSet& s, const Vector& p) {
  check_dim(s, p);
  switch (s.kind()) {
    case ConstraintSet::Kind::unconstrained:
      return p;
    case ConstraintSet::Kind::ball: {
      const Vector diff = p - s.center();
      const double n = diff.norm();
      if (n <= s.radius()) return p;
      return s.center() + diff * (s.radius() / n);
    }
    case ConstraintSet::Kind::box: {
      Vector out(p.size());
      for (Eigen::Index i = 0; i < p.size(); ++i)
        out[i] = std::min(std::max(p[i], s.lower()[i]), s.upper()[i]);
      return out;
    }
  }
  throw ParameterError("unknown constraint set kind");
}

inline bool contains(const ConstraintSet& s, const Vector& p,
                     double tol = 1e-12) {
  check_dim(s, p);
  switch (s.kind()) {
    case ConstraintSet::Kind::unconstrained:
      return true;
    case ConstraintSet::Kind::ball:
      return (p - s.center()).norm() <= s.radius() + tol;
    case ConstraintSet::Kind::box:
      for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p[i] < s.lower()[i] - tol || p[i] > s.upper()[i] + tol)
          return false;
      return true;
  }
  return false;
}

struct GradientMappingResult {
  Vector x_plus;   // prox minimizer, always feasible
  Vector mapping;  // (x - x_plus) / gamma
};

// Gradient mapping: x_plus = argmin_{u in X} <g,u> + ||u-x||^2/(2*gamma),
// computed through the closed-form identity x_plus = P_X(x - gamma*g).
inline GradientMappingResult gradient_mapping(const ConstraintSet& s,
                                              const Vector& x, const Vector& g,
                                              double gamma) {
  if (!(gamma > 0.0)) throw ParameterError("gamma must be positive");
  if (x.size() != g.size())
    throw DimensionError("x and g have mismatched dimensions");
  GradientMappingResult r;
  r.x_plus = project(s, x - gamma * g);
  r.mapping = (x - r.x_plus) / gamma;
  return r;
}

}  // namespace obo

#endif  // OBO_GEOMETRY_HPP

#ifndef OBO_VERIFY_HPP
#define OBO_VERIFY_HPP

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "obo/checks.hpp"
#include "obo/hypergrad.hpp"
#include "obo/metrics.hpp"
#include "obo/optimizers.hpp"
#include "obo/problems/block_sigmoid.hpp"
#include "obo/problems/drifting_quadratic.hpp"
#include "obo/problems/hyper_cleaning.hpp"
#include "obo/problems/window_adversary.hpp"
#include "obo/window.hpp"

namespace obo {

struct VerifyGroupResult {
  std::string name;
  bool passed = true;
  long checks = 0;
  std::string detail;  // first failure, or summary stats
};

struct VerifyReport {
  std::vector<VerifyGroupResult> groups;
  bool all_passed() const {
    for (const auto& g : groups)
      if (!g.passed) return false;
    return true;
  }
};

namespace verify_detail {

class Group {
 public:
  explicit Group(std::string name) { res_.name = std::move(name); }

  void check(bool ok, const std::string& what) {
    ++res_.checks;
    if (!ok && res_.passed) {
      res_.passed = false;
      res_.detail = what;
    }
  }

  void check_le(double got, double bound, const std::string& what) {
    std::ostringstream ss;
    ss << what << ": " << got << " > " << bound;
    check(got <= bound, ss.str());
  }

  VerifyGroupResult finish() { return res_; }

 private:
  VerifyGroupResult res_;
};

inline std::vector<ProblemPtr> standard_instances(long T) {
  std::vector<ProblemPtr> out;
  {
    DriftingQuadraticSpec spec;
    spec.d = 4;
    spec.T = T;
    spec.mu_g = 0.8;
    spec.l_g1 = 2.0;
    spec.drift_d = {DriftPath::Kind::sqrt_decay, 11, 0.5};
    spec.drift_c = {DriftPath::Kind::linear, 12, 0.3};
    out.push_back(DriftingQuadratic::make(spec));
  }
  out.push_back(BlockSigmoidAdversary::make(T, 5.0, 2.0));
  out.push_back(WindowAdversary::make(std::min<long>(T, 24), 0.5, 1.0));
  {
    HyperCleaningSpec spec;
    spec.n_train = 8;
    spec.n_val = 6;
    spec.d = 3;
    spec.T = std::min<long>(T, 12);
    spec.ridge = 0.5;
    spec.seed = 4;
    out.push_back(HyperCleaning::make(spec));
  }
  return out;
}

}  // namespace verify_detail

// Finite-difference consistency of every oracle query against the scalar
// objectives.
inline VerifyGroupResult verify_oracle_consistency(
    const std::vector<ProblemPtr>& instances, int points_per_family) {
  verify_detail::Group g("oracle-consistency");
  Rng rng(2024);
  for (const ProblemPtr& pp : instances) {
    const BilevelProblem& p = *pp;
    for (int i = 0; i < points_per_family; ++i) {
      const long t = 1 + static_cast<long>(rng.uniform() * p.horizon());
      const Vector x = rng.gaussian_vector(p.dim_x());
      const Vector y = rng.gaussian_vector(p.dim_y());
      const Vector ux = rng.unit_vector(p.dim_x());
      const Vector uy = rng.unit_vector(p.dim_y());
      g.check_le(rel_err(p.grad_x_f(t, x, y).dot(ux),
                         fd_dir_grad_x_f(p, t, x, y, ux)),
                 1e-5, p.family() + " grad_x_f fd");
      g.check_le(rel_err(p.grad_y_f(t, x, y).dot(uy),
                         fd_dir_grad_y_f(p, t, x, y, uy)),
                 1e-5, p.family() + " grad_y_f fd");
      g.check_le(rel_err(p.grad_y_g(t, x, y).dot(uy),
                         fd_dir_grad_y_g(p, t, x, y, uy)),
                 1e-5, p.family() + " grad_y_g fd");
      const Vector hv = p.hvp_yy_g(t, x, y, uy);
      g.check_le((hv - fd_hvp_yy(p, t, x, y, uy)).norm() /
                     std::max(1.0, hv.norm()),
                 1e-5, p.family() + " hvp fd");
      g.check_le(rel_err(p.jvp_xy_g(t, x, y, uy).dot(ux),
                         fd_jvp_bilinear(p, t, x, y, ux, uy)),
                 1e-5, p.family() + " jvp fd");
      // linearity / homogeneity
      const Vector v1 = rng.gaussian_vector(p.dim_y());
      const Vector v2 = rng.gaussian_vector(p.dim_y());
      g.check_le((p.hvp_yy_g(t, x, y, v1 + v2) - p.hvp_yy_g(t, x, y, v1) -
                  p.hvp_yy_g(t, x, y, v2))
                     .norm(),
                 1e-12, p.family() + " hvp additivity");
      g.check_le((p.jvp_xy_g(t, x, y, 2.5 * v1) -
                  2.5 * p.jvp_xy_g(t, x, y, v1))
                     .norm(),
                 1e-12, p.family() + " jvp homogeneity");
    }
  }
  return g.finish();
}

// Declared strong convexity, inner-optimum stationarity, and the bounded
// inner-optima domain of the window construction.
inline VerifyGroupResult verify_strong_convexity(
    const std::vector<ProblemPtr>& instances, int points_per_family) {
  verify_detail::Group g("strong-convexity");
  Rng rng(2025);
  for (const ProblemPtr& pp : instances) {
    const BilevelProblem& p = *pp;
    const double mu = p.constants().mu_g;
    for (int i = 0; i < points_per_family; ++i) {
      const long t = 1 + static_cast<long>(rng.uniform() * p.horizon());
      const Vector x = rng.gaussian_vector(p.dim_x());
      const Vector y1 = 2.0 * rng.gaussian_vector(p.dim_y());
      const Vector y2 = 2.0 * rng.gaussian_vector(p.dim_y());
      const double lhs =
          (p.grad_y_g(t, x, y1) - p.grad_y_g(t, x, y2)).dot(y1 - y2);
      g.check(lhs >= mu * (y1 - y2).squaredNorm() - 1e-9,
              p.family() + " declared mu_g invalid");
      if (p.capabilities().analytic_inner) {
        g.check_le(p.grad_y_g(t, x, p.inner_opt(t, x)).norm(), 1e-10,
                   p.family() + " inner_opt stationarity");
        if (p.family() == "window_adversary")
          g.check_le(p.inner_opt(t, x).norm(), 1.0,
                     "window adversary inner-optima ball");
      }
    }
  }
  return g.finish();
}

// Per-step contraction of inner GD and projected v-GD on quadratic families.
inline VerifyGroupResult verify_contraction(int trials) {
  verify_detail::Group g("contraction");
  Rng rng(2026);
  for (int i = 0; i < trials; ++i) {
    const double mu = 0.2 + rng.uniform();
    const double lg1 = mu + 2.0 * rng.uniform();
    DriftingQuadraticSpec spec;
    spec.d = 4;
    spec.T = 2;
    spec.mu_g = mu;
    spec.l_g1 = lg1;
    spec.drift_d = {DriftPath::Kind::fixed, 100u + static_cast<std::uint64_t>(i), 1.0};
    spec.drift_c = {DriftPath::Kind::fixed, 200u + static_cast<std::uint64_t>(i), 1.0};
    auto p = DriftingQuadratic::make(spec);
    const double alpha = (0.05 + 0.95 * rng.uniform()) / lg1;
    const double beta = (0.05 + 0.95 * rng.uniform()) / lg1;
    const long t = 1;
    const Vector x = rng.gaussian_vector(4);
    const Vector ystar = p->inner_opt(t, x);
    Vector y = ystar + rng.gaussian_vector(4);
    const double before_y = (y - ystar).norm();
    y -= alpha * p->grad_y_g(t, x, y);
    if (before_y > 1e-12)
      g.check_le((y - ystar).norm() / before_y, 1.0 - alpha * mu + 1e-9,
                 "inner GD contraction");

    const Vector yq = rng.gaussian_vector(4);
    const Vector vstar = (yq - p->c_at(t)).cwiseQuotient(p->hessian_diag());
    const Vector v0 = vstar + rng.gaussian_vector(4);
    const double radius = p->constants().l_f0 / mu;
    const auto vs = solve_v_projected_gd(*p, t, x, yq, v0, beta, 1, radius);
    const double before_v = (v0 - vstar).norm();
    if (before_v > 1e-12)
      g.check_le((vs.v - vstar).norm() / before_v, 1.0 - beta * mu + 1e-9,
                 "projected v-GD contraction");
  }
  return g.finish();
}

// AID exactness at exact subsolutions and ITD convergence toward the true
// hypergradient.
inline VerifyGroupResult verify_hypergrad_exactness(int trials) {
  verify_detail::Group g("hypergrad-exactness");
  Rng rng(2027);
  DriftingQuadraticSpec spec;
  spec.d = 6;
  spec.T = 10;
  spec.mu_g = 1.0;
  spec.l_g1 = 2.0;
  spec.drift_d = {DriftPath::Kind::sqrt_decay, 31, 0.5};
  spec.drift_c = {DriftPath::Kind::linear, 32, 0.3};
  auto p = DriftingQuadratic::make(spec);
  for (int i = 0; i < trials; ++i) {
    const long t = 1 + static_cast<long>(rng.uniform() * 10);
    const Vector x = 2.0 * rng.gaussian_vector(6);
    const Vector y = p->inner_opt(t, x);
    const auto vs = solve_v_cg(*p, t, x, y, Vector::Zero(6), 10);
    g.check_le((aid_hypergrad(*p, t, x, y, vs.v) - p->true_hypergrad(t, x)).norm(),
               1e-8, "AID at exact subsolutions");
    const Vector fd = fd_true_hypergrad(
        *p, t, x,
        [&](long tt, const Vector& xx) { return p->inner_opt(tt, xx); });
    g.check_le((fd - p->true_hypergrad(t, x)).norm() /
                   std::max(1.0, p->true_hypergrad(t, x).norm()),
               1e-5, "true hypergradient vs finite differences");
  }
  // ITD decay on the isotropic variant
  DriftingQuadraticSpec iso = spec;
  iso.l_g1 = 0.0;
  auto pi = DriftingQuadratic::make(iso);
  const Vector x = rng.gaussian_vector(6);
  const Vector y0 = rng.gaussian_vector(6);
  double prev = 1e300;
  for (long k = 1; k <= 30; ++k) {
    const double err =
        (itd_hypergrad(*pi, 3, x, y0, 0.5, k).hypergrad -
         pi->true_hypergrad(3, x))
            .norm();
    g.check(err <= prev + 1e-12, "ITD error must decrease in K");
    prev = err;
  }
  g.check_le(prev, 1e-4, "ITD error at K = 30");
  return g.finish();
}

// Lemma-style drift bound of the averaged inner optimum on window families.
inline VerifyGroupResult verify_window_drift(int sampled_x) {
  verify_detail::Group g("window-drift");
  auto adversary = WindowAdversary::make(16, 0.5, 1.0);
  DriftingQuadraticSpec spec;
  spec.d = 3;
  spec.T = 16;
  spec.mu_g = 1.0;
  spec.drift_d = {DriftPath::Kind::linear, 41, 0.3};
  spec.drift_c = {DriftPath::Kind::fixed, 42, 0.0};
  spec.x_set = ConstraintSet::make_ball(Vector::Zero(3), 1.5);
  auto quad = DriftingQuadratic::make(spec);

  Rng rng(2028);
  for (const ProblemPtr pp : {ProblemPtr(adversary), ProblemPtr(quad)}) {
    const BilevelProblem& p = *pp;
    if (!p.constants().d_diam) continue;
    const int w = 3;
    const double eta = 0.7;
    const double W = WindowSpec{w, eta}.normalizer();
    const double bound = (1.0 + std::pow(eta, w)) * p.constants().l_g1 *
                         (*p.constants().d_diam) /
                         (p.constants().mu_g * W);
    WindowBuffer prev(p, w, eta);
    WindowBuffer cur(p, w, eta);
    prev.push(1);
    cur.push(1);
    for (long t = 2; t <= p.horizon(); ++t) {
      cur.push(t);
      double sup = 0.0;
      for (int i = 0; i < sampled_x; ++i) {
        const Vector x =
            project(p.x_set(), Vector(2.0 * rng.gaussian_vector(p.dim_x())));
        sup = std::max(sup, (win_inner_high_precision(prev, x, 1e-11) -
                             win_inner_high_precision(cur, x, 1e-11))
                                .norm());
      }
      g.check_le(sup, bound + 1e-9,
                 p.family() + " window inner-optimum drift bound");
      prev.push(t);
    }
  }
  return g.finish();
}

// Prox and projection identities.
inline VerifyGroupResult verify_geometry(int trials) {
  verify_detail::Group g("geometry");
  Rng rng(2029);
  const auto ball = ConstraintSet::make_ball(Vector::Zero(3), 1.5);
  Vector lo = Vector::Constant(3, -1.0), hi = Vector::Constant(3, 1.0);
  const auto box = ConstraintSet::make_box(lo, hi);
  const auto free = ConstraintSet::unconstrained();
  for (int i = 0; i < trials; ++i) {
    const Vector pnt = 4.0 * rng.gaussian_vector(3);
    const Vector q = 4.0 * rng.gaussian_vector(3);
    for (const auto* s : {&ball, &box}) {
      g.check_le((project(*s, pnt) - project(*s, q)).norm(),
                 (pnt - q).norm() + 1e-12, "projection non-expansive");
    }
    const Vector grad = 2.0 * rng.gaussian_vector(3);
    const double gamma = 0.05 + rng.uniform();
    for (const auto* s : {&free, &ball, &box}) {
      const Vector x = project(*s, pnt);
      const auto r = gradient_mapping(*s, x, grad, gamma);
      g.check_le(r.mapping.norm(), grad.norm() + 1e-10,
                 "mapping norm vs gradient norm");
      const double opt =
          grad.dot(r.x_plus) + (r.x_plus - x).squaredNorm() / (2.0 * gamma);
      for (int c = 0; c < 25; ++c) {
        const Vector u = project(*s, Vector(4.0 * rng.gaussian_vector(3)));
        const double val = grad.dot(u) + (u - x).squaredNorm() / (2.0 * gamma);
        g.check(opt <= val + 1e-12, "prox optimality vs feasible candidate");
      }
    }
  }
  return g.finish();
}

struct VerifyOptions {
  bool full = false;
};

inline VerifyReport run_verify(const VerifyOptions& opts = {}) {
  const int scale = opts.full ? 10 : 1;
  VerifyReport rep;
  const auto instances = verify_detail::standard_instances(20);
  rep.groups.push_back(verify_oracle_consistency(instances, 25 * scale));
  rep.groups.push_back(verify_strong_convexity(instances, 25 * scale));
  rep.groups.push_back(verify_contraction(1000 * scale));
  rep.groups.push_back(verify_hypergrad_exactness(25 * scale));
  rep.groups.push_back(verify_geometry(50 * scale));
  if (opts.full) rep.groups.push_back(verify_window_drift(1000));
  return rep;
}

}  // namespace obo

#endif  // OBO_VERIFY_HPP

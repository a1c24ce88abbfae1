#include <catch2/catch_amalgamated.hpp>

#include "obo/metrics.hpp"
#include "obo/problems/drifting_quadratic.hpp"
#include "obo/problems/window_adversary.hpp"
#include "obo/window.hpp"

using namespace obo;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

std::shared_ptr<DriftingQuadratic> quad(long T, DriftPath::Kind kind,
                                        std::uint64_t seed = 1) {
  DriftingQuadraticSpec spec;
  spec.d = 2;
  spec.T = T;
  spec.mu_g = 1.0;
  spec.drift_d = {kind, seed, 0.5};
  spec.drift_c = {kind, seed + 1, 0.5};
  return DriftingQuadratic::make(spec);
}

}  // namespace

TEST_CASE("window push semantics") {
  auto p = quad(6, DriftPath::Kind::linear);

  SECTION("w = 1 holds only the current round") {
    WindowBuffer buf(*p, 1, 1.0);
    for (long t = 1; t <= 6; ++t) {
      buf.push(t);
      CHECK(buf.live() == 1);
      CHECK(buf.newest() == t);
    }
  }

  SECTION("weights and normalizer at w = 2") {
    WindowBuffer buf(*p, 2, 0.5);
    buf.push(1);
    buf.push(2);
    CHECK(buf.normalizer() == Catch::Approx(1.5));
    CHECK(buf.live() == 2);
  }

  SECTION("warm-up keeps the full-length normalizer") {
    WindowBuffer buf(*p, 3, 0.5);
    buf.push(1);
    CHECK(buf.live() == 1);
    CHECK(buf.normalizer() == Catch::Approx(1.0 + 0.5 + 0.25));
  }

  SECTION("rounds must arrive in increasing order") {
    WindowBuffer buf(*p, 3, 0.5);
    buf.push(2);
    CHECK_THROWS_AS(buf.push(2), ParameterError);
    CHECK_THROWS_AS(buf.push(1), ParameterError);
  }

  SECTION("empty buffer queries error out") {
    WindowBuffer buf(*p, 2, 0.5);
    CHECK_THROWS_AS(buf.grad_y_g(vec({0, 0}), vec({0, 0})), ParameterError);
  }
}

TEST_CASE("window averages are exponentially weighted sums") {
  // grad_y_g of round 1 and 2 differ through d_t; check the 2-entry formula
  auto p = quad(4, DriftPath::Kind::linear, 3);
  WindowBuffer buf(*p, 2, 0.5);
  buf.push(1);
  buf.push(2);
  const Vector x = vec({0.3, -0.1});
  const Vector y = vec({1.0, 0.5});
  const Vector expect =
      (1.0 * p->grad_y_g(2, x, y) + 0.5 * p->grad_y_g(1, x, y)) / 1.5;
  CHECK((buf.grad_y_g(x, y) - expect).norm() < 1e-14);

  const Vector v = vec({0.2, 0.9});
  const Vector expect_hvp =
      (1.0 * p->hvp_yy_g(2, x, y, v) + 0.5 * p->hvp_yy_g(1, x, y, v)) / 1.5;
  CHECK((buf.hvp_yy_g(x, y, v) - expect_hvp).norm() < 1e-14);
}

TEST_CASE("w = 1 window equals the per-round oracle") {
  auto p = quad(4, DriftPath::Kind::linear, 5);
  WindowBuffer buf(*p, 1, 0.7);
  buf.push(3);
  Rng rng(61);
  const Vector x = rng.gaussian_vector(2);
  const Vector y = rng.gaussian_vector(2);
  const Vector v = rng.gaussian_vector(2);
  CHECK((buf.grad_y_g(x, y) - p->grad_y_g(3, x, y)).norm() < 1e-15);
  CHECK((buf.grad_x_f(x, y) - p->grad_x_f(3, x, y)).norm() < 1e-15);
  CHECK((buf.grad_y_f(x, y) - p->grad_y_f(3, x, y)).norm() < 1e-15);
  CHECK((buf.phi_grad(x, y, v) - phi_grad(*p, 3, x, y, v)).norm() < 1e-15);
  CHECK((buf.hypergrad(x, y, v) - aid_hypergrad(*p, 3, x, y, v)).norm() <
        1e-15);
}

TEST_CASE("stationary functions make any window equal the per-round oracle") {
  auto p = quad(8, DriftPath::Kind::fixed, 9);
  WindowBuffer buf(*p, 4, 0.6);
  for (long t = 1; t <= 6; ++t) buf.push(t);
  Rng rng(67);
  for (int i = 0; i < 10; ++i) {
    const Vector x = rng.gaussian_vector(2);
    const Vector y = rng.gaussian_vector(2);
    const Vector v = rng.gaussian_vector(2);
    CHECK((buf.grad_y_g(x, y) - p->grad_y_g(6, x, y)).norm() < 1e-12);
    CHECK((buf.jvp_xy_g(x, y, v) - p->jvp_xy_g(6, x, y, v)).norm() < 1e-12);
    CHECK((buf.hypergrad(x, y, v) - aid_hypergrad(*p, 6, x, y, v)).norm() <
          1e-12);
  }
}

TEST_CASE("window phi gradient vanishes at the window v-solution") {
  auto p = quad(6, DriftPath::Kind::linear, 13);
  WindowBuffer buf(*p, 3, 0.8);
  for (long t = 1; t <= 5; ++t) buf.push(t);
  const Vector x = vec({0.2, 0.4});
  const Vector y = vec({-0.3, 1.1});
  const Vector vhat = win_solve_v_measure(buf, x, y, 1e-14);
  CHECK(buf.phi_grad(x, y, vhat).norm() < 1e-12);
}

TEST_CASE("window hypergradient matches per-round truth under stationarity") {
  auto p = quad(6, DriftPath::Kind::fixed, 17);
  WindowBuffer buf(*p, 3, 0.5);
  for (long t = 1; t <= 5; ++t) buf.push(t);
  Rng rng(71);
  const Vector x = rng.gaussian_vector(2);
  const Vector y = p->inner_opt(5, x);
  const Vector vhat = win_solve_v_measure(buf, x, y, 1e-14);
  const Vector wh = buf.hypergrad(x, y, vhat);
  CHECK((wh - p->true_hypergrad(5, x)).norm() < 1e-10);
}

TEST_CASE("hessian-form assembly is available and distinct") {
  auto p = quad(4, DriftPath::Kind::linear, 19);
  WindowBuffer buf(*p, 2, 0.5);
  buf.push(1);
  buf.push(2);
  const Vector x = vec({0.1, 0.2});
  const Vector y = vec({0.5, -0.5});
  const Vector v = vec({1.0, 1.0});
  const Vector xy = buf.hypergrad(x, y, v, WindowHgForm::cross_jacobian);
  const Vector yy = buf.hypergrad(x, y, v, WindowHgForm::hessian);
  // for this family J_xy = -A and H_yy = +A, so the forms differ by sign of
  // the product term
  CHECK((xy + yy).norm() < 1e-14);  // grad_x f = 0 here
}

TEST_CASE("measured window regret agrees with the per-round regret at w=1") {
  auto p = quad(5, DriftPath::Kind::linear, 23);
  WindowBuffer buf(*p, 1, 1.0);
  Rng rng(73);
  for (long t = 1; t <= 5; ++t) {
    buf.push(t);
    const Vector x = rng.gaussian_vector(2);
    const double a = regret_increment(*p, t, x, 0.25);
    const double b = window_regret_increment(buf, t, x, 0.25);
    CHECK(a == Catch::Approx(b).margin(1e-12));
  }
}

TEST_CASE("window drift of the averaged inner optimum obeys the D-bound") {
  // windowed drifting quadratic on a bounded set, plus the window adversary
  DriftingQuadraticSpec spec;
  spec.d = 2;
  spec.T = 12;
  spec.mu_g = 1.0;
  spec.drift_d = {DriftPath::Kind::linear, 29, 0.4};
  spec.drift_c = {DriftPath::Kind::fixed, 30, 0.0};
  spec.x_set = ConstraintSet::make_ball(vec({0, 0}), 1.5);
  auto p = DriftingQuadratic::make(spec);
  const int w = 3;
  const double eta = 0.7;
  const double W = WindowSpec{w, eta}.normalizer();
  const auto& c = p->constants();
  REQUIRE(c.d_diam.has_value());
  const double bound =
      (1.0 + std::pow(eta, w)) * c.l_g1 * (*c.d_diam) / (c.mu_g * W);

  WindowBuffer prev(*p, w, eta);
  WindowBuffer cur(*p, w, eta);
  prev.push(1);
  cur.push(1);
  Rng rng(83);
  for (long t = 2; t <= 12; ++t) {
    cur.push(t);
    double sup = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Vector x = project(p->x_set(), Vector(2.0 * rng.gaussian_vector(2)));
      const Vector ya = win_inner_high_precision(prev, x, 1e-11);
      const Vector yb = win_inner_high_precision(cur, x, 1e-11);
      sup = std::max(sup, (ya - yb).norm());
    }
    CHECK(sup <= bound + 1e-9);
    prev.push(t);
  }
}

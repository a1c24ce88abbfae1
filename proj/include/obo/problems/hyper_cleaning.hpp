#ifndef OBO_PROBLEMS_HYPER_CLEANING_HPP
#define OBO_PROBLEMS_HYPER_CLEANING_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "obo/oracle.hpp"

namespace obo {

// Desk-scale analog of online data hyper-cleaning. Each round delivers a
// fresh synthetic batch: a corrupted training set (labels flipped to class 1
// at the phase's rate) and a clean validation set. The outer variable is the
// per-sample weight vector of the training batch; the inner variable is a
// binary logistic model.
//
//   g_t(w, theta) = mean_i[ softplus(z_i) - y_i z_i ] + ridge/2 ||theta||^2,
//                   z_i = sigmoid(w_i) * <theta, x_i>
//   f_t(w, theta) = mean_j[ softplus(s_j) - y_j s_j ],  s_j = <theta, x_j>
//
// The ridge term makes the inner problem strongly convex (modulus = ridge).
struct HyperCleaningSpec {
  int n_train = 20;
  int n_val = 20;
  int d = 5;
  long T = 1;
  std::vector<double> corruption_schedule = {0.1, 0.2, 0.3};
  double ridge = 0.5;
  std::uint64_t seed = 0;
};

class HyperCleaning final : public BilevelProblem {
 public:
  struct Batch {
    std::vector<Vector> train_x;
    std::vector<double> train_y;  // labels in {0, 1}, after corruption
    std::vector<Vector> val_x;
    std::vector<double> val_y;
  };

  static std::shared_ptr<HyperCleaning> make(HyperCleaningSpec spec) {
    if (spec.n_train < 1 || spec.n_val < 1 || spec.d < 1 || spec.T < 1)
      throw ParameterError("hyper-cleaning needs n_train, n_val, d, T >= 1");
    if (!(spec.ridge > 0.0)) throw ParameterError("ridge must be positive");
    if (spec.corruption_schedule.empty())
      throw ParameterError("corruption schedule must be non-empty");
    for (double r : spec.corruption_schedule)
      if (r < 0.0 || r > 1.0)
        throw ParameterError("corruption rate outside [0, 1]");

    Rng seed_rng(spec.seed);
    const Vector separator = seed_rng.unit_vector(spec.d);

    std::vector<Batch> batches;
    batches.reserve(static_cast<std::size_t>(spec.T) + 1);
    batches.emplace_back();  // index 0 unused
    double max_norm = 0.0;        // max feature norm anywhere
    double tr_mean_sq = 0.0;      // max over batches of mean ||x_i||^2 (train)
    double tr_mean_norm = 0.0;    // max over batches of mean ||x_i|| (train)
    double tr_mean_cu = 0.0;      // max over batches of mean ||x_i||^3 (train)
    double val_mean_norm = 0.0;   // max over batches of mean ||x_j|| (val)
    double val_mean_sq = 0.0;     // max over batches of mean ||x_j||^2 (val)
    for (long t = 1; t <= spec.T; ++t) {
      Batch b;
      Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(t)));
      const double rate = rate_for(spec, t);
      const int n_flip =
          static_cast<int>(std::floor(rate * spec.n_train + 1e-12));
      for (int i = 0; i < spec.n_train; ++i) {
        Vector x = rng.gaussian_vector(spec.d);
        const double margin = separator.dot(x);
        double y = margin >= 0.0 ? 1.0 : 0.0;
        if (i < n_flip) y = 1.0;  // corrupted labels collapse onto class 1
        b.train_x.push_back(std::move(x));
        b.train_y.push_back(y);
      }
      for (int j = 0; j < spec.n_val; ++j) {
        Vector x = rng.gaussian_vector(spec.d);
        b.val_y.push_back(separator.dot(x) >= 0.0 ? 1.0 : 0.0);
        b.val_x.push_back(std::move(x));
      }
      double sq = 0.0, nm = 0.0, cu = 0.0;
      for (const auto& x : b.train_x) {
        const double n = x.norm();
        max_norm = std::max(max_norm, n);
        sq += n * n;
        nm += n;
        cu += n * n * n;
      }
      tr_mean_sq = std::max(tr_mean_sq, sq / spec.n_train);
      tr_mean_norm = std::max(tr_mean_norm, nm / spec.n_train);
      tr_mean_cu = std::max(tr_mean_cu, cu / spec.n_train);
      sq = nm = 0.0;
      for (const auto& x : b.val_x) {
        nm += x.norm();
        sq += x.squaredNorm();
      }
      val_mean_norm = std::max(val_mean_norm, nm / spec.n_val);
      val_mean_sq = std::max(val_mean_sq, sq / spec.n_val);
      batches.push_back(std::move(b));
    }
    // The inner stationary point obeys ridge*||theta*|| <= mean ||x_i||, so
    // the region the iterates can reach is bounded; the constants below are
    // coarse but valid over it.
    const double theta_bound = tr_mean_norm / spec.ridge + 1.0;
    SmoothnessConstants sc;
    sc.mu_g = spec.ridge;
    sc.l_g1 = spec.ridge + 0.25 * tr_mean_sq +
              0.25 * tr_mean_norm * (0.25 * theta_bound * max_norm + 1.0);
    sc.l_g2 = 1.0 + (1.0 + theta_bound) * tr_mean_cu;
    sc.l_f0 = val_mean_norm;
    sc.l_f1 = 0.25 * val_mean_sq;
    sc.q = softplus(theta_bound * max_norm) + theta_bound * max_norm;

    Capabilities caps;  // nothing analytic; the measurement fallback applies

    return std::shared_ptr<HyperCleaning>(new HyperCleaning(
        std::move(spec), std::move(batches), separator, sc, caps));
  }

  const Batch& batch(long t) const {
    check_t(t);
    return batches_[static_cast<std::size_t>(t)];
  }
  double corruption_rate(long t) const {
    check_t(t);
    return rate_for(spec_, t);
  }
  double ridge() const { return spec_.ridge; }

  double f_value(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    const Batch& b = batch(t);
    double loss = 0.0;
    for (std::size_t j = 0; j < b.val_x.size(); ++j) {
      const double s = y.dot(b.val_x[j]);
      loss += softplus(s) - b.val_y[j] * s;
    }
    return loss / static_cast<double>(b.val_x.size());
  }

  double g_value(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    const Batch& b = batch(t);
    double loss = 0.0;
    for (std::size_t i = 0; i < b.train_x.size(); ++i) {
      const double z = sigmoid(x[static_cast<Eigen::Index>(i)]) *
                       y.dot(b.train_x[i]);
      loss += softplus(z) - b.train_y[i] * z;
    }
    return loss / static_cast<double>(b.train_x.size()) +
           0.5 * spec_.ridge * y.squaredNorm();
  }

  Vector grad_x_f(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    return Vector::Zero(dim_x());  // the outer loss has no direct w term
  }

  Vector grad_y_f(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    const Batch& b = batch(t);
    Vector g = Vector::Zero(dim_y());
    for (std::size_t j = 0; j < b.val_x.size(); ++j) {
      const double s = y.dot(b.val_x[j]);
      g += (sigmoid(s) - b.val_y[j]) * b.val_x[j];
    }
    return g / static_cast<double>(b.val_x.size());
  }

  Vector grad_y_g(long t, const Vector& x, const Vector& y) const override {
    check_t(t);
    check_xy(x, y);
    const Batch& b = batch(t);
    Vector g = Vector::Zero(dim_y());
    for (std::size_t i = 0; i < b.train_x.size(); ++i) {
      const double sw = sigmoid(x[static_cast<Eigen::Index>(i)]);
      const double z = sw * y.dot(b.train_x[i]);
      g += (sigmoid(z) - b.train_y[i]) * sw * b.train_x[i];
    }
    return g / static_cast<double>(b.train_x.size()) + spec_.ridge * y;
  }

  Vector hvp_yy_g(long t, const Vector& x, const Vector& y,
                  const Vector& v) const override {
    check_t(t);
    check_xy(x, y);
    check_v(v);
    const Batch& b = batch(t);
    Vector out = Vector::Zero(dim_y());
    for (std::size_t i = 0; i < b.train_x.size(); ++i) {
      const double sw = sigmoid(x[static_cast<Eigen::Index>(i)]);
      const double z = sw * y.dot(b.train_x[i]);
      out += sigmoid_d1(z) * sw * sw * b.train_x[i].dot(v) * b.train_x[i];
    }
    return out / static_cast<double>(b.train_x.size()) + spec_.ridge * v;
  }

  Vector jvp_xy_g(long t, const Vector& x, const Vector& y,
                  const Vector& v) const override {
    check_t(t);
    check_xy(x, y);
    check_v(v);
    const Batch& b = batch(t);
    Vector out(dim_x());
    for (std::size_t i = 0; i < b.train_x.size(); ++i) {
      const Eigen::Index ix = static_cast<Eigen::Index>(i);
      const double sw = sigmoid(x[ix]);
      const double dot = y.dot(b.train_x[i]);
      const double z = sw * dot;
      const double coeff =
          sigmoid_d1(x[ix]) *
          (sigmoid_d1(z) * sw * dot + sigmoid(z) - b.train_y[i]);
      out[ix] = coeff * b.train_x[i].dot(v) /
                static_cast<double>(b.train_x.size());
    }
    return out;
  }

 private:
  HyperCleaning(HyperCleaningSpec spec, std::vector<Batch> batches,
                Vector separator, SmoothnessConstants sc, Capabilities caps)
      : BilevelProblem("hyper_cleaning", spec.n_train, spec.d, spec.T,
                       ConstraintSet::unconstrained(), sc, caps, 10.0),
        spec_(std::move(spec)),
        batches_(std::move(batches)),
        separator_(std::move(separator)) {}

  static double rate_for(const HyperCleaningSpec& spec, long t) {
    const std::size_t phases = spec.corruption_schedule.size();
    const std::size_t idx = std::min(
        phases - 1, static_cast<std::size_t>((t - 1) * static_cast<long>(
                                                           phases) /
                                             spec.T));
    return spec.corruption_schedule[idx];
  }

  HyperCleaningSpec spec_;
  std::vector<Batch> batches_;
  Vector separator_;
};

}  // namespace obo

#endif  // OBO_PROBLEMS_HYPER_CLEANING_HPP

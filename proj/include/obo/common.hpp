#ifndef OBO_COMMON_HPP
#define OBO_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace obo {

using Vector = Eigen::VectorXd;

// Parameter outside its admissible domain (bad step size, non-positive
// modulus, unknown algorithm id, malformed config value).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Vector dimensions or round index do not match the problem.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Queried an analytic capability the instance does not provide.
struct CapabilityError : std::logic_error {
  using std::logic_error::logic_error;
};

// An adaptive loop hit its safety cap; carries the residual at abort so the
// caller can diagnose a mis-specified tolerance or step size.
struct CappedLoopError : std::runtime_error {
  double residual;
  explicit CappedLoopError(const std::string& msg, double res)
      : std::runtime_error(msg), residual(res) {}
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double sigmoid_d1(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

inline double sigmoid_d2(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s) * (1.0 - 2.0 * s);
}

inline double softplus(double x) {
  // log(1 + e^x) without overflow for large |x|
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Deterministic RNG used everywhere seeds matter. mt19937_64 is fully
// specified by the standard; the gaussian is an explicit Box-Muller so the
// byte stream does not depend on the standard library's distribution
// implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {
    // 53-bit mantissa in [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  Vector gaussian_vector(int d) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = gaussian();
    return v;
  }

  Vector unit_vector(int d) {
    Vector v = gaussian_vector(d);
    const double n = v.norm();
    if (n < 1e-300) {
      v.setZero();
      v[0] = 1.0;
      return v;
    }
    return v / n;
  }

  std::uint64_t next_u64() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace obo

#endif  // OBO_COMMON_HPP

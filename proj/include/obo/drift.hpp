#ifndef OBO_DRIFT_HPP
#define OBO_DRIFT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "obo/common.hpp"

namespace obo {

// Deterministic time-varying parameter paths. Given the same (kind, seed,
// scale, d, T) the materialized path is bit-identical across runs.
struct DriftPath {
  enum class Kind { fixed, step_change, sqrt_decay, linear };

  Kind kind = Kind::fixed;
  std::uint64_t seed = 0;
  double scale = 0.0;

  static Kind parse_kind(const std::string& s) {
    if (s == "static") return Kind::fixed;
    if (s == "step-change") return Kind::step_change;
    if (s == "sqrt-decay") return Kind::sqrt_decay;
    if (s == "linear") return Kind::linear;
    throw ParameterError("unknown drift kind: " + s);
  }

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::fixed: return "static";
      case Kind::step_change: return "step-change";
      case Kind::sqrt_decay: return "sqrt-decay";
      case Kind::linear: return "linear";
    }
    return "?";
  }

  // Path values for rounds 1..T (index 0 unused, kept for direct indexing).
  std::vector<Vector> materialize(int d, long T) const {
    if (d < 1 || T < 1) throw ParameterError("drift path needs d, T >= 1");
    std::vector<Vector> p(static_cast<std::size_t>(T) + 1,
                          Vector::Zero(d));
    Rng rng(seed);
    switch (kind) {
      case Kind::fixed: {
        const Vector base = scale == 0.0 ? Vector::Zero(d)
                                         : Vector(scale * rng.unit_vector(d));
        for (long t = 1; t <= T; ++t) p[t] = base;
        break;
      }
      case Kind::step_change: {
        // four equal phases, a fresh direction per phase
        const long phase_len = std::max(1L, T / 4);
        Vector cur = scale == 0.0 ? Vector::Zero(d)
                                  : Vector(scale * rng.unit_vector(d));
        for (long t = 1; t <= T; ++t) {
          if (t > 1 && (t - 1) % phase_len == 0 && scale != 0.0)
            cur = scale * rng.unit_vector(d);
          p[t] = cur;
        }
        break;
      }
      case Kind::sqrt_decay: {
        for (long t = 2; t <= T; ++t) {
          const double step =
              scale / std::sqrt(static_cast<double>(t));
          p[t] = p[t - 1] + (scale == 0.0 ? Vector::Zero(d)
                                          : Vector(step * rng.unit_vector(d)));
        }
        break;
      }
      case Kind::linear: {
        for (long t = 2; t <= T; ++t) {
          p[t] = p[t - 1] + (scale == 0.0 ? Vector::Zero(d)
                                          : Vector(scale * rng.unit_vector(d)));
        }
        break;
      }
    }
    return p;
  }
};

}  // namespace obo

#endif  // OBO_DRIFT_HPP

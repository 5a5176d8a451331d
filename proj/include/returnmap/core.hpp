#ifndef RETURNMAP_CORE_HPP
#define RETURNMAP_CORE_HPP

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Errors.  One exception type with a code; a few carry a numeric payload.
// ---------------------------------------------------------------------------

enum class ErrorCode {
  NonFinite,
  DomainError,
  LeftChart,
  NotInSection,
  NoConvergence,
  SingularJacobian,
  EigenFailure,
  Ambiguous,
  NoFixedPoint,
  ResonanceGuard,
  WindowViolation,
  NotBracketed,
  SpectrumMismatch,
  SingularHomological,
  NotAligned,
  NoTangency,
  DegenerateContact,
  NotContractive,
  OrbitLeft,
  MeshExplosion,
  EmptyCloud,
  ConfigError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, double payload = 0.0)
      : std::runtime_error(what), code_(code), payload_(payload) {}

  ErrorCode code() const { return code_; }
  // Meaning depends on the code: step index for LeftChart, condition number
  // for SingularJacobian, sampled derivative bound for NotContractive, ...
  double payload() const { return payload_; }

 private:
  ErrorCode code_;
  double payload_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what,
                              double payload = 0.0) {
  throw Error(code, what, payload);
}

// ---------------------------------------------------------------------------
// Domain types.
// ---------------------------------------------------------------------------

enum class ChartTag { LocalCylinder, GlobalNeighborhood, ReturnSection };

// A point of one of the model's charts.
struct StatePoint {
  double x1 = 0.0;
  double x2 = 0.0;
  double y = 0.0;
  ChartTag chart = ChartTag::LocalCylinder;

  Vec3 vec() const { return Vec3(x1, x2, y); }
  static StatePoint from(const Vec3& v, ChartTag tag) {
    return StatePoint{v[0], v[1], v[2], tag};
  }
  bool finite() const {
    return std::isfinite(x1) && std::isfinite(x2) && std::isfinite(y);
  }
};

// Unfolding parameters: splitting distance, argument of the stable
// multiplier pair, and the log of the multiplier product.
struct ParamTriple {
  double mu = 0.0;
  double omega = kPi / 6.0;
  double rho = 0.0;

  void validate() const {
    if (!(omega > 0.0 && omega < kPi))
      fail(ErrorCode::DomainError, "omega must lie in (0, pi)");
    if (!std::isfinite(mu) || !std::isfinite(omega) || !std::isfinite(rho))
      fail(ErrorCode::NonFinite, "non-finite parameter triple");
  }
};

// ---------------------------------------------------------------------------
// Deterministic random sampling.  We avoid std:: distributions so that
// streams are reproducible down to the bit across library versions.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // splitmix warmup so that small seeds do not correlate
    next_u64();
    next_u64();
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [a, b)
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  int uniform_int(int n) { return int(next_u64() % std::uint64_t(n)); }

  Vec3 cube(double half_width) {
    return Vec3(uniform(-half_width, half_width),
                uniform(-half_width, half_width),
                uniform(-half_width, half_width));
  }

  Vec3 unit_vec3() {
    while (true) {
      Vec3 v(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
      double n = v.norm();
      if (n > 1e-3 && n <= 1.0) return v / n;
    }
  }

 private:
  std::uint64_t state_;
};

// Halton sequence, used for quasi-random sampling of sup bounds.
inline double halton(std::uint64_t index, int base) {
  double f = 1.0, r = 0.0;
  std::uint64_t i = index + 1;
  while (i > 0) {
    f /= base;
    r += f * double(i % std::uint64_t(base));
    i /= std::uint64_t(base);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Small numeric helpers.
// ---------------------------------------------------------------------------

inline double sqr(double x) { return x * x; }

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// angle in [0, 2*pi) with sin(angle) = s-component, cos(angle) = c-component
inline double angle_from_sin_cos(double s, double c) {
  double a = std::atan2(s, c);
  if (a < 0.0) a += 2.0 * kPi;
  return a;
}

inline Mat2 rotation2(double phi) {
  Mat2 r;
  r << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
  return r;
}

// wrap to (-pi, pi]
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a > kPi) a -= 2.0 * kPi;
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

}  // namespace rmap

#endif  // RETURNMAP_CORE_HPP

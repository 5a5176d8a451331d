#ifndef RETURNMAP_FIXED_POINT_HPP
#define RETURNMAP_FIXED_POINT_HPP

#include "returnmap/core.hpp"
#include "returnmap/maps.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>

namespace rmap {

// ---------------------------------------------------------------------------
// Safeguarded Newton for fixed points of a map.
// ---------------------------------------------------------------------------

struct FixedPointResult {
  Vec3 point = Vec3::Zero();
  double residual = 0.0;  // sup norm of T(p) - p
  int newton_iterations = 0;
};

struct NewtonOptions {
  double tol = 1e-12;
  int max_iter = 50;
  double damping = 0.5;  // applied when a full step increases the residual
};

inline FixedPointResult newton_fixed_point(const MapModel& map, const Vec3& guess,
                                           const NewtonOptions& opt = {}) {
  if (!(opt.tol > 0.0)) fail(ErrorCode::ConfigError, "newton tolerance must be positive");
  Vec3 p = guess;
  double res = (map.eval(p) - p).lpNorm<Eigen::Infinity>();
  int it = 0;
  int stalled = 0;
  for (; it < opt.max_iter && res > opt.tol; ++it) {
    Vec3 f = map.eval(p) - p;
    Mat3 jf = map.jac(p) - Mat3::Identity();
    Eigen::JacobiSVD<Mat3> svd(jf, Eigen::ComputeFullU | Eigen::ComputeFullV);
    double smax = svd.singularValues()[0], smin = svd.singularValues()[2];
    if (!(smin > 1e-14 * std::max(smax, 1.0)))
      fail(ErrorCode::SingularJacobian, "singular Jacobian of T - id in Newton iteration",
           smax / std::max(smin, 1e-300));
    Vec3 step = svd.solve(-f);
    Vec3 full = p + step;
    double res_full =
        full.allFinite() ? (map.eval(full) - full).lpNorm<Eigen::Infinity>() : 1e300;
    Vec3 p_next;
    double res_next;
    if (res_full < res) {
      p_next = full;
      res_next = res_full;
    } else {
      // damped search; if even the best damped candidate barely helps, take
      // the full step anyway: near-singular seeds need the overshoot to
      // escape, after which the iteration contracts again
      Vec3 best = full;
      double res_best = res_full;
      double damp = 1.0;
      while (damp > 1.0 / 1024.0) {
        damp *= opt.damping;
        Vec3 cand = p + damp * step;
        double res_cand = (map.eval(cand) - cand).lpNorm<Eigen::Infinity>();
        if (res_cand < res_best) {
          best = cand;
          res_best = res_cand;
        }
      }
      if (res_best < 0.9 * res) {
        p_next = best;
        res_next = res_best;
      } else if (std::isfinite(res_full) && res_full < std::max(1e6 * res, 1.0)) {
        p_next = full;
        res_next = res_full;
      } else {
        p_next = best;
        res_next = res_best;
      }
    }
    if (!p_next.allFinite()) fail(ErrorCode::NonFinite, "Newton iterate became non-finite");
    stalled = res_next >= res * (1.0 - 1e-12) ? stalled + 1 : 0;
    if (stalled >= 8)
      fail(ErrorCode::NoConvergence, "Newton stalled away from a fixed point", res_next);
    p = p_next;
    res = res_next;
  }
  if (res > opt.tol)
    fail(ErrorCode::NoConvergence,
         "no convergence after " + std::to_string(opt.max_iter) + " Newton iterations", res);
  return FixedPointResult{p, res, it};
}

// ---------------------------------------------------------------------------
// Multipliers of a fixed point and their classification.
// ---------------------------------------------------------------------------

// Eigenvalues of the Jacobian.  A complex-conjugate pair occupies slots 1-2
// (positive imaginary part first); with an all-real spectrum the values are
// sorted by modulus so the dominant one is reported last.
struct MultiplierSet {
  Complex nu1, nu2, nu3;
  std::optional<double> psi;  // argument of nu1 when the pair is on/near the unit circle

  std::array<Complex, 3> all() const { return {nu1, nu2, nu3}; }
};

inline constexpr double kImagPairThreshold = 1e-10;

inline MultiplierSet multipliers_of(const Mat3& j) {
  Eigen::EigenSolver<Mat3> es(j);
  if (es.info() != Eigen::Success) fail(ErrorCode::EigenFailure, "eigen-solver failed");
  std::array<Complex, 3> ev = {es.eigenvalues()[0], es.eigenvalues()[1], es.eigenvalues()[2]};
  MultiplierSet out;
  int pair_a = -1, pair_b = -1;
  for (int i = 0; i < 3 && pair_a < 0; ++i)
    for (int l = i + 1; l < 3 && pair_a < 0; ++l)
      if (std::abs(ev[i].imag()) > kImagPairThreshold &&
          std::abs(ev[l].imag()) > kImagPairThreshold) {
        pair_a = i;
        pair_b = l;
      }
  if (pair_a >= 0) {
    Complex c = ev[pair_a].imag() > 0 ? ev[pair_a] : ev[pair_b];
    out.nu1 = c;
    out.nu2 = std::conj(c);  // exact pairing
    int rest = 3 - pair_a - pair_b;
    out.nu3 = Complex(ev[rest].real(), 0.0);
    if (std::abs(std::abs(out.nu1) - 1.0) < 1e-6) out.psi = std::arg(out.nu1);
  } else {
    std::array<double, 3> re = {ev[0].real(), ev[1].real(), ev[2].real()};
    std::sort(re.begin(), re.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    out.nu1 = re[0];
    out.nu2 = re[1];
    out.nu3 = re[2];
  }
  return out;
}

inline MultiplierSet multipliers(const MapModel& map, const Vec3& fp) {
  double scale = std::max(1.0, fp.lpNorm<Eigen::Infinity>());
  double res = (map.eval(fp) - fp).lpNorm<Eigen::Infinity>();
  if (res > 1e-8 * scale)
    fail(ErrorCode::DomainError, "multipliers requested away from a fixed point", res);
  return multipliers_of(map.jac(fp));
}

inline double rho_value(double lambda_mod, double gamma_mod) {
  if (!(lambda_mod > 0.0) || !(gamma_mod > 0.0))
    fail(ErrorCode::DomainError, "rho_value needs positive moduli");
  return std::log(lambda_mod * gamma_mod);
}

enum class TangencyTag { Saddle11, SaddleFocus12, FocusSaddle21, BiFocus22 };

struct TangencyClass {
  TangencyTag tag;
  double product;  // |lambda_1 * gamma_1| of the center multipliers
};

inline TangencyClass classify(const MultiplierSet& mults) {
  auto ev = mults.all();
  for (const auto& nu : ev)
    if (std::abs(std::abs(nu) - 1.0) < 1e-10)
      fail(ErrorCode::Ambiguous, "a multiplier lies on the unit circle; not a hyperbolic point");
  std::vector<Complex> inside, outside;
  for (const auto& nu : ev) (std::abs(nu) < 1.0 ? inside : outside).push_back(nu);
  if (inside.empty() || outside.empty())
    fail(ErrorCode::DomainError, "classification needs multipliers on both sides of the circle");
  auto by_mod = [](const Complex& a, const Complex& b) { return std::abs(a) < std::abs(b); };
  std::sort(inside.begin(), inside.end(), by_mod);
  std::sort(outside.begin(), outside.end(), by_mod);
  const Complex center_stable = inside.back();
  const Complex center_unstable = outside.front();
  bool stable_complex = std::abs(center_stable.imag()) > kImagPairThreshold;
  bool unstable_complex = std::abs(center_unstable.imag()) > kImagPairThreshold;
  TangencyTag tag;
  if (stable_complex && unstable_complex)
    tag = TangencyTag::BiFocus22;  // needs dimension 4; unreachable for 3x3 input
  else if (stable_complex)
    tag = TangencyTag::FocusSaddle21;
  else if (unstable_complex)
    tag = TangencyTag::SaddleFocus12;
  else
    tag = TangencyTag::Saddle11;
  return TangencyClass{tag, std::abs(center_stable) * std::abs(center_unstable)};
}

// ---------------------------------------------------------------------------
// Rotation angle from the trace of a unit-determinant pair.
// ---------------------------------------------------------------------------

inline constexpr double kResonanceGuard = 1e-3;

inline bool near_strong_resonance(double psi, double guard = kResonanceGuard) {
  return std::abs(psi - kPi / 2.0) < guard || std::abs(psi - 2.0 * kPi / 3.0) < guard;
}

struct PsiResult {
  double psi;
  bool resonance_flag;  // within 1e-3 of pi/2 or 2*pi/3; flagged, not fatal
};

inline PsiResult psi_of_trace(double sigma) {
  if (!(std::abs(sigma) < 2.0))
    fail(ErrorCode::DomainError, "trace outside (-2, 2); pair not on the rotation arc");
  double psi = std::acos(sigma / 2.0);
  return PsiResult{psi, near_strong_resonance(psi)};
}

}  // namespace rmap

#endif  // RETURNMAP_FIXED_POINT_HPP

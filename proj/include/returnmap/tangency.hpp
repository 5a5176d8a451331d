#ifndef RETURNMAP_TANGENCY_HPP
#define RETURNMAP_TANGENCY_HPP

#include "returnmap/core.hpp"
#include "returnmap/fixed_point.hpp"
#include "returnmap/maps.hpp"

#include <functional>

namespace rmap {

// ---------------------------------------------------------------------------
// Taylor data of the global map at the tangency orbit:
//   xbar_1 - x1p = a11 xt1 + a12 xt2 + b1 (yt - y_minus) + h.o.t.
//   xbar_2 - x2p = a21 xt1 + a22 xt2 + b2 (yt - y_minus) + h.o.t.
//   ybar        = mu + c1 xt1 + c2 xt2 + d (yt - y_minus)^2 + h.o.t.
// ---------------------------------------------------------------------------

struct GlobalMapCoefficients {
  double a11 = 0, a12 = 0, a21 = 0, a22 = 0;
  double b1 = 0, b2 = 0;
  double c1 = 0, c2 = 0;
  double d = 0;  // half the pure second y-derivative of ybar
  Vec2 x_plus = Vec2::Zero();
  double y_minus = 0;
  double mu = 0;

  double b_norm() const { return std::hypot(b1, b2); }
  double c_norm() const { return std::hypot(c1, c2); }
};

inline GlobalMapCoefficients extract_global_coefficients(const MapModel& global,
                                                         const Vec3& m_minus,
                                                         const Vec3& m_plus) {
  Vec3 img = global.eval(m_minus);
  double scale = std::max(1.0, m_plus.lpNorm<Eigen::Infinity>());
  if ((img - m_plus).lpNorm<Eigen::Infinity>() > 1e-10 * scale)
    fail(ErrorCode::DomainError, "global map does not send m_minus to m_plus");
  Jet3 jet = global.taylor(m_minus);
  const Mat3& j = jet.jac;
  double jscale = std::max(1.0, j.lpNorm<Eigen::Infinity>());
  if (std::abs(j(2, 2)) > 1e-8 * jscale)
    fail(ErrorCode::NotAligned, "d(ybar)/d(yt) does not vanish at m_minus", j(2, 2));
  GlobalMapCoefficients co;
  co.a11 = j(0, 0);
  co.a12 = j(0, 1);
  co.a21 = j(1, 0);
  co.a22 = j(1, 1);
  co.b1 = j(0, 2);
  co.b2 = j(1, 2);
  co.c1 = j(2, 0);
  co.c2 = j(2, 1);
  co.d = 0.5 * jet.hess[2](2, 2);
  co.x_plus = Vec2(m_plus[0], m_plus[1]);
  co.y_minus = m_minus[2];
  co.mu = img[2];
  if (co.b_norm() == 0.0 || co.c_norm() == 0.0)
    fail(ErrorCode::DomainError, "degenerate global map: b or c vanishes");
  return co;
}

// product of the norms of the y-in and y-out coefficient vectors
inline double expanding_quantity(const GlobalMapCoefficients& co) {
  return co.b_norm() * co.c_norm();
}

inline bool check_EC(const GlobalMapCoefficients& co) { return expanding_quantity(co) > 1.0; }

// Phase offset eta* with  c1 cos(k w) + c2 sin(k w) = c * sin(k w + eta*),
// i.e. sin(eta*) = c1/|c|, cos(eta*) = c2/|c|, normalized to [0, 2*pi).
inline double eta_star(const GlobalMapCoefficients& co) {
  return angle_from_sin_cos(co.c1 / co.c_norm(), co.c2 / co.c_norm());
}

inline double alpha_star(const GlobalMapCoefficients& co, int k, double omega) {
  return co.c1 * std::cos(k * omega) + co.c2 * std::sin(k * omega);
}

// E_k = -b * alpha*_k; positive on the Ps window, at most |b||c| in size.
inline double e_k_quantity(const GlobalMapCoefficients& co, int k, double omega) {
  if (k < 1) fail(ErrorCode::DomainError, "e_k_quantity needs k >= 1");
  return -co.b_norm() * alpha_star(co, k, omega);
}

// ---------------------------------------------------------------------------
// Admissible windows for the rotation argument omega.  All windows are
// predicates on sin(k*omega + eta*); Ex subset Ps subset Bd.
// ---------------------------------------------------------------------------

enum class WindowKind { Bd, Ps, Ex };

struct OmegaWindow {
  WindowKind kind = WindowKind::Bd;
  int k = 1;
  double eta_star = 0.0;
  double e_bd = 0.05;              // fixed at 1/20
  double delta_prime_half = 0.0;   // only used by the Ex window
};

inline OmegaWindow make_omega_window(WindowKind kind, int k, const GlobalMapCoefficients& co) {
  OmegaWindow w;
  w.kind = kind;
  w.k = k;
  w.eta_star = eta_star(co);
  if (kind == WindowKind::Ex) {
    double e = expanding_quantity(co);
    if (!(e > 1.0))
      fail(ErrorCode::DomainError, "Ex window requires the expanding condition");
    w.delta_prime_half = 0.5 * (e - 1.0) / (6.0 * e);
  }
  return w;
}

inline bool omega_window_contains(const OmegaWindow& w, double omega) {
  double s = std::sin(w.k * omega + w.eta_star);
  switch (w.kind) {
    case WindowKind::Bd:
      return std::abs(s) > 2.0 * w.e_bd;
    case WindowKind::Ps:
      return s < -2.0 * w.e_bd;
    case WindowKind::Ex:
      return s + 1.0 < w.delta_prime_half;
  }
  return false;
}

// omega near `target_phase` for sin(k*omega + eta*): the member of
// (target_phase - eta* + 2 pi Z)/k closest to omega_ref inside (0, pi)
inline double omega_for_phase(const GlobalMapCoefficients& co, int k, double target_phase,
                              double omega_ref) {
  double eta = eta_star(co);
  double best = -1.0, best_dist = 1e300;
  for (int m = -2 * k; m <= 2 * k; ++m) {
    double w = (target_phase - eta + 2.0 * kPi * m) / k;
    if (w <= 1e-6 || w >= kPi - 1e-6) continue;
    double dist = std::abs(w - omega_ref);
    if (dist < best_dist) {
      best_dist = dist;
      best = w;
    }
  }
  if (best < 0.0) fail(ErrorCode::WindowViolation, "no admissible omega for requested phase");
  return best;
}

// ---------------------------------------------------------------------------
// Quadratic tangency detection: find the parameter where a curve touches a
// coordinate plane with vanishing derivative and certify the contact is
// quadratic.
// ---------------------------------------------------------------------------

struct TangencyCertificate {
  double t_star = 0.0;
  StatePoint point;     // curve(t_star)
  double d_coeff = 0.0; // half the second derivative of the separation
  double residual_g = 0.0;
  double residual_gp = 0.0;
};

namespace detail {

struct ScalarDerivs {
  double g, gp, gpp;
};

template <class F>
ScalarDerivs curve_derivs(F&& g, double t, double h) {
  double gm2 = g(t - 2 * h), gm = g(t - h), g0 = g(t), gp1 = g(t + h), gp2 = g(t + 2 * h);
  ScalarDerivs d;
  d.g = g0;
  d.gp = (-gp2 + 8 * gp1 - 8 * gm + gm2) / (12 * h);          // 4th order central
  d.gpp = (-gp2 + 16 * gp1 - 30 * g0 + 16 * gm - gm2) / (12 * h * h);
  return d;
}

}  // namespace detail

inline TangencyCertificate quadratic_tangency_find(
    const std::function<StatePoint(double)>& curve, int plane_normal_coord,
    std::pair<double, double> t_bracket, double tol = 1e-10) {
  if (plane_normal_coord < 0 || plane_normal_coord > 2)
    fail(ErrorCode::ConfigError, "plane coordinate index must be 0, 1 or 2");
  auto g = [&](double t) {
    StatePoint p = curve(t);
    if (!p.finite()) fail(ErrorCode::NonFinite, "non-finite curve point");
    return p.vec()[plane_normal_coord];
  };
  const double width = t_bracket.second - t_bracket.first;
  if (!(width > 0.0)) fail(ErrorCode::ConfigError, "empty bracket");
  const double h = 1e-4 * width;

  // coarse scan for the minimizer of |g'|
  const int n_scan = 128;
  double best_t = t_bracket.first, best_abs = 1e300, g_scale = 0.0;
  for (int i = 0; i <= n_scan; ++i) {
    double t = t_bracket.first + width * i / n_scan;
    auto d = detail::curve_derivs(g, t, h);
    g_scale = std::max(g_scale, std::abs(d.g));
    if (std::abs(d.gp) < best_abs) {
      best_abs = std::abs(d.gp);
      best_t = t;
    }
  }
  g_scale = std::max(g_scale, 1e-30);

  // Newton on g' where the contact is honestly quadratic; otherwise shrink
  // toward the scanned minimizer (handles flat contacts gracefully)
  double t = best_t;
  for (int it = 0; it < 60; ++it) {
    auto d = detail::curve_derivs(g, t, h);
    if (std::abs(d.gp) < tol * g_scale / width) break;
    if (std::abs(d.gpp) * width < 1e-12 * g_scale) break;
    double step = -d.gp / d.gpp;
    step = std::clamp(step, -0.25 * width, 0.25 * width);
    t += step;
    t = std::clamp(t, t_bracket.first, t_bracket.second);
  }

  auto d = detail::curve_derivs(g, t, h);
  TangencyCertificate cert;
  cert.t_star = t;
  cert.point = curve(t);
  cert.d_coeff = 0.5 * d.gpp;
  cert.residual_g = d.g;
  cert.residual_gp = d.gp;
  const double tol_gp = std::max(tol, 1e-7) * g_scale / width;
  if (std::abs(d.gp) > tol_gp)
    fail(ErrorCode::NoTangency, "separation derivative does not vanish in the bracket", d.gp);
  if (std::abs(cert.d_coeff) < 1e-6 * g_scale / (width * width))
    fail(ErrorCode::DegenerateContact, "second derivative of the separation vanishes",
         cert.d_coeff);
  if (std::abs(d.g) > std::max(tol, 1e-7) * g_scale)
    fail(ErrorCode::NoTangency, "curve does not meet the plane at its critical point", d.g);
  return cert;
}

// Signed extremal separation of the image of the local unstable segment from
// the stable plane: the critical value of ybar along the y-line through
// m_minus.  Equals the splitting parameter in the shipped unfolding.
inline double splitting_mu(const MapModel& global, const Vec3& m_minus, double span = 0.25) {
  Mat3 j = global.jac(m_minus);
  double jscale = std::max(1.0, j.lpNorm<Eigen::Infinity>());
  if (std::abs(j(2, 2)) > 0.05 * jscale)
    fail(ErrorCode::NotAligned, "base point is far from the tangency alignment", j(2, 2));
  auto g = [&](double t) { return global.eval(m_minus + Vec3(0, 0, t))[2]; };
  const double h = 1e-5 * span;
  double t = 0.0;
  for (int it = 0; it < 60; ++it) {
    auto d = detail::curve_derivs(g, t, h);
    if (std::abs(d.gpp) < 1e-14) fail(ErrorCode::NotAligned, "flat separation along the y-line");
    double step = -d.gp / d.gpp;
    t += std::clamp(step, -span, span);
    if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(t))) break;
  }
  return g(t);
}

// ---------------------------------------------------------------------------
// Proper unfolding: determinant of the derivative of the measured
// functionals (mu, omega, rho) with respect to the declared parameters.
// ---------------------------------------------------------------------------

struct UnfoldedModel {
  MapModel local;
  MapModel global;
  Vec3 m_minus = Vec3::Zero();
  Vec3 saddle = Vec3::Zero();  // fixed point of the local map
};

inline Vec3 measured_functionals(const UnfoldedModel& um) {
  double mu_hat = splitting_mu(um.global, um.m_minus);
  MultiplierSet ms = multipliers_of(um.local.jac(um.saddle));
  if (std::abs(ms.nu1.imag()) <= kImagPairThreshold)
    fail(ErrorCode::DomainError, "local map has no complex stable pair");
  double omega_hat = std::arg(ms.nu1);
  double rho_hat = rho_value(std::abs(ms.nu1), std::abs(ms.nu3));
  return Vec3(mu_hat, omega_hat, rho_hat);
}

inline double unfolding_jacobian(const std::function<UnfoldedModel(const ParamTriple&)>& family,
                                 const ParamTriple& eps0, double h = 1e-6) {
  auto at = [&](double dmu, double domega, double drho) {
    ParamTriple e = eps0;
    e.mu += dmu;
    e.omega += domega;
    e.rho += drho;
    return measured_functionals(family(e));
  };
  Mat3 j;
  j.col(0) = (at(h, 0, 0) - at(-h, 0, 0)) / (2 * h);
  j.col(1) = (at(0, h, 0) - at(0, -h, 0)) / (2 * h);
  j.col(2) = (at(0, 0, h) - at(0, 0, -h)) / (2 * h);
  if (!j.allFinite()) fail(ErrorCode::NonFinite, "non-finite unfolding derivative");
  return j.determinant();
}

}  // namespace rmap

#endif  // RETURNMAP_TANGENCY_HPP

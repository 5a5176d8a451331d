#ifndef RETURNMAP_LOCUS_HPP
#define RETURNMAP_LOCUS_HPP

#include "returnmap/chart.hpp"
#include "returnmap/core.hpp"
#include "returnmap/fixed_point.hpp"
#include "returnmap/maps.hpp"
#include "returnmap/tangency.hpp"

namespace rmap {

// ---------------------------------------------------------------------------
// A parametrized family of first-return maps.  The shipped instance wraps
// the explicit model with its identity parametrization; anything exposing
// the same members can be driven through the locus solvers.
// ---------------------------------------------------------------------------

struct ToyUnfolding {
  double eps = 0.2;
  double gamma = 3.0;
  double delta_dom = 0.5;

  ToyModelConfig config(const ParamTriple& e) const {
    return ToyModelConfig::with_params(e, eps, gamma);
  }
  double lambda_of(const ParamTriple& e) const { return std::exp(e.rho) / gamma; }
  double gamma_of(const ParamTriple&) const { return gamma; }
  CubicMap3 return_map(const ParamTriple& e, int k) const {
    return toy_first_return_cubic(config(e), k);
  }
  GlobalMapCoefficients coefficients(const ParamTriple& e) const {
    ToyModelConfig cfg = config(e);
    return extract_global_coefficients(toy_global_model(cfg), cfg.m_minus(), cfg.m_plus());
  }
};

template <class F>
concept UnfoldingFamilyLike = requires(const F& f, const ParamTriple& e, int k) {
  { f.return_map(e, k) } -> std::convertible_to<CubicMap3>;
  { f.coefficients(e) } -> std::convertible_to<GlobalMapCoefficients>;
  { f.lambda_of(e) } -> std::convertible_to<double>;
  { f.gamma_of(e) } -> std::convertible_to<double>;
  { f.delta_dom } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// Locus solve: adjust (mu, rho) at fixed (k, t, omega) until the return map
// has a fixed point whose center pair has unit modulus product and whose
// vertical placement matches  Y_Q = (E_k / 2d) lambda^k t.
// ---------------------------------------------------------------------------

struct NSLocusOptions {
  double product_tol = 1e-11;
  double placement_tol = 1e-13;
  int max_outer = 80;
  NewtonOptions newton{1e-13, 60, 0.5};
  bool enforce_resonance_guard = true;  // reject psi within 1e-3 of pi/2, 2pi/3
  bool enforce_ps_window = true;
};

struct NSLocusPoint {
  int k = 0;
  double t = 0.0;
  double omega = 0.0;
  double mu = 0.0;
  double rho = 0.0;
  double lambda = 0.0;
  FixedPointResult fp;  // raw coordinates
  MultiplierSet mults;
  double psi = 0.0;          // defined when the center pair is complex
  double sigma = 0.0;        // trace of the center pair
  double center_product = 0.0;
  double e_k = 0.0;
  double y_q = 0.0;          // vertical chart coordinate of the fixed point
  double placement_residual = 0.0;
  GlobalMapCoefficients coeffs;
};

namespace detail {

struct LocusEval {
  Vec3 fp = Vec3::Zero();    // fixed point in the raw coordinates
  double mu = 0.0;           // splitting value realizing the placement
  double residual = 0.0;     // sup norm of T(p) - p at the solution
  int iterations = 0;
  MultiplierSet mults;
  double center_product = 0.0;
  double sigma = 0.0;
  double y_q = 0.0;
  double e_k = 0.0;
  GlobalMapCoefficients coeffs;
};

// The vertical coordinate of the fixed point is prescribed by the placement
// rule, and (x1, x2, mu) are solved jointly by Newton.  This keeps the
// system regular across the fold where the fixed-point pair is born.
template <class Family>
LocusEval locus_eval(const Family& family, int k, double t, double omega, double rho,
                     double mu_guess, const Vec2* x_seed, const NSLocusOptions& opt) {
  LocusEval ev;
  const double gam = family.gamma_of(ParamTriple{mu_guess, omega, rho});
  const double lam = family.lambda_of(ParamTriple{mu_guess, omega, rho});
  const double lk = std::pow(lam, k), gk = std::pow(gam, k);

  GlobalMapCoefficients co = family.coefficients(ParamTriple{mu_guess, omega, rho});
  ev.e_k = e_k_quantity(co, k, omega);
  const double y_target = (ev.e_k / (2.0 * co.d)) * lk * t;
  const double y_star = (co.y_minus + y_target) / gk;

  Vec3 p;
  p[0] = x_seed ? (*x_seed)[0] : co.x_plus[0];
  p[1] = x_seed ? (*x_seed)[1] : co.x_plus[1];
  double mu = mu_guess;
  CubicMap3 tk = family.return_map(ParamTriple{mu, omega, rho}, k);
  auto residual_of = [&](const CubicMap3& m, const Vec3& q, double) {
    Vec3 img = m(q);
    return Vec3(img[0] - q[0], img[1] - q[1], img[2] - y_star);
  };
  int it = 0;
  double res = 1e300;
  for (; it < opt.newton.max_iter; ++it) {
    Vec3 q(p[0], p[1], y_star);
    Vec3 f = residual_of(tk, q, mu);
    res = f.lpNorm<Eigen::Infinity>();
    if (res <= opt.newton.tol) break;
    Mat3 dt = tk.jacobian(q);
    const double h = std::max(1e-7 * std::abs(mu), 1e-12);
    CubicMap3 tk_p = family.return_map(ParamTriple{mu + h, omega, rho}, k);
    CubicMap3 tk_m = family.return_map(ParamTriple{mu - h, omega, rho}, k);
    Vec3 dmu = (tk_p(q) - tk_m(q)) / (2.0 * h);
    Mat3 jac;
    jac.col(0) = Vec3(dt(0, 0) - 1.0, dt(1, 0), dt(2, 0));
    jac.col(1) = Vec3(dt(0, 1), dt(1, 1) - 1.0, dt(2, 1));
    jac.col(2) = dmu;
    Eigen::PartialPivLU<Mat3> lu(jac);
    Vec3 step = lu.solve(-f);
    if (!step.allFinite()) fail(ErrorCode::SingularJacobian, "singular placement system");
    p[0] += step[0];
    p[1] += step[1];
    mu += step[2];
    tk = family.return_map(ParamTriple{mu, omega, rho}, k);
  }
  if (res > opt.newton.tol)
    fail(ErrorCode::NoFixedPoint, "placed fixed point did not converge", res);

  ev.fp = Vec3(p[0], p[1], y_star);
  ev.mu = mu;
  ev.residual = (tk(ev.fp) - ev.fp).lpNorm<Eigen::Infinity>();
  ev.iterations = it;
  ev.coeffs = family.coefficients(ParamTriple{mu, omega, rho});
  ev.e_k = e_k_quantity(ev.coeffs, k, omega);
  ev.y_q = gk * y_star - ev.coeffs.y_minus;

  Mat3 j = tk.jacobian(ev.fp);
  ev.mults = multipliers_of(j);
  // strong-stable multiplier has the smallest modulus; the center-pair
  // product is read off the determinant for stability
  auto all = ev.mults.all();
  int i_min = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(all[i]) < std::abs(all[i_min])) i_min = i;
  ev.center_product = std::abs(j.determinant()) / std::abs(all[i_min]);
  ev.sigma = j.trace() - all[i_min].real();
  return ev;
}

}  // namespace detail

template <class Family>
  requires UnfoldingFamilyLike<Family>
NSLocusPoint ns_locus_solve(const Family& family, int k, double t, double omega,
                            const NSLocusOptions& opt = {}) {
  if (k < 2 || k % 2 != 0) fail(ErrorCode::DomainError, "locus solve requires even k >= 2");
  GlobalMapCoefficients co0 = family.coefficients(ParamTriple{0.0, omega, 0.0});
  OmegaWindow bd = make_omega_window(WindowKind::Bd, k, co0);
  if (!omega_window_contains(bd, omega))
    fail(ErrorCode::WindowViolation, "omega outside the admissible Bd window");
  double e0 = e_k_quantity(co0, k, omega);
  if (opt.enforce_ps_window && !(e0 > 0.0))
    fail(ErrorCode::WindowViolation, "E_k <= 0: omega outside the Ps window");

  const double gam = family.gamma_of(ParamTriple{0.0, omega, 0.0});
  double rho = -std::log(e0) / k;
  double lk0 = std::pow(std::exp(rho) / gam, k);
  double gk0 = std::pow(gam, k);
  double alpha0 = alpha_star(co0, k, omega);
  double beta0 = -co0.c1 * std::sin(k * omega) + co0.c2 * std::cos(k * omega);
  double y_t0 = (e0 / (2.0 * co0.d)) * lk0 * t;
  double mu = (co0.y_minus + y_t0) / gk0 -
              lk0 * (alpha0 * co0.x_plus[0] + beta0 * co0.x_plus[1]) - co0.d * y_t0 * y_t0;

  // secant in rho for the unit product of the center pair; the placement is
  // satisfied identically by the inner solve
  detail::LocusEval ev = detail::locus_eval(family, k, t, omega, rho, mu, nullptr, opt);
  Vec2 x_seed(ev.fp[0], ev.fp[1]);
  double f0 = ev.center_product - 1.0;
  double rho_prev = rho, f_prev = f0;
  bool have_prev = false;
  int outer = 0;
  for (; outer < opt.max_outer && std::abs(f0) > opt.product_tol; ++outer) {
    double rho_next;
    if (have_prev && f0 != f_prev) {
      rho_next = rho - f0 * (rho - rho_prev) / (f0 - f_prev);
    } else {
      // one-sided derivative bootstrap
      double dr = std::max(1e-6 * std::abs(rho), 1e-8);
      auto ev2 = detail::locus_eval(family, k, t, omega, rho + dr, ev.mu, &x_seed, opt);
      double slope = (ev2.center_product - ev.center_product) / dr;
      if (slope == 0.0) fail(ErrorCode::NoFixedPoint, "product insensitive to rho");
      rho_next = rho - f0 / slope;
    }
    rho_prev = rho;
    f_prev = f0;
    rho = rho_next;
    ev = detail::locus_eval(family, k, t, omega, rho, ev.mu, &x_seed, opt);
    x_seed = Vec2(ev.fp[0], ev.fp[1]);
    f0 = ev.center_product - 1.0;
    have_prev = true;
  }
  if (std::abs(f0) > opt.product_tol)
    fail(ErrorCode::NoConvergence, "locus iteration did not converge", f0);

  NSLocusPoint out;
  out.k = k;
  out.t = t;
  out.omega = omega;
  out.mu = ev.mu;
  out.rho = rho;
  out.lambda = family.lambda_of(ParamTriple{ev.mu, omega, rho});
  out.fp = FixedPointResult{ev.fp, ev.residual, ev.iterations};
  out.mults = ev.mults;
  out.sigma = ev.sigma;
  out.center_product = ev.center_product;
  out.e_k = ev.e_k;
  out.y_q = ev.y_q;
  out.placement_residual = 0.0;  // the placement is enforced exactly
  out.coeffs = ev.coeffs;
  if (std::abs(ev.mults.nu1.imag()) > kImagPairThreshold) {
    out.psi = std::arg(ev.mults.nu1.imag() > 0 ? ev.mults.nu1 : ev.mults.nu2);
    if (opt.enforce_resonance_guard && near_strong_resonance(out.psi))
      fail(ErrorCode::ResonanceGuard, "rotation angle within the strong-resonance guard band",
           out.psi);
  } else {
    out.psi = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace interval: the t-range over which the center pair sweeps the unit
// circle.  Endpoints have trace -2 (period doubling) and +2 (fold).
// ---------------------------------------------------------------------------

struct TraceInterval {
  double t_minus = 0.0;
  double t_plus = 0.0;
};

namespace detail {

template <class Family>
double locus_sigma(const Family& family, int k, double omega, double t,
                   const NSLocusOptions& base_opt, bool tight = false) {
  NSLocusOptions opt = base_opt;
  opt.enforce_resonance_guard = false;
  if (tight) {
    // rho noise enters the trace amplified by k; near the interval endpoints
    // the multipliers split like sqrt of the trace error, so push the
    // product tolerance to the floor when the conditioning allows it
    opt.product_tol = std::min(opt.product_tol, 1e-13);
    try {
      return ns_locus_solve(family, k, t, omega, opt).sigma;
    } catch (const Error&) {
      opt.product_tol = base_opt.product_tol;
    }
  }
  return ns_locus_solve(family, k, t, omega, opt).sigma;
}

template <class Family>
double bisect_sigma(const Family& family, int k, double omega, double target, double t_lo,
                    double t_hi, double s_lo, double s_hi, const NSLocusOptions& opt,
                    double tol_sigma = 1e-8) {
  if (!((s_lo - target) * (s_hi - target) <= 0.0))
    fail(ErrorCode::NotBracketed, "trace target not bracketed");
  double tm = 0.5 * (t_lo + t_hi), sm = 0.0;
  bool coarse = false;
  for (int it = 0; it < 200; ++it) {
    tm = 0.5 * (t_lo + t_hi);
    sm = locus_sigma(family, k, omega, tm, opt);
    if (std::abs(sm - target) < tol_sigma) {
      coarse = true;
      break;
    }
    if ((s_lo - target) * (sm - target) <= 0.0) {
      t_hi = tm;
      s_hi = sm;
    } else {
      t_lo = tm;
      s_lo = sm;
    }
  }
  if (!coarse) fail(ErrorCode::NoConvergence, "trace bisection exhausted");
  // secant polish at the tight tolerance
  double t_prev = tm - 1e-3 * std::max(std::abs(t_hi - t_lo), 1e-6);
  double s_prev = locus_sigma(family, k, omega, t_prev, opt, true);
  sm = locus_sigma(family, k, omega, tm, opt, true);
  for (int it = 0; it < 10 && std::abs(sm - target) > 4e-13; ++it) {
    if (sm == s_prev) break;
    double t_next = tm - (sm - target) * (tm - t_prev) / (sm - s_prev);
    if (!std::isfinite(t_next)) break;
    t_prev = tm;
    s_prev = sm;
    tm = t_next;
    sm = locus_sigma(family, k, omega, tm, opt, true);
  }
  return tm;
}

}  // namespace detail

template <class Family>
  requires UnfoldingFamilyLike<Family>
TraceInterval trace_interval(const Family& family, int k, double omega,
                             const NSLocusOptions& opt = {}) {
  GlobalMapCoefficients co0 = family.coefficients(ParamTriple{0.0, omega, 0.0});
  OmegaWindow ps = make_omega_window(WindowKind::Ps, k, co0);
  if (!omega_window_contains(ps, omega))
    fail(ErrorCode::WindowViolation, "omega outside the Ps window");
  // the placement clip keeps Y_Q inside the domain cube
  const double lam0 = family.lambda_of(ParamTriple{0.0, omega, 0.0});
  double e0 = e_k_quantity(co0, k, omega);
  double t_clip =
      0.45 * family.delta_dom * std::abs(2.0 * co0.d / e0) * std::pow(lam0, -k);
  double span = 4.0;
  double s_lo, s_hi;
  for (;;) {
    if (span > t_clip) fail(ErrorCode::NotBracketed, "trace does not cross +-2 before the clip");
    s_lo = detail::locus_sigma(family, k, omega, -span, opt);
    s_hi = detail::locus_sigma(family, k, omega, span, opt);
    if (s_lo < -2.0 && s_hi > 2.0) break;
    span *= 2.0;
  }
  TraceInterval out;
  out.t_minus = detail::bisect_sigma(family, k, omega, -2.0, -span, span, s_lo, s_hi, opt);
  out.t_plus = detail::bisect_sigma(family, k, omega, 2.0, -span, span, s_lo, s_hi, opt);
  return out;
}

// The sub-interval of (t_minus, t_plus) on which the fixed point is weakly
// repelling on its center manifold: psi below pi/2 - pi/20.
template <class Family>
  requires UnfoldingFamilyLike<Family>
TraceInterval repelling_interval(const Family& family, int k, double omega,
                                 const NSLocusOptions& opt = {}) {
  TraceInterval full = trace_interval(family, k, omega, opt);
  const double psi_bd = kPi / 20.0;
  const double sigma_target = 2.0 * std::cos(kPi / 2.0 - psi_bd);
  double s_lo = detail::locus_sigma(family, k, omega, full.t_minus, opt);
  double s_hi = detail::locus_sigma(family, k, omega, full.t_plus, opt);
  TraceInterval out;
  out.t_minus = detail::bisect_sigma(family, k, omega, sigma_target, full.t_minus, full.t_plus,
                                     s_lo, s_hi, opt);
  out.t_plus = full.t_plus;
  return out;
}

// Chart attached to a solved locus point.
template <class Family>
  requires UnfoldingFamilyLike<Family>
ReturnChart locus_chart(const Family& family, const NSLocusPoint& pt) {
  ParamTriple e{pt.mu, pt.omega, pt.rho};
  CubicMap3 tk = family.return_map(e, pt.k);
  return build_return_chart(tk, pt.coeffs, pt.k, family.lambda_of(e), family.gamma_of(e),
                            pt.omega, family.delta_dom);
}

}  // namespace rmap

#endif  // RETURNMAP_LOCUS_HPP

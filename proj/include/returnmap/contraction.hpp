#ifndef RETURNMAP_CONTRACTION_HPP
#define RETURNMAP_CONTRACTION_HPP

#include "returnmap/core.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace rmap {

using VecX = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Scalar implicit equation  y = G(x) + H(x, y).
//
// Solvable by iteration once |dH/dy| stays below 1/2; the correction
// I(x) = y - G(x) then satisfies |I| <= 2 sup|H|.  Bounds are either
// user-supplied or sampled over a declared compact box with a quasi-random
// sequence (the true sups over an unbounded domain are not verifiable
// numerically; the box is part of the problem statement).
// ---------------------------------------------------------------------------

struct ImplicitScalarProblem {
  std::function<double(const VecX&)> G;
  std::function<double(const VecX&, double)> H;
  std::optional<double> sup_H;
  std::optional<double> sup_Hy;
  VecX box_lo;  // sampling box for bound estimation
  VecX box_hi;
  double y_lo = -2.0;
  double y_hi = 2.0;
  int n_probe = 1000;
};

struct ScalarSolveResult {
  double y = 0.0;
  double correction = 0.0;  // I(x) = y - G(x)
  int iterations = 0;
  double sup_H = 0.0;   // bound used for the correction certificate
  double sup_Hy = 0.0;  // contraction bound used
};

namespace detail {

inline void sample_scalar_bounds(const ImplicitScalarProblem& prob, double& sup_h,
                                 double& sup_hy) {
  const int n = prob.box_lo.size();
  sup_h = 0.0;
  sup_hy = 0.0;
  const double hy = 1e-6 * std::max(1.0, prob.y_hi - prob.y_lo);
  VecX x(n);
  for (int s = 0; s < prob.n_probe; ++s) {
    for (int i = 0; i < n; ++i) {
      double u = halton(std::uint64_t(s), 2 + i);
      x[i] = prob.box_lo[i] + u * (prob.box_hi[i] - prob.box_lo[i]);
    }
    double uy = halton(std::uint64_t(s), 2 + n);
    double y = prob.y_lo + uy * (prob.y_hi - prob.y_lo);
    sup_h = std::max(sup_h, std::abs(prob.H(x, y)));
    sup_hy = std::max(sup_hy, std::abs((prob.H(x, y + hy) - prob.H(x, y - hy)) / (2.0 * hy)));
  }
}

}  // namespace detail

inline ScalarSolveResult solve_scalar(const ImplicitScalarProblem& prob, const VecX& x,
                                      double tol = 1e-12, int max_iter = 400) {
  double sup_h, sup_hy;
  if (prob.sup_H && prob.sup_Hy) {
    sup_h = *prob.sup_H;
    sup_hy = *prob.sup_Hy;
  } else {
    detail::sample_scalar_bounds(prob, sup_h, sup_hy);
    if (prob.sup_H) sup_h = *prob.sup_H;
    if (prob.sup_Hy) sup_hy = *prob.sup_Hy;
  }
  if (!(sup_hy < 0.5))
    fail(ErrorCode::NotContractive, "sup |dH/dy| >= 1/2, iteration not contractive", sup_hy);

  const double g = prob.G(x);
  double y = g;
  double y_prev = y;
  double resid = std::abs(prob.H(x, y));
  int it = 0;
  while (resid >= tol && it < max_iter) {
    ++it;
    double y_picard = g + prob.H(x, y);
    double chosen = y_picard;
    double chosen_resid = std::abs(y_picard - g - prob.H(x, y_picard));
    // Aitken delta-squared on the last three iterates; the candidate is
    // accepted only when its re-checked residual improves, so acceleration
    // cannot spoil the certificate.
    if (it >= 2) {
      double d2 = y_picard - y, d1 = y - y_prev;
      double denom = d2 - d1;
      if (std::abs(denom) > 1e-300) {
        double cand = y_picard - d2 * d2 / denom;
        if (std::isfinite(cand)) {
          double cand_resid = std::abs(cand - g - prob.H(x, cand));
          if (cand_resid < chosen_resid) {
            chosen = cand;
            chosen_resid = cand_resid;
          }
        }
      }
    }
    y_prev = y;
    y = chosen;
    resid = chosen_resid;
  }
  if (!(resid < tol))
    fail(ErrorCode::NoConvergence, "implicit scalar equation did not reach tolerance", resid);
  ScalarSolveResult out;
  out.y = y;
  out.correction = y - g;
  out.iterations = it;
  out.sup_H = sup_h;
  out.sup_Hy = sup_hy;
  if (std::abs(out.correction) > 2.0 * sup_h + tol)
    fail(ErrorCode::DomainError, "correction bound |I| <= 2 sup|H| violated; bounds inconsistent",
         out.correction);
  return out;
}

// ---------------------------------------------------------------------------
// System  y_j = G_j(x) + H_j(x, y),  j = 0..m-1, solved by eliminating the
// last component recursively and finishing with the scalar method.
// ---------------------------------------------------------------------------

struct ImplicitSystemProblem {
  int m = 1;
  std::function<double(int, const VecX&)> G;
  std::function<double(int, const VecX&, const VecX&)> H;
  VecX box_lo;
  VecX box_hi;
  double y_lo = -2.0;
  double y_hi = 2.0;
  int n_probe = 1000;
};

struct SystemSolveResult {
  VecX y;
  VecX corrections;
  std::vector<double> sup_H;  // per component
  int evaluations = 0;
};

namespace detail {

// sampled max over components of the per-row derivative sum
// sum_l |dH_j/dy_l|; below 1/2 the elimination stays contractive.
inline double sample_system_contraction(const ImplicitSystemProblem& prob,
                                        std::vector<double>& sup_h) {
  const int n = prob.box_lo.size();
  const int m = prob.m;
  sup_h.assign(m, 0.0);
  double worst_row = 0.0;
  const double hy = 1e-6 * std::max(1.0, prob.y_hi - prob.y_lo);
  VecX x(n), y(m);
  for (int s = 0; s < prob.n_probe; ++s) {
    for (int i = 0; i < n; ++i) {
      double u = halton(std::uint64_t(s), 2 + i);
      x[i] = prob.box_lo[i] + u * (prob.box_hi[i] - prob.box_lo[i]);
    }
    for (int j = 0; j < m; ++j) {
      double u = halton(std::uint64_t(s), 2 + n + j);
      y[j] = prob.y_lo + u * (prob.y_hi - prob.y_lo);
    }
    for (int j = 0; j < m; ++j) {
      sup_h[j] = std::max(sup_h[j], std::abs(prob.H(j, x, y)));
      double row = 0.0;
      for (int l = 0; l < m; ++l) {
        VecX yp = y, ym = y;
        yp[l] += hy;
        ym[l] -= hy;
        row += std::abs((prob.H(j, x, yp) - prob.H(j, x, ym)) / (2.0 * hy));
      }
      worst_row = std::max(worst_row, row);
    }
  }
  return worst_row;
}

// Solve components [j0, m) with components [0, j0) frozen at the values
// already stored in y.  Deeper components are re-solved at every trial value
// of y_{j0} (warm-started from the previous solve), which mirrors the
// recursive elimination argument.  Levels deeper in the recursion run at a
// tighter tolerance so the noise they inject stays below the head tolerance.
inline void solve_tail(const ImplicitSystemProblem& prob, const VecX& x, int j0,
                       VecX& y, double tol, int& evals) {
  const int m = prob.m;
  const double tol_here = std::max(tol * std::pow(0.05, j0), 1e-15);
  auto residual = [&](double yj) -> double {
    y[j0] = yj;
    if (j0 + 1 < m) solve_tail(prob, x, j0 + 1, y, tol, evals);
    ++evals;
    return prob.G(j0, x) + prob.H(j0, x, y) - yj;
  };
  double yj = y[j0];  // warm start
  double f = residual(yj);
  double yj_prev = yj, f_prev = f;
  for (int it = 0; it < 400; ++it) {
    if (std::abs(f) < tol_here) {
      y[j0] = yj;
      return;
    }
    double y_next;
    if (it > 0 && f != f_prev) {
      // secant step; falls back to the plain update when it misbehaves
      y_next = yj - f * (yj - yj_prev) / (f - f_prev);
      if (!std::isfinite(y_next) || std::abs(y_next - yj) > 4.0 * std::abs(f))
        y_next = yj + f;
    } else {
      y_next = yj + f;  // Picard update: y <- G + H
    }
    yj_prev = yj;
    f_prev = f;
    yj = y_next;
    f = residual(yj);
  }
  fail(ErrorCode::NoConvergence, "implicit system component did not converge", std::abs(f));
}

}  // namespace detail

inline SystemSolveResult solve_system(const ImplicitSystemProblem& prob, const VecX& x,
                                      double tol = 1e-12) {
  if (prob.m < 1) fail(ErrorCode::ConfigError, "system needs m >= 1");
  std::vector<double> sup_h;
  double worst_row = detail::sample_system_contraction(prob, sup_h);
  if (!(worst_row < 0.5))
    fail(ErrorCode::NotContractive, "row derivative bound >= 1/2 for the system", worst_row);

  SystemSolveResult out;
  out.y = VecX::Zero(prob.m);
  out.sup_H = sup_h;
  int evals = 0;
  detail::solve_tail(prob, x, 0, out.y, tol, evals);
  out.evaluations = evals;
  out.corrections = VecX(prob.m);
  for (int j = 0; j < prob.m; ++j) {
    double resid = std::abs(out.y[j] - prob.G(j, x) - prob.H(j, x, out.y));
    if (!(resid < 10.0 * tol))
      fail(ErrorCode::NoConvergence, "system residual above tolerance", resid);
    out.corrections[j] = out.y[j] - prob.G(j, x);
    if (std::abs(out.corrections[j]) > 2.0 * sup_h[j] + tol)
      fail(ErrorCode::DomainError, "correction bound violated for a system component",
           out.corrections[j]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// First-derivative probe for the correction of a scalar equation with
// constant G: |dI/dx_i| <= (1 - H_y)^{-1} sup|H_{x_i}| <= 2 sup|H_{x_i}|.
// The probe refuses non-constant G; the estimate is not available there.
// ---------------------------------------------------------------------------

struct DerivativeBoundProbe {
  VecX dI_dx;        // centered finite differences of the correction
  VecX sup_Hx;       // sampled bounds on |dH/dx_i|
  bool bounds_hold;  // |dI/dx_i| <= 2 sup|H_{x_i}| for every i
};

inline DerivativeBoundProbe derivative_bound_probe(const ImplicitScalarProblem& prob,
                                                   const VecX& x, double h,
                                                   double tol = 1e-12) {
  const int n = x.size();
  // verify G is constant on the declared box
  double g0 = prob.G(prob.box_lo);
  for (int s = 0; s < 32; ++s) {
    VecX xs(n);
    for (int i = 0; i < n; ++i)
      xs[i] = prob.box_lo[i] + halton(std::uint64_t(s), 2 + i) * (prob.box_hi[i] - prob.box_lo[i]);
    if (std::abs(prob.G(xs) - g0) > 1e-12 * std::max(1.0, std::abs(g0)))
      fail(ErrorCode::DomainError, "derivative probe requires constant G");
  }
  DerivativeBoundProbe out;
  out.dI_dx = VecX(n);
  out.sup_Hx = VecX::Zero(n);
  const double hx = 1e-6;
  for (int s = 0; s < prob.n_probe; ++s) {
    VecX xs(n);
    for (int i = 0; i < n; ++i)
      xs[i] = prob.box_lo[i] + halton(std::uint64_t(s), 2 + i) * (prob.box_hi[i] - prob.box_lo[i]);
    double uy = halton(std::uint64_t(s), 2 + n);
    double y = prob.y_lo + uy * (prob.y_hi - prob.y_lo);
    for (int i = 0; i < n; ++i) {
      VecX xp = xs, xm = xs;
      xp[i] += hx;
      xm[i] -= hx;
      out.sup_Hx[i] =
          std::max(out.sup_Hx[i], std::abs((prob.H(xp, y) - prob.H(xm, y)) / (2.0 * hx)));
    }
  }
  out.bounds_hold = true;
  for (int i = 0; i < n; ++i) {
    VecX xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    double ip = solve_scalar(prob, xp, tol).correction;
    double im = solve_scalar(prob, xm, tol).correction;
    out.dI_dx[i] = (ip - im) / (2.0 * h);
    if (std::abs(out.dI_dx[i]) > 2.0 * out.sup_Hx[i] + 1e-8) out.bounds_hold = false;
  }
  return out;
}

}  // namespace rmap

#endif  // RETURNMAP_CONTRACTION_HPP

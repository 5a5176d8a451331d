#ifndef RETURNMAP_CHART_HPP
#define RETURNMAP_CHART_HPP

#include "returnmap/contraction.hpp"
#include "returnmap/core.hpp"
#include "returnmap/jet.hpp"
#include "returnmap/maps.hpp"
#include "returnmap/tangency.hpp"

namespace rmap {

// ---------------------------------------------------------------------------
// Normal-form coordinates (Z, Y, W) for a first-return map whose local part
// is exactly linear.  Stages:
//   1. rotate the horizontal plane so the y-in coefficient vector becomes
//      (b, 0);
//   2. center the horizontal coordinates at x_plus and replace the vertical
//      one by the k-step image offset  Y = gamma^k y - y_minus;
//   3. subtract the small shift that removes the constant terms (solved with
//      the implicit-system method);
//   4. Z = alpha* X1 + beta* X2, W = X2.
// The chart is affine, so maps conjugate exactly.
// ---------------------------------------------------------------------------

struct ReturnChart {
  Mat3 lin = Mat3::Identity();
  Vec3 off = Vec3::Zero();
  Mat3 lin_inv = Mat3::Identity();
  Vec3 off_inv = Vec3::Zero();

  int k = 1;
  double lambda = 1.0 / 3.0;
  double gamma = 3.0;
  double alpha_star = 1.0;
  double beta_star = 0.0;
  Vec3 shift = Vec3::Zero();  // (X1*, X2*, Y*)
  double delta_dom = 0.5;
  double delta_dom_prime = 0.25;

  // components ordered (Z, Y, W)
  Vec3 to_chart(const Vec3& p) const { return lin * p + off; }
  Vec3 from_chart(const Vec3& q) const { return lin_inv * q + off_inv; }

  CubicMap3 conjugate(const CubicMap3& raw) const {
    CubicMap3 pulled = raw.precompose_affine(lin_inv, off_inv, Vec3::Zero());
    return pulled.postcompose_affine(lin, off);
  }

  MapModel conjugate_model(const MapModel& raw) const {
    ReturnChart c = *this;
    MapModel mm;
    mm.eval = [c, raw](const Vec3& q) { return c.to_chart(raw.eval(c.from_chart(q))); };
    mm.jac = [c, raw](const Vec3& q) { return c.lin * raw.jac(c.from_chart(q)) * c.lin_inv; };
    auto f = mm.eval;
    auto j = mm.jac;
    mm.taylor = [f, j](const Vec3& q) { return jet_fd(f, j, q, 1e-2); };
    double dp = delta_dom_prime;
    mm.domain = [dp](const Vec3& q) { return q.lpNorm<Eigen::Infinity>() <= dp + 1e-15; };
    return mm;
  }

  bool in_box(const Vec3& q) const {
    return q.lpNorm<Eigen::Infinity>() <= delta_dom_prime + 1e-15;
  }
};

namespace detail {

// T_k written on the centered coordinates (X1, X2, Y): evaluate the raw map
// and re-express the image.  `rot` is the horizontal rotation of stage 1.
struct ShilnikovEval {
  const CubicMap3* tk_raw;
  Mat2 rot;      // world <- rotated
  Mat2 rot_inv;  // rotated <- world
  Vec2 x_plus_rot;
  double y_minus;
  double gamma_k;

  Vec3 operator()(const Vec3& X) const {
    Vec2 xr(X[0] + x_plus_rot[0], X[1] + x_plus_rot[1]);
    Vec2 xw = rot * xr;
    Vec3 p(xw[0], xw[1], (X[2] + y_minus) / gamma_k);
    Vec3 q = (*tk_raw)(p);
    Vec2 qr = rot_inv * Vec2(q[0], q[1]);
    return Vec3(qr[0] - x_plus_rot[0], qr[1] - x_plus_rot[1], gamma_k * q[2] - y_minus);
  }
};

}  // namespace detail

// Builds the chart for a return map with exactly linear local part.
// `tk_raw` must be the full k-step composition in the raw coordinates.
inline ReturnChart build_return_chart(const CubicMap3& tk_raw, const GlobalMapCoefficients& co,
                                      int k, double lambda, double gamma, double omega,
                                      double delta_dom) {
  ReturnChart ch;
  ch.k = k;
  ch.lambda = lambda;
  ch.gamma = gamma;
  ch.delta_dom = delta_dom;

  const double theta_b = angle_from_sin_cos(co.b2 / co.b_norm(), co.b1 / co.b_norm());
  Mat2 rot = rotation2(theta_b);        // world <- rotated
  Mat2 rot_inv = rotation2(-theta_b);   // rotated <- world
  Vec2 c_rot = rot_inv * Vec2(co.c1, co.c2);
  Vec2 x_plus_rot = rot_inv * co.x_plus;
  Mat2 a_rot = rot_inv * (Mat2() << co.a11, co.a12, co.a21, co.a22).finished() * rot;

  const double ck = std::cos(k * omega), sk = std::sin(k * omega);
  ch.alpha_star = c_rot[0] * ck + c_rot[1] * sk;
  ch.beta_star = -c_rot[0] * sk + c_rot[1] * ck;
  if (std::abs(ch.alpha_star) < 1e-12)
    fail(ErrorCode::WindowViolation, "alpha* vanishes; omega outside the admissible window");

  const double lk = std::pow(lambda, k);
  const double gk = std::pow(gamma, k);
  const double b = co.b_norm();
  const double alpha1_h = a_rot(0, 0) * ck + a_rot(0, 1) * sk;
  const double beta1_h = -a_rot(0, 0) * sk + a_rot(0, 1) * ck;
  const double alpha2_h = a_rot(1, 0) * ck + a_rot(1, 1) * sk;
  const double beta2_h = -a_rot(1, 0) * sk + a_rot(1, 1) * ck;

  detail::ShilnikovEval sh{&tk_raw, rot, rot_inv, x_plus_rot, co.y_minus, gk};

  // remainders of the centered form; they vanish identically for the
  // explicit model and stay O(lambda^k)-small in general
  auto h_hat = [&](const Vec3& X) -> Vec3 {
    Vec3 s = sh(X);
    double x1 = X[0] + x_plus_rot[0], x2 = X[1] + x_plus_rot[1];
    Vec3 model(lk * (alpha1_h * x1 + beta1_h * x2) + b * X[2],
               lk * (alpha2_h * x1 + beta2_h * x2),
               gk * co.mu - co.y_minus +
                   lk * gk * (ch.alpha_star * x1 + ch.beta_star * x2) + gk * co.d * X[2] * X[2]);
    return s - model;
  };

  // shift system: the implicit-system solver removes the constant terms
  const double y_span = std::max(16.0 * lk * (1.0 + x_plus_rot.norm()), 1e-9);
  auto h3 = [&](const Vec3& X) {
    const double hy = std::max(1e-7, 1e-4 * y_span);
    double d_h3 = (h_hat(Vec3(X[0], X[1], X[2] + hy))[2] - h_hat(Vec3(X[0], X[1], X[2] - hy))[2]) /
                  (2.0 * hy);
    return -d_h3 / (2.0 * gk * co.d);
  };
  ImplicitSystemProblem prob;
  prob.m = 3;
  prob.box_lo = VecX::Zero(1);
  prob.box_hi = VecX::Zero(1);
  prob.y_lo = -y_span;
  prob.y_hi = y_span;
  prob.n_probe = 64;
  prob.G = [](int, const VecX&) { return 0.0; };
  prob.H = [&](int j, const VecX&, const VecX& y) {
    Vec3 X(y[0], y[1], y[2]);
    double y_star = h3(X);
    double x1 = X[0] + x_plus_rot[0], x2 = X[1] + x_plus_rot[1];
    switch (j) {
      case 0:
        return lk * (alpha1_h * x1 + beta1_h * x2) + b * y_star +
               h_hat(Vec3(X[0], X[1], y_star))[0];
      case 1:
        return lk * (alpha2_h * x1 + beta2_h * x2) + h_hat(Vec3(X[0], X[1], y_star))[1];
      default:
        return y_star;
    }
  };
  SystemSolveResult sol = solve_system(prob, VecX::Zero(1), 1e-13);
  ch.shift = Vec3(sol.y[0], sol.y[1], sol.y[2]);

  // assemble the affine chart: (Z, Y, W) from raw (x1, x2, y)
  Mat3 stage = Mat3::Zero();
  stage.topLeftCorner<2, 2>() = rot_inv;
  stage(2, 2) = gk;
  Vec3 stage_off(-x_plus_rot[0] - ch.shift[0], -x_plus_rot[1] - ch.shift[1],
                 -co.y_minus - ch.shift[2]);
  Mat3 mix;
  mix << ch.alpha_star, ch.beta_star, 0.0,  // Z
      0.0, 0.0, 1.0,                        // Y
      0.0, 1.0, 0.0;                        // W
  ch.lin = mix * stage;
  ch.off = mix * stage_off;
  ch.lin_inv = ch.lin.inverse();
  ch.off_inv = -(ch.lin_inv * ch.off);

  const double c1 = std::abs(ch.alpha_star), c2 = std::abs(ch.beta_star);
  ch.delta_dom_prime = 0.5 * delta_dom * std::min(1.0, c1 / (1.0 + c2));
  return ch;
}

}  // namespace rmap

#endif  // RETURNMAP_CHART_HPP

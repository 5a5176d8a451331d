#ifndef RETURNMAP_CENTER_HPP
#define RETURNMAP_CENTER_HPP

#include "returnmap/core.hpp"
#include "returnmap/fixed_point.hpp"
#include "returnmap/jet.hpp"
#include "returnmap/maps.hpp"

#include <Eigen/Eigenvalues>

namespace rmap {

// ---------------------------------------------------------------------------
// Center basis: a real basis in which the differential becomes
// blockdiag(R(psi), nu3).  The first two columns come from the unit-circle
// complex pair, the third from the real contracting eigenvector.
// ---------------------------------------------------------------------------

struct CenterBasis {
  Mat3 basis = Mat3::Identity();
  double psi = 0.0;
  Complex nu3 = 0.0;
  double pair_modulus = 1.0;
  double unit_circle_distance = 0.0;  // | |nu_pair| - 1 | before projection
};

// pass unit_tol = infinity to accept a pair of any modulus (the growth
// machinery only needs the invariant plane of the pair)
inline CenterBasis center_basis(const Mat3& j, double unit_tol = 1e-8) {
  Eigen::EigenSolver<Mat3> es(j);
  if (es.info() != Eigen::Success) fail(ErrorCode::EigenFailure, "eigen-solver failed");
  int pair_i = -1, real_i = -1;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(es.eigenvalues()[i].imag()) > kImagPairThreshold) {
      if (pair_i < 0 || es.eigenvalues()[i].imag() > 0) pair_i = i;
    } else {
      real_i = i;
    }
  }
  if (pair_i < 0 || real_i < 0)
    fail(ErrorCode::SpectrumMismatch, "expected one complex pair and one real eigenvalue");
  Complex nu = es.eigenvalues()[pair_i];
  if (nu.imag() < 0) nu = std::conj(nu);
  CenterBasis cb;
  cb.pair_modulus = std::abs(nu);
  cb.unit_circle_distance = std::abs(cb.pair_modulus - 1.0);
  if (cb.unit_circle_distance > unit_tol)
    fail(ErrorCode::SpectrumMismatch, "complex pair is not on the unit circle",
         cb.unit_circle_distance);
  cb.nu3 = es.eigenvalues()[real_i].real();
  if (!(std::abs(cb.nu3) < 1.0))
    fail(ErrorCode::SpectrumMismatch, "third eigenvalue is not contracting", std::abs(cb.nu3));
  cb.psi = std::arg(nu);

  Eigen::Vector3cd v = es.eigenvectors().col(pair_i);
  if (v.imag().norm() < kImagPairThreshold) {
    // eigenvector for the conjugate value was returned; flip
    v = v.conjugate();
  }
  // deterministic phase: make the largest-modulus component real positive
  int imax = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
  v *= std::abs(v[imax]) / v[imax];
  // ensure the stored eigenvalue matches the eigenvector orientation
  Eigen::Vector3cd jv = j.cast<Complex>() * v;
  Complex lam = (v.adjoint() * jv)(0, 0) / (v.adjoint() * v)(0, 0);
  if (lam.imag() < 0) {
    v = v.conjugate();
  }
  Vec3 e1 = v.real();
  Vec3 e2 = -v.imag();
  Vec3 e3 = es.eigenvectors().col(real_i).real();
  e3.normalize();
  int rmax = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(e3[i]) > std::abs(e3[rmax])) rmax = i;
  if (e3[rmax] < 0) e3 = -e3;
  double n12 = std::sqrt(e1.squaredNorm() + e2.squaredNorm());
  e1 /= n12;
  e2 /= n12;
  cb.basis.col(0) = e1;
  cb.basis.col(1) = e2;
  cb.basis.col(2) = e3;

  Mat3 block = cb.basis.inverse() * j * cb.basis;
  Mat3 expected = Mat3::Zero();
  expected.topLeftCorner<2, 2>() = cb.pair_modulus * rotation2(cb.psi);
  expected(2, 2) = cb.nu3.real();
  if ((block - expected).lpNorm<Eigen::Infinity>() > 1e-6 * std::max(1.0, cb.pair_modulus))
    fail(ErrorCode::SpectrumMismatch, "basis does not block-diagonalize the differential",
         (block - expected).lpNorm<Eigen::Infinity>());
  return cb;
}

// ---------------------------------------------------------------------------
// Second-order center-manifold graph eta = w(xi):
//   w(R(psi) xi) - nu3 w(xi) = [pure-xi quadratic of the eta-component].
// ---------------------------------------------------------------------------

struct CenterManifoldQuad {
  double w20 = 0, w11 = 0, w02 = 0;
  double residual = 0.0;

  double eval(double xi1, double xi2) const {
    return w20 * xi1 * xi1 + w11 * xi1 * xi2 + w02 * xi2 * xi2;
  }
};

// action of precomposition with R(psi) on quadratic forms
inline Mat3 quadratic_rotation_action(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat3 m;
  m << c * c, c * s, s * s,                  //
      -2 * c * s, c * c - s * s, 2 * c * s,  //
      s * s, -c * s, c * c;
  return m;
}

// `t3` must be the order-3 jet in a center basis (linear part R(psi)+nu3).
inline CenterManifoldQuad center_manifold_quadratic(const Jet3& t3) {
  const double psi = std::atan2(t3.jac(1, 0), t3.jac(0, 0));
  const double nu3 = t3.jac(2, 2);
  if (!(std::abs(nu3) < 1.0 - 1e-6))
    fail(ErrorCode::SingularHomological, "third multiplier too close to the unit circle", nu3);
  Vec3 g(0.5 * t3.hess[2](0, 0), t3.hess[2](0, 1), 0.5 * t3.hess[2](1, 1));
  Mat3 m = quadratic_rotation_action(psi) - nu3 * Mat3::Identity();
  Eigen::FullPivLU<Mat3> lu(m);
  if (!lu.isInvertible())
    fail(ErrorCode::SingularHomological, "homological system is singular");
  Vec3 w = lu.solve(g);
  CenterManifoldQuad q{w[0], w[1], w[2], 0.0};
  q.residual = (m * w - g).lpNorm<Eigen::Infinity>();
  if (q.residual > 1e-10 * std::max(1.0, g.lpNorm<Eigen::Infinity>()))
    fail(ErrorCode::SingularHomological, "homological residual too large", q.residual);
  return q;
}

// ---------------------------------------------------------------------------
// Planar restriction: substitute eta = w(xi) and re-expand through order 3.
// ---------------------------------------------------------------------------

// nonlinear coefficient slots (p,q): u^p v^q
inline constexpr int kPlanarPQ[7][2] = {{2, 0}, {1, 1}, {0, 2}, {3, 0}, {2, 1}, {1, 2}, {0, 3}};

inline int planar_pq_index(int p, int q) {
  for (int i = 0; i < 7; ++i)
    if (kPlanarPQ[i][0] == p && kPlanarPQ[i][1] == q) return i;
  fail(ErrorCode::DomainError, "invalid planar coefficient index");
}

struct PlanarTaylorMap {
  double psi = 0.0;
  std::array<double, 7> u{};  // coefficients of ubar
  std::array<double, 7> v{};  // coefficients of vbar

  Vec2 eval(const Vec2& x) const {
    Vec2 out = rotation2(psi) * x;
    double pw_u[4] = {1, x[0], x[0] * x[0], x[0] * x[0] * x[0]};
    double pw_v[4] = {1, x[1], x[1] * x[1], x[1] * x[1] * x[1]};
    for (int i = 0; i < 7; ++i) {
      double mono = pw_u[kPlanarPQ[i][0]] * pw_v[kPlanarPQ[i][1]];
      out[0] += u[i] * mono;
      out[1] += v[i] * mono;
    }
    return out;
  }

  Mat2 jacobian(const Vec2& x) const {
    Mat2 j = rotation2(psi);
    for (int i = 0; i < 7; ++i) {
      int p = kPlanarPQ[i][0], q = kPlanarPQ[i][1];
      double du = p > 0 ? p * std::pow(x[0], p - 1) * std::pow(x[1], q) : 0.0;
      double dv = q > 0 ? q * std::pow(x[0], p) * std::pow(x[1], q - 1) : 0.0;
      j(0, 0) += u[i] * du;
      j(0, 1) += u[i] * dv;
      j(1, 0) += v[i] * du;
      j(1, 1) += v[i] * dv;
    }
    return j;
  }

  // rescale coordinates x -> s x; degree-d coefficients pick up s^{d-1}
  PlanarTaylorMap rescaled(double s) const {
    PlanarTaylorMap out = *this;
    for (int i = 0; i < 7; ++i) {
      int d = kPlanarPQ[i][0] + kPlanarPQ[i][1];
      double f = std::pow(s, d - 1);
      out.u[i] *= f;
      out.v[i] *= f;
    }
    return out;
  }
};

inline PlanarTaylorMap planar_restriction(const Jet3& t3, const CenterManifoldQuad& q) {
  PlanarTaylorMap pm;
  pm.psi = std::atan2(t3.jac(1, 0), t3.jac(0, 0));
  for (int comp = 0; comp < 2; ++comp) {
    auto& out = comp == 0 ? pm.u : pm.v;
    out[planar_pq_index(2, 0)] = 0.5 * t3.hess[comp](0, 0);
    out[planar_pq_index(1, 1)] = t3.hess[comp](0, 1);
    out[planar_pq_index(0, 2)] = 0.5 * t3.hess[comp](1, 1);
    double c30 = t3.third_at(comp, 0, 0, 0) / 6.0;
    double c21 = t3.third_at(comp, 0, 0, 1) / 2.0;
    double c12 = t3.third_at(comp, 0, 1, 1) / 2.0;
    double c03 = t3.third_at(comp, 1, 1, 1) / 6.0;
    // coupling of the graph into the cubic terms: coefficient of xi_j * eta
    double e0 = t3.hess[comp](0, 2);
    double e1 = t3.hess[comp](1, 2);
    c30 += e0 * q.w20;
    c21 += e0 * q.w11 + e1 * q.w20;
    c12 += e0 * q.w02 + e1 * q.w11;
    c03 += e1 * q.w02;
    out[planar_pq_index(3, 0)] = c30;
    out[planar_pq_index(2, 1)] = c21;
    out[planar_pq_index(1, 2)] = c12;
    out[planar_pq_index(0, 3)] = c03;
  }
  return pm;
}

// ---------------------------------------------------------------------------
// Complex coordinate z = u + i v.  Polynomials in (z, zbar) truncated at
// total degree 3 carry the coordinate changes exactly.
// ---------------------------------------------------------------------------

struct ZPoly {
  // c[p][q] multiplies z^p zbar^q, p + q <= 3
  std::array<std::array<Complex, 4>, 4> c{};

  static ZPoly zvar() {
    ZPoly p;
    p.c[1][0] = 1.0;
    return p;
  }

  ZPoly operator+(const ZPoly& o) const {
    ZPoly r = *this;
    for (int p = 0; p <= 3; ++p)
      for (int q = 0; q <= 3 - p; ++q) r.c[p][q] += o.c[p][q];
    return r;
  }
  ZPoly operator-(const ZPoly& o) const {
    ZPoly r = *this;
    for (int p = 0; p <= 3; ++p)
      for (int q = 0; q <= 3 - p; ++q) r.c[p][q] -= o.c[p][q];
    return r;
  }
  ZPoly operator*(Complex s) const {
    ZPoly r = *this;
    for (int p = 0; p <= 3; ++p)
      for (int q = 0; q <= 3 - p; ++q) r.c[p][q] *= s;
    return r;
  }
  ZPoly operator*(const ZPoly& o) const {
    ZPoly r;
    for (int p = 0; p <= 3; ++p)
      for (int q = 0; q <= 3 - p; ++q) {
        if (c[p][q] == 0.0) continue;
        for (int a = 0; a <= 3 - p - q; ++a)
          for (int b = 0; b <= 3 - p - q - a; ++b) {
            if (o.c[a][b] == 0.0) continue;
            r.c[p + a][q + b] += c[p][q] * o.c[a][b];
          }
      }
    return r;
  }

  ZPoly conjugated() const {
    ZPoly r;
    for (int p = 0; p <= 3; ++p)
      for (int q = 0; q <= 3 - p; ++q) r.c[p][q] = std::conj(c[q][p]);
    return r;
  }

  // substitute z -> s (and zbar -> conj of s)
  ZPoly substitute(const ZPoly& s) const {
    ZPoly sbar = s.conjugated();
    ZPoly r;
    for (int p = 0; p <= 3; ++p)
      for (int q = 0; q <= 3 - p; ++q) {
        if (c[p][q] == 0.0) continue;
        ZPoly term;
        term.c[0][0] = c[p][q];
        for (int rpt = 0; rpt < p; ++rpt) term = term * s;
        for (int rpt = 0; rpt < q; ++rpt) term = term * sbar;
        r = r + term;
      }
    return r;
  }

  Complex eval(Complex z) const {
    Complex zb = std::conj(z), acc = 0.0;
    for (int p = 0; p <= 3; ++p)
      for (int q = 0; q <= 3 - p; ++q) {
        if (c[p][q] == 0.0) continue;
        acc += c[p][q] * std::pow(z, p) * std::pow(zb, q);
      }
    return acc;
  }

  ZPoly d_dz() const {
    ZPoly r;
    for (int p = 1; p <= 3; ++p)
      for (int q = 0; q <= 3 - p; ++q) r.c[p - 1][q] = double(p) * c[p][q];
    return r;
  }
  ZPoly d_dzbar() const {
    ZPoly r;
    for (int p = 0; p <= 3; ++p)
      for (int q = 1; q <= 3 - p; ++q) r.c[p][q - 1] = double(q) * c[p][q];
    return r;
  }
};

struct ComplexTaylorMap {
  Complex nu;                    // unit-circle multiplier
  std::array<Complex, 7> z{};    // slots as kPlanarPQ: z^p zbar^q

  double psi() const { return std::arg(nu); }

  ZPoly poly() const {
    ZPoly p;
    p.c[1][0] = nu;
    for (int i = 0; i < 7; ++i) p.c[kPlanarPQ[i][0]][kPlanarPQ[i][1]] += z[i];
    return p;
  }

  Complex eval(Complex w) const { return poly().eval(w); }

  ComplexTaylorMap rescaled(double s) const {
    ComplexTaylorMap out = *this;
    for (int i = 0; i < 7; ++i) {
      int d = kPlanarPQ[i][0] + kPlanarPQ[i][1];
      out.z[i] *= std::pow(s, d - 1);
    }
    return out;
  }
};

inline ComplexTaylorMap complex_coefficients(const PlanarTaylorMap& pm) {
  ComplexTaylorMap cm;
  cm.nu = Complex(std::cos(pm.psi), std::sin(pm.psi));
  ZPoly zp, zm;  // z + zbar and z - zbar
  zp.c[1][0] = 1.0;
  zp.c[0][1] = 1.0;
  zm.c[1][0] = 1.0;
  zm.c[0][1] = -1.0;
  ZPoly total;
  const Complex mi(0.0, -1.0);
  for (int i = 0; i < 7; ++i) {
    int p = kPlanarPQ[i][0], q = kPlanarPQ[i][1];
    Complex w = Complex(pm.u[i], pm.v[i]) * std::pow(mi, q) / std::pow(2.0, p + q);
    ZPoly term;
    term.c[0][0] = w;
    for (int r = 0; r < p; ++r) term = term * zp;
    for (int r = 0; r < q; ++r) term = term * zm;
    total = total + term;
  }
  for (int i = 0; i < 7; ++i) cm.z[i] = total.c[kPlanarPQ[i][0]][kPlanarPQ[i][1]];
  return cm;
}

// inverse reconstruction: real coefficients of Re/Im of the z-expansion
inline PlanarTaylorMap planar_from_complex(const ComplexTaylorMap& cm) {
  PlanarTaylorMap pm;
  pm.psi = cm.psi();
  // expand z^p zbar^q with z = u + i v into u^a v^b monomials
  struct UV {
    std::array<std::array<Complex, 4>, 4> c{};  // u^a v^b
  };
  auto mul = [](const UV& x, const UV& y) {
    UV r;
    for (int a = 0; a <= 3; ++a)
      for (int b = 0; b <= 3 - a; ++b) {
        if (x.c[a][b] == 0.0) continue;
        for (int a2 = 0; a2 <= 3 - a - b; ++a2)
          for (int b2 = 0; b2 <= 3 - a - b - a2; ++b2)
            r.c[a + a2][b + b2] += x.c[a][b] * y.c[a2][b2];
      }
    return r;
  };
  UV zu, zbu;
  zu.c[1][0] = 1.0;
  zu.c[0][1] = Complex(0, 1);
  zbu.c[1][0] = 1.0;
  zbu.c[0][1] = Complex(0, -1);
  UV total;
  for (int i = 0; i < 7; ++i) {
    int p = kPlanarPQ[i][0], q = kPlanarPQ[i][1];
    UV term;
    term.c[0][0] = cm.z[i];
    for (int r = 0; r < p; ++r) term = mul(term, zu);
    for (int r = 0; r < q; ++r) term = mul(term, zbu);
    for (int a = 0; a <= 3; ++a)
      for (int b = 0; b <= 3 - a; ++b) total.c[a][b] += term.c[a][b];
  }
  for (int i = 0; i < 7; ++i) {
    Complex v = total.c[kPlanarPQ[i][0]][kPlanarPQ[i][1]];
    pm.u[i] = v.real();
    pm.v[i] = v.imag();
  }
  return pm;
}

// ---------------------------------------------------------------------------
// Quadratic kill and the Lyapunov coefficient.
// ---------------------------------------------------------------------------

inline void require_nonresonant(double psi) {
  if (!(psi > 0.0 && psi < kPi))
    fail(ErrorCode::DomainError, "rotation angle must lie in (0, pi)", psi);
  if (near_strong_resonance(psi))
    fail(ErrorCode::ResonanceGuard, "rotation angle within the strong-resonance guard band",
         psi);
}

// Closed-form combination for the resonant cubic coefficient after removing
// the quadratic terms.  NOTE: this combination drops the third-order term of
// the inverse coordinate change; the composed route in normal_form() keeps
// it.  The two values differ by exactly
//     nu * (3 s20 s11 + |s11|^2 + 2 |s02|^2),   s_pq = z^(pq)/(nu - nu^p nubar^q),
// see inverse_cubic_correction().  The composed coefficient is the one that
// matches the classical coefficient for maps and that the measured radial
// drift follows; the closed form is kept as the primary reported value
// because the downstream reference curve is derived from it.
inline Complex kill_quadratic(const ComplexTaylorMap& cm) {
  require_nonresonant(cm.psi());
  const Complex nu = cm.nu, nub = std::conj(cm.nu);
  const Complex z20 = cm.z[planar_pq_index(2, 0)];
  const Complex z11 = cm.z[planar_pq_index(1, 1)];
  const Complex z02 = cm.z[planar_pq_index(0, 2)];
  const Complex z21 = cm.z[planar_pq_index(2, 1)];
  Complex a = z21;
  a += std::norm(z02) * (4.0 * nu - 2.0 * nub * nub) / (-2.0 + nu * nu * nu + nub * nub * nub);
  a += std::norm(z11) * (2.0 - nub) / ((-1.0 + nub) * (-1.0 + nub));
  a -= z11 * z20 * (-6.0 + 2.0 * nu + nub) / ((-1.0 + nu) * (-1.0 + nu));
  return a;
}

inline double lyapunov_coefficient(const ComplexTaylorMap& cm) {
  Complex alpha = kill_quadratic(cm);
  return -(std::conj(cm.nu) * alpha).real();
}

// third-order term of the inverse coordinate change, omitted by the closed
// form above: alpha_composed = alpha_closed + inverse_cubic_correction
inline Complex inverse_cubic_correction(const ComplexTaylorMap& cm) {
  const Complex nu = cm.nu, nub = std::conj(cm.nu);
  auto s = [&](int p, int q) {
    return cm.z[planar_pq_index(p, q)] / (nu - std::pow(nu, p) * std::pow(nub, q));
  };
  Complex s20 = s(2, 0), s11 = s(1, 1), s02 = s(0, 2);
  return nu * (3.0 * s20 * s11 + std::norm(s11) + 2.0 * std::norm(s02));
}

// cancellation diagnostic: sum of term magnitudes over the result
inline double lyapunov_condition(const ComplexTaylorMap& cm) {
  const Complex nu = cm.nu, nub = std::conj(cm.nu);
  const Complex z20 = cm.z[planar_pq_index(2, 0)];
  const Complex z11 = cm.z[planar_pq_index(1, 1)];
  const Complex z02 = cm.z[planar_pq_index(0, 2)];
  const Complex z21 = cm.z[planar_pq_index(2, 1)];
  double num = std::abs(z21);
  num += std::abs(std::norm(z02) * (4.0 * nu - 2.0 * nub * nub) /
                  (-2.0 + nu * nu * nu + nub * nub * nub));
  num += std::abs(std::norm(z11) * (2.0 - nub) / ((-1.0 + nub) * (-1.0 + nub)));
  num += std::abs(z11 * z20 * (-6.0 + 2.0 * nu + nub) / ((-1.0 + nu) * (-1.0 + nu)));
  double lc = std::abs(lyapunov_coefficient(cm));
  return num / std::max(lc, 1e-300);
}

// Full normal form via explicit composition of the coordinate changes in the
// truncated (z, zbar) algebra.  Independent route to alpha, and provider of
// the reduced cubic map used by the area-expansion checks.
struct NormalFormMap {
  Complex nu;
  Complex alpha;                    // resonant cubic coefficient
  std::array<Complex, 4> cubic{};   // (30),(21),(12),(03) after the quadratic kill
  ZPoly to_w;                       // w as a polynomial in z
  ZPoly from_w;                     // z as a polynomial in w (truncated inverse)

  Complex eval_reduced(Complex w) const { return nu * w + alpha * w * w * std::conj(w); }

  // |d wbar / d w|^2 - |d wbar / d wbar|^2 of the reduced cubic map
  double det_reduced(Complex w) const {
    Complex dw = nu + 2.0 * alpha * w * std::conj(w);
    Complex dwb = alpha * w * w;
    return std::norm(dw) - std::norm(dwb);
  }
};

// governs the measured radial drift: |w| changes by -LC |w|^3 per step
inline double lyapunov_coefficient_dynamic(const ComplexTaylorMap& cm) {
  Complex alpha = kill_quadratic(cm) + inverse_cubic_correction(cm);
  return -(std::conj(cm.nu) * alpha).real();
}

inline NormalFormMap normal_form(const ComplexTaylorMap& cm) {
  require_nonresonant(cm.psi());
  const Complex nu = cm.nu, nub = std::conj(cm.nu);
  ZPoly s;  // quadratic part of the coordinate change w = z + s(z)
  for (auto [p, q] : {std::pair{2, 0}, std::pair{1, 1}, std::pair{0, 2}}) {
    Complex denom = nu - std::pow(nu, p) * std::pow(nub, q);
    s.c[p][q] = cm.z[planar_pq_index(p, q)] / denom;
  }
  ZPoly w_of_z = ZPoly::zvar() + s;
  // truncated inverse by iteration: z = w - s(z(w))
  ZPoly z_of_w = ZPoly::zvar();
  for (int it = 0; it < 3; ++it) z_of_w = ZPoly::zvar() - s.substitute(z_of_w);
  ZPoly f = cm.poly();
  ZPoly composed = w_of_z.substitute(f.substitute(z_of_w));

  NormalFormMap nf;
  nf.nu = nu;
  nf.to_w = w_of_z;
  nf.from_w = z_of_w;
  for (auto [p, q] : {std::pair{2, 0}, std::pair{1, 1}, std::pair{0, 2}})
    if (std::abs(composed.c[p][q]) > 1e-9 * (1.0 + std::abs(cm.z[planar_pq_index(p, q)])))
      fail(ErrorCode::DomainError, "quadratic terms survived the normal-form change",
           std::abs(composed.c[p][q]));
  nf.alpha = composed.c[2][1];
  nf.cubic = {composed.c[3][0], composed.c[2][1], composed.c[1][2], composed.c[0][3]};
  return nf;
}

// ---------------------------------------------------------------------------
// Reference curve for the limit coefficients:
//   L(psi) = 4 cos(psi) (1 + cos(psi)) / ((-1 + cos(psi)) (1 + 2 cos(psi))^2)
// ---------------------------------------------------------------------------

inline double reference_curve(double psi) {
  if (!(psi > 0.0 && psi < kPi))
    fail(ErrorCode::DomainError, "reference curve defined on (0, pi)");
  const double c = std::cos(psi);
  const double denom = (-1.0 + c) * sqr(1.0 + 2.0 * c);
  if (std::abs(1.0 + 2.0 * c) < 1e-9)
    fail(ErrorCode::DomainError, "reference curve has a pole at psi = 2 pi / 3");
  return 4.0 * c * (1.0 + c) / denom;
}

// ---------------------------------------------------------------------------
// Full report at a Neimark-Sacker fixed point.
// ---------------------------------------------------------------------------

enum class NSVerdict { WeaklyRepelling, WeaklyAttracting, Degenerate };

inline const char* to_string(NSVerdict v) {
  switch (v) {
    case NSVerdict::WeaklyRepelling: return "weakly_repelling";
    case NSVerdict::WeaklyAttracting: return "weakly_attracting";
    default: return "degenerate";
  }
}

inline constexpr double kDegenerateLC = 1e-8;

struct NSReport {
  Vec3 fixed_point = Vec3::Zero();
  MultiplierSet mults;
  double psi = 0.0;
  double lc = 0.0;          // closed-form value; the verdict is keyed to it
  double lc_dynamic = 0.0;  // composed-route value; governs the radial drift
  NSVerdict verdict = NSVerdict::Degenerate;
  bool resonance_flag = false;  // within ten guard widths of a strong resonance
  double unit_circle_projection = 0.0;
  double lc_condition = 0.0;
  double quad_scale = 1.0;  // coordinate scale fixing |z^(02)| = 1 when possible
  CenterBasis basis;
  CenterManifoldQuad quad;
  PlanarTaylorMap planar;       // in the normalized coordinates
  ComplexTaylorMap cmap;        // in the normalized coordinates
  NormalFormMap nf;
};

// The planar coordinate scale is fixed by normalizing the z^(02) coefficient
// to unit modulus whenever the quadratic part is present; the reported value
// is then directly comparable across maps of the same family.
inline NSReport ns_report(const MapModel& map, const Vec3& fp) {
  double scale = std::max(1.0, fp.lpNorm<Eigen::Infinity>());
  if ((map.eval(fp) - fp).lpNorm<Eigen::Infinity>() > 1e-8 * scale)
    fail(ErrorCode::DomainError, "report requested away from a fixed point");

  NSReport rep;
  rep.fixed_point = fp;
  Mat3 j = map.jac(fp);
  rep.mults = multipliers_of(j);
  rep.basis = center_basis(j);
  rep.psi = rep.basis.psi;
  rep.unit_circle_projection = rep.basis.unit_circle_distance;

  Jet3 jet = map.taylor(fp).change_basis(rep.basis.basis);
  rep.quad = center_manifold_quadratic(jet);
  PlanarTaylorMap planar = planar_restriction(jet, rep.quad);
  ComplexTaylorMap cmap = complex_coefficients(planar);
  // project the multiplier onto the unit circle before the formula
  cmap.nu /= std::abs(cmap.nu);

  double s02 = std::abs(cmap.z[planar_pq_index(0, 2)]);
  rep.quad_scale = s02 > 1e-8 ? 1.0 / s02 : 1.0;
  rep.cmap = cmap.rescaled(rep.quad_scale);
  rep.planar = planar.rescaled(rep.quad_scale);

  rep.lc = lyapunov_coefficient(rep.cmap);
  rep.lc_dynamic = lyapunov_coefficient_dynamic(rep.cmap);
  rep.lc_condition = lyapunov_condition(rep.cmap);
  rep.nf = normal_form(rep.cmap);
  rep.resonance_flag = near_strong_resonance(rep.psi, 10.0 * kResonanceGuard);
  if (rep.lc < -kDegenerateLC)
    rep.verdict = NSVerdict::WeaklyRepelling;
  else if (rep.lc > kDegenerateLC)
    rep.verdict = NSVerdict::WeaklyAttracting;
  else
    rep.verdict = NSVerdict::Degenerate;
  return rep;
}

}  // namespace rmap

#endif  // RETURNMAP_CENTER_HPP

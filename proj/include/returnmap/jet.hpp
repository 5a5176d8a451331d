#ifndef RETURNMAP_JET_HPP
#define RETURNMAP_JET_HPP

#include "returnmap/core.hpp"

#include <functional>
#include <limits>

namespace rmap {

// ---------------------------------------------------------------------------
// Monomials of degree <= 3 in three variables.
// ---------------------------------------------------------------------------

struct Monomial {
  int e0, e1, e2;
  int degree() const { return e0 + e1 + e2; }
};

inline constexpr int kNumMonomials3 = 20;

inline const std::array<Monomial, kNumMonomials3>& monomials3() {
  static const std::array<Monomial, kNumMonomials3> table = [] {
    std::array<Monomial, kNumMonomials3> t{};
    int idx = 0;
    for (int d = 0; d <= 3; ++d)
      for (int e0 = d; e0 >= 0; --e0)
        for (int e1 = d - e0; e1 >= 0; --e1) t[idx++] = Monomial{e0, e1, d - e0 - e1};
    return t;
  }();
  return table;
}

inline int monomial_index(int e0, int e1, int e2) {
  const auto& tbl = monomials3();
  for (int i = 0; i < kNumMonomials3; ++i)
    if (tbl[i].e0 == e0 && tbl[i].e1 == e1 && tbl[i].e2 == e2) return i;
  fail(ErrorCode::DomainError, "monomial degree out of range");
}

// Canonical index of an ordered triple a<=b<=c in {0,1,2} among the ten
// third-derivative slots.
inline int third_index(int a, int b, int c) {
  if (a > b) std::swap(a, b);
  if (b > c) std::swap(b, c);
  if (a > b) std::swap(a, b);
  // (a,b,c) sorted; enumerate in the same order as monomials of degree 3
  int e[3] = {0, 0, 0};
  ++e[a];
  ++e[b];
  ++e[c];
  int idx = 0;
  for (int e0 = 3; e0 >= 0; --e0)
    for (int e1 = 3 - e0; e1 >= 0; --e1) {
      int e2 = 3 - e0 - e1;
      if (e0 == e[0] && e1 == e[1] && e2 == e[2]) return idx;
      ++idx;
    }
  fail(ErrorCode::DomainError, "bad third-derivative index");
}

// ---------------------------------------------------------------------------
// Order-3 jet of a 3D map at a point: value, Jacobian, Hessians and the
// symmetric third-derivative tensors of every component.
// ---------------------------------------------------------------------------

struct Jet3 {
  Vec3 value = Vec3::Zero();
  Mat3 jac = Mat3::Zero();
  std::array<Mat3, 3> hess{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
  // per component, ten entries indexed by third_index()
  std::array<std::array<double, 10>, 3> third{};

  double third_at(int comp, int a, int b, int c) const {
    return third[comp][third_index(a, b, c)];
  }
  void set_third(int comp, int a, int b, int c, double v) {
    third[comp][third_index(a, b, c)] = v;
  }

  // Taylor coefficient of the monomial with exponents (e0,e1,e2) in the
  // given component (derivative divided by the factorial of the multi-index).
  double coeff(int comp, int e0, int e1, int e2) const {
    const int deg = e0 + e1 + e2;
    if (deg == 0) return value[comp];
    if (deg == 1) {
      int v = e0 ? 0 : (e1 ? 1 : 2);
      return jac(comp, v);
    }
    int vars[3];
    int n = 0;
    for (int r = 0; r < e0; ++r) vars[n++] = 0;
    for (int r = 0; r < e1; ++r) vars[n++] = 1;
    for (int r = 0; r < e2; ++r) vars[n++] = 2;
    double fact = 1.0;
    for (int e : {e0, e1, e2})
      for (int r = 2; r <= e; ++r) fact *= r;
    if (deg == 2) return hess[comp](vars[0], vars[1]) / fact;
    return third_at(comp, vars[0], vars[1], vars[2]) / fact;
  }

  // Jet of B^{-1} (F(p + B xi) - F(p)) given this = jet of F at p.
  Jet3 change_basis(const Mat3& B) const {
    Mat3 Binv = B.inverse();
    Jet3 out;
    out.value = Vec3::Zero();
    out.jac = Binv * jac * B;
    for (int i = 0; i < 3; ++i) {
      Mat3 h = Mat3::Zero();
      for (int m = 0; m < 3; ++m) h += Binv(i, m) * (B.transpose() * hess[m] * B);
      out.hess[i] = h;
    }
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b)
          for (int c = b; c < 3; ++c) {
            double t = 0.0;
            for (int m = 0; m < 3; ++m) {
              double s = 0.0;
              for (int p = 0; p < 3; ++p)
                for (int q = 0; q < 3; ++q)
                  for (int r = 0; r < 3; ++r)
                    s += third_at(m, p, q, r) * B(p, a) * B(q, b) * B(r, c);
              t += Binv(i, m) * s;
            }
            out.set_third(i, a, b, c, t);
          }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Cubic polynomial in three variables, with exact arithmetic on the
// coefficients.  Products are truncated at total degree 3.
// ---------------------------------------------------------------------------

struct Poly3 {
  std::array<double, kNumMonomials3> c{};

  static Poly3 constant(double v) {
    Poly3 p;
    p.c[monomial_index(0, 0, 0)] = v;
    return p;
  }
  static Poly3 variable(int i) {
    Poly3 p;
    p.c[monomial_index(i == 0, i == 1, i == 2)] = 1.0;
    return p;
  }
  static Poly3 linear(double v0, const Vec3& grad) {
    Poly3 p = constant(v0);
    p.c[monomial_index(1, 0, 0)] = grad[0];
    p.c[monomial_index(0, 1, 0)] = grad[1];
    p.c[monomial_index(0, 0, 1)] = grad[2];
    return p;
  }

  double eval(const Vec3& u) const {
    const auto& tbl = monomials3();
    double pw0[4] = {1, u[0], u[0] * u[0], u[0] * u[0] * u[0]};
    double pw1[4] = {1, u[1], u[1] * u[1], u[1] * u[1] * u[1]};
    double pw2[4] = {1, u[2], u[2] * u[2], u[2] * u[2] * u[2]};
    double s = 0.0;
    for (int i = 0; i < kNumMonomials3; ++i)
      s += c[i] * pw0[tbl[i].e0] * pw1[tbl[i].e1] * pw2[tbl[i].e2];
    return s;
  }

  Poly3 operator+(const Poly3& o) const {
    Poly3 r = *this;
    for (int i = 0; i < kNumMonomials3; ++i) r.c[i] += o.c[i];
    return r;
  }
  Poly3 operator*(double s) const {
    Poly3 r = *this;
    for (auto& v : r.c) v *= s;
    return r;
  }

  // product truncated to total degree 3
  Poly3 operator*(const Poly3& o) const {
    const auto& tbl = monomials3();
    Poly3 r;
    for (int i = 0; i < kNumMonomials3; ++i) {
      if (c[i] == 0.0) continue;
      for (int j = 0; j < kNumMonomials3; ++j) {
        if (o.c[j] == 0.0) continue;
        int e0 = tbl[i].e0 + tbl[j].e0;
        int e1 = tbl[i].e1 + tbl[j].e1;
        int e2 = tbl[i].e2 + tbl[j].e2;
        if (e0 + e1 + e2 > 3) continue;
        r.c[monomial_index(e0, e1, e2)] += c[i] * o.c[j];
      }
    }
    return r;
  }

  Poly3 derivative(int var) const {
    const auto& tbl = monomials3();
    Poly3 r;
    for (int i = 0; i < kNumMonomials3; ++i) {
      int e[3] = {tbl[i].e0, tbl[i].e1, tbl[i].e2};
      if (e[var] == 0) continue;
      double f = e[var];
      e[var] -= 1;
      r.c[monomial_index(e[0], e[1], e[2])] += f * c[i];
    }
    return r;
  }

  // substitute u_i -> subs[i] (each at most cubic; result truncated)
  Poly3 substitute(const std::array<Poly3, 3>& subs) const {
    const auto& tbl = monomials3();
    Poly3 r;
    for (int i = 0; i < kNumMonomials3; ++i) {
      if (c[i] == 0.0) continue;
      Poly3 term = constant(c[i]);
      for (int rep = 0; rep < tbl[i].e0; ++rep) term = term * subs[0];
      for (int rep = 0; rep < tbl[i].e1; ++rep) term = term * subs[1];
      for (int rep = 0; rep < tbl[i].e2; ++rep) term = term * subs[2];
      r = r + term;
    }
    return r;
  }
};

// A cubic polynomial self-map of R^3 expanded about a base point:
//   f(x) = P(x - base).
// Used for the shipped models and synthetic test maps; keeping the base point
// explicit avoids cancellation when the dynamics live close to it.
struct CubicMap3 {
  Vec3 base = Vec3::Zero();
  std::array<Poly3, 3> comp{};

  Vec3 operator()(const Vec3& x) const {
    Vec3 u = x - base;
    return Vec3(comp[0].eval(u), comp[1].eval(u), comp[2].eval(u));
  }

  Mat3 jacobian(const Vec3& x) const {
    Vec3 u = x - base;
    Mat3 j;
    for (int i = 0; i < 3; ++i)
      for (int v = 0; v < 3; ++v) j(i, v) = comp[i].derivative(v).eval(u);
    return j;
  }

  Jet3 taylor3(const Vec3& x) const {
    Vec3 u = x - base;
    // re-expand about x via substitution of (v + u)
    std::array<Poly3, 3> shift = {
        Poly3::linear(u[0], Vec3(1, 0, 0)),
        Poly3::linear(u[1], Vec3(0, 1, 0)),
        Poly3::linear(u[2], Vec3(0, 0, 1)),
    };
    Jet3 jet;
    for (int i = 0; i < 3; ++i) {
      Poly3 q = comp[i].substitute(shift);
      jet.value[i] = q.c[monomial_index(0, 0, 0)];
      jet.jac(i, 0) = q.c[monomial_index(1, 0, 0)];
      jet.jac(i, 1) = q.c[monomial_index(0, 1, 0)];
      jet.jac(i, 2) = q.c[monomial_index(0, 0, 1)];
      for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) {
          int e[3] = {0, 0, 0};
          ++e[a];
          ++e[b];
          double coeff = q.c[monomial_index(e[0], e[1], e[2])];
          double v = (a == b) ? 2.0 * coeff : coeff;
          jet.hess[i](a, b) = v;
          jet.hess[i](b, a) = v;
        }
      for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b)
          for (int cc = b; cc < 3; ++cc) {
            int e[3] = {0, 0, 0};
            ++e[a];
            ++e[b];
            ++e[cc];
            double coeff = q.c[monomial_index(e[0], e[1], e[2])];
            double fact = 1.0;
            for (int ev : e)
              for (int r = 2; r <= ev; ++r) fact *= r;
            jet.set_third(i, a, b, cc, coeff * fact);
          }
    }
    return jet;
  }

  // g = f o A with A(x) = L (x - new_base) + shift_image; the result is
  // expanded about new_base.
  CubicMap3 precompose_affine(const Mat3& L, const Vec3& shift_image,
                              const Vec3& new_base) const {
    std::array<Poly3, 3> subs;
    Vec3 s = shift_image - base;
    for (int i = 0; i < 3; ++i) subs[i] = Poly3::linear(s[i], L.row(i));
    CubicMap3 g;
    g.base = new_base;
    for (int i = 0; i < 3; ++i) g.comp[i] = comp[i].substitute(subs);
    return g;
  }

  // g = M f + t
  CubicMap3 postcompose_affine(const Mat3& M, const Vec3& t) const {
    CubicMap3 g;
    g.base = base;
    for (int i = 0; i < 3; ++i) {
      Poly3 p = Poly3::constant(t[i]);
      for (int m = 0; m < 3; ++m) p = p + comp[m] * M(i, m);
      g.comp[i] = p;
    }
    return g;
  }

  static CubicMap3 affine(const Mat3& L, const Vec3& t) {
    CubicMap3 g;
    for (int i = 0; i < 3; ++i) g.comp[i] = Poly3::linear(t[i], L.row(i));
    return g;
  }

  static CubicMap3 identity() { return affine(Mat3::Identity(), Vec3::Zero()); }
};

// ---------------------------------------------------------------------------
// Finite-difference derivative oracles.
// ---------------------------------------------------------------------------

using EvalFn = std::function<Vec3(const Vec3&)>;
using JacFn = std::function<Mat3(const Vec3&)>;

// Central-difference Jacobian.  Test oracle for every analytic Jacobian.
inline Mat3 jacobian_fd(const EvalFn& f, const Vec3& p, double h) {
  if (!(h > 0.0)) fail(ErrorCode::DomainError, "FD step must be positive");
  Mat3 j;
  for (int v = 0; v < 3; ++v) {
    Vec3 dp = Vec3::Zero();
    dp[v] = h;
    Vec3 fp = f(p + dp), fm = f(p - dp);
    if (!fp.allFinite() || !fm.allFinite())
      fail(ErrorCode::NonFinite, "non-finite map evaluation in jacobian_fd");
    j.col(v) = (fp - fm) / (2.0 * h);
  }
  return j;
}

namespace detail {

// Richardson extrapolation of a central-difference estimate D(h):
// combines D(h) and D(h/2) to cancel the O(h^2) error term.
template <class F>
Mat3 richardson(F&& estimate, double h) {
  Mat3 d1 = estimate(h);
  Mat3 d2 = estimate(h / 2.0);
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace detail

// Order-3 jet via Richardson-extrapolated central differences of the
// Jacobian.  `scale` sets the step: h = eps^(1/4) * scale.
inline Jet3 jet_fd(const EvalFn& f, const JacFn& jac, const Vec3& p, double scale = 1.0) {
  Jet3 jet;
  jet.value = f(p);
  jet.jac = jac(p);
  const double eps = std::numeric_limits<double>::epsilon();
  const double h2 = std::pow(eps, 1.0 / 3.0) * scale;
  const double h3 = std::pow(eps, 0.25) * scale;

  // Hessians: first central difference of the Jacobian
  for (int b = 0; b < 3; ++b) {
    Vec3 e = Vec3::Zero();
    e[b] = 1.0;
    Mat3 d = detail::richardson(
        [&](double h) -> Mat3 { return (jac(p + h * e) - jac(p - h * e)) / (2.0 * h); },
        h2);
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 3; ++a) jet.hess[i](a, b) = d(i, a);
  }
  for (int i = 0; i < 3; ++i) jet.hess[i] = ((jet.hess[i] + jet.hess[i].transpose()) / 2.0).eval();

  // Third derivatives: second central difference of the Jacobian.
  // d2[a][b](i, c) estimates d^3 f_i / dx_a dx_b dx_c.
  Mat3 d2[3][3];
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) {
      Vec3 ea = Vec3::Zero(), eb = Vec3::Zero();
      ea[a] = 1.0;
      eb[b] = 1.0;
      Mat3 d;
      if (a == b)
        d = detail::richardson(
            [&](double h) -> Mat3 {
              return (jac(p + h * ea) - 2.0 * jac(p) + jac(p - h * ea)) / (h * h);
            },
            h3);
      else
        d = detail::richardson(
            [&](double h) -> Mat3 {
              return (jac(p + h * (ea + eb)) - jac(p + h * (ea - eb)) -
                      jac(p - h * (ea - eb)) + jac(p - h * (ea + eb))) /
                     (4.0 * h * h);
            },
            h3);
      d2[a][b] = d;
      d2[b][a] = d;
    }
  // each slot (a,b,c) has up to three stencil estimates; average them
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b)
        for (int cc = b; cc < 3; ++cc) {
          double acc = d2[a][b](i, cc) + d2[a][cc](i, b) + d2[b][cc](i, a);
          jet.set_third(i, a, b, cc, acc / 3.0);
        }
  return jet;
}

}  // namespace rmap

#endif  // RETURNMAP_JET_HPP

#ifndef RETURNMAP_MAPS_HPP
#define RETURNMAP_MAPS_HPP

#include "returnmap/core.hpp"
#include "returnmap/jet.hpp"

#include <functional>
#include <memory>
#include <utility>

namespace rmap {

// ---------------------------------------------------------------------------
// MapModel: a differentiable self-map of a chart.  Evaluation and Jacobian
// are required; order-3 Taylor data defaults to Richardson finite
// differences.  `domain` tells whether a point lies in the chart the map is
// defined on.
// ---------------------------------------------------------------------------

struct MapModel {
  EvalFn eval;
  JacFn jac;
  std::function<Jet3(const Vec3&)> taylor;
  std::function<bool(const Vec3&)> domain = [](const Vec3&) { return true; };

  Vec3 operator()(const Vec3& p) const { return eval(p); }

  static MapModel from_cubic(CubicMap3 m,
                             std::function<bool(const Vec3&)> dom = nullptr) {
    auto shared = std::make_shared<CubicMap3>(std::move(m));
    MapModel mm;
    mm.eval = [shared](const Vec3& p) { return (*shared)(p); };
    mm.jac = [shared](const Vec3& p) { return shared->jacobian(p); };
    mm.taylor = [shared](const Vec3& p) { return shared->taylor3(p); };
    if (dom) mm.domain = std::move(dom);
    return mm;
  }

  // analytic evaluation only; derivatives by finite differences
  static MapModel from_eval(EvalFn f, double fd_scale = 1.0,
                            std::function<bool(const Vec3&)> dom = nullptr) {
    MapModel mm;
    mm.eval = f;
    double h = 1e-6 * fd_scale;
    mm.jac = [f, h](const Vec3& p) { return jacobian_fd(f, p, h); };
    auto jac = mm.jac;
    mm.taylor = [f, jac, fd_scale](const Vec3& p) { return jet_fd(f, jac, p, fd_scale); };
    if (dom) mm.domain = std::move(dom);
    return mm;
  }

  static MapModel from_eval_jac(EvalFn f, JacFn j, double fd_scale = 1.0,
                                std::function<bool(const Vec3&)> dom = nullptr) {
    MapModel mm;
    mm.eval = f;
    mm.jac = j;
    mm.taylor = [f, j, fd_scale](const Vec3& p) { return jet_fd(f, j, p, fd_scale); };
    if (dom) mm.domain = std::move(dom);
    return mm;
  }
};

// ---------------------------------------------------------------------------
// The explicit model: a linear focus in a solid cylinder plus a quadratic
// fold that returns the top of the cylinder to its bottom, with a
// three-parameter unfolding (mu shifts the fold image, omega is the rotation
// angle, and lambda = exp(rho)/gamma keeps rho = log|lambda*gamma| exact).
// ---------------------------------------------------------------------------

struct ToyModelConfig {
  double eps = 0.2;      // fold strength, must lie in (0, 1/3)
  double lambda = 1.0 / 3.0;
  double omega = kPi / 6.0;
  double gamma = 3.0;
  double mu = 0.0;

  void validate() const {
    if (!(eps > 0.0 && eps < 1.0 / 3.0))
      fail(ErrorCode::ConfigError, "toy model requires eps in (0, 1/3)");
    if (!(lambda > 0.0 && lambda < 1.0))
      fail(ErrorCode::ConfigError, "toy model requires lambda in (0, 1)");
    if (!(lambda * gamma > 0.0))
      fail(ErrorCode::ConfigError, "toy model requires lambda*gamma > 0");
    if (!(omega > 0.0 && omega < kPi))
      fail(ErrorCode::ConfigError, "toy model requires omega in (0, pi)");
    if (!std::isfinite(mu)) fail(ErrorCode::ConfigError, "non-finite mu");
  }

  // identity parametrization of the unfolding: rho = log|lambda*gamma|
  static ToyModelConfig with_params(const ParamTriple& eps_triple, double eps = 0.2,
                                    double gamma = 3.0) {
    eps_triple.validate();
    ToyModelConfig cfg;
    cfg.eps = eps;
    cfg.gamma = gamma;
    cfg.omega = eps_triple.omega;
    cfg.mu = eps_triple.mu;
    cfg.lambda = std::exp(eps_triple.rho) / gamma;
    cfg.validate();
    return cfg;
  }

  double rho() const { return std::log(std::abs(lambda * gamma)); }

  Vec3 m_minus() const { return Vec3(0.0, 0.0, 2.5); }
  Vec3 m_plus() const { return Vec3(0.0, 2.0, mu); }
};

// chart of the linear part: solid cylinder of radius 3, 0 <= y <= 3
inline bool toy_local_contains(const Vec3& p, double slack = 1e-12) {
  return p[0] * p[0] + p[1] * p[1] <= 9.0 + slack && p[2] >= -slack && p[2] <= 3.0 + slack;
}

// chart of the fold: |y - 2.5| <= 0.5
inline bool toy_global_contains(const Vec3& p, double slack = 1e-12) {
  return std::abs(p[2] - 2.5) <= 0.5 + slack;
}

inline CubicMap3 toy_local_cubic(const ToyModelConfig& cfg) {
  Mat3 l = Mat3::Zero();
  l.topLeftCorner<2, 2>() = cfg.lambda * rotation2(cfg.omega);
  l(2, 2) = cfg.gamma;
  return CubicMap3::affine(l, Vec3::Zero());
}

inline CubicMap3 toy_global_cubic(const ToyModelConfig& cfg) {
  const double ie = 1.0 / cfg.eps;
  CubicMap3 m;
  m.base = Vec3(0.0, 0.0, 2.5);
  Poly3 u = Poly3::variable(2);  // y - 2.5
  m.comp[0] = u * (2.0 * ie) + u * u * (-4.0 * ie * ie);
  m.comp[1] = Poly3::variable(1) * (-cfg.eps) + Poly3::constant(2.0);
  m.comp[2] = Poly3::constant(cfg.mu) + Poly3::variable(0) * cfg.eps + u * u * (4.0 * ie * ie);
  return m;
}

inline MapModel toy_local_model(const ToyModelConfig& cfg) {
  cfg.validate();
  return MapModel::from_cubic(toy_local_cubic(cfg),
                              [](const Vec3& p) { return toy_local_contains(p); });
}

inline MapModel toy_global_model(const ToyModelConfig& cfg) {
  cfg.validate();
  return MapModel::from_cubic(toy_global_cubic(cfg),
                              [](const Vec3& p) { return toy_global_contains(p); });
}

inline StatePoint eval_toy_local(const StatePoint& p, const ToyModelConfig& cfg) {
  cfg.validate();
  if (p.chart != ChartTag::LocalCylinder)
    fail(ErrorCode::DomainError, "eval_toy_local expects a LocalCylinder point");
  if (!p.finite()) fail(ErrorCode::NonFinite, "non-finite state point");
  const double c = std::cos(cfg.omega), s = std::sin(cfg.omega);
  return StatePoint{cfg.lambda * (p.x1 * c - p.x2 * s), cfg.lambda * (p.x1 * s + p.x2 * c),
                    cfg.gamma * p.y, ChartTag::LocalCylinder};
}

inline StatePoint eval_toy_global(const StatePoint& p, const ToyModelConfig& cfg) {
  cfg.validate();
  if (p.chart != ChartTag::GlobalNeighborhood)
    fail(ErrorCode::DomainError, "eval_toy_global expects a GlobalNeighborhood point");
  if (!p.finite()) fail(ErrorCode::NonFinite, "non-finite state point");
  const double ie = 1.0 / cfg.eps;
  const double t = p.y - 2.5;
  return StatePoint{2.0 * ie * t - 4.0 * ie * ie * t * t, -cfg.eps * p.x2 + 2.0,
                    cfg.mu + cfg.eps * p.x1 + 4.0 * ie * ie * t * t,
                    ChartTag::LocalCylinder};
}

// ---------------------------------------------------------------------------
// First-return map: k iterations of the local map followed by one pass of
// the global map.  Orbit containment in the local chart is checked at every
// step.
// ---------------------------------------------------------------------------

struct FirstReturnSpec {
  int k = 1;
  MapModel local;
  MapModel global;
  double delta_dom = 0.5;  // half-width of the return cube around m_plus
  Vec3 m_plus = Vec3::Zero();

  void validate() const {
    if (k < 1) fail(ErrorCode::ConfigError, "first-return map needs k >= 1");
    if (!(delta_dom > 0.0)) fail(ErrorCode::ConfigError, "delta_dom must be positive");
  }
};

inline bool in_return_section(const FirstReturnSpec& spec, const Vec3& p) {
  return (p - spec.m_plus).lpNorm<Eigen::Infinity>() <= spec.delta_dom + 1e-15;
}

inline StatePoint first_return_eval(const FirstReturnSpec& spec, const StatePoint& p) {
  spec.validate();
  if (!p.finite()) fail(ErrorCode::NonFinite, "non-finite state point");
  Vec3 q = p.vec();
  if (!in_return_section(spec, q))
    fail(ErrorCode::NotInSection, "point outside the return section");
  for (int step = 1; step <= spec.k; ++step) {
    q = spec.local.eval(q);
    if (!q.allFinite() || !spec.local.domain(q))
      fail(ErrorCode::LeftChart, "orbit left the local chart at step " + std::to_string(step),
           double(step));
  }
  if (!spec.global.domain(q))
    fail(ErrorCode::LeftChart, "k-step image outside the global chart", double(spec.k));
  Vec3 out = spec.global.eval(q);
  if (!out.allFinite()) fail(ErrorCode::NonFinite, "non-finite global image");
  return StatePoint::from(out, ChartTag::ReturnSection);
}

// Jacobian of the first-return composition by the chain rule along the orbit.
inline Mat3 first_return_jacobian(const FirstReturnSpec& spec, const Vec3& p) {
  Vec3 q = p;
  Mat3 j = Mat3::Identity();
  for (int step = 1; step <= spec.k; ++step) {
    j = (spec.local.jac(q) * j).eval();
    q = spec.local.eval(q);
  }
  return spec.global.jac(q) * j;
}

inline MapModel first_return_model(const FirstReturnSpec& spec, double fd_scale = 1e-3) {
  auto shared = std::make_shared<FirstReturnSpec>(spec);
  MapModel mm;
  mm.eval = [shared](const Vec3& p) {
    Vec3 q = p;
    for (int step = 0; step < shared->k; ++step) q = shared->local.eval(q);
    return shared->global.eval(q);
  };
  mm.jac = [shared](const Vec3& p) { return first_return_jacobian(*shared, p); };
  auto f = mm.eval;
  auto j = mm.jac;
  mm.taylor = [f, j, fd_scale](const Vec3& p) { return jet_fd(f, j, p, fd_scale); };
  mm.domain = [shared](const Vec3& p) { return in_return_section(*shared, p); };
  return mm;
}

// Exact polynomial form of the toy first-return map, expanded about the
// point (0, 0, 2.5 gamma^{-k}) that the fold sends to the tangency.
inline CubicMap3 toy_first_return_cubic(const ToyModelConfig& cfg, int k) {
  cfg.validate();
  if (k < 1) fail(ErrorCode::ConfigError, "first-return map needs k >= 1");
  const double lk = std::pow(cfg.lambda, k);
  const double gk = std::pow(cfg.gamma, k);
  const double ck = std::cos(k * cfg.omega), sk = std::sin(k * cfg.omega);
  const double ie = 1.0 / cfg.eps;

  CubicMap3 m;
  m.base = Vec3(0.0, 0.0, 2.5 / gk);
  Poly3 w0 = Poly3::variable(0), w1 = Poly3::variable(1);
  Poly3 u = Poly3::variable(2) * gk;  // gamma^k (y - base_y)
  Poly3 x1t = (w0 * ck + w1 * (-sk)) * lk;
  Poly3 x2t = (w0 * sk + w1 * ck) * lk;
  m.comp[0] = u * (2.0 * ie) + u * u * (-4.0 * ie * ie);
  m.comp[1] = x2t * (-cfg.eps) + Poly3::constant(2.0);
  m.comp[2] = Poly3::constant(cfg.mu) + x1t * cfg.eps + u * u * (4.0 * ie * ie);
  return m;
}

inline FirstReturnSpec toy_first_return_spec(const ToyModelConfig& cfg, int k,
                                             double delta_dom = 0.5) {
  FirstReturnSpec spec;
  spec.k = k;
  spec.local = toy_local_model(cfg);
  spec.global = toy_global_model(cfg);
  spec.delta_dom = delta_dom;
  spec.m_plus = cfg.m_plus();
  return spec;
}

}  // namespace rmap

#endif  // RETURNMAP_MAPS_HPP

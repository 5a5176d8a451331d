#ifndef RETURNMAP_INVARIANCE_HPP
#define RETURNMAP_INVARIANCE_HPP

#include "returnmap/center.hpp"
#include "returnmap/core.hpp"
#include "returnmap/maps.hpp"

#include <vector>

namespace rmap {

// ---------------------------------------------------------------------------
// Cone fields on the chart box, in (Z, Y, W) coordinates with tangent
// components (z, y, w):
//   SS:  |z| + |y| < K delta_dom |w|          (backward-invariant)
//   CU:  |w| < K ((|Y| + lambda^k) |z| + |gamma|^-k |y|)   (forward-invariant)
// ---------------------------------------------------------------------------

enum class ConeKind { SS, CU };

struct ConeSpec {
  ConeKind kind = ConeKind::SS;
  double K = 1.0;
  double delta_dom = 0.5;
  int k = 1;
  double lambda_pow = 0.0;     // lambda^k
  double gamma_pow_inv = 0.0;  // |gamma|^-k

  void validate() const {
    if (!(K > 0.0)) fail(ErrorCode::ConfigError, "cone aperture K must be positive");
  }
};

// signed membership margin, normalized by the vector's 1-norm
inline double cone_margin(const ConeSpec& cone, const Vec3& base, const Vec3& v) {
  double az = std::abs(v[0]), ay = std::abs(v[1]), aw = std::abs(v[2]);
  double norm = az + ay + aw;
  if (norm == 0.0) return 0.0;
  double lhs, rhs;
  if (cone.kind == ConeKind::SS) {
    lhs = az + ay;
    rhs = cone.K * cone.delta_dom * aw;
  } else {
    lhs = aw;
    rhs = cone.K * ((std::abs(base[1]) + cone.lambda_pow) * az + cone.gamma_pow_inv * ay);
  }
  return (rhs - lhs) / norm;
}

struct Box3 {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  bool contains(const Vec3& p, double slack = 1e-15) const {
    for (int i = 0; i < 3; ++i)
      if (p[i] < lo[i] - slack || p[i] > hi[i] + slack) return false;
    return true;
  }
  Vec3 sample(Rng& rng) const {
    return Vec3(rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]), rng.uniform(lo[2], hi[2]));
  }
  static Box3 cube(double half) { return Box3{-half * Vec3::Ones(), half * Vec3::Ones()}; }
};

struct ConeCheckReport {
  int pairs_checked = 0;
  int violations = 0;
  double worst_margin = 1e300;  // most negative normalized margin seen
};

// draw a unit-ish vector strictly inside the cone at `base`
inline Vec3 sample_cone_vector(const ConeSpec& cone, const Vec3& base, Rng& rng) {
  if (cone.kind == ConeKind::SS) {
    double w = rng.uniform() < 0.5 ? 1.0 : -1.0;
    double budget = cone.K * cone.delta_dom * rng.uniform() * 0.999;
    double split = rng.uniform();
    double z = budget * split * (rng.uniform() < 0.5 ? 1.0 : -1.0);
    double y = budget * (1.0 - split) * (rng.uniform() < 0.5 ? 1.0 : -1.0);
    return Vec3(z, y, w).normalized();
  }
  double z = rng.uniform(-1.0, 1.0);
  double y = rng.uniform(-1.0, 1.0);
  double budget =
      cone.K * ((std::abs(base[1]) + cone.lambda_pow) * std::abs(z) + cone.gamma_pow_inv * std::abs(y));
  double w = budget * rng.uniform() * 0.999 * (rng.uniform() < 0.5 ? 1.0 : -1.0);
  Vec3 v(z, y, w);
  double n = v.norm();
  return n > 0 ? Vec3(v / n) : Vec3(1, 0, 0);
}

// Sampling verification of cone invariance for a map given in chart
// coordinates.  Base points are drawn from `sample_region`; a pair counts
// only when both the point and its image lie in `box`.  SS is checked
// backward (vector at the image, pulled back), CU forward.
inline ConeCheckReport cone_invariance_check(const MapModel& chart_map, const ConeSpec& cone,
                                             const Box3& box, const Box3& sample_region,
                                             int n_samples, std::uint64_t seed) {
  cone.validate();
  ConeCheckReport rep;
  Rng rng(seed);
  const int max_attempts = 200 * n_samples;
  int attempts = 0;
  // deterministic extreme rays are checked along with the random draws
  const Vec3 axes[6] = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0),
                        Vec3(0, -1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)};
  while (rep.pairs_checked < n_samples && attempts < max_attempts) {
    ++attempts;
    Vec3 m = sample_region.sample(rng);
    if (!box.contains(m)) continue;
    Vec3 m_img = chart_map.eval(m);
    if (!m_img.allFinite() || !box.contains(m_img)) continue;
    Mat3 j = chart_map.jac(m);
    Vec3 v;
    double margin;
    if (cone.kind == ConeKind::SS) {
      // vector in the cone at the image, pulled back by the inverse
      if (rep.pairs_checked < 6 && cone_margin(cone, m_img, axes[rep.pairs_checked]) > 0)
        v = axes[rep.pairs_checked];
      else
        v = sample_cone_vector(cone, m_img, rng);
      Vec3 pulled = j.partialPivLu().solve(v);
      margin = cone_margin(cone, m, pulled);
    } else {
      if (rep.pairs_checked < 6 && cone_margin(cone, m, axes[rep.pairs_checked]) > 0)
        v = axes[rep.pairs_checked];
      else
        v = sample_cone_vector(cone, m, rng);
      Vec3 pushed = j * v;
      margin = cone_margin(cone, m_img, pushed);
    }
    ++rep.pairs_checked;
    rep.worst_margin = std::min(rep.worst_margin, margin);
    if (margin < -1e-12) ++rep.violations;
  }
  if (rep.pairs_checked < n_samples)
    fail(ErrorCode::DomainError,
         "could not draw enough admissible (point, image) pairs in the region",
         double(rep.pairs_checked));
  return rep;
}

// smallest power-of-two aperture passing a pilot sample, times safety 2
inline double calibrate_cone_K(const MapModel& chart_map, ConeSpec cone, const Box3& box,
                               const Box3& sample_region, std::uint64_t seed,
                               int pilot = 1000) {
  double k_pass = -1.0;
  for (double K = std::pow(2.0, -40); K <= 4096.0; K *= 2.0) {
    cone.K = K;
    ConeCheckReport rep = cone_invariance_check(chart_map, cone, box, sample_region, pilot, seed);
    if (rep.violations == 0) {
      k_pass = K;
      break;
    }
  }
  if (k_pass < 0.0)
    fail(ErrorCode::DomainError, "no aperture up to 4096 passes the pilot sample");
  return 2.0 * k_pass;
}

// ---------------------------------------------------------------------------
// Area expansion of a planar map on an annulus around its fixed point.
// ---------------------------------------------------------------------------

struct DetExpansionReport {
  double min_det_product = 1e300;  // over samples surviving all iterations
  int survived = 0;
  int left_early = 0;
};

inline DetExpansionReport det_expansion_check(const PlanarTaylorMap& planar, double r_in,
                                              double r_out, int n_iter, int n_samples,
                                              double box_half, std::uint64_t seed) {
  if (!(0.0 < r_in && r_in < r_out)) fail(ErrorCode::ConfigError, "bad annulus radii");
  DetExpansionReport rep;
  Rng rng(seed);
  for (int s = 0; s < n_samples; ++s) {
    double r = r_in + (r_out - r_in) * rng.uniform();
    double phi = rng.uniform(0.0, 2.0 * kPi);
    Vec2 x(r * std::cos(phi), r * std::sin(phi));
    double product = 1.0;
    bool left = false;
    for (int it = 0; it < n_iter; ++it) {
      product *= std::abs(planar.jacobian(x).determinant());
      x = planar.eval(x);
      if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > box_half) {
        left = true;
        break;
      }
    }
    if (left) {
      ++rep.left_early;
    } else {
      ++rep.survived;
      rep.min_det_product = std::min(rep.min_det_product, product);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Growth of the two-dimensional repelling set of a fixed point, tracked as
// the iterated boundary circle of a small seed disk in the center plane.
// ---------------------------------------------------------------------------

struct ManifoldCloud {
  std::vector<Vec3> points;          // all vertices ever produced
  std::vector<int> generation;      // matching generation tags
  std::vector<double> gen_extent;   // per-generation max |Y| of the polyline
  int generations = 0;
  double y_min = 0.0, y_max = 0.0;  // cumulative Y-extent
  bool reached = false;             // hit |Y| >= y_threshold
  bool budget_exhausted = false;
  std::size_t total_points = 0;
};

struct GrowOptions {
  int boundary_points = 96;
  double refine_factor = 3.0;     // split segments stretching past this multiple
  std::size_t point_budget = 1000000;
  int max_generations = 60;
  double y_threshold = 0.0;       // growth target on |Y|; 0 = never reached
};

// `chart_map` acts on (Z, Y, W); `q` is its fixed point; the seed circle is
// laid in the plane spanned by the center pair of the differential at q.
inline ManifoldCloud grow_unstable_set_partial(const MapModel& chart_map, const Vec3& q,
                                               double seed_radius, const Box3& box,
                                               const GrowOptions& opt = {}) {
  ManifoldCloud cloud;
  Mat3 j = chart_map.jac(q);
  // any pair modulus is acceptable here; only the invariant plane is needed
  CenterBasis cb = center_basis(j, 1e300);
  Vec3 e1 = cb.basis.col(0), e2 = cb.basis.col(1);

  struct Node {
    Vec3 src;  // previous-generation point (preimage)
    Vec3 img;  // current point
    bool alive;
  };
  std::vector<Node> ring;
  ring.reserve(std::size_t(opt.boundary_points));
  for (int i = 0; i < opt.boundary_points; ++i) {
    double phi = 2.0 * kPi * i / opt.boundary_points;
    Vec3 p = q + seed_radius * (std::cos(phi) * e1 + std::sin(phi) * e2);
    ring.push_back(Node{p, p, box.contains(p)});
  }
  const double resolution = 2.0 * kPi * seed_radius / opt.boundary_points;

  auto record = [&](const Vec3& p, int gen) {
    cloud.points.push_back(p);
    cloud.generation.push_back(gen);
    cloud.y_min = std::min(cloud.y_min, p[1] - q[1]);
    cloud.y_max = std::max(cloud.y_max, p[1] - q[1]);
    ++cloud.total_points;
    if (opt.y_threshold > 0.0 && std::abs(p[1] - q[1]) >= opt.y_threshold) cloud.reached = true;
  };
  for (const auto& n : ring) record(n.img, 0);
  cloud.gen_extent.push_back(std::max(std::abs(cloud.y_min), std::abs(cloud.y_max)));

  for (int gen = 1; gen <= opt.max_generations && !cloud.reached; ++gen) {
    std::vector<Node> next;
    next.reserve(ring.size());
    for (const auto& n : ring) {
      if (!n.alive) {
        next.push_back(Node{n.src, n.img, false});
        continue;
      }
      Vec3 img = chart_map.eval(n.img);
      bool alive = img.allFinite() && box.contains(img);
      next.push_back(Node{n.img, img, alive});
    }
    // refine: split source segments whose images stretched too far
    bool changed = true;
    int rounds = 0;
    while (changed && rounds < 24) {
      changed = false;
      ++rounds;
      std::vector<Node> refined;
      refined.reserve(next.size() * 2);
      for (std::size_t i = 0; i < next.size(); ++i) {
        const Node& a = next[i];
        const Node& b = next[(i + 1) % next.size()];
        refined.push_back(a);
        if (!a.alive || !b.alive) continue;
        double src_len = (b.src - a.src).norm();
        double img_len = (b.img - a.img).norm();
        if (img_len > opt.refine_factor * std::max(resolution, src_len) &&
            src_len > 1e-14) {
          Vec3 mid_src = 0.5 * (a.src + b.src);
          Vec3 mid_img = chart_map.eval(mid_src);
          bool alive = mid_img.allFinite() && box.contains(mid_img);
          refined.push_back(Node{mid_src, mid_img, alive});
          changed = true;
        }
        if (cloud.total_points + refined.size() > opt.point_budget) {
          cloud.budget_exhausted = true;
          break;
        }
      }
      next.swap(refined);
      if (cloud.budget_exhausted) break;
    }
    ring.swap(next);
    double extent = 0.0;
    for (const auto& n : ring)
      if (n.alive) {
        record(n.img, gen);
        extent = std::max(extent, std::abs(n.img[1] - q[1]));
      }
    cloud.gen_extent.push_back(extent);
    cloud.generations = gen;
    if (cloud.budget_exhausted || cloud.total_points > opt.point_budget) {
      cloud.budget_exhausted = true;
      break;
    }
    int alive = 0;
    for (const auto& n : ring) alive += n.alive;
    if (alive < 3) break;
  }
  return cloud;
}

inline ManifoldCloud grow_unstable_set(const MapModel& chart_map, const Vec3& q,
                                       double seed_radius, const Box3& box,
                                       const GrowOptions& opt = {}) {
  ManifoldCloud cloud = grow_unstable_set_partial(chart_map, q, seed_radius, box, opt);
  if (cloud.budget_exhausted)
    fail(ErrorCode::MeshExplosion, "refinement exceeded the point budget",
         double(cloud.total_points));
  return cloud;
}

// ---------------------------------------------------------------------------
// Distance from a cloud to a stable surface given as a graph Y = g(Z, W).
// A sign change of Y - g along consecutive polyline points is stronger
// evidence than a small distance and is reported separately.
// ---------------------------------------------------------------------------

struct StableDistanceReport {
  double min_distance = 1e300;
  Vec3 cloud_point = Vec3::Zero();
  Vec3 surface_point = Vec3::Zero();
  bool sign_change = false;
};

inline StableDistanceReport stable_manifold_distance(
    const ManifoldCloud& cloud, const std::function<double(double, double)>& stable_graph) {
  if (cloud.points.empty()) fail(ErrorCode::EmptyCloud, "empty manifold cloud");
  StableDistanceReport rep;
  double prev_side = 0.0;
  int prev_gen = -1;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    double g = stable_graph(p[0], p[2]);
    double side = p[1] - g;
    double dist = std::abs(side);
    if (dist < rep.min_distance) {
      rep.min_distance = dist;
      rep.cloud_point = p;
      rep.surface_point = Vec3(p[0], g, p[2]);
    }
    if (i > 0 && cloud.generation[i] == prev_gen && prev_side * side < 0.0)
      rep.sign_change = true;
    prev_side = side;
    prev_gen = cloud.generation[i];
  }
  return rep;
}

}  // namespace rmap

#endif  // RETURNMAP_INVARIANCE_HPP

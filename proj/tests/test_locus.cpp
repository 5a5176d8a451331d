#include "returnmap/center.hpp"
#include "returnmap/locus.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace rmap;

namespace {

const ToyUnfolding kFam;

double phase_omega(int k, double phase) {
  GlobalMapCoefficients co = kFam.coefficients(ParamTriple{0.0, kPi / 6, 0.0});
  return omega_for_phase(co, k, phase, kPi / 6);
}

}  // namespace

TEST_CASE("locus solve produces a unit-product center pair") {
  const int k = 6;
  double omega = phase_omega(k, 1.5 * kPi);
  TraceInterval rep = repelling_interval(kFam, k, omega);
  double t = 0.5 * (rep.t_minus + rep.t_plus);
  NSLocusPoint pt = ns_locus_solve(kFam, k, t, omega);

  CHECK(std::abs(pt.center_product - 1.0) < 1e-10);
  CHECK(std::abs(pt.mults.nu3) < 1.0);
  CHECK(pt.fp.residual < 1e-12);
  CHECK(pt.psi > 0.0);
  CHECK(pt.psi < kPi / 2 - kPi / 20 + 1e-6);

  SECTION("independent recomputation of the multipliers") {
    CubicMap3 tk = kFam.return_map(ParamTriple{pt.mu, omega, pt.rho}, k);
    MultiplierSet ms = multipliers(MapModel::from_cubic(tk), pt.fp.point);
    CHECK(std::abs(std::abs(ms.nu1 * ms.nu2) - 1.0) < 1e-9);
    CHECK(std::abs(ms.nu3) < 1.0);
  }

  SECTION("the vertical placement is satisfied") {
    double y_target = (pt.e_k / (2.0 * pt.coeffs.d)) * std::pow(pt.lambda, k) * t;
    CHECK(pt.y_q == Catch::Approx(y_target).margin(1e-14));
  }

  SECTION("the fixed point survives the stepping evaluation") {
    ToyModelConfig cfg = kFam.config(ParamTriple{pt.mu, omega, pt.rho});
    FirstReturnSpec spec = toy_first_return_spec(cfg, k, 0.5);
    StatePoint img = first_return_eval(spec, StatePoint::from(pt.fp.point,
                                                              ChartTag::ReturnSection));
    CHECK((img.vec() - pt.fp.point).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("locus preconditions") {
  CHECK_THROWS_AS(ns_locus_solve(kFam, 5, 0.5, kPi / 6), Error);  // odd k
  // omega at a window boundary: sin(k w + eta*) near 0
  double w_bad = phase_omega(6, 0.01);
  try {
    ns_locus_solve(kFam, 6, 0.5, w_bad);
    FAIL("expected WindowViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WindowViolation);
  }
  // E_k < 0 side
  double w_neg = phase_omega(6, kPi / 2);
  CHECK_THROWS_AS(ns_locus_solve(kFam, 6, 0.5, w_neg), Error);
}

TEST_CASE("resonance guard fires at the quarter turn") {
  const int k = 6;
  double omega = phase_omega(k, 1.5 * kPi);
  // sigma = 0 is the quarter-turn point; t = 0 lands on it for this family
  NSLocusOptions opt;
  opt.enforce_resonance_guard = false;
  NSLocusPoint pt = ns_locus_solve(kFam, k, 0.0, omega, opt);
  CHECK(std::abs(pt.psi - kPi / 2) < 1e-3);
  CHECK_THROWS_AS(ns_locus_solve(kFam, k, 0.0, omega), Error);
}

TEST_CASE("trace interval brackets the rotation arc") {
  const int k = 6;
  double omega = phase_omega(k, 1.5 * kPi);
  TraceInterval ti = trace_interval(kFam, k, omega);
  CHECK(ti.t_minus < ti.t_plus);

  NSLocusOptions opt;
  opt.enforce_resonance_guard = false;

  SECTION("sigma is monotone increasing across the interval") {
    double prev = -1e300;
    for (int i = 0; i <= 8; ++i) {
      double t = ti.t_minus + (ti.t_plus - ti.t_minus) * i / 8.0;
      double sigma = ns_locus_solve(kFam, k, t, omega, opt).sigma;
      CHECK(sigma > prev);
      prev = sigma;
    }
  }

  SECTION("interior points carry a well-defined angle") {
    double t_mid = 0.5 * (ti.t_minus + ti.t_plus);
    NSLocusPoint pt = ns_locus_solve(kFam, k, t_mid, omega, opt);
    CHECK(pt.psi > 0.0);
    CHECK(pt.psi < kPi);
  }

  SECTION("endpoint multipliers are +1 and -1") {
    // near the double root the multipliers split like sqrt of the trace
    // error, so a 1e-10 trace residual pins them to ~1e-5
    NSLocusOptions tight = opt;
    tight.product_tol = 1e-13;
    NSLocusPoint hi = ns_locus_solve(kFam, k, ti.t_plus, omega, tight);
    CHECK(std::abs(hi.sigma - 2.0) < 1e-9);
    double best_hi = 1e300;
    for (const auto& nu : hi.mults.all()) best_hi = std::min(best_hi, std::abs(nu - Complex(1, 0)));
    CHECK(best_hi < 1e-5);

    NSLocusPoint lo = ns_locus_solve(kFam, k, ti.t_minus, omega, tight);
    CHECK(std::abs(lo.sigma + 2.0) < 1e-9);
    double best_lo = 1e300;
    for (const auto& nu : lo.mults.all())
      best_lo = std::min(best_lo, std::abs(nu - Complex(-1, 0)));
    CHECK(best_lo < 1e-5);
  }
}

TEST_CASE("a too-small domain cube leaves the trace unbracketed") {
  ToyUnfolding tiny;
  tiny.delta_dom = 1e-9;  // the placement clip kicks in before sigma reaches 2
  double omega = phase_omega(6, 1.5 * kPi);
  try {
    trace_interval(tiny, 6, omega);
    FAIL("expected NotBracketed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotBracketed);
  }
}

TEST_CASE("repelling window starts at the guarded angle") {
  const int k = 6;
  double omega = phase_omega(k, 1.5 * kPi);
  TraceInterval rep = repelling_interval(kFam, k, omega);
  NSLocusOptions opt;
  opt.enforce_resonance_guard = false;
  NSLocusPoint at_edge = ns_locus_solve(kFam, k, rep.t_minus, omega, opt);
  CHECK(at_edge.psi == Catch::Approx(kPi / 2 - kPi / 20).margin(1e-7));
}

TEST_CASE("k rho_k stays of unit size across k") {
  std::vector<double> k_rho;
  for (int k : {6, 8, 10}) {
    double omega = phase_omega(k, 1.5 * kPi);
    TraceInterval rep = repelling_interval(kFam, k, omega);
    double t = 0.5 * (rep.t_minus + rep.t_plus);
    NSLocusPoint pt = ns_locus_solve(kFam, k, t, omega);
    k_rho.push_back(std::abs(pt.rho) * k);
  }
  double lo = *std::min_element(k_rho.begin(), k_rho.end());
  double hi = *std::max_element(k_rho.begin(), k_rho.end());
  CHECK(hi / lo < 4.0);
  // the family satisfies the expanding condition, so rho stays negative on
  // the exclusion window
  for (int k : {6, 8, 10}) {
    double omega = phase_omega(k, 1.5 * kPi);
    GlobalMapCoefficients co = kFam.coefficients(ParamTriple{0.0, omega, 0.0});
    OmegaWindow ex = make_omega_window(WindowKind::Ex, k, co);
    REQUIRE(omega_window_contains(ex, omega));
    TraceInterval rep = repelling_interval(kFam, k, omega);
    for (double frac : {0.2, 0.5, 0.8}) {
      double t = rep.t_minus + frac * (rep.t_plus - rep.t_minus);
      CHECK(ns_locus_solve(kFam, k, t, omega).rho < 0.0);
    }
  }
}

TEST_CASE("the report pipeline at a solved point") {
  const int k = 6;
  double omega = phase_omega(k, 1.5 * kPi);
  TraceInterval rep = repelling_interval(kFam, k, omega);
  double t = 0.5 * (rep.t_minus + rep.t_plus);
  NSLocusPoint pt = ns_locus_solve(kFam, k, t, omega);
  CubicMap3 tk = kFam.return_map(ParamTriple{pt.mu, omega, pt.rho}, k);
  NSReport repn = ns_report(MapModel::from_cubic(tk), pt.fp.point);
  CHECK(repn.verdict == NSVerdict::WeaklyRepelling);
  CHECK(repn.lc < 0.0);
  // the normalized value approaches the reference curve at rate lambda^k
  double lk = std::pow(pt.lambda, k);
  CHECK(std::abs(repn.lc - reference_curve(pt.psi)) < 5.0 * lk);
}

TEST_CASE("chart at a solved point") {
  const int k = 6;
  double omega = phase_omega(k, 1.5 * kPi - 0.4);
  TraceInterval rep = repelling_interval(kFam, k, omega);
  double t = 0.5 * (rep.t_minus + rep.t_plus);
  NSLocusPoint pt = ns_locus_solve(kFam, k, t, omega);
  ReturnChart ch = locus_chart(kFam, pt);

  SECTION("round trip") {
    Rng rng(8);
    for (int i = 0; i < 30; ++i) {
      Vec3 q = rng.cube(0.2);
      CHECK((ch.to_chart(ch.from_chart(q)) - q).lpNorm<Eigen::Infinity>() < 1e-10);
    }
  }

  SECTION("the conjugated map has the expected differential structure") {
    CubicMap3 tk = kFam.return_map(ParamTriple{pt.mu, omega, pt.rho}, k);
    CubicMap3 tkc = ch.conjugate(tk);
    Vec3 q = ch.to_chart(pt.fp.point);
    CHECK((tkc(q) - q).lpNorm<Eigen::Infinity>() < 1e-11);
    CHECK(q[1] == Catch::Approx((pt.e_k / (2.0 * pt.coeffs.d)) *
                                std::pow(pt.lambda, k) * t)
                      .margin(1e-12));
    Mat3 j = tkc.jacobian(q);
    double lk = std::pow(pt.lambda, k);
    // z-row: (O(lambda^k), -E_k + small, O(lambda^k))
    CHECK(std::abs(j(0, 0)) < 10.0 * lk);
    CHECK(j(0, 1) == Catch::Approx(-pt.e_k).epsilon(0.05));
    CHECK(std::abs(j(0, 2)) < 10.0 * lk);
    // y-row: (e^{k rho} + small, E_k e^{k rho} t + small, tiny)
    CHECK(j(1, 0) == Catch::Approx(std::exp(k * pt.rho)).epsilon(0.05));
    CHECK(j(1, 1) == Catch::Approx(pt.e_k * std::exp(k * pt.rho) * t).epsilon(0.1));
    // w-row is uniformly small
    for (int c = 0; c < 3; ++c) CHECK(std::abs(j(2, c)) < 10.0 * lk);
  }

  SECTION("conjugated model matches the affine transport of the raw map") {
    CubicMap3 tk = kFam.return_map(ParamTriple{pt.mu, omega, pt.rho}, k);
    CubicMap3 tkc = ch.conjugate(tk);
    MapModel wrapped = ch.conjugate_model(MapModel::from_cubic(tk));
    Rng rng(21);
    for (int i = 0; i < 20; ++i) {
      Vec3 q = ch.to_chart(pt.fp.point) + 1e-3 * rng.cube(1.0);
      Vec3 direct = ch.to_chart(tk(ch.from_chart(q)));
      CHECK((tkc(q) - direct).lpNorm<Eigen::Infinity>() <
            1e-10 * std::max(1.0, direct.lpNorm<Eigen::Infinity>()));
      CHECK((wrapped.eval(q) - direct).lpNorm<Eigen::Infinity>() <
            1e-10 * std::max(1.0, direct.lpNorm<Eigen::Infinity>()));
      CHECK((wrapped.jac(q) - tkc.jacobian(q)).lpNorm<Eigen::Infinity>() <
            1e-8 * std::max(1.0, tkc.jacobian(q).lpNorm<Eigen::Infinity>()));
    }
  }
}

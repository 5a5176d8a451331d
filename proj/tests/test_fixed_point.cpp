#include "returnmap/fixed_point.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace rmap;

TEST_CASE("Newton finds the origin of the toy local map") {
  MapModel local = toy_local_model(ToyModelConfig{});
  FixedPointResult fp = newton_fixed_point(local, Vec3(0.1, -0.1, 0.05));
  CHECK(fp.point.lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(fp.residual < 1e-12);
}

TEST_CASE("Newton refines a grid-scan seed on the first-return map") {
  ToyModelConfig cfg;
  cfg.mu = 0.0034;
  const int k = 6;
  CubicMap3 tk = toy_first_return_cubic(cfg, k);
  MapModel model = MapModel::from_cubic(tk);

  // coarse scan of the return cube for the smallest displacement
  Vec3 best = Vec3::Zero();
  double best_res = 1e300;
  const double gk = std::pow(3.0, k);
  for (int i = 0; i <= 12; ++i)
    for (int j = 0; j <= 12; ++j)
      for (int l = 0; l <= 12; ++l) {
        Vec3 p(-0.3 + 0.05 * i, 1.7 + 0.05 * j, (1.5 + l * 0.2) / gk);
        double r = (model.eval(p) - p).lpNorm<Eigen::Infinity>();
        if (r < best_res) {
          best_res = r;
          best = p;
        }
      }
  FixedPointResult fp = newton_fixed_point(model, best, NewtonOptions{1e-11, 60, 0.5});
  CHECK(fp.residual < 1e-10);
  CHECK(std::abs(fp.point[0]) < 0.5);
  CHECK(std::abs(fp.point[1] - 2.0) < 0.5);
  CHECK(fp.point[2] > 0.0);
}

TEST_CASE("Newton reports failure from a hopeless guess") {
  ToyModelConfig cfg;
  CubicMap3 tk = toy_first_return_cubic(cfg, 6);
  MapModel model = MapModel::from_cubic(tk);
  NewtonOptions opt;
  opt.max_iter = 8;
  CHECK_THROWS_AS(newton_fixed_point(model, Vec3(3.0, -3.0, 2.9), opt), Error);
}

TEST_CASE("multipliers of the toy saddle") {
  ToyModelConfig cfg;
  MapModel local = toy_local_model(cfg);
  MultiplierSet ms = multipliers(local, Vec3::Zero());
  Complex expected = cfg.lambda * Complex(std::cos(cfg.omega), std::sin(cfg.omega));
  CHECK(std::abs(ms.nu1 - expected) < 1e-12);
  CHECK(std::abs(ms.nu2 - std::conj(expected)) < 1e-12);
  CHECK(std::abs(ms.nu3 - Complex(3.0, 0.0)) < 1e-12);
  CHECK(ms.nu2 == std::conj(ms.nu1));
}

TEST_CASE("multipliers satisfy the characteristic equation") {
  Rng rng(61);
  for (int trial = 0; trial < 40; ++trial) {
    Mat3 a;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) = rng.uniform(-2, 2);
    MapModel lin = MapModel::from_cubic(CubicMap3::affine(a, Vec3::Zero()));
    MultiplierSet ms = multipliers(lin, Vec3::Zero());
    double bound = 1e-8 * std::pow(a.lpNorm<Eigen::Infinity>(), 3.0);
    for (const auto& nu : ms.all()) {
      Eigen::Matrix3cd shifted = a.cast<Complex>() - nu * Eigen::Matrix3cd::Identity();
      CHECK(std::abs(shifted.determinant()) < std::max(bound, 1e-12));
    }
  }
}

TEST_CASE("multipliers of simple linear maps") {
  MapModel ident = MapModel::from_cubic(CubicMap3::identity());
  MultiplierSet mi = multipliers(ident, Vec3(0.3, 0.1, -0.2));
  for (const auto& nu : mi.all()) CHECK(std::abs(nu - Complex(1, 0)) < 1e-12);

  Mat3 d = Vec3(0.5, 0.5, 2.0).asDiagonal();
  MapModel diag = MapModel::from_cubic(CubicMap3::affine(d, Vec3::Zero()));
  MultiplierSet md = multipliers(diag, Vec3::Zero());
  CHECK(std::abs(md.nu1 - Complex(0.5, 0)) < 1e-12);
  CHECK(std::abs(md.nu2 - Complex(0.5, 0)) < 1e-12);
  CHECK(std::abs(md.nu3 - Complex(2.0, 0)) < 1e-12);
}

TEST_CASE("multipliers demand an actual fixed point") {
  MapModel local = toy_local_model(ToyModelConfig{});
  CHECK_THROWS_AS(multipliers(local, Vec3(1.0, 0.0, 0.5)), Error);
}

TEST_CASE("rho_value") {
  CHECK(rho_value(1.0 / 3.0, 3.0) == 0.0);
  CHECK(rho_value(0.25, 2.0) == Catch::Approx(std::log(0.5)).margin(1e-15));
  CHECK(rho_value(1.0, 1.0) == 0.0);
  CHECK_THROWS_AS(rho_value(-0.1, 2.0), Error);
  CHECK_THROWS_AS(rho_value(0.5, 0.0), Error);
}

TEST_CASE("classification of hyperbolic spectra") {
  Complex pair = (1.0 / 3.0) * Complex(std::cos(kPi / 6), std::sin(kPi / 6));
  MultiplierSet focus_saddle{pair, std::conj(pair), 3.0, std::nullopt};
  TangencyClass fc = classify(focus_saddle);
  CHECK(fc.tag == TangencyTag::FocusSaddle21);
  CHECK(fc.product == Catch::Approx(1.0).margin(1e-14));

  MultiplierSet saddle{0.5, 0.3, 2.0, std::nullopt};
  TangencyClass sd = classify(saddle);
  CHECK(sd.tag == TangencyTag::Saddle11);
  CHECK(sd.product == Catch::Approx(1.0).margin(1e-14));

  Complex out_pair = 2.0 * Complex(std::cos(0.7), std::sin(0.7));
  MultiplierSet saddle_focus{out_pair, std::conj(out_pair), 0.4, std::nullopt};
  CHECK(classify(saddle_focus).tag == TangencyTag::SaddleFocus12);

  SECTION("permutation invariance") {
    MultiplierSet shuffled{3.0, pair, std::conj(pair), std::nullopt};
    TangencyClass fc2 = classify(shuffled);
    CHECK(fc2.tag == fc.tag);
    CHECK(fc2.product == Catch::Approx(fc.product).margin(1e-15));
    MultiplierSet shuffled2{2.0, 0.5, 0.3, std::nullopt};
    CHECK(classify(shuffled2).tag == TangencyTag::Saddle11);
  }

  SECTION("unit-circle multipliers are ambiguous") {
    MultiplierSet on_circle{Complex(std::cos(0.4), std::sin(0.4)),
                            Complex(std::cos(0.4), -std::sin(0.4)), 0.5, std::nullopt};
    CHECK_THROWS_AS(classify(on_circle), Error);
  }

  SECTION("all multipliers on one side is rejected") {
    MultiplierSet contracting{0.1, 0.2, 0.3, std::nullopt};
    CHECK_THROWS_AS(classify(contracting), Error);
  }
}

TEST_CASE("rotation angle from the trace") {
  PsiResult r0 = psi_of_trace(0.0);
  CHECK(r0.psi == Catch::Approx(kPi / 2).margin(1e-15));
  CHECK(r0.resonance_flag);

  PsiResult r1 = psi_of_trace(1.0);
  CHECK(r1.psi == Catch::Approx(kPi / 3).margin(1e-15));
  CHECK_FALSE(r1.resonance_flag);

  PsiResult r2 = psi_of_trace(2.0 * std::cos(2.0 * kPi / 3.0));
  CHECK(r2.psi == Catch::Approx(2.0 * kPi / 3.0).margin(1e-12));
  CHECK(r2.resonance_flag);

  CHECK_THROWS_AS(psi_of_trace(2.0), Error);
  CHECK_THROWS_AS(psi_of_trace(-2.5), Error);
}

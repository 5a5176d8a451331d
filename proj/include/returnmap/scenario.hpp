#ifndef RETURNMAP_SCENARIO_HPP
#define RETURNMAP_SCENARIO_HPP

#include "returnmap/center.hpp"
#include "returnmap/contraction.hpp"
#include "returnmap/core.hpp"
#include "returnmap/invariance.hpp"
#include "returnmap/locus.hpp"
#include "returnmap/tangency.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace rmap {

using Json = nlohmann::json;

// exit codes shared by every subcommand
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitResonance = 3;
inline constexpr int kExitBudget = 4;

// shortest-round-trip style decimal with 17 significant digits
inline std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Scenario document.  A single JSON object with fixed top-level keys;
// unknown keys anywhere are configuration errors.
// ---------------------------------------------------------------------------

enum class ScenarioModel { Toy, NormalFormTest, UserCoefficients };

struct Scenario {
  ScenarioModel model = ScenarioModel::Toy;

  // params
  double eps = 0.2;
  double gamma = 3.0;
  double omega = kPi / 6.0;
  double mu = 0.0;
  double rho = 0.0;
  double delta_dom = 0.5;
  // normal-form test model
  double nf_psi = kPi / 3.0;
  double nf_nu3 = 0.2;
  double nf_lc = -1.0;

  // sweep
  std::vector<int> ks = {6};
  int t_count = 1;
  bool repelling_window = true;  // sweep t over the weakly repelling range
  std::vector<double> omega_phases = {1.5 * kPi};  // target phases of sin(k w + eta*)
  bool omega_explicit = false;   // use `omega` verbatim instead of the phases

  // solver
  NSLocusOptions locus;

  // manifold
  int manifold_k = 6;
  double manifold_t_frac = 0.5;
  double seed_radius = 2e-4;
  int max_generations = 60;
  std::size_t point_budget = 1000000;
  int boundary_points = 96;
  double y_threshold_scale = 1.0;  // multiplies (delta_dom')^2
  std::optional<double> stable_y;  // constant stable graph Y = stable_y

  // lc command
  std::optional<double> lc_psi;
  std::array<Complex, 7> lc_coeffs{};

  // solve-implicit
  Json implicit_spec;

  std::uint64_t seed = 1;
  std::string out_csv;
  std::string out_json;
};

namespace detail {

inline void require_keys(const Json& j, const char* where,
                         std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, std::string(where) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) ok = true;
    if (!ok)
      fail(ErrorCode::ConfigError, "unknown key '" + it.key() + "' in " + where);
  }
}

inline double num(const Json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) fail(ErrorCode::ConfigError, std::string(key) + " must be a number");
  return j[key].get<double>();
}

inline Complex cplx(const Json& j, const char* key) {
  if (!j.contains(key)) return Complex(0, 0);
  const Json& v = j[key];
  if (v.is_number()) return Complex(v.get<double>(), 0.0);
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return Complex(v[0].get<double>(), v[1].get<double>());
  fail(ErrorCode::ConfigError, std::string(key) + " must be a number or [re, im]");
}

}  // namespace detail

inline Scenario parse_scenario(const Json& doc) {
  detail::require_keys(doc, "scenario",
                       {"model", "params", "sweep", "solver", "manifold", "lc", "implicit",
                        "output", "seed"});
  Scenario sc;
  if (doc.contains("model")) {
    std::string m = doc["model"].get<std::string>();
    if (m == "toy")
      sc.model = ScenarioModel::Toy;
    else if (m == "normal_form_test")
      sc.model = ScenarioModel::NormalFormTest;
    else if (m == "user_coefficients")
      sc.model = ScenarioModel::UserCoefficients;
    else
      fail(ErrorCode::ConfigError, "unknown model '" + m + "'");
  }
  if (doc.contains("params")) {
    const Json& p = doc["params"];
    detail::require_keys(p, "params",
                         {"eps", "gamma", "omega", "mu", "rho", "delta_dom", "psi", "nu3", "lc"});
    sc.eps = detail::num(p, "eps", sc.eps);
    sc.gamma = detail::num(p, "gamma", sc.gamma);
    sc.omega = detail::num(p, "omega", sc.omega);
    sc.mu = detail::num(p, "mu", sc.mu);
    sc.rho = detail::num(p, "rho", sc.rho);
    sc.delta_dom = detail::num(p, "delta_dom", sc.delta_dom);
    sc.nf_psi = detail::num(p, "psi", sc.nf_psi);
    sc.nf_nu3 = detail::num(p, "nu3", sc.nf_nu3);
    sc.nf_lc = detail::num(p, "lc", sc.nf_lc);
  }
  if (doc.contains("sweep")) {
    const Json& s = doc["sweep"];
    detail::require_keys(s, "sweep", {"k", "t_count", "t_window", "omega_phase", "omega"});
    if (s.contains("k")) {
      sc.ks.clear();
      if (s["k"].is_array())
        for (const auto& v : s["k"]) sc.ks.push_back(v.get<int>());
      else
        sc.ks.push_back(s["k"].get<int>());
    }
    if (s.contains("t_count")) sc.t_count = s["t_count"].get<int>();
    if (s.contains("t_window")) {
      std::string w = s["t_window"].get<std::string>();
      if (w == "repelling")
        sc.repelling_window = true;
      else if (w == "trace")
        sc.repelling_window = false;
      else
        fail(ErrorCode::ConfigError, "t_window must be 'repelling' or 'trace'");
    }
    if (s.contains("omega_phase")) {
      sc.omega_phases.clear();
      if (s["omega_phase"].is_array())
        for (const auto& v : s["omega_phase"]) sc.omega_phases.push_back(v.get<double>());
      else
        sc.omega_phases.push_back(s["omega_phase"].get<double>());
    }
    if (s.contains("omega")) {
      sc.omega = s["omega"].get<double>();
      sc.omega_explicit = true;
    }
  }
  if (doc.contains("solver")) {
    const Json& s = doc["solver"];
    detail::require_keys(s, "solver", {"newton_tol", "max_iter", "product_tol", "placement_tol"});
    sc.locus.newton.tol = detail::num(s, "newton_tol", sc.locus.newton.tol);
    sc.locus.newton.max_iter = int(detail::num(s, "max_iter", sc.locus.newton.max_iter));
    sc.locus.product_tol = detail::num(s, "product_tol", sc.locus.product_tol);
    sc.locus.placement_tol = detail::num(s, "placement_tol", sc.locus.placement_tol);
  }
  if (doc.contains("manifold")) {
    const Json& m = doc["manifold"];
    detail::require_keys(m, "manifold",
                         {"k", "t_frac", "seed_radius", "max_generations", "point_budget",
                          "boundary_points", "y_threshold_scale", "stable_y"});
    sc.manifold_k = int(detail::num(m, "k", sc.manifold_k));
    sc.manifold_t_frac = detail::num(m, "t_frac", sc.manifold_t_frac);
    sc.seed_radius = detail::num(m, "seed_radius", sc.seed_radius);
    sc.max_generations = int(detail::num(m, "max_generations", sc.max_generations));
    sc.point_budget = std::size_t(detail::num(m, "point_budget", double(sc.point_budget)));
    sc.boundary_points = int(detail::num(m, "boundary_points", sc.boundary_points));
    sc.y_threshold_scale = detail::num(m, "y_threshold_scale", sc.y_threshold_scale);
    if (m.contains("stable_y")) sc.stable_y = m["stable_y"].get<double>();
  }
  if (doc.contains("lc")) {
    const Json& l = doc["lc"];
    detail::require_keys(l, "lc", {"psi", "z20", "z11", "z02", "z30", "z21", "z12", "z03"});
    sc.lc_psi = detail::num(l, "psi", kPi / 3.0);
    const char* names[7] = {"z20", "z11", "z02", "z30", "z21", "z12", "z03"};
    const int slots[7] = {planar_pq_index(2, 0), planar_pq_index(1, 1), planar_pq_index(0, 2),
                          planar_pq_index(3, 0), planar_pq_index(2, 1), planar_pq_index(1, 2),
                          planar_pq_index(0, 3)};
    for (int i = 0; i < 7; ++i) sc.lc_coeffs[slots[i]] = detail::cplx(l, names[i]);
  }
  if (doc.contains("implicit")) sc.implicit_spec = doc["implicit"];
  if (doc.contains("output")) {
    const Json& o = doc["output"];
    detail::require_keys(o, "output", {"csv", "json"});
    if (o.contains("csv")) sc.out_csv = o["csv"].get<std::string>();
    if (o.contains("json")) sc.out_json = o["json"].get<std::string>();
  }
  if (doc.contains("seed")) sc.seed = doc["seed"].get<std::uint64_t>();
  return sc;
}

// ---------------------------------------------------------------------------
// toy-verify: golden checks of the explicit model.
// ---------------------------------------------------------------------------

struct CheckLine {
  std::string name;
  bool pass;
  double value;
  double expected;
  double tol;
};

struct ToyVerifyResult {
  std::vector<CheckLine> checks;
  bool all_pass = true;

  Json to_json() const {
    Json out;
    out["checks"] = Json::array();
    for (const auto& c : checks) {
      Json line;
      line["name"] = c.name;
      line["pass"] = c.pass;
      line["value"] = c.value;
      line["expected"] = c.expected;
      line["tol"] = c.tol;
      out["checks"].push_back(line);
    }
    out["all_pass"] = all_pass;
    return out;
  }
};

inline ToyVerifyResult run_toy_verify(const Scenario& sc) {
  if (sc.model != ScenarioModel::Toy)
    fail(ErrorCode::ConfigError, "toy-verify requires model = toy");
  ToyModelConfig cfg;
  cfg.eps = sc.eps;
  cfg.gamma = sc.gamma;
  cfg.omega = sc.omega;
  cfg.mu = sc.mu;
  cfg.lambda = std::exp(sc.rho) / sc.gamma;
  cfg.validate();

  ToyVerifyResult res;
  auto check = [&](const std::string& name, double value, double expected, double tol) {
    bool pass = std::abs(value - expected) <= tol;
    res.checks.push_back(CheckLine{name, pass, value, expected, tol});
    res.all_pass = res.all_pass && pass;
  };

  MapModel local = toy_local_model(cfg);
  MultiplierSet ms = multipliers(local, Vec3::Zero());
  Complex expect1 = cfg.lambda * Complex(std::cos(cfg.omega), std::sin(cfg.omega));
  check("multiplier_pair_re", ms.nu1.real(), expect1.real(), 1e-12);
  check("multiplier_pair_im", std::abs(ms.nu1.imag()), std::abs(expect1.imag()), 1e-12);
  check("multiplier_real", ms.nu3.real(), cfg.gamma, 1e-12);
  check("rho", rho_value(std::abs(ms.nu1), std::abs(ms.nu3)), sc.rho, 1e-14);

  MapModel global = toy_global_model(cfg);
  GlobalMapCoefficients co = extract_global_coefficients(global, cfg.m_minus(), cfg.m_plus());
  check("expanding_quantity", expanding_quantity(co), 2.0, 1e-10);
  check("expanding_condition", check_EC(co) ? 1.0 : 0.0, 1.0, 0.0);

  // tangency of the image of the vertical unstable segment with {y = 0}
  auto curve = [&](double t) {
    StatePoint p{0.0, 0.0, 2.5 + t, ChartTag::GlobalNeighborhood};
    return eval_toy_global(p, cfg);
  };
  TangencyCertificate cert = quadratic_tangency_find(curve, 2, {-0.4, 0.4});
  check("tangency_t_star", cert.t_star, 0.0, 1e-8);
  check("tangency_point_x1", cert.point.x1, 0.0, 1e-8);
  check("tangency_point_x2", cert.point.x2, 2.0, 1e-8);
  check("tangency_point_y", cert.point.y, sc.mu, 1e-8);
  check("tangency_d_coeff", cert.d_coeff, 4.0 / (cfg.eps * cfg.eps), 1e-6);
  return res;
}

// ---------------------------------------------------------------------------
// ns-scan: sweep (k, t, omega) grid, one CSV row per point.
// ---------------------------------------------------------------------------

struct SweepRow {
  int k = 0;
  double t = 0, omega = 0, mu = 0, rho = 0, psi = 0;
  double nu1_re = 0, nu1_im = 0, nu3 = 0, lc = 0;
  std::string verdict;
  double e_k = 0, e_quantity = 0;
  std::string flags;
};

inline std::string sweep_csv_header() {
  return "k,t,omega,mu,rho,psi,nu1_re,nu1_im,nu3,lc,verdict,e_k,E_quantity,flags";
}

inline std::string sweep_csv_row(const SweepRow& r) {
  std::ostringstream os;
  os << r.k << ',' << format_double(r.t) << ',' << format_double(r.omega) << ','
     << format_double(r.mu) << ',' << format_double(r.rho) << ',' << format_double(r.psi) << ','
     << format_double(r.nu1_re) << ',' << format_double(r.nu1_im) << ','
     << format_double(r.nu3) << ',' << format_double(r.lc) << ',' << r.verdict << ','
     << format_double(r.e_k) << ',' << format_double(r.e_quantity) << ',' << r.flags;
  return os.str();
}

inline const char* flag_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ResonanceGuard: return "resonance";
    case ErrorCode::WindowViolation: return "window";
    case ErrorCode::NoConvergence: return "no_convergence";
    case ErrorCode::NoFixedPoint: return "no_fixed_point";
    default: return "error";
  }
}

struct NsScanResult {
  std::vector<SweepRow> rows;
  std::string csv;
};

inline NsScanResult run_ns_scan(const Scenario& sc, int jobs = 1) {
  if (sc.model != ScenarioModel::Toy)
    fail(ErrorCode::ConfigError, "ns-scan requires model = toy");
  if (sc.t_count < 1) fail(ErrorCode::ConfigError, "t_count must be >= 1");
  ToyUnfolding family{sc.eps, sc.gamma, sc.delta_dom};

  struct Task {
    int k;
    double omega;
    double t;
    std::string flags;  // pre-run failure, e.g. a window violation
  };
  std::vector<Task> tasks;
  std::vector<double> phases = sc.omega_explicit ? std::vector<double>{0.0} : sc.omega_phases;
  for (int k : sc.ks) {
    for (double phase : phases) {
      double omega = sc.omega;
      if (!sc.omega_explicit) {
        GlobalMapCoefficients co = family.coefficients(ParamTriple{0.0, sc.omega, 0.0});
        omega = omega_for_phase(co, k, phase, sc.omega);
      }
      // the t-window is shared by every row of this (k, omega)
      std::string flags;
      TraceInterval window{0.0, 0.0};
      try {
        window = sc.repelling_window ? repelling_interval(family, k, omega, sc.locus)
                                     : trace_interval(family, k, omega, sc.locus);
      } catch (const Error& e) {
        flags = flag_for(e.code());
      }
      for (int i = 0; i < sc.t_count; ++i) {
        double frac = (i + 0.5) / sc.t_count;
        tasks.push_back(
            Task{k, omega, window.t_minus + frac * (window.t_plus - window.t_minus), flags});
      }
    }
  }

  std::vector<SweepRow> rows(tasks.size());
  auto run_task = [&](std::size_t idx) {
    const Task& task = tasks[idx];
    SweepRow row;
    row.k = task.k;
    row.omega = task.omega;
    row.t = task.t;
    if (!task.flags.empty()) {
      row.flags = task.flags;
      row.verdict = "failed";
      row.lc = std::numeric_limits<double>::quiet_NaN();
      rows[idx] = row;
      return;
    }
    try {
      GlobalMapCoefficients co0 = family.coefficients(ParamTriple{0.0, task.omega, 0.0});
      row.e_quantity = expanding_quantity(co0);
      NSLocusOptions opt = sc.locus;
      opt.enforce_resonance_guard = false;
      NSLocusPoint pt = ns_locus_solve(family, task.k, row.t, task.omega, opt);
      row.mu = pt.mu;
      row.rho = pt.rho;
      row.psi = pt.psi;
      row.nu1_re = pt.mults.nu1.real();
      row.nu1_im = pt.mults.nu1.imag();
      row.nu3 = std::abs(pt.mults.nu3);
      row.e_k = pt.e_k;
      if (near_strong_resonance(pt.psi)) {
        row.flags = "resonance";
        row.verdict = "skipped";
        row.lc = std::numeric_limits<double>::quiet_NaN();
      } else {
        CubicMap3 tk = family.return_map(ParamTriple{pt.mu, task.omega, pt.rho}, task.k);
        NSReport rep = ns_report(MapModel::from_cubic(tk), pt.fp.point);
        row.lc = rep.lc;
        row.verdict = to_string(rep.verdict);
        if (rep.resonance_flag) row.flags = "near_resonance";
      }
    } catch (const Error& e) {
      row.flags = flag_for(e.code());
      row.verdict = "failed";
      row.lc = std::numeric_limits<double>::quiet_NaN();
    }
    rows[idx] = row;
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
          run_task(i);
      });
    for (auto& th : pool) th.join();
  }

  NsScanResult out;
  out.rows = std::move(rows);
  std::ostringstream os;
  os << sweep_csv_header() << '\n';
  for (const auto& r : out.rows) os << sweep_csv_row(r) << '\n';
  out.csv = os.str();
  return out;
}

// ---------------------------------------------------------------------------
// lc: one evaluation from explicit complex coefficients.
// ---------------------------------------------------------------------------

inline Json run_lc(const Scenario& sc) {
  if (!sc.lc_psi) fail(ErrorCode::ConfigError, "lc command needs an 'lc' section with psi");
  ComplexTaylorMap cm;
  cm.nu = Complex(std::cos(*sc.lc_psi), std::sin(*sc.lc_psi));
  cm.z = sc.lc_coeffs;
  Complex alpha = kill_quadratic(cm);  // throws ResonanceGuard near pi/2, 2pi/3
  Complex alpha_dyn = alpha + inverse_cubic_correction(cm);
  Json out;
  out["psi"] = *sc.lc_psi;
  out["alpha"] = {alpha.real(), alpha.imag()};
  out["alpha_dynamic"] = {alpha_dyn.real(), alpha_dyn.imag()};
  out["lc"] = lyapunov_coefficient(cm);
  out["lc_dynamic"] = lyapunov_coefficient_dynamic(cm);
  out["condition"] = lyapunov_condition(cm);
  return out;
}

// ---------------------------------------------------------------------------
// manifold: grow the repelling set at a solved point (or a synthetic control)
// and report the vertical extent and stable-surface evidence.
// ---------------------------------------------------------------------------

struct ManifoldRunResult {
  ManifoldCloud cloud;
  Json summary;
  double y_threshold = 0.0;
};

inline std::string cloud_csv(const ManifoldCloud& cloud) {
  std::ostringstream os;
  os << "generation,Z,Y,W\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    os << cloud.generation[i] << ',' << format_double(p[0]) << ',' << format_double(p[1]) << ','
       << format_double(p[2]) << '\n';
  }
  return os.str();
}

inline CubicMap3 normal_form_test_map(double psi, double nu3, double lc) {
  // planar normal form w -> nu w + alpha w^2 wbar with LC = lc, stacked over
  // a contracting third coordinate
  Complex nu(std::cos(psi), std::sin(psi));
  Complex alpha = -lc * nu;
  ComplexTaylorMap cm;
  cm.nu = nu;
  cm.z[planar_pq_index(2, 1)] = alpha;
  PlanarTaylorMap pm = planar_from_complex(cm);
  CubicMap3 m;
  Mat3 lin = Mat3::Zero();
  lin.topLeftCorner<2, 2>() = rotation2(psi);
  lin(2, 2) = nu3;
  m = CubicMap3::affine(lin, Vec3::Zero());
  for (int i = 0; i < 7; ++i) {
    int p = kPlanarPQ[i][0], q = kPlanarPQ[i][1];
    Poly3 mono = Poly3::constant(1.0);
    for (int r = 0; r < p; ++r) mono = mono * Poly3::variable(0);
    for (int r = 0; r < q; ++r) mono = mono * Poly3::variable(1);
    m.comp[0] = m.comp[0] + mono * pm.u[i];
    m.comp[1] = m.comp[1] + mono * pm.v[i];
  }
  return m;
}

inline ManifoldRunResult run_manifold(const Scenario& sc) {
  ManifoldRunResult out;
  GrowOptions gopt;
  gopt.boundary_points = sc.boundary_points;
  gopt.point_budget = sc.point_budget;
  gopt.max_generations = sc.max_generations;

  MapModel chart_map;
  Vec3 q;
  Box3 box;
  if (sc.model == ScenarioModel::Toy) {
    ToyUnfolding family{sc.eps, sc.gamma, sc.delta_dom};
    double omega = sc.omega;
    if (!sc.omega_explicit) {
      GlobalMapCoefficients co = family.coefficients(ParamTriple{0.0, sc.omega, 0.0});
      double phase = sc.omega_phases.empty() ? 1.5 * kPi : sc.omega_phases.front();
      omega = omega_for_phase(co, sc.manifold_k, phase, sc.omega);
    }
    TraceInterval rep = repelling_interval(family, sc.manifold_k, omega, sc.locus);
    double t = rep.t_minus + sc.manifold_t_frac * (rep.t_plus - rep.t_minus);
    NSLocusPoint pt = ns_locus_solve(family, sc.manifold_k, t, omega, sc.locus);
    ReturnChart chart = locus_chart(family, pt);
    CubicMap3 tk = family.return_map(ParamTriple{pt.mu, omega, pt.rho}, sc.manifold_k);
    chart_map = MapModel::from_cubic(chart.conjugate(tk));
    q = chart.to_chart(pt.fp.point);
    double dp = chart.delta_dom_prime;
    out.y_threshold = sc.y_threshold_scale * dp * dp;
    box.lo = Vec3(-dp, -2.0 * out.y_threshold, -dp);
    box.hi = Vec3(dp, 2.0 * out.y_threshold, dp);
    box.lo[1] += q[1];
    box.hi[1] += q[1];
  } else if (sc.model == ScenarioModel::NormalFormTest) {
    chart_map = MapModel::from_cubic(normal_form_test_map(sc.nf_psi, sc.nf_nu3, sc.nf_lc));
    q = Vec3::Zero();
    out.y_threshold = sc.y_threshold_scale * 0.01;
    box = Box3::cube(0.2);
  } else {
    fail(ErrorCode::ConfigError, "manifold requires model = toy or normal_form_test");
  }
  gopt.y_threshold = out.y_threshold;
  out.cloud = grow_unstable_set_partial(chart_map, q, sc.seed_radius, box, gopt);

  out.summary["y_extent_reached"] = out.cloud.reached;
  out.summary["y_threshold"] = out.y_threshold;
  out.summary["y_min"] = out.cloud.y_min;
  out.summary["y_max"] = out.cloud.y_max;
  out.summary["generations"] = out.cloud.generations;
  out.summary["points"] = out.cloud.total_points;
  out.summary["budget_exhausted"] = out.cloud.budget_exhausted;
  if (sc.stable_y) {
    auto graph = [v = *sc.stable_y](double, double) { return v; };
    StableDistanceReport sd = stable_manifold_distance(out.cloud, graph);
    out.summary["min_stable_distance"] = sd.min_distance;
    out.summary["stable_sign_change"] = sd.sign_change;
  }
  return out;
}

// ---------------------------------------------------------------------------
// solve-implicit: small expression language for G and H.
// ---------------------------------------------------------------------------

namespace detail {

struct ImplicitTerm {
  std::string kind;  // sin | cos | tanh | linear
  double amp = 0.0;
  std::vector<double> x_coeffs;
  std::vector<double> y_coeffs;
  double phase = 0.0;

  double eval(const VecX& x, const VecX& y) const {
    double arg = phase;
    for (std::size_t i = 0; i < x_coeffs.size() && int(i) < x.size(); ++i)
      arg += x_coeffs[i] * x[int(i)];
    for (std::size_t i = 0; i < y_coeffs.size() && int(i) < y.size(); ++i)
      arg += y_coeffs[i] * y[int(i)];
    if (kind == "sin") return amp * std::sin(arg);
    if (kind == "cos") return amp * std::cos(arg);
    if (kind == "tanh") return amp * std::tanh(arg);
    if (kind == "linear") return amp * arg;
    fail(ErrorCode::ConfigError, "unknown implicit term kind '" + kind + "'");
  }
};

inline ImplicitTerm parse_term(const Json& j) {
  require_keys(j, "implicit term", {"kind", "amp", "x_coeffs", "y_coeffs", "phase"});
  ImplicitTerm t;
  t.kind = j.at("kind").get<std::string>();
  t.amp = num(j, "amp", 1.0);
  t.phase = num(j, "phase", 0.0);
  if (j.contains("x_coeffs"))
    for (const auto& v : j["x_coeffs"]) t.x_coeffs.push_back(v.get<double>());
  if (j.contains("y_coeffs"))
    for (const auto& v : j["y_coeffs"]) t.y_coeffs.push_back(v.get<double>());
  return t;
}

}  // namespace detail

inline Json run_solve_implicit(const Scenario& sc) {
  const Json& spec = sc.implicit_spec;
  if (spec.is_null()) fail(ErrorCode::ConfigError, "solve-implicit needs an 'implicit' section");
  detail::require_keys(spec, "implicit", {"m", "x", "G", "H", "tol", "box_half", "y_half"});
  int m = spec.contains("m") ? spec["m"].get<int>() : 1;
  double tol = detail::num(spec, "tol", 1e-12);
  double box_half = detail::num(spec, "box_half", 1.0);
  double y_half = detail::num(spec, "y_half", 2.0);
  VecX x(0);
  if (spec.contains("x")) {
    x = VecX(spec["x"].size());
    for (int i = 0; i < x.size(); ++i) x[i] = spec["x"][i].get<double>();
  }
  std::vector<double> g_const(m, 0.0);
  if (spec.contains("G")) {
    if (int(spec["G"].size()) != m) fail(ErrorCode::ConfigError, "G must list m constants");
    for (int j = 0; j < m; ++j) g_const[j] = spec["G"][j].get<double>();
  }
  std::vector<std::vector<detail::ImplicitTerm>> terms(m);
  if (spec.contains("H")) {
    if (int(spec["H"].size()) != m) fail(ErrorCode::ConfigError, "H must list m term arrays");
    for (int j = 0; j < m; ++j)
      for (const auto& t : spec["H"][j]) terms[j].push_back(detail::parse_term(t));
  }
  int n = std::max<int>(1, x.size());

  ImplicitSystemProblem prob;
  prob.m = m;
  prob.box_lo = VecX::Constant(n, -box_half);
  prob.box_hi = VecX::Constant(n, box_half);
  prob.y_lo = -y_half;
  prob.y_hi = y_half;
  prob.G = [g_const](int j, const VecX&) { return g_const[std::size_t(j)]; };
  prob.H = [terms](int j, const VecX& xv, const VecX& yv) {
    double acc = 0.0;
    for (const auto& t : terms[std::size_t(j)]) acc += t.eval(xv, yv);
    return acc;
  };
  VecX xq = x.size() ? x : VecX::Zero(1);
  SystemSolveResult sol = solve_system(prob, xq, tol);
  Json out;
  out["y"] = Json::array();
  out["corrections"] = Json::array();
  for (int j = 0; j < m; ++j) {
    out["y"].push_back(sol.y[j]);
    out["corrections"].push_back(sol.corrections[j]);
  }
  out["evaluations"] = sol.evaluations;
  return out;
}

}  // namespace rmap

#endif  // RETURNMAP_SCENARIO_HPP

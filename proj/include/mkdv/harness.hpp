#pragma once

// Scenario-driven experiment runner: builds initial data (sum plus
// normalized perturbation), integrates, tracks the modulation
// parameters, evaluates global/localized functionals, and writes
// machine-readable reports (CSV time series + JSON summary).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mkdv/functionals.hpp"
#include "mkdv/grid.hpp"
#include "mkdv/integrator.hpp"
#include "mkdv/modulation.hpp"
#include "mkdv/solutions.hpp"
#include "mkdv/warnings.hpp"

namespace mkdv {

struct Perturbation {
  enum class Kind { None, RandomH2, Directed };
  Kind kind = Kind::None;
  double amplitude = 0.0;
  std::uint64_t seed = 0;
  double center = 0.0;  // bump location for the directed kind
};

struct Scenario {
  static constexpr int kSchemaVersion = 1;

  Configuration objects;
  double separation = 20.0;  // D; initial center gaps must be >= 2D
  Perturbation perturbation;
  SolverConfig solver;
  std::optional<Grid> grid;  // absent -> auto-sized
  double sigma = 0.0;        // cutoff steepness; 0 -> default
  double omega1 = 0.1;
  double omega2 = 0.1;
  double theta = 0.0;  // reporting rate; 0 -> min(beta_min/4, sqrt(sigma)/16)
  bool use_fitted_centers = true;
  bool dump_snapshots = false;
  bool auto_dt = true;
  double modulation_tol = 1e-10;
  int modulation_max_iter = 50;
  std::string outputs = "out";
  std::optional<double> check_max_eps_h2;  // enabled acceptance check

  void validate() const {
    objects.validate();
    solver.validate();
    if (!(separation > 0.0)) throw std::invalid_argument("Scenario: separation D must be > 0");
    const std::size_t j = objects.size();
    for (std::size_t i = 1; i < j; ++i) {
      const double gap = center(objects.objects[i], 0.0) - center(objects.objects[i - 1], 0.0);
      if (gap < 2.0 * separation)
        throw std::invalid_argument("Scenario: initial gaps must be >= 2D");
    }
    if (j >= 2 && !(objects.v2() > 0.0))
      throw std::invalid_argument("Scenario: v2 must be positive");
    if (perturbation.kind == Perturbation::Kind::None && perturbation.amplitude != 0.0)
      throw std::invalid_argument("Scenario: amplitude without a perturbation kind");
    if (perturbation.amplitude < 0.0)
      throw std::invalid_argument("Scenario: amplitude must be >= 0");
  }

  double theta_effective() const {
    const double sig = sigma_effective();
    return theta > 0.0 ? theta : std::min(objects.beta_min() / 4.0, std::sqrt(sig) / 16.0);
  }

  double sigma_effective() const {
    if (sigma > 0.0) return sigma;
    return 0.5 * cutoff_sigma_bound(objects);
  }
};

// ---------------------------------------------------------------------------
// JSON (de)serialization of scenarios; schema_version is checked.

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["schema_version"] = Scenario::kSchemaVersion;
  auto& objs = j["objects"] = nlohmann::json::array();
  for (const auto& o : s.objects.objects) {
    if (is_soliton(o)) {
      const auto& p = std::get<SolitonParams>(o);
      objs.push_back({{"type", "soliton"}, {"c", p.c}, {"kappa", p.kappa}, {"x0", p.x0}});
    } else {
      const auto& p = std::get<BreatherParams>(o);
      objs.push_back({{"type", "breather"},
                      {"alpha", p.alpha},
                      {"beta", p.beta},
                      {"x1", p.x1},
                      {"x2", p.x2}});
    }
  }
  j["separation"] = s.separation;
  const char* kind = s.perturbation.kind == Perturbation::Kind::None        ? "none"
                     : s.perturbation.kind == Perturbation::Kind::RandomH2 ? "random_h2"
                                                                            : "directed";
  j["perturbation"] = {{"kind", kind},
                       {"amplitude", s.perturbation.amplitude},
                       {"seed", s.perturbation.seed},
                       {"center", s.perturbation.center}};
  j["solver"] = {{"dt", s.solver.dt},
                 {"t_final", s.solver.t_final},
                 {"dealias", s.solver.dealias},
                 {"scheme", s.solver.scheme == Scheme::EtdRk4 ? "etdrk4" : "ifrk4"},
                 {"snapshot_stride", s.solver.snapshot_stride}};
  if (s.grid) j["grid"] = {{"length", s.grid->length}, {"points", s.grid->points}};
  j["cutoff"] = {{"sigma", s.sigma}, {"omega1", s.omega1}, {"omega2", s.omega2},
                 {"use_fitted_centers", s.use_fitted_centers}};
  j["modulation"] = {{"tol", s.modulation_tol}, {"max_iter", s.modulation_max_iter}};
  j["theta"] = s.theta;
  j["outputs"] = s.outputs;
  j["dump_snapshots"] = s.dump_snapshots;
  j["auto_dt"] = s.auto_dt;
  if (s.check_max_eps_h2) j["checks"] = {{"max_eps_h2", *s.check_max_eps_h2}};
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  if (j.value("schema_version", 0) != Scenario::kSchemaVersion)
    throw std::invalid_argument("scenario: unsupported schema_version");
  Scenario s;
  std::vector<ObjectParams> objs;
  for (const auto& o : j.at("objects")) {
    const std::string type = o.at("type");
    if (type == "soliton") {
      objs.emplace_back(SolitonParams(o.at("c"), o.value("kappa", 1), o.value("x0", 0.0)));
    } else if (type == "breather") {
      objs.emplace_back(
          BreatherParams(o.at("alpha"), o.at("beta"), o.value("x1", 0.0), o.value("x2", 0.0)));
    } else {
      throw std::invalid_argument("scenario: unknown object type " + type);
    }
  }
  s.objects = Configuration(std::move(objs));
  s.separation = j.value("separation", 20.0);
  if (j.contains("perturbation")) {
    const auto& p = j["perturbation"];
    const std::string kind = p.value("kind", "none");
    s.perturbation.kind = kind == "none"        ? Perturbation::Kind::None
                          : kind == "random_h2" ? Perturbation::Kind::RandomH2
                          : kind == "directed"  ? Perturbation::Kind::Directed
                                                : throw std::invalid_argument(
                                                      "scenario: unknown perturbation kind " + kind);
    s.perturbation.amplitude = p.value("amplitude", 0.0);
    s.perturbation.seed = p.value("seed", std::uint64_t{0});
    s.perturbation.center = p.value("center", 0.0);
  }
  if (j.contains("solver")) {
    const auto& v = j["solver"];
    s.solver.dt = v.value("dt", 1e-3);
    s.solver.t_final = v.value("t_final", 10.0);
    s.solver.dealias = v.value("dealias", 2.0 / 3.0);
    const std::string scheme = v.value("scheme", "etdrk4");
    s.solver.scheme = scheme == "ifrk4" ? Scheme::IfRk4 : Scheme::EtdRk4;
    s.solver.snapshot_stride = v.value("snapshot_stride", 100);
  }
  if (j.contains("grid")) s.grid = Grid(j["grid"].at("length"), j["grid"].at("points"));
  if (j.contains("cutoff")) {
    const auto& c = j["cutoff"];
    s.sigma = c.value("sigma", 0.0);
    s.omega1 = c.value("omega1", 0.1);
    s.omega2 = c.value("omega2", 0.1);
    s.use_fitted_centers = c.value("use_fitted_centers", true);
  }
  if (j.contains("modulation")) {
    s.modulation_tol = j["modulation"].value("tol", 1e-10);
    s.modulation_max_iter = j["modulation"].value("max_iter", 50);
  }
  s.theta = j.value("theta", 0.0);
  s.outputs = j.value("outputs", std::string("out"));
  s.dump_snapshots = j.value("dump_snapshots", false);
  s.auto_dt = j.value("auto_dt", true);
  if (j.contains("checks") && j["checks"].contains("max_eps_h2"))
    s.check_max_eps_h2 = j["checks"]["max_eps_h2"].get<double>();
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario " + path);
  nlohmann::json j;
  in >> j;
  return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// Grid sizing: the box must hold every object over the whole run with
// room for the exponential tails.

inline Grid auto_grid(const Scenario& s) {
  const double pad = 30.0 / s.objects.beta_min();  // e^{-30} tails at the edge
  double lo = 0.0, hi = 0.0;
  for (const auto& o : s.objects.objects) {
    for (double t : {0.0, s.solver.t_final}) {
      lo = std::min(lo, center(o, t));
      hi = std::max(hi, center(o, t));
    }
  }
  const double half = std::max(std::abs(lo), std::abs(hi)) + pad;
  const double length = std::max(100.0, 2.0 * half);
  int points = 16;
  while (length / points > 0.05 && points < (1 << 22)) points *= 2;
  return Grid(length, points);
}

inline void validate_box(const Scenario& s, const Grid& g) {
  for (double t : {0.0, s.solver.t_final}) {
    Field p = eval_sum(s.objects, t, g);
    const double edge = std::max(std::abs(p[0]), std::abs(p[g.points - 1]));
    if (edge > 1e-10)
      warn("scenario: profile tail at the box edge is " + std::to_string(edge) + " at t=" +
           std::to_string(t) + "; grid may be too small");
  }
}

// ---------------------------------------------------------------------------
// Initial data: exact sum plus a perturbation of exact H2 norm a.

namespace detail {

inline Field random_h2_draw(const Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Spectrum s(g.modes(), {0.0, 0.0});
  const int rmax = g.points / 8;
  for (int r = 1; r <= rmax; ++r) {
    const double a = gauss(rng), b = gauss(rng);
    s[r] = {a, b};
  }
  return from_spectrum(g, s, 0.0);
}

inline Field directed_bump(const Grid& g, double center_x) {
  Field f(g, 0.0);
  for (int i = 0; i < g.points; ++i) {
    const double se = sech(wrap(g.node(i) - center_x, g.length));
    f[i] = se * se;
  }
  return f;
}

}  // namespace detail

inline Field build_initial(const Scenario& s, const Grid& g) {
  Field u0 = eval_sum(s.objects, 0.0, g);
  const double a = s.perturbation.amplitude;
  if (s.perturbation.kind == Perturbation::Kind::None || a == 0.0) return u0;

  Field w(g, 0.0);
  if (s.perturbation.kind == Perturbation::Kind::RandomH2) {
    w = detail::random_h2_draw(g, s.perturbation.seed);
    if (h2_norm(w) == 0.0) {
      warn("build_initial: degenerate draw, reseeding once");
      w = detail::random_h2_draw(g, s.perturbation.seed + 1);
    }
  } else {
    w = detail::directed_bump(g, s.perturbation.center);
  }
  const double norm = h2_norm(w);
  if (norm == 0.0) throw std::runtime_error("build_initial: perturbation draw has zero norm");
  const double scale = a / norm;
  for (int i = 0; i < g.points; ++i) u0[i] += scale * w[i];
  return u0;
}

// ---------------------------------------------------------------------------
// Report types.

struct CheckResult {
  std::string name;
  double threshold = 0.0;
  double value = 0.0;
  bool pass = false;
};

struct StabilityRow {
  double time = 0.0;
  double eps_h2 = 0.0;
  bool fitted = false;                // parameters from modulation (vs exact labels)
  std::vector<double> params;         // 2 per object: (c,x0) or (x1,x2)
  std::vector<double> param_rates;    // same layout
  std::vector<Triple> localized;      // j = 1..J
  std::vector<double> lyapunov_vals;  // H_j
  std::vector<double> quad_vals;      // script-Q_j
  std::vector<Triple> defects;        // M_j - M_j(0), (E+w1 M)_j - init, (F+w2 M)_j - init
};

struct StabilityReport {
  std::vector<StabilityRow> rows;
  double sup_eps_h2 = 0.0;
  double amplification = 0.0;  // sup / (a + e^{-theta D})
  double theta = 0.0;
  double a = 0.0;
  double separation = 0.0;
  Grid grid;
  double dt_used = 0.0;
  bool used_fitted_centers = false;
  bool truncated = false;
  double truncated_at = 0.0;
  std::vector<CheckResult> checks;
  std::vector<std::string> notes;

  bool all_checks_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace detail {

inline std::vector<double> flatten_params(const Configuration& cfg) {
  std::vector<double> out;
  for (const auto& o : cfg.objects) {
    if (is_soliton(o)) {
      const auto& p = std::get<SolitonParams>(o);
      out.push_back(p.c);
      out.push_back(p.x0);
    } else {
      const auto& p = std::get<BreatherParams>(o);
      out.push_back(p.x1);
      out.push_back(p.x2);
    }
  }
  return out;
}

// soliton self-convergence probe used by the dt auto-tightener
inline bool dt_probe_passes(const Grid& g, double dt, Scheme scheme) {
  const double horizon = 256.0 * dt;  // fixed step count keeps the probe cheap
  SolitonParams p(1.0, 1, 0.0);
  Field u0 = eval_soliton(p, 0.0, g);
  SolverConfig c1{dt, horizon, 2.0 / 3.0, scheme, 1 << 30};
  SolverConfig c2{0.5 * dt, horizon, 2.0 / 3.0, scheme, 1 << 30};
  const Field ref = eval_soliton(p, horizon, g);
  const double e1 = std::sqrt(l2_norm_sq(integrate(u0, c1).back() - ref));
  const double e2 = std::sqrt(l2_norm_sq(integrate(u0, c2).back() - ref));
  if (e1 < 1e-12) return true;  // at roundoff already
  const double ratio = e1 / std::max(e2, 1e-300);
  return e1 < 1e-8 && ratio > 8.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// The pipeline: integrate -> modulate -> localized functionals.

inline StabilityReport run_scenario(const Scenario& s) {
  s.validate();
  StabilityReport rep;
  const Grid g = s.grid ? *s.grid : auto_grid(s);
  rep.grid = g;
  validate_box(s, g);

  SolverConfig solver = s.solver;
  if (s.auto_dt) {
    int tightenings = 0;
    while (!detail::dt_probe_passes(g, solver.dt, solver.scheme) && tightenings < 3) {
      solver.dt *= 0.5;
      solver.snapshot_stride *= 2;
      ++tightenings;
      warn("run: auto-tightened dt to " + std::to_string(solver.dt));
    }
  }
  rep.dt_used = solver.dt;
  rep.a = s.perturbation.amplitude;
  rep.separation = s.separation;
  rep.theta = s.theta_effective();

  Field u0 = build_initial(s, g);
  Trajectory traj = integrate(u0, solver);

  // modulation along the trajectory, warm-started from the exact labels
  ModulationTrack mt = track(traj, s.objects, s.modulation_tol, s.modulation_max_iter);
  rep.truncated = mt.truncated;
  rep.truncated_at = mt.truncated_at;
  const std::size_t nfit = mt.results.size();

  const std::size_t J = s.objects.size();
  const double sigma = s.sigma_effective();

  // cutoff from fitted centers when available, else exact labels
  CutoffConfig cut;
  bool fitted_centers = false;
  if (s.use_fitted_centers && J >= 2 && nfit == traj.snapshots.size() && nfit >= 2) {
    std::vector<double> times(nfit);
    std::vector<std::vector<double>> centers(J, std::vector<double>(nfit));
    for (std::size_t i = 0; i < nfit; ++i) {
      times[i] = mt.results[i].time;
      for (std::size_t p = 0; p < J; ++p)
        centers[p][i] = center(mt.results[i].params.objects[p], times[i]);
    }
    cut = make_cutoff_from_centers(times, centers, sigma, s.objects);
    fitted_centers = true;
  } else {
    cut = make_cutoff(s.objects, sigma);
  }
  rep.used_fitted_centers = fitted_centers;

  std::vector<Triple> base(J + 1);  // initial (M_j, E+w1M, F+w2M), j=1..J
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    const Field& u = traj.snapshots[i];
    StabilityRow row;
    row.time = u.time;
    const bool have_fit = i < nfit && mt.results[i].converged;
    const Configuration& params = have_fit ? mt.results[i].params : s.objects;
    row.fitted = have_fit;
    row.params = detail::flatten_params(params);
    if (have_fit && i < mt.parameter_rates.size() && !mt.parameter_rates.empty())
      row.param_rates = mt.parameter_rates[i];
    else
      row.param_rates.assign(2 * J, 0.0);

    Field eps = have_fit ? mt.results[i].epsilon : u - eval_sum(s.objects, u.time, g);
    row.eps_h2 = have_fit ? mt.results[i].h2_of_epsilon : h2_norm(eps);

    FunctionalReport fr = functional_report(u, params, eps, cut);
    row.localized = fr.localized;
    row.lyapunov_vals = fr.lyapunov_values;
    row.quad_vals = fr.quadratic_combo;
    for (std::size_t j = 1; j <= J; ++j) {
      const Triple& mef = fr.localized[j - 1];
      Triple combo{mef[0], mef[1] + s.omega1 * mef[0], mef[2] + s.omega2 * mef[0]};
      if (i == 0) base[j] = combo;
      row.defects.push_back(
          {combo[0] - base[j][0], combo[1] - base[j][1], combo[2] - base[j][2]});
    }
    rep.sup_eps_h2 = std::max(rep.sup_eps_h2, row.eps_h2);
    rep.rows.push_back(std::move(row));
  }

  rep.amplification = rep.sup_eps_h2 / (rep.a + std::exp(-rep.theta * rep.separation));

  // enabled checks
  CheckResult finite{"finite_and_complete", 0.0, rep.truncated ? 1.0 : 0.0, !rep.truncated};
  rep.checks.push_back(finite);
  if (s.check_max_eps_h2) {
    rep.checks.push_back({"max_eps_h2", *s.check_max_eps_h2, rep.sup_eps_h2,
                          rep.sup_eps_h2 <= *s.check_max_eps_h2});
  }
  rep.notes = take_warnings();

  if (s.dump_snapshots) {
    std::filesystem::create_directories(s.outputs);
    write_snapshot_dump(traj, s.outputs + "/snapshots.bin");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Writers. CSV columns: t, eps_h2, per-object parameters in
// configuration order, their rates, then per-j functionals and
// monotonicity defects. %.17g keeps round trips bit-exact.

inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(const StabilityReport& rep, const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  out << "t,eps_h2";
  for (std::size_t p = 0; p < s.objects.size(); ++p) {
    const bool sol = is_soliton(s.objects.objects[p]);
    out << ",obj" << p << (sol ? "_c" : "_x1") << ",obj" << p << (sol ? "_x0" : "_x2");
  }
  for (std::size_t p = 0; p < s.objects.size(); ++p) {
    const bool sol = is_soliton(s.objects.objects[p]);
    out << ",rate_obj" << p << (sol ? "_c" : "_x1") << ",rate_obj" << p << (sol ? "_x0" : "_x2");
  }
  const std::size_t J = s.objects.size();
  for (std::size_t j = 1; j <= J; ++j)
    out << ",M_" << j << ",E_" << j << ",F_" << j << ",H_" << j << ",Q_" << j << ",defM_" << j
        << ",defEM_" << j << ",defFM_" << j;
  out << "\n";
  for (const auto& row : rep.rows) {
    out << format_g17(row.time) << ',' << format_g17(row.eps_h2);
    for (double v : row.params) out << ',' << format_g17(v);
    for (double v : row.param_rates) out << ',' << format_g17(v);
    for (std::size_t j = 0; j < J; ++j) {
      out << ',' << format_g17(row.localized[j][0]) << ',' << format_g17(row.localized[j][1])
          << ',' << format_g17(row.localized[j][2]) << ',' << format_g17(row.lyapunov_vals[j])
          << ',' << format_g17(row.quad_vals[j]) << ',' << format_g17(row.defects[j][0]) << ','
          << format_g17(row.defects[j][1]) << ',' << format_g17(row.defects[j][2]);
    }
    out << "\n";
  }
}

inline void write_summary(const StabilityReport& rep, const Scenario& s, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = Scenario::kSchemaVersion;
  j["scenario"] = scenario_to_json(s);
  j["grid"] = {{"length", rep.grid.length}, {"points", rep.grid.points}};
  j["dt_used"] = rep.dt_used;
  j["sup_eps_h2"] = rep.sup_eps_h2;
  j["amplification"] = rep.amplification;
  j["theta"] = rep.theta;
  j["truncated"] = rep.truncated;
  if (rep.truncated) j["truncated_at"] = rep.truncated_at;
  j["used_fitted_centers"] = rep.used_fitted_centers;
  j["snapshots"] = rep.rows.size();
  auto& checks = j["checks"] = nlohmann::json::array();
  for (const auto& c : rep.checks)
    checks.push_back(
        {{"name", c.name}, {"threshold", c.threshold}, {"value", c.value}, {"pass", c.pass}});
  j["warnings"] = rep.notes;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_summary: cannot open " + path);
  out << j.dump(2) << "\n";
}

inline void write_run_outputs(const StabilityReport& rep, const Scenario& s) {
  std::filesystem::create_directories(s.outputs);
  write_csv(rep, s, s.outputs + "/timeseries.csv");
  write_summary(rep, s, s.outputs + "/summary.json");
}

// ---------------------------------------------------------------------------
// Sweeps along one axis; each variant is an independent run.

enum class SweepAxis { Amplitude, Separation, Resolution };

struct SweepRow {
  double value = 0.0;
  double sup_eps_h2 = 0.0;
  double max_defect = 0.0;  // positive part, max over j >= 2 and t
  bool ok = false;
  std::string error;
};

struct SweepTable {
  SweepAxis axis = SweepAxis::Amplitude;
  std::vector<SweepRow> rows;
  std::optional<double> d_slope;  // log-linear slope of max_defect vs D
};

inline Scenario variant_for(const Scenario& base, SweepAxis axis, double value) {
  Scenario v = base;
  switch (axis) {
    case SweepAxis::Amplitude:
      v.perturbation.amplitude = value;
      if (v.perturbation.kind == Perturbation::Kind::None)
        v.perturbation.kind = Perturbation::Kind::RandomH2;
      break;
    case SweepAxis::Separation: {
      // reposition the objects around their centroid with gaps 2D
      v.separation = value;
      const std::size_t j = v.objects.size();
      if (j >= 2) {
        double centroid = 0.0;
        for (const auto& o : v.objects.objects) centroid += center(o, 0.0);
        centroid /= static_cast<double>(j);
        for (std::size_t i = 0; i < j; ++i) {
          const double target = centroid + (static_cast<double>(i) - 0.5 * (j - 1)) * 2.0 * value;
          auto& o = v.objects.objects[i];
          if (is_soliton(o))
            std::get<SolitonParams>(o).x0 = target;
          else
            std::get<BreatherParams>(o).x2 = -target;
        }
      }
      break;
    }
    case SweepAxis::Resolution: {
      Grid g = v.grid ? *v.grid : auto_grid(v);
      v.grid = Grid(g.length, static_cast<int>(value));
      break;
    }
  }
  return v;
}

inline double max_positive_defect(const StabilityReport& rep) {
  double worst = 0.0;
  for (const auto& row : rep.rows) {
    for (std::size_t j = 1; j < row.defects.size(); ++j) {  // j >= 2 (index 0 is global)
      for (double d : row.defects[j]) worst = std::max(worst, d);
    }
  }
  return worst;
}

inline unsigned sweep_worker_cap() {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MKDV_LAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) cap = static_cast<unsigned>(v);
  }
  return cap;
}

inline SweepTable sweep(const Scenario& base, SweepAxis axis, const std::vector<double>& values,
                        const std::string& out_dir) {
  SweepTable table;
  table.axis = axis;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] <= values[i - 1]) throw std::invalid_argument("sweep: values must be sorted");

  table.rows.assign(values.size(), SweepRow{});
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= values.size()) return;
      SweepRow& row = table.rows[i];
      row.value = values[i];
      try {
        Scenario v = variant_for(base, axis, values[i]);
        char tag[64];
        std::snprintf(tag, sizeof tag, "variant_%g", values[i]);
        v.outputs = out_dir + "/" + tag;
        StabilityReport rep = run_scenario(v);
        write_run_outputs(rep, v);
        row.sup_eps_h2 = rep.sup_eps_h2;
        row.max_defect = max_positive_defect(rep);
        row.ok = !rep.truncated;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
    }
  };
  const unsigned workers =
      std::min<unsigned>(sweep_worker_cap(), static_cast<unsigned>(std::max<std::size_t>(values.size(), 1)));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  if (axis == SweepAxis::Separation) {
    // least-squares slope of ln(defect) against D, over usable rows
    std::vector<double> xs, ys;
    for (const auto& r : table.rows)
      if (r.ok && r.max_defect > 0.0) {
        xs.push_back(r.value);
        ys.push_back(std::log(r.max_defect));
      }
    if (xs.size() >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
      }
      const double n = static_cast<double>(xs.size());
      table.d_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
  }
  return table;
}

inline void write_sweep_outputs(const SweepTable& table, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir + "/sweep.csv");
  csv << "value,sup_eps_h2,max_defect,ok\n";
  for (const auto& r : table.rows)
    csv << format_g17(r.value) << ',' << format_g17(r.sup_eps_h2) << ','
        << format_g17(r.max_defect) << ',' << (r.ok ? 1 : 0) << "\n";

  nlohmann::json j;
  j["axis"] = table.axis == SweepAxis::Amplitude    ? "amplitude"
              : table.axis == SweepAxis::Separation ? "separation"
                                                    : "resolution";
  auto& rows = j["rows"] = nlohmann::json::array();
  for (const auto& r : table.rows)
    rows.push_back({{"value", r.value},
                    {"sup_eps_h2", r.sup_eps_h2},
                    {"max_defect", r.max_defect},
                    {"ok", r.ok},
                    {"error", r.error}});
  if (table.d_slope) j["d_slope"] = *table.d_slope;
  std::ofstream out(out_dir + "/sweep.json");
  out << j.dump(2) << "\n";
}

}  // namespace mkdv

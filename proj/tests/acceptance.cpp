// Acceptance suite: one pass/fail line per criterion, each with the
// measured values. Exit code equals the number of failed criteria.
// Optional argv: criterion numbers to run (default: all).

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mkdv/harness.hpp"

using namespace mkdv;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void line(int criterion, bool pass, const std::string& what) {
  if (!pass) ++g_failures;
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, what.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Field h2_noise(const Grid& g, unsigned seed, double target) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Spectrum s(g.modes(), {0.0, 0.0});
  for (int r = 1; r <= g.points / 8; ++r) s[r] = {gauss(rng), gauss(rng)};
  Field f = from_spectrum(g, s, 0.0);
  const double scale = target / h2_norm(f);
  for (auto& v : f.values) v *= scale;
  return f;
}

double lsq_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// --- criterion 1: exact-solution elliptic identities ----------------------

void criterion_1() {
  const auto t0 = Clock::now();
  const Grid g(100.0, 2048);
  bool pass = true;
  std::string detail;
  for (double c : {0.5, 1.0, 2.0}) {
    const double r = elliptic_residual(SolitonParams(c, 1, 0.0), 0.0, g);
    pass = pass && r < 1e-9;
    detail += fmt(" sol(c=%g)=%.2e", c, r);
  }
  for (auto [a, b] : {std::pair{1.0, 2.0}, {0.8, 2.0}, {1.0, 1.0}}) {
    const double r = elliptic_residual(BreatherParams(a, b, 0.0, 0.0), 0.5, g);
    pass = pass && r < 1e-8;
    detail += fmt(" br(%g,%g)=%.2e", a, b, r);
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 5.0;
  line(1, pass,
       fmt("elliptic residuals <1e-9 (sol) / <1e-8 (br) at 2048/100, <5s:%s %.1fs",
           detail.c_str(), secs));
}

// --- criterion 2: conserved-quantity anchors -------------------------------

void criterion_2() {
  const Grid g(100.0, 2048);
  Field q = eval_soliton(SolitonParams(1.0, 1, 0.0), 0.0, g);
  const double em = std::abs(mass(q) - 2.0);
  const double ee = std::abs(energy(q) + 2.0 / 3.0);
  const double ef = std::abs(f_second(q) - 0.4);
  bool pass = em < 1e-10 && ee < 1e-10 && ef < 1e-10;
  std::string detail = fmt(" anchors=(%.1e,%.1e,%.1e)", em, ee, ef);
  for (double c : {0.5, 2.0}) {
    Field qc = eval_soliton(SolitonParams(c, 1, 0.0), 0.0, g);
    const double sm = std::abs(mass(qc) - 2.0 * std::sqrt(c));
    const double se = std::abs(energy(qc) + (2.0 / 3.0) * std::pow(c, 1.5));
    const double sf = std::abs(f_second(qc) - 0.4 * std::pow(c, 2.5));
    pass = pass && sm < 1e-9 && se < 1e-9 && sf < 1e-9;
    detail += fmt(" c=%g:(%.1e,%.1e,%.1e)", c, sm, se, sf);
  }
  line(2, pass, "M/E/F anchors and scaling laws:" + detail);
}

// --- criterion 3: Lyapunov anchor ------------------------------------------

void criterion_3() {
  const Grid g(100.0, 2048);
  bool pass = true;
  std::string detail;
  for (double c : {0.5, 1.0, 2.0}) {
    Configuration single({SolitonParams(c, 1, 0.0)});
    CutoffConfig cut = make_cutoff(single);
    Field q = eval_soliton(SolitonParams(c, 1, 0.0), 0.0, g);
    const double err =
        std::abs(lyapunov(q, cut, 1, 0.0, std::sqrt(c)) - (16.0 / 15.0) * std::pow(c, 2.5));
    pass = pass && err < 1e-9;
    detail += fmt(" c=%g:%.2e", c, err);
  }
  line(3, pass, "F+2(b^2)E+(b^2)^2 M on Q_c vs (16/15)c^{5/2}:" + detail);
}

// --- criterion 4: integrator accuracy --------------------------------------

void criterion_4() {
  const auto t0 = Clock::now();

  // fourth-order self-convergence on the soliton
  const Grid gs(100.0, 2048);
  SolitonParams sp(1.0, 1, 0.0);
  Field s0 = eval_soliton(sp, 0.0, gs);
  Field sref = eval_soliton(sp, 1.0, gs);
  std::vector<double> lx, ly;
  for (double dt : {4e-3, 2e-3, 1e-3, 5e-4}) {
    SolverConfig c{dt, 1.0, 2.0 / 3.0, Scheme::EtdRk4, 1 << 30};
    const double err = std::sqrt(l2_norm_sq(integrate(s0, c).back() - sref));
    lx.push_back(std::log(dt));
    ly.push_back(std::log(err));
  }
  const double slope = lsq_slope(lx, ly);

  // exact breather to t=10; 4096 points are needed for the H2 target
  // (the super-cutoff tail of the beta/alpha=2 breather fluctuates up
  // to 1e-3 in H2 at 2048 points)
  const Grid g(100.0, 4096);
  BreatherParams bp(1.0, 2.0, 0.0, 20.0);
  Field u0 = eval_breather(bp, 0.0, g);
  SolverConfig cfg{1e-5, 10.0, 2.0 / 3.0, Scheme::EtdRk4, 1 << 30};
  Trajectory tr = integrate(u0, cfg);
  const double h2err = h2_norm(tr.back() - eval_breather(bp, 10.0, g));
  double drift = 0.0;
  for (int k = 0; k < 3; ++k)
    drift = std::max(drift, std::abs(tr.invariants.back()[k] - tr.invariants.front()[k]) /
                                std::abs(tr.invariants.front()[k]));
  const double secs = seconds_since(t0);

  const bool pass = h2err < 1e-6 && drift < 1e-8 && std::abs(slope - 4.0) < 0.3 && secs < 60.0;
  line(4, pass,
       fmt("breather t=10: H2 err=%.2e (<1e-6), drift=%.2e (<1e-8), slope=%.2f (4.0+-0.3), "
           "%.0fs (<60s)",
           h2err, drift, slope, secs));
}

// --- criterion 5: Taylor exactness -----------------------------------------

void criterion_5() {
  const Grid g(100.0, 2048);
  Configuration cfg({SolitonParams(1.0, 1, -20.0), BreatherParams(0.8, 2.0, 0.0, -20.0)});
  CutoffConfig cut = make_cutoff(cfg);
  Field p = eval_sum(cfg, 0.0, g);

  // pointwise-normalized band-limited noise, supported near the two
  // objects: keeps the cubic terms far above the evaluation floor and
  // dominant over the quartic ones
  auto pointwise_noise = [&](unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Field f(g);
    for (int r = 1; r <= 64; ++r) {
      const double a = gauss(rng), b = gauss(rng);
      const double k = g.wavenumber(r);
      for (int i = 0; i < g.points; ++i)
        f[i] += a * std::cos(k * g.node(i)) + b * std::sin(k * g.node(i));
    }
    for (int i = 0; i < g.points; ++i) {
      const double x = g.node(i);
      f[i] *= detail::sech((x + 20.0) / 6.0) + detail::sech((x - 20.0) / 6.0);
    }
    const double scale = 0.1 / max_abs(f);
    for (auto& v : f.values) v *= scale;
    return f;
  };

  bool pass = true;
  std::string detail;
  for (unsigned seed : {101u, 202u}) {
    Field eps = pointwise_noise(seed);
    Field ex = spectral_derivative(eps, 1);
    Field px = spectral_derivative(p, 1);
    for (int j : {1, 2}) {
      // non-degeneracy of the frozen draw: the quartic part must not
      // mask the cubic one (a measure-zero accident would void the
      // slope measurement, not the expansion)
      Field phi = detail::phi_weight(g, cut, j, 0.0);
      detail::KahanSum ce, qe, cf, qf;
      for (int i = 0; i < g.points; ++i) {
        const double e = eps[i], P = p[i], w = phi[i];
        ce.add((-P * e * e * e - 0.0) * w);
        qe.add(-0.25 * e * e * e * e * w);
        cf.add((-5.0 * P * e * ex[i] * ex[i] - 5.0 * px[i] * e * e * ex[i] + 5.0 * P * P * P * e * e * e) * w);
        qf.add((-2.5 * e * e * ex[i] * ex[i] + 3.75 * P * P * e * e * e * e) * w);
      }
      const bool nondegenerate = std::abs(qe.value()) < 0.25 * std::abs(ce.value()) &&
                                 std::abs(qf.value()) < 0.25 * std::abs(cf.value());
      pass = pass && nondegenerate;

      std::vector<double> lx, le, lf;
      double mass_rem = 0.0;
      for (double s : {1.0, 0.5, 0.25}) {
        TaylorParts parts = taylor_parts(p, s * eps, cut, j);
        mass_rem = std::max(mass_rem, std::abs(parts.remainder[0]));
        lx.push_back(std::log(s));
        le.push_back(std::log(std::abs(parts.remainder[1])));
        lf.push_back(std::log(std::abs(parts.remainder[2])));
      }
      const double se = lsq_slope(lx, le), sf = lsq_slope(lx, lf);
      pass = pass && mass_rem < 1e-12 && std::abs(se - 3.0) < 0.3 && std::abs(sf - 3.0) < 0.3;
      detail += fmt(" s%u/j%d:%s mass=%.0e (%.2f,%.2f)", seed, j, nondegenerate ? "" : " DEGEN",
                    mass_rem, se, sf);
    }
  }
  line(5, pass, "mass remainder =0 to 1e-12; energy/F remainders cubic:" + detail);
}

// --- criterion 6: weighted-functional rate identity -------------------------

void criterion_6() {
  // centered-difference envelope constant, calibrated once on this
  // configuration
  const double kC = 1.0;

  const Grid g(100.0, 2048);
  Configuration cfg({BreatherParams(1.0, 1.0, 0.3, 20.0), SolitonParams(1.0, 1, 20.0)});
  // the identity is derived on the line, so the perturbation must decay
  // at the box seam; window the noise accordingly
  Field noise = h2_noise(g, 5u, 1.0);
  for (int i = 0; i < g.points; ++i) noise[i] *= detail::sech(g.node(i) / 6.0);
  const double scale = 1e-3 / h2_norm(noise);
  Field u0 = eval_sum(cfg, 0.0, g);
  for (int i = 0; i < g.points; ++i) u0[i] += scale * noise[i];

  // internal step far below the difference windows
  SolverConfig sc{1.25e-5, 0.02, 2.0 / 3.0, Scheme::EtdRk4, 40};  // snapshots every 5e-4
  Trajectory tr = integrate(u0, sc);
  const std::size_t mid = tr.snapshots.size() / 2;
  const double m2 = 0.5 * (center(cfg.objects[0], tr.snapshots[mid].time) +
                           center(cfg.objects[1], tr.snapshots[mid].time));
  SpatialWeight w = psi_weight(g, m2, 0.125);

  auto weighted = [&](const Field& u) -> Triple {
    Field ux = spectral_derivative(u, 1);
    Field uxx = spectral_derivative(u, 2);
    detail::KahanSum sm, se, sf;
    for (int i = 0; i < g.points; ++i) {
      const double v = u[i], v2 = v * v;
      sm.add(0.5 * v2 * w.f[i]);
      se.add((0.5 * ux[i] * ux[i] - 0.25 * v2 * v2) * w.f[i]);
      sf.add((0.5 * uxx[i] * uxx[i] - 2.5 * v2 * ux[i] * ux[i] + 0.25 * v2 * v2 * v2) * w.f[i]);
    }
    return {g.spacing() * sm.value(), g.spacing() * se.value(), g.spacing() * sf.value()};
  };

  const Triple rhs = appendix_rhs(tr.snapshots[mid], w);
  double err_by_dt[2] = {0.0, 0.0};
  int idx = 0;
  for (std::size_t span : {2, 1}) {  // differences at 1e-3 and 5e-4
    const Triple fp = weighted(tr.snapshots[mid + span]);
    const Triple fm = weighted(tr.snapshots[mid - span]);
    const double dt = tr.snapshots[mid + span].time - tr.snapshots[mid].time;
    double worst = 0.0;
    for (int k = 0; k < 3; ++k)
      worst = std::max(worst, std::abs((fp[k] - fm[k]) / (2 * dt) - rhs[k]));
    err_by_dt[idx++] = worst;
  }
  const double ratio = err_by_dt[0] / std::max(err_by_dt[1], 1e-300);
  const bool pass = err_by_dt[0] <= kC * 1e-6 + 1e-7 && err_by_dt[1] <= kC * 2.5e-7 + 1e-7 &&
                    ratio > 2.8 && ratio < 5.5;
  line(6, pass,
       fmt("rate identity: err(1e-3)=%.2e err(5e-4)=%.2e (<= %.0f dt^2 + 1e-7), ratio=%.2f (~4)",
           err_by_dt[0], err_by_dt[1], kC, ratio));
}

// --- criterion 7: modulation fidelity ---------------------------------------

void criterion_7() {
  const Grid g(100.0, 2048);
  Configuration truth({SolitonParams(1.0, 1, -20.0), BreatherParams(0.8, 2.0, 0.3, -20.0)});

  auto param_diff = [&](const Configuration& a, const Configuration& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.objects.size(); ++i) {
      if (is_soliton(a.objects[i])) {
        const auto& pa = std::get<SolitonParams>(a.objects[i]);
        const auto& pb = std::get<SolitonParams>(b.objects[i]);
        worst = std::max({worst, std::abs(pa.c - pb.c), std::abs(pa.x0 - pb.x0)});
      } else {
        const auto& pa = std::get<BreatherParams>(a.objects[i]);
        const auto& pb = std::get<BreatherParams>(b.objects[i]);
        worst = std::max({worst, std::abs(pa.x1 - pb.x1), std::abs(pa.x2 - pb.x2)});
      }
    }
    return worst;
  };

  ModulationResult clean = fit(eval_sum(truth, 0.0, g), truth);
  const double round_trip = param_diff(clean.params, truth);
  bool pass = clean.converged && round_trip < 1e-10;
  std::string detail = fmt(" roundtrip=%.1e", round_trip);

  for (double a : {1e-4, 1e-3, 1e-2}) {
    Field u = eval_sum(truth, 0.0, g) + h2_noise(g, 37u, a);
    ModulationResult r = fit(u, truth);
    const double pd = param_diff(r.params, truth);
    pass = pass && r.converged && pd <= 10.0 * a && r.h2_of_epsilon <= 2.0 * a;
    detail += fmt(" a=%g:(dp=%.1e,eps=%.2e)", a, pd, r.h2_of_epsilon);
  }
  line(7, pass, "round trip 1e-10; param err <= 10a, |eps| <= 2a:" + detail);
}

// --- criterion 8: the stability phenomenon ----------------------------------

void criterion_8() {
  // envelope multiple calibrated once on this scenario and recorded
  const double kMultiple = 10.0;

  const auto t0 = Clock::now();
  Scenario s;
  s.objects = Configuration({SolitonParams(1.0, 1, -52.0), BreatherParams(0.8, 2.0, 0.0, 12.0)});
  s.separation = 20.0;
  s.grid = Grid(256.0, 8192);
  s.solver.dt = 1e-4;
  s.solver.t_final = 50.0;
  s.solver.snapshot_stride = 2500;  // snapshots every 0.25
  s.auto_dt = false;
  s.perturbation = {Perturbation::Kind::RandomH2, 1e-3, 42, 0.0};
  s.outputs = "acceptance_out/stability";
  StabilityReport rep = run_scenario(s);
  write_run_outputs(rep, s);
  const double secs = seconds_since(t0);

  // no growth trend: least-squares slope of |eps| over the final half,
  // projected over that half-window, small against the mean level
  double sx = 0, sy = 0, sxx = 0, sxy = 0, mean = 0;
  int n = 0;
  for (const auto& row : rep.rows) {
    if (row.time < 25.0) continue;
    sx += row.time;
    sy += row.eps_h2;
    sxx += row.time * row.time;
    sxy += row.time * row.eps_h2;
    mean += row.eps_h2;
    ++n;
  }
  mean /= n;
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double trend = slope * 25.0 / mean;

  const double sup_over_a = rep.sup_eps_h2 / s.perturbation.amplitude;
  const bool pass = !rep.truncated && sup_over_a < kMultiple && trend < 0.25 && secs < 600.0;
  line(8, pass,
       fmt("two-object run t<=50: sup|eps|/a=%.2f (<%.0f), final-half trend=%+.3f (<0.25), "
           "%.0fs (<600s)",
           sup_over_a, kMultiple, trend, secs));
}

// --- criterion 9: almost-monotonicity scaling in D ---------------------------

void criterion_9() {
  Scenario base;
  base.objects =
      Configuration({SolitonParams(1.0, 1, -40.0), BreatherParams(0.8, 2.0, 0.0, 40.0)});
  base.separation = 20.0;
  base.grid = Grid(256.0, 8192);
  base.solver.dt = 1e-4;
  base.solver.t_final = 10.0;
  base.solver.snapshot_stride = 2500;
  base.auto_dt = false;
  base.outputs = "acceptance_out/monotonicity";

  SweepTable table =
      sweep(base, SweepAxis::Separation, {20.0, 30.0, 40.0}, "acceptance_out/monotonicity");
  write_sweep_outputs(table, "acceptance_out/monotonicity");

  bool pass = table.rows.size() == 3;
  std::string detail;
  for (const auto& r : table.rows) {
    // positive-part-bounded; absolute constants are not asserted
    pass = pass && r.ok && r.max_defect >= 0.0 && r.max_defect < 1.0;
    detail += fmt(" D=%g:%.3e", r.value, r.max_defect);
  }
  for (std::size_t i = 1; i < table.rows.size(); ++i)
    pass = pass && table.rows[i].max_defect < table.rows[i - 1].max_defect;
  const double slope = table.d_slope.value_or(0.0);
  pass = pass && slope < 0.0;
  // log-linearity: the two segment slopes agree
  double seg_mismatch = 1e300;
  if (pass) {
    const double s1 = std::log(table.rows[1].max_defect / table.rows[0].max_defect) / 10.0;
    const double s2 = std::log(table.rows[2].max_defect / table.rows[1].max_defect) / 10.0;
    seg_mismatch = std::abs(s1 - s2) / std::abs(0.5 * (s1 + s2));
    pass = pass && seg_mismatch < 0.5;
  }
  line(9, pass,
       fmt("defect positive parts decrease in D:%s log-slope=%.3f (<0), segment mismatch=%.2f "
           "(<0.5)",
           detail.c_str(), slope, seg_mismatch));
}

// --- criterion 10: determinism ----------------------------------------------

void criterion_10() {
  Scenario s;
  s.objects = Configuration({BreatherParams(1.0, 1.0, 0.3, 20.0), SolitonParams(1.0, 1, 20.0)});
  s.separation = 20.0;
  s.grid = Grid(100.0, 2048);
  s.solver.dt = 2e-4;
  s.solver.t_final = 0.2;
  s.solver.snapshot_stride = 200;
  s.auto_dt = false;
  s.perturbation = {Perturbation::Kind::RandomH2, 1e-3, 7, 0.0};

  auto csv_of = [&](const std::string& dir) {
    Scenario v = s;
    v.outputs = dir;
    StabilityReport rep = run_scenario(v);
    write_run_outputs(rep, v);
    std::ifstream in(dir + "/timeseries.csv", std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string c1 = csv_of("acceptance_out/det_a");
  const std::string c2 = csv_of("acceptance_out/det_b");
  const bool pass = !c1.empty() && c1 == c2;
  line(10, pass,
       fmt("repeated run, same seed: %zu-byte CSVs %s", c1.size(),
           pass ? "bit-identical" : "DIFFER"));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto enabled = [&](int n) { return wanted.empty() || wanted.count(n) > 0; };

  std::filesystem::create_directories("acceptance_out");
  if (enabled(1)) criterion_1();
  if (enabled(2)) criterion_2();
  if (enabled(3)) criterion_3();
  if (enabled(4)) criterion_4();
  if (enabled(5)) criterion_5();
  if (enabled(6)) criterion_6();
  if (enabled(7)) criterion_7();
  if (enabled(8)) criterion_8();
  if (enabled(9)) criterion_9();
  if (enabled(10)) criterion_10();

  if (g_failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  return g_failures;
}

#pragma once

// Conserved functionals M, E, F of the flow, the smooth cutoff Psi and
// its moving translates Phi_j, localized functionals, the Lyapunov
// combination, Taylor splits around a reference profile, and the
// exact rate identities for weighted functionals.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mkdv/grid.hpp"
#include "mkdv/solutions.hpp"

namespace mkdv {

// M = 1/2 int u^2
inline double mass(const Field& u) {
  detail::KahanSum s;
  for (double v : u.values) s.add(v * v);
  return 0.5 * u.grid.spacing() * s.value();
}

// E = 1/2 int u_x^2 - 1/4 int u^4
inline double energy(const Field& u) {
  Field ux = spectral_derivative(u, 1);
  detail::KahanSum s;
  for (int i = 0; i < u.size(); ++i) {
    const double v = u[i];
    s.add(0.5 * ux[i] * ux[i] - 0.25 * v * v * v * v);
  }
  return u.grid.spacing() * s.value();
}

// F = 1/2 int u_xx^2 - 5/2 int u^2 u_x^2 + 1/4 int u^6
inline double f_second(const Field& u) {
  Field ux = spectral_derivative(u, 1);
  Field uxx = spectral_derivative(u, 2);
  detail::KahanSum s;
  for (int i = 0; i < u.size(); ++i) {
    const double v = u[i], v2 = v * v;
    s.add(0.5 * uxx[i] * uxx[i] - 2.5 * v2 * ux[i] * ux[i] + 0.25 * v2 * v2 * v2);
  }
  return u.grid.spacing() * s.value();
}

// ---------------------------------------------------------------------------
// Cutoff Psi(x) = (2/pi) arctan(exp(sqrt(sigma) x / 2)) and derivatives.
// Evaluated in overflow-safe form; Psi(-x) + Psi(x) = 1 exactly.

inline double cutoff_psi(double x, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("cutoff_psi: sigma must be > 0");
  const double s = 0.5 * std::sqrt(sigma);
  if (x >= 0.0) return 1.0 - (2.0 / kPi) * std::atan(std::exp(-s * x));
  return (2.0 / kPi) * std::atan(std::exp(s * x));
}

inline double cutoff_psi_d1(double x, double sigma) {
  const double s = 0.5 * std::sqrt(sigma);
  return (s / kPi) * detail::sech(s * x);
}

inline double cutoff_psi_d2(double x, double sigma) {
  const double s = 0.5 * std::sqrt(sigma);
  return -(s * s / kPi) * detail::sech(s * x) * std::tanh(s * x);
}

inline double cutoff_psi_d3(double x, double sigma) {
  const double s = 0.5 * std::sqrt(sigma);
  const double se = detail::sech(s * x);
  return -(s * s * s / kPi) * se * (2.0 * se * se - 1.0);
}

// ---------------------------------------------------------------------------
// Midpoint paths m_j(t): piecewise-linear samples, extrapolated with the
// boundary slopes. A closed-form linear path is exact for all t.

struct MidpointPath {
  std::vector<double> times;
  std::vector<double> values;

  static MidpointPath linear(double value_at_0, double rate) {
    return {{0.0, 1.0}, {value_at_0, value_at_0 + rate}};
  }

  double at(double t) const {
    if (times.empty()) throw std::logic_error("MidpointPath: empty");
    if (times.size() == 1) return values[0];
    std::size_t hi = 1;
    while (hi + 1 < times.size() && times[hi] < t) ++hi;
    const double t0 = times[hi - 1], t1 = times[hi];
    const double w = (t - t0) / (t1 - t0);
    return values[hi - 1] * (1.0 - w) + values[hi] * w;
  }

  double rate_at(double t) const {
    if (times.size() < 2) return 0.0;
    std::size_t hi = 1;
    while (hi + 1 < times.size() && times[hi] < t) ++hi;
    return (values[hi] - values[hi - 1]) / (times[hi] - times[hi - 1]);
  }
};

// Cutoff steepness and the moving midpoints m_2..m_J. Index j follows
// the convention Phi_1 = 1 and Phi_{J+1} = 0.
struct CutoffConfig {
  double sigma = 0.0;
  int object_count = 0;
  std::vector<MidpointPath> midpoints;  // entry i is m_{i+2}

  const MidpointPath& midpoint(int j) const { return midpoints.at(static_cast<std::size_t>(j - 2)); }
};

// sigma admissible bound: min(zeta, beta_min^2) with zeta = min(v2/4, tau/4)
inline double cutoff_sigma_bound(const Configuration& cfg) {
  const double b2 = cfg.beta_min() * cfg.beta_min();
  if (cfg.size() < 2) return b2;
  const double zeta = std::min(cfg.v2() / 4.0, cfg.tau() / 4.0);
  return std::min(zeta, b2);
}

// Exact-center cutoff: midpoints are closed-form linear functions of t.
// sigma <= 0 selects the default, half the admissible bound.
inline CutoffConfig make_cutoff(const Configuration& cfg, double sigma = 0.0) {
  const double bound = cutoff_sigma_bound(cfg);
  if (!(bound > 0.0))
    throw std::invalid_argument("make_cutoff: admissible sigma bound is not positive (v2 <= 0?)");
  CutoffConfig cut;
  cut.sigma = (sigma > 0.0) ? sigma : 0.5 * bound;
  if (cut.sigma > bound) throw std::invalid_argument("make_cutoff: sigma exceeds min(zeta, beta_min^2)");
  cut.object_count = static_cast<int>(cfg.size());
  for (std::size_t j = 2; j <= cfg.size(); ++j) {
    const auto& lo = cfg.objects[j - 2];
    const auto& hi = cfg.objects[j - 1];
    if (j == 2) {
      const double m0 = 0.5 * (center(lo, 0.0) + center(hi, 0.0));
      const double rate = std::max(0.5 * (velocity(lo) + velocity(hi)), 0.5 * velocity(hi));
      cut.midpoints.push_back(MidpointPath::linear(m0, rate));
    } else {
      const double m0 = 0.5 * (center(lo, 0.0) + center(hi, 0.0));
      const double rate = 0.5 * (velocity(lo) + velocity(hi));
      cut.midpoints.push_back(MidpointPath::linear(m0, rate));
    }
  }
  return cut;
}

// Cutoff from sampled center tracks (one track per object, common time
// axis). m_2 accumulates max((x1'+x2')/2, x2'/2) by the trapezoid rule.
inline CutoffConfig make_cutoff_from_centers(const std::vector<double>& times,
                                             const std::vector<std::vector<double>>& centers,
                                             double sigma, const Configuration& cfg) {
  if (times.size() < 2) throw std::invalid_argument("make_cutoff_from_centers: need >= 2 samples");
  for (const auto& c : centers)
    if (c.size() != times.size())
      throw std::invalid_argument("make_cutoff_from_centers: ragged center tracks");
  const double bound = cutoff_sigma_bound(cfg);
  CutoffConfig cut;
  cut.sigma = (sigma > 0.0) ? sigma : 0.5 * bound;
  if (cut.sigma > bound) throw std::invalid_argument("make_cutoff_from_centers: sigma too large");
  cut.object_count = static_cast<int>(centers.size());
  const std::size_t n = times.size();

  auto rate = [&](const std::vector<double>& c, std::size_t i) {
    if (i == 0) return (c[1] - c[0]) / (times[1] - times[0]);
    if (i + 1 == n) return (c[n - 1] - c[n - 2]) / (times[n - 1] - times[n - 2]);
    return (c[i + 1] - c[i - 1]) / (times[i + 1] - times[i - 1]);
  };

  for (std::size_t j = 2; j <= centers.size(); ++j) {
    const auto& lo = centers[j - 2];
    const auto& hi = centers[j - 1];
    MidpointPath path;
    path.times = times;
    path.values.resize(n);
    if (j == 2) {
      double acc = 0.5 * (lo[0] + hi[0]);
      path.values[0] = acc;
      for (std::size_t i = 1; i < n; ++i) {
        const double g0 = std::max(0.5 * (rate(lo, i - 1) + rate(hi, i - 1)), 0.5 * rate(hi, i - 1));
        const double g1 = std::max(0.5 * (rate(lo, i) + rate(hi, i)), 0.5 * rate(hi, i));
        acc += 0.5 * (g0 + g1) * (times[i] - times[i - 1]);
        path.values[i] = acc;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) path.values[i] = 0.5 * (lo[i] + hi[i]);
    }
    cut.midpoints.push_back(std::move(path));
  }
  return cut;
}

using Triple = std::array<double, 3>;  // (mass-like, energy-like, F-like)

namespace detail {

inline void check_localized_index(const CutoffConfig& cut, int j) {
  if (j < 1 || j > cut.object_count + 1)
    throw std::out_of_range("localized functional index j out of range");
}

// Phi_j(t, x) sampled on the grid; Phi_1 = 1, Phi_{J+1} = 0.
inline Field phi_weight(const Grid& g, const CutoffConfig& cut, int j, double t) {
  Field w(g, t);
  if (j == 1) {
    for (auto& v : w.values) v = 1.0;
    return w;
  }
  if (j == cut.object_count + 1) return w;
  const double m = cut.midpoint(j).at(t);
  for (int i = 0; i < g.points; ++i) w[i] = cutoff_psi(g.node(i) - m, cut.sigma);
  return w;
}

}  // namespace detail

// (M_j, E_j, F_j) with Phi_j(t,x) = Psi(x - m_j(t))
inline Triple localized_triple(const Field& u, const CutoffConfig& cut, int j) {
  detail::check_localized_index(cut, j);
  if (j == cut.object_count + 1) return {0.0, 0.0, 0.0};
  Field phi = detail::phi_weight(u.grid, cut, j, u.time);
  Field ux = spectral_derivative(u, 1);
  Field uxx = spectral_derivative(u, 2);
  detail::KahanSum sm, se, sf;
  for (int i = 0; i < u.size(); ++i) {
    const double v = u[i], v2 = v * v, p = phi[i];
    sm.add(0.5 * v2 * p);
    se.add((0.5 * ux[i] * ux[i] - 0.25 * v2 * v2) * p);
    sf.add((0.5 * uxx[i] * uxx[i] - 2.5 * v2 * ux[i] * ux[i] + 0.25 * v2 * v2 * v2) * p);
  }
  const double h = u.grid.spacing();
  return {h * sm.value(), h * se.value(), h * sf.value()};
}

// int (u^2 + u_x^2 + u_xx^2) Phi_j
inline double localized_h2(const Field& u, const CutoffConfig& cut, int j) {
  detail::check_localized_index(cut, j);
  if (j == cut.object_count + 1) return 0.0;
  Field phi = detail::phi_weight(u.grid, cut, j, u.time);
  Field ux = spectral_derivative(u, 1);
  Field uxx = spectral_derivative(u, 2);
  detail::KahanSum s;
  for (int i = 0; i < u.size(); ++i)
    s.add((u[i] * u[i] + ux[i] * ux[i] + uxx[i] * uxx[i]) * phi[i]);
  return u.grid.spacing() * s.value();
}

// H_j = F_j + 2 (b^2 - a^2) E_j + (a^2 + b^2)^2 M_j
inline double lyapunov(const Field& u, const CutoffConfig& cut, int j, double a_j, double b_j) {
  if (!(b_j > 0.0)) throw std::invalid_argument("lyapunov: b must be > 0");
  const Triple mef = localized_triple(u, cut, j);
  const double a2 = a_j * a_j, b2 = b_j * b_j;
  return mef[2] + 2.0 * (b2 - a2) * mef[1] + (a2 + b2) * (a2 + b2) * mef[0];
}

// (a_j, b_j): (alpha, beta) for a breather, (0, sqrt(c)) for a soliton
inline std::pair<double, double> lyapunov_coefficients(const ObjectParams& o) {
  if (is_soliton(o)) return {0.0, std::sqrt(std::get<SolitonParams>(o).c)};
  const auto& b = std::get<BreatherParams>(o);
  return {b.alpha, b.beta};
}

// ---------------------------------------------------------------------------
// Taylor split of the localized functionals at u = P + eps.

struct TaylorParts {
  Triple constant;   // functionals of P alone
  Triple linear;     // m_j[P], e_j[P], f_j[P]
  Triple quadratic;  // script M_j, E_j[P], F_j[P]
  Triple remainder;  // localized(P + eps) minus the three parts
};

inline TaylorParts taylor_parts(const Field& p, const Field& eps, const CutoffConfig& cut, int j) {
  if (p.grid != eps.grid) throw std::invalid_argument("taylor_parts: grid mismatch");
  detail::check_localized_index(cut, j);

  TaylorParts out{};
  out.constant = localized_triple(p, cut, j);
  if (j == cut.object_count + 1) return out;  // all parts vanish under Phi = 0

  Field phi = detail::phi_weight(p.grid, cut, j, p.time);
  Field px = spectral_derivative(p, 1);
  Field pxx = spectral_derivative(p, 2);
  Field ex = spectral_derivative(eps, 1);
  Field exx = spectral_derivative(eps, 2);

  detail::KahanSum lm, le, lf, qm, qe, qf;
  for (int i = 0; i < p.size(); ++i) {
    const double P = p[i], P2 = P * P, P4 = P2 * P2;
    const double E = eps[i], w = phi[i];
    lm.add(P * E * w);
    le.add((px[i] * ex[i] - P2 * P * E) * w);
    lf.add((pxx[i] * exx[i] - 5.0 * P * px[i] * px[i] * E - 5.0 * P2 * px[i] * ex[i] +
            1.5 * P4 * P * E) *
           w);
    qm.add(0.5 * E * E * w);
    qe.add((0.5 * ex[i] * ex[i] - 1.5 * P2 * E * E) * w);
    qf.add((0.5 * exx[i] * exx[i] - 2.5 * px[i] * px[i] * E * E - 10.0 * P * px[i] * E * ex[i] -
            2.5 * P2 * ex[i] * ex[i] + 3.75 * P4 * E * E) *
           w);
  }
  const double h = p.grid.spacing();
  out.linear = {h * lm.value(), h * le.value(), h * lf.value()};
  out.quadratic = {h * qm.value(), h * qe.value(), h * qf.value()};

  const Triple full = localized_triple(p + eps, cut, j);
  for (int k = 0; k < 3; ++k)
    out.remainder[k] = full[k] - out.constant[k] - out.linear[k] - out.quadratic[k];
  return out;
}

// ---------------------------------------------------------------------------
// Exact rates of weighted functionals along the flow: for a time-
// independent C^3 weight f,
//   d/dt 1/2 int u^2 f, d/dt int [u_x^2/2 - u^4/4] f,
//   d/dt int [u_xx^2/2 - 5/2 u^2 u_x^2 + u^6/4] f
// equal the three integrals below.

struct SpatialWeight {
  Field f, fx, fxx, fxxx;
};

inline SpatialWeight psi_weight(const Grid& g, double m, double sigma, double time = 0.0) {
  SpatialWeight w{Field(g, time), Field(g, time), Field(g, time), Field(g, time)};
  for (int i = 0; i < g.points; ++i) {
    const double x = g.node(i) - m;
    w.f[i] = cutoff_psi(x, sigma);
    w.fx[i] = cutoff_psi_d1(x, sigma);
    w.fxx[i] = cutoff_psi_d2(x, sigma);
    w.fxxx[i] = cutoff_psi_d3(x, sigma);
  }
  return w;
}

inline SpatialWeight unit_weight(const Grid& g, double time = 0.0) {
  SpatialWeight w{Field(g, time), Field(g, time), Field(g, time), Field(g, time)};
  for (auto& v : w.f.values) v = 1.0;
  return w;
}

inline Triple appendix_rhs(const Field& u, const SpatialWeight& w) {
  if (u.grid != w.f.grid) throw std::invalid_argument("appendix_rhs: grid mismatch");
  Field ux = spectral_derivative(u, 1);
  Field uxx = spectral_derivative(u, 2);
  Field uxxx = spectral_derivative(u, 3);
  detail::KahanSum rm, re, rf;
  for (int i = 0; i < u.size(); ++i) {
    const double v = u[i], v2 = v * v, v4 = v2 * v2;
    const double x1 = ux[i], x2 = uxx[i], x3 = uxxx[i];
    rm.add((-1.5 * x1 * x1 + 0.75 * v4) * w.fx[i] + 0.5 * v2 * w.fxxx[i]);

    const double q = x2 + v * v2;
    re.add((-0.5 * q * q - x2 * x2 + 3.0 * v2 * x1 * x1) * w.fx[i] + 0.5 * x1 * x1 * w.fxxx[i]);

    rf.add((-1.5 * x3 * x3 + 9.0 * x2 * x2 * v2 + 15.0 * x1 * x1 * v * x2 + 0.5625 * v4 * v4 +
            0.25 * x1 * x1 * x1 * x1 + 1.5 * x2 * v4 * v - 11.25 * v4 * x1 * x1) *
               w.fx[i] +
           5.0 * v2 * x1 * x2 * w.fxx[i] + 0.5 * x2 * x2 * w.fxxx[i]);
  }
  const double h = u.grid.spacing();
  return {h * rm.value(), h * re.value(), h * rf.value()};
}

// d/dt of (M_j, E_j, F_j) including the motion of the midpoint:
// the weighted-functional rate above plus -m_j' int (integrand) Phi_jx.
inline Triple localized_rate(const Field& u, const CutoffConfig& cut, int j) {
  detail::check_localized_index(cut, j);
  if (j == 1 || j == cut.object_count + 1) return {0.0, 0.0, 0.0};
  const double m = cut.midpoint(j).at(u.time);
  const double mrate = cut.midpoint(j).rate_at(u.time);
  SpatialWeight w = psi_weight(u.grid, m, cut.sigma, u.time);
  Triple rhs = appendix_rhs(u, w);
  Field ux = spectral_derivative(u, 1);
  Field uxx = spectral_derivative(u, 2);
  detail::KahanSum cm, ce, cf;
  for (int i = 0; i < u.size(); ++i) {
    const double v = u[i], v2 = v * v, px = w.fx[i];
    cm.add(0.5 * v2 * px);
    ce.add((0.5 * ux[i] * ux[i] - 0.25 * v2 * v2) * px);
    cf.add((0.5 * uxx[i] * uxx[i] - 2.5 * v2 * ux[i] * ux[i] + 0.25 * v2 * v2 * v2) * px);
  }
  const double h = u.grid.spacing();
  rhs[0] -= mrate * h * cm.value();
  rhs[1] -= mrate * h * ce.value();
  rhs[2] -= mrate * h * cf.value();
  return rhs;
}

// ---------------------------------------------------------------------------
// Snapshot of every functional the analysis tracks at one time.

struct FunctionalReport {
  double time = 0.0;
  double mass_value = 0.0;
  double energy_value = 0.0;
  double f_second_value = 0.0;
  std::vector<Triple> localized;        // j = 1..J
  std::vector<double> lyapunov_values;  // H_j, j = 1..J
  std::vector<Triple> quadratic_parts;  // (script M_j, E_j, F_j)[P_j], j = 1..J
  std::vector<double> quadratic_combo;  // Q_j, same combination as H_j
};

// P_j is evaluated per object from `fitted`; eps is u - sum(fitted).
inline FunctionalReport functional_report(const Field& u, const Configuration& fitted,
                                          const Field& eps, const CutoffConfig& cut) {
  FunctionalReport rep;
  rep.time = u.time;
  rep.mass_value = mass(u);
  rep.energy_value = energy(u);
  rep.f_second_value = f_second(u);
  const int J = cut.object_count;
  for (int j = 1; j <= J; ++j) {
    rep.localized.push_back(localized_triple(u, cut, j));
    const auto [a, b] = lyapunov_coefficients(fitted.objects[static_cast<std::size_t>(j - 1)]);
    rep.lyapunov_values.push_back(lyapunov(u, cut, j, a, b));
    Field pj = eval_object(fitted.objects[static_cast<std::size_t>(j - 1)], u.time, u.grid);
    const Triple q = taylor_parts(pj, eps, cut, j).quadratic;
    rep.quadratic_parts.push_back(q);
    const double a2 = a * a, b2 = b * b;
    rep.quadratic_combo.push_back(q[2] + 2.0 * (b2 - a2) * q[1] + (a2 + b2) * (a2 + b2) * q[0]);
  }
  return rep;
}

}  // namespace mkdv

#pragma once

// Modulation decomposition u = P~ + eps: translation/shape parameters
// of each object are adjusted until eps is orthogonal to the
// parameter-variation directions (R~ and d/dx R~ per soliton,
// d/dx1 B~ and d/dx2 B~ per breather).
//
// Solitons are iterated in the chart (c, s) where s is the profile
// shift at the snapshot time; the two directions then stay well
// conditioned for all t. Reported parameters use x0 = s - c t.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkdv/grid.hpp"
#include "mkdv/integrator.hpp"
#include "mkdv/solutions.hpp"

namespace mkdv {

struct ModulationResult {
  Configuration params;                 // fitted; epsilon = u - eval_sum(params)
  double time = 0.0;
  Field epsilon;
  std::vector<double> ortho_residuals;  // one entry per orthogonality condition
  double h2_of_epsilon = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;  // max-norm of the condition vector per iterate
};

struct ModulationTrack {
  std::vector<ModulationResult> results;
  std::vector<std::vector<double>> parameter_rates;  // [snapshot][parameter]
  bool truncated = false;
  double truncated_at = 0.0;
};

namespace detail {

// internal unknowns: soliton (c, shift), breather (x1, x2)
struct FitState {
  std::vector<double> z;

  static FitState from(const Configuration& cfg, double t) {
    FitState s;
    for (const auto& o : cfg.objects) {
      if (is_soliton(o)) {
        const auto& p = std::get<SolitonParams>(o);
        s.z.push_back(p.c);
        s.z.push_back(p.c * t + p.x0);
      } else {
        const auto& p = std::get<BreatherParams>(o);
        s.z.push_back(p.x1);
        s.z.push_back(p.x2);
      }
    }
    return s;
  }

  Configuration to_config(const Configuration& like, double t) const {
    Configuration out = like;
    for (std::size_t i = 0; i < out.objects.size(); ++i) {
      if (is_soliton(out.objects[i])) {
        auto p = std::get<SolitonParams>(out.objects[i]);
        p.c = z[2 * i];
        p.x0 = z[2 * i + 1] - p.c * t;
        out.objects[i] = p;
      } else {
        auto p = std::get<BreatherParams>(out.objects[i]);
        p.x1 = z[2 * i];
        p.x2 = z[2 * i + 1];
        out.objects[i] = p;
      }
    }
    out.validate();
    return out;
  }
};

// in-place partial-pivot LU solve; returns an infinity-norm condition
// estimate through repeated solves
class DenseSolver {
 public:
  explicit DenseSolver(std::vector<std::vector<double>> a) : a_(std::move(a)), n_(a_.size()), piv_(n_) {
    norm_ = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double row = 0.0;
      for (double v : a_[i]) row += std::abs(v);
      norm_ = std::max(norm_, row);
    }
    factorize();
  }

  bool singular() const { return singular_; }

  double condition() const {
    if (singular_) return std::numeric_limits<double>::infinity();
    double inv_norm = 0.0;
    std::vector<double> e(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      std::fill(e.begin(), e.end(), 0.0);
      e[j] = 1.0;
      std::vector<double> x = solve(e);
      double col = 0.0;
      for (double v : x) col += std::abs(v);
      inv_norm = std::max(inv_norm, col);
    }
    return norm_ * inv_norm;
  }

  std::vector<double> solve(std::vector<double> b) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (piv_[i] != i) std::swap(b[i], b[piv_[i]]);
    // forward
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < i; ++j) b[i] -= a_[i][j] * b[j];
    // back
    for (std::size_t i = n_; i-- > 0;) {
      for (std::size_t j = i + 1; j < n_; ++j) b[i] -= a_[i][j] * b[j];
      b[i] /= a_[i][i];
    }
    return b;
  }

 private:
  void factorize() {
    for (std::size_t k = 0; k < n_; ++k) {
      std::size_t p = k;
      for (std::size_t i = k + 1; i < n_; ++i)
        if (std::abs(a_[i][k]) > std::abs(a_[p][k])) p = i;
      piv_[k] = p;
      if (p != k) std::swap(a_[k], a_[p]);
      if (a_[k][k] == 0.0) {
        singular_ = true;
        return;
      }
      for (std::size_t i = k + 1; i < n_; ++i) {
        a_[i][k] /= a_[k][k];
        for (std::size_t j = k + 1; j < n_; ++j) a_[i][j] -= a_[i][k] * a_[k][j];
      }
    }
  }

  std::vector<std::vector<double>> a_;
  std::size_t n_;
  std::vector<std::size_t> piv_;
  double norm_ = 0.0;
  bool singular_ = false;
};

struct FitFields {
  Field profile_sum;                  // P~(z)
  std::vector<Field> directions;      // orthogonality directions, 2 per object
  std::vector<Field> gradients;       // dP~/dz_m, 2 per object
};

inline FitFields assemble_fit_fields(const std::vector<double>& z, const Configuration& like,
                                     double t, const Grid& g) {
  FitFields out{Field(g, t), {}, {}};
  for (std::size_t i = 0; i < like.objects.size(); ++i) {
    const double z0 = z[2 * i], z1 = z[2 * i + 1];
    if (is_soliton(like.objects[i])) {
      const auto& p = std::get<SolitonParams>(like.objects[i]);
      if (!(z0 > 0.0)) throw std::runtime_error("modulation: shape parameter left c > 0");
      Field r = soliton_shifted(z0, p.kappa, z1, g, t);
      out.profile_sum = out.profile_sum + r;
      out.directions.push_back(r);
      out.directions.push_back(spectral_derivative(r, 1));
      out.gradients.push_back(soliton_shape_gradient(z0, p.kappa, z1, g, t));
      out.gradients.push_back(soliton_shift_gradient(z0, p.kappa, z1, g, t));
    } else {
      auto p = std::get<BreatherParams>(like.objects[i]);
      p.x1 = z0;
      p.x2 = z1;
      out.profile_sum = out.profile_sum + eval_breather(p, t, g);
      auto grads = breather_translation_gradients(p, t, g);
      out.directions.push_back(grads[0]);
      out.directions.push_back(grads[1]);
      out.gradients.push_back(std::move(grads[0]));
      out.gradients.push_back(std::move(grads[1]));
    }
  }
  return out;
}

inline std::vector<double> ortho_conditions(const FitFields& fields, const Field& u) {
  Field eps = u - fields.profile_sum;
  std::vector<double> g(fields.directions.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = inner(fields.directions[i], eps);
  return g;
}

inline double max_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace detail

// Newton with backtracking on the orthogonality integrals. The guess
// must place each object nearer to its own target than to any
// neighbor's; radius min(gap/4, pi/(2 alpha)) guards phase aliasing and
// object swaps.
inline ModulationResult fit(const Field& u, const Configuration& guess, double tol = 1e-10,
                            int max_iter = 50) {
  detail::require_finite(u, "modulation fit");
  if (!(tol > 0.0)) throw std::invalid_argument("fit: tol must be > 0");
  const double t = u.time;
  const Grid& g = u.grid;
  const std::size_t nobj = guess.objects.size();

  ModulationResult res;
  res.time = t;
  if (nobj == 0) {
    res.params = guess;
    res.epsilon = u;
    res.h2_of_epsilon = h2_norm(u);
    res.converged = true;
    return res;
  }

  // basin guard radii around the guess centers
  std::vector<double> guess_centers(nobj), radius(nobj);
  for (std::size_t i = 0; i < nobj; ++i) guess_centers[i] = center(guess.objects[i], t);
  for (std::size_t i = 0; i < nobj; ++i) {
    double gap = std::numeric_limits<double>::infinity();
    if (i > 0) gap = std::min(gap, std::abs(guess_centers[i] - guess_centers[i - 1]));
    if (i + 1 < nobj) gap = std::min(gap, std::abs(guess_centers[i + 1] - guess_centers[i]));
    double r = gap / 4.0;
    if (!is_soliton(guess.objects[i])) {
      const auto& b = std::get<BreatherParams>(guess.objects[i]);
      r = std::min(r, 0.5 * kPi / b.alpha);
    }
    radius[i] = r;
  }

  detail::FitState state = detail::FitState::from(guess, t);
  auto fields = detail::assemble_fit_fields(state.z, guess, t, g);
  std::vector<double> cond = detail::ortho_conditions(fields, u);
  double gnorm = detail::max_norm(cond);
  res.residual_history.push_back(gnorm);

  int it = 0;
  while (gnorm > tol && it < max_iter) {
    ++it;
    const std::size_t m = 2 * nobj;
    std::vector<std::vector<double>> jac(m, std::vector<double>(m));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t mcol = 0; mcol < m; ++mcol)
        jac[i][mcol] = -inner(fields.directions[i], fields.gradients[mcol]);
    detail::DenseSolver solver(std::move(jac));
    if (solver.singular() || solver.condition() > 1e12)
      throw std::runtime_error("modulation: degenerate direction set (condition number > 1e12)");

    std::vector<double> rhs(cond);
    for (auto& v : rhs) v = -v;
    std::vector<double> step = solver.solve(rhs);

    // backtracking: halve until the residual norm decreases
    double lambda = 1.0;
    detail::FitState trial = state;
    detail::FitFields trial_fields;
    std::vector<double> trial_cond;
    double trial_norm = gnorm;
    bool took_step = false;
    for (int halving = 0; halving <= 20; ++halving) {
      for (std::size_t k = 0; k < m; ++k) trial.z[k] = state.z[k] + lambda * step[k];
      try {
        trial_fields = detail::assemble_fit_fields(trial.z, guess, t, g);
        trial_cond = detail::ortho_conditions(trial_fields, u);
      } catch (const std::exception&) {
        // trial left the admissible parameter set; shorten the step
        lambda *= 0.5;
        continue;
      }
      trial_norm = detail::max_norm(trial_cond);
      took_step = true;
      if (trial_norm < gnorm) break;
      lambda *= 0.5;
    }
    if (!took_step) break;  // no admissible step found; report best iterate
    state = trial;
    fields = std::move(trial_fields);
    cond = std::move(trial_cond);
    gnorm = trial_norm;
    res.residual_history.push_back(gnorm);

    // basin guard: neither the center nor a breather phase may leave
    // the neighborhood of the guess
    Configuration now;
    try {
      now = state.to_config(guess, t);
    } catch (const std::exception&) {
      throw std::runtime_error("modulation: object swap (velocity ordering crossed)");
    }
    for (std::size_t i = 0; i < nobj; ++i) {
      double moved = std::abs(center(now.objects[i], t) - guess_centers[i]);
      if (!is_soliton(now.objects[i])) {
        const double dx1 = std::get<BreatherParams>(now.objects[i]).x1 -
                           std::get<BreatherParams>(guess.objects[i]).x1;
        moved = std::max(moved, std::abs(dx1));
      }
      if (moved > radius[i])
        throw std::runtime_error("modulation: object swap (object " + std::to_string(i) +
                                 " left its basin)");
    }
  }

  res.params = state.to_config(guess, t);
  res.epsilon = u - fields.profile_sum;
  res.ortho_residuals = cond;
  res.h2_of_epsilon = h2_norm(res.epsilon);
  res.iterations = it;
  res.converged = (gnorm <= tol);
  return res;
}

// Per-snapshot fit, warm-started; rates by centered differences.
inline ModulationTrack track_fields(const std::vector<Field>& snapshots,
                                    const Configuration& initial_guess, double tol = 1e-10,
                                    int max_iter = 50) {
  ModulationTrack out;
  if (initial_guess.objects.empty()) return out;
  Configuration guess = initial_guess;
  for (const auto& f : snapshots) {
    ModulationResult r;
    try {
      r = fit(f, guess, tol, max_iter);
    } catch (const std::exception&) {
      out.truncated = true;
      out.truncated_at = f.time;
      break;
    }
    if (!r.converged) {
      out.truncated = true;
      out.truncated_at = f.time;
      out.results.push_back(std::move(r));
      break;
    }
    guess = r.params;
    out.results.push_back(std::move(r));
  }

  // parameter rates by centered differences over the fitted samples
  const std::size_t n = out.results.size();
  if (n >= 2) {
    auto value = [&](std::size_t snap, std::size_t p) {
      const auto& o = out.results[snap].params.objects[p / 2];
      if (is_soliton(o)) {
        const auto& s = std::get<SolitonParams>(o);
        return (p % 2 == 0) ? s.c : s.x0;
      }
      const auto& b = std::get<BreatherParams>(o);
      return (p % 2 == 0) ? b.x1 : b.x2;
    };
    const std::size_t np = 2 * initial_guess.objects.size();
    out.parameter_rates.assign(n, std::vector<double>(np, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = (i == 0) ? 0 : i - 1;
      const std::size_t hi = (i + 1 == n) ? i : i + 1;
      const double dtm = out.results[hi].time - out.results[lo].time;
      for (std::size_t p = 0; p < np; ++p)
        out.parameter_rates[i][p] = (value(hi, p) - value(lo, p)) / dtm;
    }
  }
  return out;
}

inline ModulationTrack track(const Trajectory& traj, const Configuration& initial_guess,
                             double tol = 1e-10, int max_iter = 50) {
  return track_fields(traj.snapshots, initial_guess, tol, max_iter);
}

// Consequence residuals of the fitted orthogonality conditions through
// the soliton elliptic identities; two entries per soliton, in
// configuration order.
inline std::vector<double> ortho_extended_residuals(const ModulationResult& r) {
  std::vector<double> out;
  const Field& eps = r.epsilon;
  for (const auto& o : r.params.objects) {
    if (!is_soliton(o)) continue;
    Field rfield = eval_object(o, r.time, eps.grid);
    Field rx = spectral_derivative(rfield, 1);
    Field rxx = spectral_derivative(rfield, 2);
    Field rxxxx = spectral_derivative(rfield, 4);
    detail::KahanSum se, sf;
    for (int i = 0; i < eps.size(); ++i) {
      const double v = rfield[i];
      se.add((rxx[i] + v * v * v) * eps[i]);
      sf.add((rxxxx[i] + 5.0 * v * rx[i] * rx[i] + 5.0 * v * v * rxx[i] + 1.5 * v * v * v * v * v) *
             eps[i]);
    }
    out.push_back(eps.grid.spacing() * se.value());
    out.push_back(eps.grid.spacing() * sf.value());
  }
  return out;
}

}  // namespace mkdv

#include "catch2/catch_amalgamated.hpp"

#include "mkdv/modulation.hpp"

#include <cmath>
#include <random>

using namespace mkdv;

namespace {

const Grid kGrid(100.0, 2048);

Configuration two_objects() {
  return Configuration({SolitonParams(1.0, 1, -20.0), BreatherParams(0.8, 2.0, 0.3, -20.0)});
}

Field h2_normalized_noise(const Grid& g, unsigned seed, double target) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Field f(g);
  for (int r = 1; r <= g.points / 8; ++r) {
    const double a = gauss(rng), b = gauss(rng);
    const double k = g.wavenumber(r);
    // weight down high modes so the draw is H2-regular
    const double w = 1.0 / (1.0 + k * k * k);
    for (int i = 0; i < g.points; ++i) {
      const double x = g.node(i);
      f[i] += w * (a * std::cos(k * x) + b * std::sin(k * x));
    }
  }
  const double scale = target / h2_norm(f);
  for (auto& v : f.values) v *= scale;
  return f;
}

double max_param_diff(const Configuration& a, const Configuration& b) {
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
}

}  // namespace

TEST_CASE("identity fit converges immediately", "[modulation]") {
  Configuration cfg = two_objects();
  Field u = eval_sum(cfg, 0.0, kGrid);
  ModulationResult r = fit(u, cfg);
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
  CHECK(max_abs(r.epsilon) < 1e-12);
  CHECK(max_param_diff(r.params, cfg) < 1e-12);
  for (double g : r.ortho_residuals) CHECK(std::abs(g) <= 1e-10);
}

TEST_CASE("shifted object is recovered", "[modulation]") {
  Configuration truth = two_objects();
  std::get<SolitonParams>(truth.objects[0]).x0 += 0.1;
  Field u = eval_sum(truth, 0.0, kGrid);

  ModulationResult r = fit(u, two_objects());
  CHECK(r.converged);
  CHECK(max_param_diff(r.params, truth) < 1e-10);
  CHECK(h2_norm(r.epsilon) < 1e-10);

  // residual decreases monotonically across iterates
  for (std::size_t i = 1; i < r.residual_history.size(); ++i)
    CHECK(r.residual_history[i] < r.residual_history[i - 1]);
}

TEST_CASE("fit at a later snapshot time", "[modulation]") {
  Configuration truth = two_objects();
  const double t = 7.5;
  Field u = eval_sum(truth, t, kGrid);
  Configuration guess = truth;
  std::get<BreatherParams>(guess.objects[1]).x1 -= 0.05;
  std::get<BreatherParams>(guess.objects[1]).x2 += 0.05;
  std::get<SolitonParams>(guess.objects[0]).c += 0.02;
  ModulationResult r = fit(u, guess);
  CHECK(r.converged);
  CHECK(max_param_diff(r.params, truth) < 1e-9);
}

TEST_CASE("linear response to small perturbations", "[modulation]") {
  Configuration truth = two_objects();
  for (double a : {1e-4, 1e-3, 1e-2}) {
    Field u = eval_sum(truth, 0.0, kGrid) + h2_normalized_noise(kGrid, 37u, a);
    ModulationResult r = fit(u, truth);
    CHECK(r.converged);
    CHECK(max_param_diff(r.params, truth) <= 10.0 * a);
    CHECK(r.h2_of_epsilon <= 2.0 * a);
    for (double g : r.ortho_residuals) CHECK(std::abs(g) <= 1e-10);
  }
}

TEST_CASE("translation equivariance", "[modulation]") {
  Configuration truth = two_objects();
  const double shift = 64 * kGrid.spacing();  // exact circular shift

  Field u = eval_sum(truth, 0.0, kGrid) + h2_normalized_noise(kGrid, 5u, 1e-3);
  Configuration moved = truth;
  std::get<SolitonParams>(moved.objects[0]).x0 += shift;
  std::get<BreatherParams>(moved.objects[1]).x1 -= shift;
  std::get<BreatherParams>(moved.objects[1]).x2 -= shift;
  Field u_shifted(kGrid, 0.0);
  for (int i = 0; i < kGrid.points; ++i)
    u_shifted[i] = u[(i - 64 + kGrid.points) % kGrid.points];

  ModulationResult base = fit(u, truth);
  ModulationResult trans = fit(u_shifted, moved);
  REQUIRE(base.converged);
  REQUIRE(trans.converged);

  // fitted fields reproduce the translation exactly
  Field pa = eval_sum(base.params, 0.0, kGrid);
  Field pb = eval_sum(trans.params, 0.0, kGrid);
  double worst = 0.0;
  for (int i = 0; i < kGrid.points; ++i)
    worst = std::max(worst, std::abs(pb[i] - pa[(i - 64 + kGrid.points) % kGrid.points]));
  CHECK(worst < 1e-9);

  // and the position parameters shift accordingly
  const auto& s0 = std::get<SolitonParams>(base.params.objects[0]);
  const auto& s1 = std::get<SolitonParams>(trans.params.objects[0]);
  CHECK(s1.x0 - s0.x0 == Catch::Approx(shift).margin(1e-9));
  const auto& b0 = std::get<BreatherParams>(base.params.objects[1]);
  const auto& b1 = std::get<BreatherParams>(trans.params.objects[1]);
  CHECK(b1.x2 - b0.x2 == Catch::Approx(-shift).margin(1e-9));
}

TEST_CASE("failure modes", "[modulation]") {
  Configuration truth = two_objects();
  Field u = eval_sum(truth, 0.0, kGrid);

  SECTION("iteration cap reported as non-convergence") {
    Configuration guess = truth;
    std::get<SolitonParams>(guess.objects[0]).x0 += 0.5;
    ModulationResult r = fit(u, guess, 1e-14, 1);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 1);
  }

  SECTION("basin guard flags a swap attempt") {
    // tight pair (gap 12 -> radius 3) with the guess 4 away from the
    // truth: the iteration has to cross the basin boundary
    Configuration tight({SolitonParams(0.5, 1, -6.0), SolitonParams(1.0, 1, 2.0)});
    Field v = eval_sum(tight, 0.0, kGrid);
    Configuration guess = tight;
    std::get<SolitonParams>(guess.objects[1]).x0 = 6.0;
    CHECK_THROWS_WITH(fit(v, guess), Catch::Matchers::ContainsSubstring("swap"));
  }

  SECTION("degenerate direction set") {
    Configuration clones({SolitonParams(1.0, 1, 0.0), SolitonParams(1.0 + 1e-13, 1, 0.0)});
    Field v = eval_sum(clones, 0.0, kGrid);
    for (auto& val : v.values) val *= 1.0 + 1e-6;  // force an iteration
    CHECK_THROWS_WITH(fit(v, clones), Catch::Matchers::ContainsSubstring("degenerate"));
  }
}

TEST_CASE("empty configuration yields a trivial fit and empty track", "[modulation]") {
  Field u = eval_soliton(SolitonParams(1.0, 1, 0.0), 0.0, kGrid);
  ModulationResult r = fit(u, Configuration{});
  CHECK(r.converged);
  CHECK(max_abs(r.epsilon - u) == 0.0);

  ModulationTrack tr = track_fields({u}, Configuration{});
  CHECK(tr.results.empty());
  CHECK_FALSE(tr.truncated);
}

TEST_CASE("track follows an exact sum evolution", "[modulation]") {
  Configuration truth = two_objects();
  std::vector<Field> snaps;
  for (double t : {0.0, 0.5, 1.0, 1.5, 2.0}) snaps.push_back(eval_sum(truth, t, kGrid));
  ModulationTrack tr = track_fields(snaps, truth);
  REQUIRE(tr.results.size() == snaps.size());
  CHECK_FALSE(tr.truncated);
  for (const auto& r : tr.results) {
    CHECK(r.converged);
    CHECK(max_param_diff(r.params, truth) < 1e-8);
  }
  // shape parameter steady, rates near zero
  REQUIRE(tr.parameter_rates.size() == snaps.size());
  for (const auto& rates : tr.parameter_rates) {
    CHECK(std::abs(rates[0]) < 1e-8);  // soliton c
    CHECK(std::abs(rates[1]) < 1e-7);  // soliton x0
  }
}

TEST_CASE("extended orthogonality residuals", "[modulation]") {
  Configuration truth = two_objects();
  Field u = eval_sum(truth, 0.0, kGrid) + h2_normalized_noise(kGrid, 11u, 1e-3);
  ModulationResult r = fit(u, truth, 1e-10);
  REQUIRE(r.converged);
  auto ext = ortho_extended_residuals(r);
  REQUIRE(ext.size() == 2);  // one soliton -> two residuals
  for (double v : ext) CHECK(std::abs(v) < 1e-9);

  // zero perturbation: all residuals at roundoff
  ModulationResult clean = fit(eval_sum(truth, 0.0, kGrid), truth);
  for (double v : ortho_extended_residuals(clean)) CHECK(std::abs(v) < 1e-12);

  // soliton-free configuration: nothing to report
  Configuration bonly({BreatherParams(0.8, 2.0, 0.0, 0.0)});
  ModulationResult rb = fit(eval_sum(bonly, 0.0, kGrid), bonly);
  CHECK(ortho_extended_residuals(rb).empty());
}

#pragma once

// Closed-form solitons and breathers of u_t + (u_xx + u^3)_x = 0,
// their spatial/parameter derivatives, velocities and centers, and
// residuals of the elliptic equations they satisfy.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mkdv/grid.hpp"
#include "mkdv/warnings.hpp"

namespace mkdv {

struct SolitonParams {
  double c = 1.0;   // shape parameter; also the velocity
  int kappa = 1;    // sign, +1 or -1
  double x0 = 0.0;  // initial center offset

  SolitonParams() = default;
  SolitonParams(double c_, int kappa_, double x0_) : c(c_), kappa(kappa_), x0(x0_) {
    if (!(c > 0.0)) throw std::invalid_argument("SolitonParams: c must be > 0");
    if (kappa != 1 && kappa != -1) throw std::invalid_argument("SolitonParams: kappa must be +-1");
  }
};

struct BreatherParams {
  double alpha = 1.0;  // frequency
  double beta = 1.0;   // shape / decay rate
  double x1 = 0.0;     // phase offset
  double x2 = 0.0;     // position offset

  BreatherParams() = default;
  BreatherParams(double alpha_, double beta_, double x1_, double x2_)
      : alpha(alpha_), beta(beta_), x1(x1_), x2(x2_) {
    if (!(alpha > 0.0)) throw std::invalid_argument("BreatherParams: alpha must be > 0");
    if (!(beta > 0.0)) throw std::invalid_argument("BreatherParams: beta must be > 0");
  }

  // phase/position frame speeds of the two internal coordinates
  double delta() const { return alpha * alpha - 3.0 * beta * beta; }
  double gamma() const { return 3.0 * alpha * alpha - beta * beta; }
};

using ObjectParams = std::variant<SolitonParams, BreatherParams>;

inline bool is_soliton(const ObjectParams& o) { return std::holds_alternative<SolitonParams>(o); }

inline double velocity(const ObjectParams& o) {
  if (is_soliton(o)) return std::get<SolitonParams>(o).c;
  const auto& b = std::get<BreatherParams>(o);
  return b.beta * b.beta - 3.0 * b.alpha * b.alpha;
}

inline double center(const ObjectParams& o, double t) {
  if (is_soliton(o)) {
    const auto& s = std::get<SolitonParams>(o);
    return s.x0 + s.c * t;
  }
  const auto& b = std::get<BreatherParams>(o);
  return -b.x2 + velocity(o) * t;
}

// Ordered list of objects; velocities must be pairwise distinct and
// increasing along the list.
struct Configuration {
  std::vector<ObjectParams> objects;

  Configuration() = default;
  explicit Configuration(std::vector<ObjectParams> objs) : objects(std::move(objs)) { validate(); }

  void validate() const {
    for (std::size_t i = 1; i < objects.size(); ++i) {
      const double dv = velocity(objects[i]) - velocity(objects[i - 1]);
      if (dv == 0.0) throw std::invalid_argument("Configuration: velocities must be distinct");
      if (dv < 0.0) throw std::invalid_argument("Configuration: objects must be sorted by velocity");
    }
  }

  std::size_t size() const { return objects.size(); }

  // worst pairwise velocity gap
  double tau() const {
    double t = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < objects.size(); ++i)
      t = std::min(t, velocity(objects[i]) - velocity(objects[i - 1]));
    return t;
  }

  // worst exponential decay rate: min over beta_k and sqrt(c_l)
  double beta_min() const {
    double b = std::numeric_limits<double>::infinity();
    for (const auto& o : objects) {
      if (is_soliton(o))
        b = std::min(b, std::sqrt(std::get<SolitonParams>(o).c));
      else
        b = std::min(b, std::get<BreatherParams>(o).beta);
    }
    return b;
  }

  double v2() const {
    if (objects.size() < 2) throw std::logic_error("Configuration::v2 needs at least 2 objects");
    return velocity(objects[1]);
  }
};

namespace detail {

inline double sech(double z) {
  const double e = std::exp(-std::abs(z));
  return 2.0 * e / (1.0 + e * e);
}

// representative of y closest to 0 modulo the box length
inline double wrap(double y, double box) { return y - box * std::floor(y / box + 0.5); }

// Breather pointwise value and partials in the internal coordinates
// y1 (phase) and y2 (position). All expressions are scaled by sech so
// they stay finite for large |y2|.
struct BreatherPoint {
  double value;
  double d_y1;
  double d_y2;
};

inline BreatherPoint breather_point(const BreatherParams& p, double y1, double y2) {
  const double a = p.alpha, b = p.beta;
  const double s1 = std::sin(a * y1), c1 = std::cos(a * y1);
  const double th = std::tanh(b * y2), se = sech(b * y2);
  const double r = b / a;

  const double P = se * (b * c1 - r * b * s1 * th);
  const double W = 1.0 + r * r * s1 * s1 * se * se;
  const double dP1 = se * (-a * b * s1 - b * b * c1 * th);
  const double dW1 = 2.0 * r * b * s1 * c1 * se * se;
  const double dP2 = -b * b * c1 * se * th + r * b * b * s1 * se * (th * th - se * se);
  const double dW2 = -2.0 * r * r * b * s1 * s1 * se * se * th;

  const double amp = 2.0 * std::sqrt(2.0);
  BreatherPoint out;
  out.value = amp * P / W;
  out.d_y1 = amp * (dP1 * W - P * dW1) / (W * W);
  out.d_y2 = amp * (dP2 * W - P * dW2) / (W * W);
  return out;
}

inline double soliton_q(double c, double x) { return std::sqrt(2.0 * c) * sech(std::sqrt(c) * x); }

inline double soliton_qx(double c, double x) {
  const double rc = std::sqrt(c);
  return -rc * soliton_q(c, x) * std::tanh(rc * x);
}

inline void check_tail(double boundary_value, const char* what) {
  if (std::abs(boundary_value) > 1e-10)
    warn(std::string(what) + ": profile tail at box edge is " + std::to_string(boundary_value) +
         "; enlarge the grid");
}

}  // namespace detail

// Q_c(x) = (2c / cosh^2(sqrt(c) x))^(1/2)
inline double soliton_profile(double c, double x) {
  if (!(c > 0.0)) throw std::invalid_argument("soliton_profile: c must be > 0");
  return detail::soliton_q(c, x);
}

// kappa * Q_c(x - shift), displacement wrapped to the periodic box
inline Field soliton_shifted(double c, int kappa, double shift, const Grid& g, double time) {
  Field f(g, time);
  for (int i = 0; i < g.points; ++i) {
    f[i] = kappa * detail::soliton_q(c, detail::wrap(g.node(i) - shift, g.length));
  }
  return f;
}

inline Field eval_soliton(const SolitonParams& p, double t, const Grid& g) {
  Field f = soliton_shifted(p.c, p.kappa, p.c * t + p.x0, g, t);
  const double edge = detail::soliton_q(p.c, 0.5 * g.length);
  detail::check_tail(edge, "eval_soliton");
  return f;
}

inline Field eval_breather(const BreatherParams& p, double t, const Grid& g) {
  Field f(g, t);
  const double d = p.delta(), gm = p.gamma();
  for (int i = 0; i < g.points; ++i) {
    const double x = g.node(i);
    const double y2 = x + gm * t + p.x2;
    const double n = std::floor(y2 / g.length + 0.5);
    const double y1 = x + d * t + p.x1 - n * g.length;
    f[i] = detail::breather_point(p, y1, y2 - n * g.length).value;
  }
  // envelope bound at the torus point farthest from the center
  const double edge = 2.0 * std::sqrt(2.0) * p.beta * (1.0 + p.beta / p.alpha) *
                      detail::sech(p.beta * 0.5 * g.length);
  detail::check_tail(edge, "eval_breather");
  return f;
}

inline Field eval_object(const ObjectParams& o, double t, const Grid& g) {
  if (is_soliton(o)) return eval_soliton(std::get<SolitonParams>(o), t, g);
  return eval_breather(std::get<BreatherParams>(o), t, g);
}

inline Field eval_sum(const Configuration& cfg, double t, const Grid& g) {
  Field sum(g, t);
  for (const auto& o : cfg.objects) sum = sum + eval_object(o, t, g);
  return sum;
}

// d/dc of Q_c(x - shift) at fixed shift: (Q_c + xi Q_c')/(2c)
inline Field soliton_shape_gradient(double c, int kappa, double shift, const Grid& g, double time) {
  Field f(g, time);
  for (int i = 0; i < g.points; ++i) {
    const double xi = detail::wrap(g.node(i) - shift, g.length);
    f[i] = kappa * (detail::soliton_q(c, xi) + xi * detail::soliton_qx(c, xi)) / (2.0 * c);
  }
  return f;
}

// d/dshift of kappa Q_c(x - shift): -kappa Q_c'
inline Field soliton_shift_gradient(double c, int kappa, double shift, const Grid& g, double time) {
  Field f(g, time);
  for (int i = 0; i < g.points; ++i) {
    f[i] = -kappa * detail::soliton_qx(c, detail::wrap(g.node(i) - shift, g.length));
  }
  return f;
}

// Gradients with respect to the breather translation parameters
// (x1, x2); both act through the internal coordinates only.
inline std::vector<Field> breather_translation_gradients(const BreatherParams& p, double t,
                                                         const Grid& g) {
  Field d1(g, t), d2(g, t);
  const double d = p.delta(), gm = p.gamma();
  for (int i = 0; i < g.points; ++i) {
    const double x = g.node(i);
    const double y2 = x + gm * t + p.x2;
    const double n = std::floor(y2 / g.length + 0.5);
    const double y1 = x + d * t + p.x1 - n * g.length;
    const auto bp = detail::breather_point(p, y1, y2 - n * g.length);
    d1[i] = bp.d_y1;
    d2[i] = bp.d_y2;
  }
  return {d1, d2};
}

// Modulated parameter directions: soliton -> [d/dc R, d/dx0 R] (the c
// direction includes the induced translation -t Q_c'), breather ->
// [d/dx1 B, d/dx2 B].
inline std::vector<Field> param_gradient(const ObjectParams& o, double t, const Grid& g) {
  if (is_soliton(o)) {
    const auto& s = std::get<SolitonParams>(o);
    const double shift = s.c * t + s.x0;
    Field dshift = soliton_shift_gradient(s.c, s.kappa, shift, g, t);
    Field dc = soliton_shape_gradient(s.c, s.kappa, shift, g, t) + t * dshift;
    return {dc, dshift};
  }
  return breather_translation_gradients(std::get<BreatherParams>(o), t, g);
}

// Max-norm residual of the elliptic equation the object satisfies.
// Solitons report the worse of the second- and fourth-order equations.
inline double elliptic_residual(const ObjectParams& o, double t, const Grid& g) {
  Field u = eval_object(o, t, g);
  Field u2 = spectral_derivative(u, 2);
  double b2ma2, sq;  // coefficients of the fourth-order equation
  if (is_soliton(o)) {
    const double c = std::get<SolitonParams>(o).c;
    b2ma2 = c;       // (b^2 - a^2) with (a,b) = (0, sqrt(c))
    sq = c * c;      // (a^2 + b^2)^2
  } else {
    const auto& b = std::get<BreatherParams>(o);
    b2ma2 = b.beta * b.beta - b.alpha * b.alpha;
    const double s = b.alpha * b.alpha + b.beta * b.beta;
    sq = s * s;
  }
  Field u1 = spectral_derivative(u, 1);
  Field u4 = spectral_derivative(u, 4);
  double res4 = 0.0;
  for (int i = 0; i < g.points; ++i) {
    const double v = u[i];
    const double r = u4[i] + 5.0 * v * u1[i] * u1[i] + 5.0 * v * v * u2[i] +
                     1.5 * v * v * v * v * v - 2.0 * b2ma2 * (u2[i] + v * v * v) + sq * v;
    res4 = std::max(res4, std::abs(r));
  }
  if (!is_soliton(o)) return res4;

  const double c = std::get<SolitonParams>(o).c;
  double res2 = 0.0;
  for (int i = 0; i < g.points; ++i) {
    res2 = std::max(res2, std::abs(u2[i] - c * u[i] + u[i] * u[i] * u[i]));
  }
  return std::max(res2, res4);
}

}  // namespace mkdv

#pragma once

// Periodic grid, spectral derivatives, quadrature and Sobolev norms.
// All transforms are real-to-complex with the standard wavenumber
// ordering k_r = 2*pi*r/length, r = 0..points/2.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

namespace mkdv {

inline constexpr double kPi = std::numbers::pi;

struct Grid {
  double length = 100.0;
  int points = 2048;

  Grid() = default;
  Grid(double length_, int points_) : length(length_), points(points_) {
    if (!(length > 0.0)) throw std::invalid_argument("Grid: length must be > 0");
    if (points < 16) throw std::invalid_argument("Grid: points must be >= 16");
    if ((points & (points - 1)) != 0)
      throw std::invalid_argument("Grid: points must be a power of two");
  }

  double spacing() const { return length / points; }
  // nodes are x_i = -length/2 + i*spacing, i = 0..points-1
  double node(int i) const { return -0.5 * length + i * spacing(); }
  std::vector<double> nodes() const {
    std::vector<double> x(points);
    for (int i = 0; i < points; ++i) x[i] = node(i);
    return x;
  }
  // r2c mode count
  int modes() const { return points / 2 + 1; }
  double wavenumber(int r) const { return 2.0 * kPi * r / length; }

  bool operator==(const Grid&) const = default;
};

struct Field {
  Grid grid;
  std::vector<double> values;
  double time = 0.0;

  Field() : values(grid.points, 0.0) {}
  explicit Field(const Grid& g, double t = 0.0) : grid(g), values(g.points, 0.0), time(t) {}
  Field(const Grid& g, std::vector<double> v, double t) : grid(g), values(std::move(v)), time(t) {
    if (static_cast<int>(values.size()) != g.points)
      throw std::invalid_argument("Field: values size does not match grid");
  }

  int size() const { return grid.points; }
  double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
};

using Spectrum = std::vector<std::complex<double>>;

namespace detail {

// Compensated (Kahan) summation; keeps quadrature deterministic and
// insensitive to term count.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

inline double kahan_total(const std::vector<double>& v) {
  KahanSum s;
  for (double x : v) s.add(x);
  return s.value();
}

// One forward/backward FFTW plan pair per transform size. Plans are
// created once (serialized) and executed through the new-array
// interface, which is safe for concurrent use on distinct buffers.
class Fft {
 public:
  static const Fft& get(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<Fft>> registry;
    std::lock_guard<std::mutex> lock(mu);
    auto it = registry.find(n);
    if (it == registry.end()) it = registry.emplace(n, std::unique_ptr<Fft>(new Fft(n))).first;
    return *it->second;
  }

  // Unnormalized transforms; caller owns scaling conventions.
  void forward(const double* in, std::complex<double>* out) const {
    fftw_execute_dft_r2c(r2c_, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
  }
  void inverse(const std::complex<double>* in, double* out) const {
    // c2r destroys its input, so work on a copy.
    std::vector<std::complex<double>> tmp(in, in + n_ / 2 + 1);
    fftw_execute_dft_c2r(c2r_, reinterpret_cast<fftw_complex*>(tmp.data()), out);
  }

  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  ~Fft() {
    fftw_destroy_plan(r2c_);
    fftw_destroy_plan(c2r_);
  }

 private:
  explicit Fft(int n) : n_(n) {
    double* re = fftw_alloc_real(static_cast<std::size_t>(n));
    fftw_complex* cx = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    r2c_ = fftw_plan_dft_r2c_1d(n, re, cx, flags);
    c2r_ = fftw_plan_dft_c2r_1d(n, cx, re, flags);
    fftw_free(re);
    fftw_free(cx);
    if (!r2c_ || !c2r_) throw std::runtime_error("Fft: plan creation failed");
  }

  int n_;
  fftw_plan r2c_;
  fftw_plan c2r_;
};

inline void require_finite(const Field& f, const char* where) {
  for (int i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i]))
      throw std::invalid_argument(std::string(where) + ": non-finite value at node " +
                                  std::to_string(i) + " (t=" + std::to_string(f.time) + ")");
  }
}

}  // namespace detail

// Normalized Fourier coefficients: c_r = (1/N) sum_i f_i exp(-i k_r x_i-ish
// index convention). from_spectrum inverts exactly.
inline Spectrum to_spectrum(const Field& f) {
  Spectrum s(f.grid.modes());
  detail::Fft::get(f.grid.points).forward(f.values.data(), s.data());
  const double inv = 1.0 / f.grid.points;
  for (auto& c : s) c *= inv;
  return s;
}

inline Field from_spectrum(const Grid& g, const Spectrum& s, double time) {
  if (static_cast<int>(s.size()) != g.modes())
    throw std::invalid_argument("from_spectrum: mode count mismatch");
  Field f(g, time);
  detail::Fft::get(g.points).inverse(s.data(), f.values.data());
  return f;
}

// Derivative of given order via the Fourier multiplier (i k)^order.
// The Nyquist mode is zeroed for odd orders (symmetric convention).
inline Field spectral_derivative(const Field& f, int order) {
  if (order < 1 || order > 4)
    throw std::invalid_argument("spectral_derivative: order must be in [1,4]");
  detail::require_finite(f, "spectral_derivative");
  Spectrum s = to_spectrum(f);
  const int nyquist = f.grid.points / 2;
  for (int r = 0; r < static_cast<int>(s.size()); ++r) {
    const double k = f.grid.wavenumber(r);
    double kp = 1.0;
    for (int o = 0; o < order; ++o) kp *= k;
    std::complex<double> m;
    switch (order % 4) {
      case 0: m = {kp, 0.0}; break;
      case 1: m = {0.0, kp}; break;
      case 2: m = {-kp, 0.0}; break;
      default: m = {0.0, -kp}; break;
    }
    if (r == nyquist && order % 2 == 1) m = 0.0;
    s[r] *= m;
  }
  return from_spectrum(f.grid, s, f.time);
}

// Periodic trapezoid rule: spacing * sum(values).
inline double quadrature(const Field& f) {
  return f.grid.spacing() * detail::kahan_total(f.values);
}

inline double inner(const Field& a, const Field& b) {
  if (a.grid != b.grid) throw std::invalid_argument("inner: grid mismatch");
  detail::KahanSum s;
  for (int i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
  return a.grid.spacing() * s.value();
}

inline double l2_norm_sq(const Field& f) { return inner(f, f); }

// int (f^2 + f_x^2 + f_xx^2)
inline double h2_norm_sq(const Field& f) {
  Field fx = spectral_derivative(f, 1);
  Field fxx = spectral_derivative(f, 2);
  detail::KahanSum s;
  for (int i = 0; i < f.size(); ++i) s.add(f[i] * f[i] + fx[i] * fx[i] + fxx[i] * fxx[i]);
  return f.grid.spacing() * s.value();
}

inline double h2_norm(const Field& f) { return std::sqrt(h2_norm_sq(f)); }

inline double max_abs(const Field& f) {
  double m = 0.0;
  for (double v : f.values) m = std::max(m, std::abs(v));
  return m;
}

// Pointwise helpers used throughout the functional evaluations.
inline Field operator+(const Field& a, const Field& b) {
  if (a.grid != b.grid) throw std::invalid_argument("Field+: grid mismatch");
  Field r(a.grid, a.time);
  for (int i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Field operator-(const Field& a, const Field& b) {
  if (a.grid != b.grid) throw std::invalid_argument("Field-: grid mismatch");
  Field r(a.grid, a.time);
  for (int i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Field operator*(double c, const Field& a) {
  Field r(a.grid, a.time);
  for (int i = 0; i < a.size(); ++i) r[i] = c * a[i];
  return r;
}

}  // namespace mkdv

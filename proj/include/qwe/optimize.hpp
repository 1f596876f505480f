#pragma once

#include <cmath>
#include <functional>
#include <utility>

namespace qwe {

/// Golden-section search for a maximum of a unimodal f on [lo, hi].
/// Returns (argmax, max).
template <typename F>
std::pair<double, double> golden_maximize(F&& f, double lo, double hi, double xtol = 1e-12, int max_iter = 200) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > xtol; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? std::pair{c, fc} : std::pair{d, fd};
}

/// Coordinate-wise golden-section ascent of f(x, y) inside a box around the
/// start point. Each pass searches x then y within +-half_width of the
/// current point. Stops when a pass improves f by less than `ftol`.
template <typename F>
std::pair<std::pair<double, double>, double> coordinate_ascent(F&& f, double x, double y, double half_x,
                                                               double half_y, int passes = 40,
                                                               double ftol = 1e-15) {
  double best = f(x, y);
  for (int p = 0; p < passes; ++p) {
    const double before = best;
    auto [nx, fx] = golden_maximize([&](double t) { return f(t, y); }, x - half_x, x + half_x);
    if (fx > best) {
      x = nx;
      best = fx;
    }
    auto [ny, fy] = golden_maximize([&](double t) { return f(x, t); }, y - half_y, y + half_y);
    if (fy > best) {
      y = ny;
      best = fy;
    }
    half_x *= 0.5;
    half_y *= 0.5;
    if (best - before < ftol && p > 2) break;
  }
  return {{x, y}, best};
}

}  // namespace qwe

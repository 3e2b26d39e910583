#pragma once

// Right-hand sides and manufactured solutions used by the experiments.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>

#include "randproj/errors.hpp"
#include "randproj/mesh.hpp"
#include "randproj/projectors.hpp"

namespace randproj::rhs {

/// |sin(3 pi 2^L x)|.
inline Rhs2 oscillating(int level = 5) {
  const double omega = 3.0 * std::numbers::pi * std::ldexp(1.0, level);
  return {[omega](const Point2& p) { return std::abs(std::sin(omega * p.x())); },
          "osc" + std::to_string(level)};
}

inline Rhs2 linear_x() {
  return {[](const Point2& p) { return p.x(); }, "x"};
}

inline Rhs2 constant(double c) {
  return {[c](const Point2&) { return c; }, "const"};
}

/// Global polynomial of degree 1.
inline Rhs2 affine() {
  return {[](const Point2& p) { return 1.0 + p.x() - 2.0 * p.y(); }, "affine"};
}

/// |x - 1/2|^alpha, in L^p for p < 1/(-alpha) when alpha < 0; rough at x = 1/2.
inline Rhs2 rough_power(double alpha = 0.6) {
  return {[alpha](const Point2& p) { return std::pow(std::abs(p.x() - 0.5), alpha); }, "rough"};
}

inline Rhs2 smooth_exp_sin() {
  return {[](const Point2& p) { return std::exp(p.x()) * std::sin(p.y()); }, "expsin"};
}

/// u = sin(pi x) sin(pi y), -Laplace(u) = 2 pi^2 u.
struct SinSin {
  static double u(const Point2& p) { return std::sin(std::numbers::pi * p.x()) * std::sin(std::numbers::pi * p.y()); }
  static Eigen::Vector2d grad(const Point2& p) {
    constexpr double pi = std::numbers::pi;
    return {pi * std::cos(pi * p.x()) * std::sin(pi * p.y()), pi * std::sin(pi * p.x()) * std::cos(pi * p.y())};
  }
  static double f(const Point2& p) { return 2.0 * std::numbers::pi * std::numbers::pi * u(p); }
  static Rhs2 rhs() { return {f, "sinsin"}; }
};

/// u = x(x-1) y(y-1) exp(-100 (x-1/2)^2 - (y-117)^2 / 10^4).
struct Waterfall {
  static constexpr double a = 100.0;
  static constexpr double b = 1e-4;
  static constexpr double y0 = 117.0;

  static double u(const Point2& p) {
    const double x = p.x();
    const double y = p.y();
    return x * (x - 1) * y * (y - 1) * std::exp(-a * (x - 0.5) * (x - 0.5) - b * (y - y0) * (y - y0));
  }

  static Eigen::Vector2d grad(const Point2& p) {
    const double x = p.x();
    const double y = p.y();
    const double e = std::exp(-a * (x - 0.5) * (x - 0.5));
    const double f = std::exp(-b * (y - y0) * (y - y0));
    const double px = x * (x - 1);
    const double qy = y * (y - 1);
    const double de = -2 * a * (x - 0.5) * e;
    const double df = -2 * b * (y - y0) * f;
    return {((2 * x - 1) * e + px * de) * qy * f, px * e * ((2 * y - 1) * f + qy * df)};
  }

  /// -Laplace(u) from u = (P E)(x) (Q F)(y).
  static double f(const Point2& p) {
    const double x = p.x();
    const double y = p.y();
    const double sx = x - 0.5;
    const double sy = y - y0;
    const double e = std::exp(-a * sx * sx);
    const double ff = std::exp(-b * sy * sy);
    const double px = x * (x - 1);
    const double qy = y * (y - 1);
    const double de = -2 * a * sx * e;
    const double dde = (-2 * a + 4 * a * a * sx * sx) * e;
    const double df = -2 * b * sy * ff;
    const double ddf = (-2 * b + 4 * b * b * sy * sy) * ff;
    const double xpart = px * e;
    const double xpart2 = 2 * e + 2 * (2 * x - 1) * de + px * dde;
    const double ypart = qy * ff;
    const double ypart2 = 2 * ff + 2 * (2 * y - 1) * df + qy * ddf;
    return -(xpart2 * ypart + xpart * ypart2);
  }

  static Rhs2 rhs() { return {f, "waterfall"}; }
};

/// Rhs by id: x, const, affine, osc<L> (osc = osc5), rough, expsin, sinsin, waterfall.
inline Rhs2 by_name(const std::string& id) {
  if (id == "x") {
    return linear_x();
  }
  if (id == "const" || id == "one") {
    return constant(1.0);
  }
  if (id == "affine") {
    return affine();
  }
  if (id == "osc") {
    return oscillating(5);
  }
  if (id.rfind("osc", 0) == 0) {
    return oscillating(std::stoi(id.substr(3)));
  }
  if (id == "rough") {
    return rough_power(0.6);
  }
  if (id == "expsin") {
    return smooth_exp_sin();
  }
  if (id == "sinsin") {
    return SinSin::rhs();
  }
  if (id == "waterfall") {
    return Waterfall::rhs();
  }
  throw ConfigError("unknown rhs id '" + id + "'");
}

}  // namespace randproj::rhs

#include "migractl/numerics.hpp"

#include <algorithm>
#include <numbers>

namespace migractl {

std::vector<double> real_cubic_roots(double a, double b, double c, double d, double degenerate_tol) {
  const double B = b / a;
  const double C = c / a;
  const double D = d / a;
  // x = t - B/3 gives t^3 + p t + q = 0
  const double p = C - B * B / 3.0;
  const double q = 2.0 * B * B * B / 27.0 - B * C / 3.0 + D;
  const double scale = std::max({1.0, std::sqrt(std::abs(p)), std::cbrt(std::abs(q))});
  const double disc = 4.0 * p * p * p + 27.0 * q * q;  // < 0 => three real roots
  if (std::abs(disc) / std::pow(scale, 6) < degenerate_tol) return {};

  std::vector<double> roots;
  if (disc < 0.0) {
    const double r = 2.0 * std::sqrt(-p / 3.0);
    const double phi = std::acos(std::clamp(3.0 * q / (p * r), -1.0, 1.0)) / 3.0;
    for (int k = 0; k < 3; ++k) roots.push_back(r * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0));
  } else {
    const double s = std::sqrt(q * q / 4.0 + p * p * p / 27.0);
    roots.push_back(std::cbrt(-q / 2.0 + s) + std::cbrt(-q / 2.0 - s));
  }
  for (double& t : roots) {
    double x = t - B / 3.0;
    for (int it = 0; it < 3; ++it) {
      const double f = ((x + B) * x + C) * x + D;
      const double df = (3.0 * x + 2.0 * B) * x + C;
      if (df == 0.0) break;
      x -= f / df;
    }
    t = x;
  }
  return roots;
}

}  // namespace migractl

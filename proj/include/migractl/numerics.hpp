#pragma once

#include <cmath>
#include <vector>

namespace migractl {

/// Golden-section search for a minimiser of a unimodal f on [lo, hi].
template <typename F>
double golden_section_minimize(F&& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
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
  return 0.5 * (a + b);
}

/// Real roots of a x^3 + b x^2 + c x + d (a != 0). Returns an empty vector
/// when the discriminant of the depressed cubic is within `degenerate_tol`
/// of zero, so callers can fall back to a search.
std::vector<double> real_cubic_roots(double a, double b, double c, double d, double degenerate_tol = 1e-12);

}  // namespace migractl

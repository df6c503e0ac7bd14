#include "kfp/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <string>

namespace kfp {

double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol) {
  using boost::math::quadrature::gauss_kronrod;
  double error = 0.0;
  double l1 = 0.0;
  const double value =
      gauss_kronrod<double, 15>::integrate(f, a, b, 30, rel_tol, &error, &l1);
  if (!std::isfinite(value)) {
    throw QuadratureError("quadrature produced a non-finite value on [" +
                          std::to_string(a) + ", " + std::to_string(b) + "]");
  }
  // Boost reports the achieved estimate; accept up to a modest slack since the
  // Kronrod error estimate is pessimistic for smooth integrands.
  if (error > 1e3 * rel_tol * std::max(l1, 1e-300)) {
    throw QuadratureError("quadrature did not converge on [" +
                          std::to_string(a) + ", " + std::to_string(b) +
                          "], error estimate " + std::to_string(error));
  }
  return value;
}

double integrate_geometric(const std::function<double(double)>& f,
                           double upper, double rel_tol) {
  double total = 0.0;
  double lo = 0.0;
  double hi = std::min(1.0, upper);
  while (lo < upper) {
    total += integrate(f, lo, hi, rel_tol);
    lo = hi;
    hi = std::min(2.0 * hi, upper);
  }
  return total;
}

}  // namespace kfp

#pragma once

#include <functional>
#include <stdexcept>

namespace kfp {

/// Raised when adaptive quadrature cannot reach the requested tolerance.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive 15-point Gauss-Kronrod on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-13);

/// Integral over [0, upper] split into geometric panels [0,1], [1,2], [2,4],
/// ... so that slowly decaying integrands are resolved on every scale.
double integrate_geometric(const std::function<double(double)>& f,
                           double upper, double rel_tol = 1e-13);

}  // namespace kfp

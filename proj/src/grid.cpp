#include "kfp/grid.hpp"

#include <cmath>
#include <string>

namespace kfp {

PhaseGrid::PhaseGrid(double L, double v_max, int nx, int nv)
    : L_(L), v_max_(v_max), nx_(nx), nv_(nv) {
  if (!(L > 0.0 && std::isfinite(L)) || !(v_max > 0.0 && std::isfinite(v_max))) {
    throw std::invalid_argument("grid half-widths L and v_max must be positive");
  }
  if (nx <= 0 || nv <= 0 || nx % 2 != 0 || nv % 2 != 0) {
    throw std::invalid_argument("cell counts must be even positive integers, got " +
                                std::to_string(nx) + " x " + std::to_string(nv));
  }
  dx_ = 2.0 * L / nx;
  dv_ = 2.0 * v_max / nv;
}

PhaseGrid build_grid(double L, double v_max, int nx, int nv) {
  return PhaseGrid(L, v_max, nx, nv);
}

Field::Field(PhaseGrid grid, double time)
    : grid_(grid), values_(grid.size(), 0.0), time_(time) {}

Field::Field(PhaseGrid grid, std::vector<double> values, double time)
    : grid_(grid), values_(std::move(values)), time_(time) {
  if (values_.size() != grid_.size()) {
    throw std::invalid_argument("field size does not match its grid");
  }
}

}  // namespace kfp

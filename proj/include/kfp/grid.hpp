#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace kfp {

/// Uniform cell-centred mesh of [-L, L] x [-v_max, v_max].
/// Centres: x_n = -L + (n + 1/2) dx, v_m = -v_max + (m + 1/2) dv.
class PhaseGrid {
 public:
  PhaseGrid(double L, double v_max, int nx, int nv);

  double L() const { return L_; }
  double v_max() const { return v_max_; }
  int nx() const { return nx_; }
  int nv() const { return nv_; }
  double dx() const { return dx_; }
  double dv() const { return dv_; }
  double cell_volume() const { return dx_ * dv_; }
  std::size_t size() const { return static_cast<std::size_t>(nx_) * nv_; }

  double x(int n) const { return -L_ + (n + 0.5) * dx_; }
  double v(int m) const { return -v_max_ + (m + 0.5) * dv_; }
  /// Face between v_m and v_{m+1}.
  double v_face(int m) const { return -v_max_ + (m + 1) * dv_; }
  /// Index of the cell at velocity -v_m.
  int mirror_v(int m) const { return nv_ - 1 - m; }

  /// Row-major storage: x outer, v inner.
  std::size_t index(int n, int m) const {
    return static_cast<std::size_t>(n) * nv_ + m;
  }

  bool operator==(const PhaseGrid&) const = default;

 private:
  double L_;
  double v_max_;
  int nx_;
  int nv_;
  double dx_;
  double dv_;
};

PhaseGrid build_grid(double L, double v_max, int nx, int nv);

/// Cell averages on a PhaseGrid, stamped with the simulation time.
class Field {
 public:
  explicit Field(PhaseGrid grid, double time = 0.0);
  Field(PhaseGrid grid, std::vector<double> values, double time = 0.0);

  const PhaseGrid& grid() const { return grid_; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  double& operator()(int n, int m) { return values_[grid_.index(n, m)]; }
  double operator()(int n, int m) const { return values_[grid_.index(n, m)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const Field&) const = default;

 private:
  PhaseGrid grid_;
  std::vector<double> values_;
  double time_;
};

}  // namespace kfp

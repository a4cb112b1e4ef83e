#pragma once

#include <array>
#include <complex>
#include <vector>

#include "bjj/constants.hpp"
#include "bjj/error.hpp"

namespace bjj {

using cplx = std::complex<double>;

// Uniform periodic grid, 1D (axis x) or 3D. Coordinates are centered:
// x_i = (i - n/2) * dx, dx = extent / n.
struct Grid {
  int dims = 1;
  std::array<int, 3> points{0, 0, 0};
  std::array<double, 3> extent{0.0, 0.0, 0.0};

  static Grid make_1d(int n, double length) {
    require(n >= 16, "grid: need at least 16 points per axis");
    Grid g;
    g.dims = 1;
    g.points = {n, 1, 1};
    g.extent = {length, 0.0, 0.0};
    return g;
  }

  static Grid make_3d(int nx, int ny, int nz, double lx, double ly, double lz) {
    require(nx >= 16 && ny >= 16 && nz >= 16,
            "grid: need at least 16 points per axis");
    Grid g;
    g.dims = 3;
    g.points = {nx, ny, nz};
    g.extent = {lx, ly, lz};
    return g;
  }

  std::size_t size() const {
    return static_cast<std::size_t>(points[0]) * points[1] * points[2];
  }
  double spacing(int axis) const { return extent[axis] / points[axis]; }
  double coord(int axis, int i) const {
    return (i - points[axis] / 2) * spacing(axis);
  }
  // FFT wavenumber for index i on the given axis.
  double wavenumber(int axis, int i) const {
    const int n = points[axis];
    const int k = (i < n / 2) ? i : i - n;
    return 2.0 * constants::pi * k / extent[axis];
  }
  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dims; ++a) v *= spacing(a);
    return v;
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * points[1] + j) * points[0] + i;
  }
  bool operator==(const Grid& o) const {
    return dims == o.dims && points == o.points && extent == o.extent;
  }
};

}  // namespace bjj

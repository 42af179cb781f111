#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace nestmax {

// Planar coordinates.  Geographic inputs are projected upstream (the CLI
// applies an equirectangular projection to km).
struct Site {
  double x = 0.0;
  double y = 0.0;
};

double distance(Site a, Site b);

struct Rect {
  double xmin, xmax, ymin, ymax;
};

struct KnotGrid {
  std::vector<Site> knots;
  std::size_t size() const { return knots.size(); }
};

// nx*ny knots at the cell centers of a regular lattice covering bounds,
// row-major (x fastest).
KnotGrid make_regular_grid(const Rect& bounds, int nx, int ny);

// Isotropic Gaussian kernels centered at the knots, rescaled to sum to one
// at every location.
struct KernelBasis {
  KnotGrid grid;
  double bandwidth;  // tau > 0, same units as Site
};

void validate_basis(const KernelBasis& basis);

// Normalized weights w_l(s), l = 1..L.  Evaluated in log space so sites far
// from every knot normalize correctly instead of underflowing to 0/0.
std::vector<double> weights(const KernelBasis& basis, Site s);

// log w_l(s); entries are finite for any site.
std::vector<double> log_weights(const KernelBasis& basis, Site s);

// Advisory check that the knot spacing does not exceed the bandwidth (a
// too-coarse grid makes the process artificially non-stationary).  Never
// fatal.
struct SpacingAdvice {
  bool warn = false;
  double spacing = 0.0;
  double bandwidth = 0.0;
  std::string message;
};

SpacingAdvice check_grid_spacing(const KernelBasis& basis);

}  // namespace nestmax

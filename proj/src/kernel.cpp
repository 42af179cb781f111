#include "nestmax/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nestmax {

double distance(Site a, Site b) { return std::hypot(a.x - b.x, a.y - b.y); }

KnotGrid make_regular_grid(const Rect& bounds, int nx, int ny) {
  if (!(bounds.xmin < bounds.xmax) || !(bounds.ymin < bounds.ymax))
    throw std::domain_error("make_regular_grid: degenerate rectangle");
  if (nx < 1 || ny < 1)
    throw std::domain_error("make_regular_grid: nx and ny must be >= 1");
  const double dx = (bounds.xmax - bounds.xmin) / nx;
  const double dy = (bounds.ymax - bounds.ymin) / ny;
  KnotGrid grid;
  grid.knots.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      grid.knots.push_back({bounds.xmin + (i + 0.5) * dx,
                            bounds.ymin + (j + 0.5) * dy});
  return grid;
}

void validate_basis(const KernelBasis& basis) {
  if (basis.grid.knots.empty())
    throw std::domain_error("kernel: knot grid is empty");
  if (!(basis.bandwidth > 0.0) || !std::isfinite(basis.bandwidth))
    throw std::domain_error("kernel: bandwidth must be positive");
  for (const Site& v : basis.grid.knots)
    if (!std::isfinite(v.x) || !std::isfinite(v.y))
      throw std::domain_error("kernel: knot coordinates must be finite");
  for (std::size_t i = 0; i < basis.grid.knots.size(); ++i)
    for (std::size_t j = i + 1; j < basis.grid.knots.size(); ++j)
      if (basis.grid.knots[i].x == basis.grid.knots[j].x &&
          basis.grid.knots[i].y == basis.grid.knots[j].y)
        throw std::domain_error("kernel: knots must be pairwise distinct");
}

std::vector<double> log_weights(const KernelBasis& basis, Site s) {
  const std::size_t L = basis.grid.size();
  std::vector<double> lw(L);
  const double inv2t2 = 0.5 / (basis.bandwidth * basis.bandwidth);
  // The Gaussian normalizing constant cancels in the quotient.
  double lmax = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < L; ++l) {
    const double dx = s.x - basis.grid.knots[l].x;
    const double dy = s.y - basis.grid.knots[l].y;
    lw[l] = -(dx * dx + dy * dy) * inv2t2;
    lmax = std::max(lmax, lw[l]);
  }
  double sum = 0.0;
  for (double v : lw) sum += std::exp(v - lmax);
  const double lse = lmax + std::log(sum);
  for (double& v : lw) v -= lse;
  return lw;
}

std::vector<double> weights(const KernelBasis& basis, Site s) {
  std::vector<double> w = log_weights(basis, s);
  for (double& v : w) v = std::exp(v);
  return w;
}

SpacingAdvice check_grid_spacing(const KernelBasis& basis) {
  if (basis.grid.size() < 2)
    throw std::domain_error("check_grid_spacing: needs at least two knots");
  // Spacing taken as the largest nearest-neighbour distance, which equals
  // the cell size on a regular grid and is robust to irregular layouts.
  double spacing = 0.0;
  for (std::size_t i = 0; i < basis.grid.size(); ++i) {
    double nn = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < basis.grid.size(); ++j)
      if (j != i)
        nn = std::min(nn, distance(basis.grid.knots[i], basis.grid.knots[j]));
    spacing = std::max(spacing, nn);
  }
  SpacingAdvice advice;
  advice.spacing = spacing;
  advice.bandwidth = basis.bandwidth;
  if (spacing > basis.bandwidth) {
    advice.warn = true;
    advice.message = "knot spacing " + std::to_string(spacing) +
                     " exceeds bandwidth " + std::to_string(basis.bandwidth) +
                     "; the fitted process may look artificially "
                     "non-stationary";
  }
  return advice;
}

}  // namespace nestmax

#include "nestmax/reference.hpp"

#include <cmath>
#include <stdexcept>

#include "nestmax/stable.hpp"

namespace nestmax::ref {

namespace {

long double node_sum_direct(const DependenceTree& tree,
                            const std::vector<std::vector<double>>& w_knot,
                            const EvaluationPoint& point, int v) {
  long double s = 0.0L;
  for (int li : tree.node_leaf_children(v)) {
    const long double inv_p = 1.0L / tree.path_product(li);
    long double leaf_sum = 0.0L;
    for (std::size_t d = 0; d < point.sites.size(); ++d) {
      const Level& z = point.levels[li][d];
      if (!z.has_value()) continue;
      const long double w = w_knot[li][d];
      if (w <= 0.0L) continue;
      leaf_sum += powl(w / static_cast<long double>(*z), inv_p);
    }
    s += leaf_sum;
  }
  for (int c : tree.node_children(v)) {
    const long double cs = node_sum_direct(tree, w_knot, point, c);
    if (cs > 0.0L)
      s += powl(cs, static_cast<long double>(tree.node_alpha(c)));
  }
  return s;
}

}  // namespace

double exponent_direct(const DependenceTree& tree,
                       std::span<const KernelBasis> bases,
                       const EvaluationPoint& point) {
  const int n_leaves = tree.leaf_count();
  const std::size_t L = bases[0].grid.size();
  const std::size_t D = point.sites.size();
  // w[leaf][site][knot]
  std::vector<std::vector<std::vector<double>>> w(n_leaves);
  for (int li = 0; li < n_leaves; ++li) {
    w[li].reserve(D);
    for (std::size_t d = 0; d < D; ++d)
      w[li].push_back(weights(bases[li], point.sites[d]));
  }
  long double total = 0.0L;
  std::vector<std::vector<double>> w_knot(n_leaves, std::vector<double>(D));
  for (std::size_t l = 0; l < L; ++l) {
    for (int li = 0; li < n_leaves; ++li)
      for (std::size_t d = 0; d < D; ++d) w_knot[li][d] = w[li][d][l];
    const long double s = node_sum_direct(tree, w_knot, point, 0);
    if (s > 0.0L)
      total += powl(s, static_cast<long double>(tree.node_alpha(0)));
  }
  return static_cast<double>(total);
}

McCdf joint_cdf_monte_carlo(const DependenceTree& tree,
                            std::span<const KernelBasis> bases,
                            const EvaluationPoint& point,
                            std::size_t n_draws, std::uint64_t seed) {
  if (n_draws < 100)
    throw std::domain_error("joint_cdf_monte_carlo: too few draws");
  const int n_leaves = tree.leaf_count();
  const int L = static_cast<int>(bases[0].grid.size());
  const std::size_t D = point.sites.size();

  // Per (leaf, site): w_l(s)^{1/p} and z^{-1/p} for the finite levels.
  struct Cell {
    int leaf;
    std::vector<double> wp;  // length L
    double zc;
  };
  std::vector<Cell> cells;
  for (int li = 0; li < n_leaves; ++li) {
    const double p = tree.path_product(li);
    for (std::size_t d = 0; d < D; ++d) {
      const Level& z = point.levels[li][d];
      if (!z.has_value()) continue;
      Cell cell;
      cell.leaf = li;
      cell.zc = std::pow(*z, -1.0 / p);
      const std::vector<double> lw = log_weights(bases[li], point.sites[d]);
      cell.wp.resize(L);
      for (int l = 0; l < L; ++l) cell.wp[l] = std::exp(lw[l] / p);
      cells.push_back(std::move(cell));
    }
  }

  RngStream rng(seed, fnv1a("cdf-oracle"));
  double sum = 0.0, sumsq = 0.0;
  std::vector<double> log_bt;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const LatentStableField latent = draw_latent(tree, L, rng);
    double log_g = 0.0;
    for (const Cell& cell : cells) {
      // W = sum_l Btilde_l wp_l
      double w = 0.0;
      for (int l = 0; l < L; ++l) {
        double lb = 0.0;
        for (int v : tree.leaf_path(cell.leaf))
          lb += tree.amplitude_exponent(v, cell.leaf) *
                latent.log_amp[static_cast<std::size_t>(v) * L + l];
        w += std::exp(lb) * cell.wp[l];
      }
      log_g -= w * cell.zc;
    }
    const double g = std::exp(log_g);
    sum += g;
    sumsq += g * g;
  }
  const double n = static_cast<double>(n_draws);
  const double mean = sum / n;
  const double var = std::max(0.0, sumsq / n - mean * mean);
  return {mean, std::sqrt(var / n), n_draws};
}

}  // namespace nestmax::ref

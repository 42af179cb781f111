#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "nestmax/kernel.hpp"
#include "nestmax/tree.hpp"

namespace nestmax {

// A level for one (leaf, site) coordinate on the unit-Frechet scale.
// nullopt marks a marginalized coordinate (the +infinity argument).
using Level = std::optional<double>;

struct EvaluationPoint {
  std::vector<Site> sites;
  // levels[leaf][site], leaves in the tree's canonical order.
  std::vector<std::vector<Level>> levels;
};

// The exponent function V of the joint distribution
//   P(Z <= z) = exp{-V(z)}.
//
// Evaluated per knot by the recursive rule: a leaf contributes the sum over
// sites of {w_l(s_d)/z_d}^{1/path product}, every internal node raises the
// sum of its children's contributions to its alpha, and the root results
// are summed over knots.  Inner sums run in log space; marginalized
// coordinates and underflowed weights contribute zero.
//
// `bases` holds one kernel basis per leaf, in canonical leaf order.
double exponent(const DependenceTree& tree, std::span<const KernelBasis> bases,
                const EvaluationPoint& point);

double joint_cdf(const DependenceTree& tree, std::span<const KernelBasis> bases,
                 const EvaluationPoint& point);

struct ExtremalCoefficient {
  double value;  // in [1,2]
  LeafId leaf_a, leaf_b;
  Site site_i, site_j;
};

// Pairwise (cross-)extremal coefficient via the closed form
//   theta = sum_l {w_a,l(s_i)^{1/m} + w_b,l(s_j)^{1/m}}^m,
// with m the product of alphas down to the most recent common ancestor.
ExtremalCoefficient extremal_coefficient(const DependenceTree& tree,
                                         std::span<const KernelBasis> bases,
                                         const LeafId& leaf_a, Site site_i,
                                         const LeafId& leaf_b, Site site_j);

struct ExtremalCurveRow {
  LeafId leaf_a, leaf_b;
  Site site_i, site_j;
  double distance;
  double theta;
};

// Batch evaluation over site pairs, sorted by distance (plot-data export).
std::vector<ExtremalCurveRow> extremal_curve(
    const DependenceTree& tree, std::span<const KernelBasis> bases,
    const LeafId& leaf_a, const LeafId& leaf_b,
    std::span<const std::pair<Site, Site>> site_pairs);

// CSV columns: leaf_a, leaf_b, site_i, site_j, distance, theta.
void write_extremal_curve_csv(std::ostream& os,
                              std::span<const ExtremalCurveRow> rows);

}  // namespace nestmax

#include "nestmax/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nestmax/util.hpp"

namespace nestmax {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum exp(v)) over possibly empty input; empty -> -inf (a zero sum).
double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

struct KnotContext {
  const DependenceTree& tree;
  // log w[leaf][site] at the current knot.
  const std::vector<std::vector<double>>& log_w;
  const EvaluationPoint& point;
};

// log of node v's inner sum S at one knot; the node's contribution to its
// parent is alpha_v * log S.  Returns -inf when every term vanishes.
double log_node_sum(const KnotContext& ctx, int v) {
  std::vector<double> terms;
  for (int li : ctx.tree.node_leaf_children(v)) {
    const double inv_p = 1.0 / ctx.tree.path_product(li);
    std::vector<double> site_terms;
    for (std::size_t d = 0; d < ctx.point.sites.size(); ++d) {
      const Level& z = ctx.point.levels[li][d];
      if (!z.has_value()) continue;  // marginalized coordinate
      const double lw = ctx.log_w[li][d];
      if (lw == kNegInf) continue;
      site_terms.push_back(inv_p * (lw - std::log(*z)));
    }
    const double ls = log_sum_exp(site_terms);
    if (ls != kNegInf) terms.push_back(ls);
  }
  for (int c : ctx.tree.node_children(v)) {
    const double ls = log_node_sum(ctx, c);
    if (ls != kNegInf) terms.push_back(ctx.tree.node_alpha(c) * ls);
  }
  return log_sum_exp(terms);
}

}  // namespace

double exponent(const DependenceTree& tree, std::span<const KernelBasis> bases,
                const EvaluationPoint& point) {
  const int n_leaves = tree.leaf_count();
  if (static_cast<int>(bases.size()) != n_leaves)
    throw std::invalid_argument("exponent: one kernel basis per leaf required");
  if (static_cast<int>(point.levels.size()) != n_leaves)
    throw std::invalid_argument("exponent: levels must cover every leaf");
  const std::size_t n_sites = point.sites.size();
  const std::size_t L = bases.empty() ? 0 : bases[0].grid.size();
  for (const auto& b : bases)
    if (b.grid.size() != L)
      throw std::invalid_argument("exponent: bases must share one knot grid");
  for (int li = 0; li < n_leaves; ++li) {
    if (point.levels[li].size() != n_sites)
      throw std::invalid_argument("exponent: levels must cover every site");
    for (const Level& z : point.levels[li])
      if (z.has_value() && !(*z > 0.0))
        throw std::domain_error("exponent: levels must be positive");
  }

  // log w[leaf][site][knot]
  std::vector<std::vector<std::vector<double>>> lw(n_leaves);
  for (int li = 0; li < n_leaves; ++li) {
    lw[li].reserve(n_sites);
    for (std::size_t d = 0; d < n_sites; ++d)
      lw[li].push_back(log_weights(bases[li], point.sites[d]));
  }

  double v_total = 0.0;
  std::vector<std::vector<double>> lw_knot(
      n_leaves, std::vector<double>(n_sites, kNegInf));
  for (std::size_t l = 0; l < L; ++l) {
    for (int li = 0; li < n_leaves; ++li)
      for (std::size_t d = 0; d < n_sites; ++d) lw_knot[li][d] = lw[li][d][l];
    const KnotContext ctx{tree, lw_knot, point};
    const double ls = log_node_sum(ctx, 0);
    if (ls != kNegInf) v_total += std::exp(tree.node_alpha(0) * ls);
  }
  return v_total;
}

double joint_cdf(const DependenceTree& tree, std::span<const KernelBasis> bases,
                 const EvaluationPoint& point) {
  return std::exp(-exponent(tree, bases, point));
}

ExtremalCoefficient extremal_coefficient(const DependenceTree& tree,
                                         std::span<const KernelBasis> bases,
                                         const LeafId& leaf_a, Site site_i,
                                         const LeafId& leaf_b, Site site_j) {
  const int a = tree.leaf_index(leaf_a);
  const int b = tree.leaf_index(leaf_b);
  const double m = tree.mrca_product(a, b);
  const std::vector<double> lwa = log_weights(bases[a], site_i);
  const std::vector<double> lwb = log_weights(bases[b], site_j);
  double theta = 0.0;
  for (std::size_t l = 0; l < lwa.size(); ++l) {
    const double ta = lwa[l] / m;
    const double tb = lwb[l] / m;
    const double mx = std::max(ta, tb);
    if (mx == kNegInf) continue;
    const double lse = mx + std::log(std::exp(ta - mx) + std::exp(tb - mx));
    theta += std::exp(m * lse);
  }
  return {theta, leaf_a, leaf_b, site_i, site_j};
}

std::vector<ExtremalCurveRow> extremal_curve(
    const DependenceTree& tree, std::span<const KernelBasis> bases,
    const LeafId& leaf_a, const LeafId& leaf_b,
    std::span<const std::pair<Site, Site>> site_pairs) {
  std::vector<ExtremalCurveRow> rows;
  rows.reserve(site_pairs.size());
  for (const auto& [si, sj] : site_pairs) {
    const ExtremalCoefficient theta =
        extremal_coefficient(tree, bases, leaf_a, si, leaf_b, sj);
    rows.push_back(
        {leaf_a, leaf_b, si, sj, distance(si, sj), theta.value});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ExtremalCurveRow& x, const ExtremalCurveRow& y) {
                     return x.distance < y.distance;
                   });
  return rows;
}

void write_extremal_curve_csv(std::ostream& os,
                              std::span<const ExtremalCurveRow> rows) {
  os << "leaf_a,leaf_b,site_i,site_j,distance,theta\n";
  for (const auto& r : rows) {
    os << r.leaf_a << ',' << r.leaf_b << ',' << format_double(r.site_i.x)
       << ':' << format_double(r.site_i.y) << ',' << format_double(r.site_j.x)
       << ':' << format_double(r.site_j.y) << ',' << format_double(r.distance)
       << ',' << format_double(r.theta) << '\n';
  }
}

}  // namespace nestmax

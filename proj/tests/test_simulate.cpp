#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "doctest.h"
#include "nestmax/diagnostics.hpp"
#include "nestmax/simulate.hpp"
#include "testutil.hpp"

using namespace nestmax;

namespace {

std::vector<KernelBasis> bases_for(const DependenceTree& tree,
                                   const KnotGrid& grid) {
  std::vector<KernelBasis> out;
  for (const auto& leaf : tree.leaves()) out.push_back({grid, leaf.tau});
  return out;
}

}  // namespace

TEST_CASE("latent field has one draw per internal node per knot") {
  const DependenceTree tree =
      DependenceTree::build(testutil::three_layer_4leaf(0.9, 0.7, 0.4, 0.1));
  RngStream rng(5);
  const LatentStableField field = draw_latent(tree, 10, rng);
  CHECK(field.n_nodes == 7);
  CHECK(field.n_knots == 10);
  CHECK(field.log_amp.size() == 70);

  RngStream rng2(5);
  const LatentStableField again = draw_latent(tree, 10, rng2);
  CHECK(field.log_amp == again.log_amp);

  const DependenceTree ones =
      DependenceTree::build(testutil::three_layer_4leaf(1.0, 1.0, 1.0, 0.1));
  RngStream rng3(6);
  const LatentStableField unit = draw_latent(ones, 4, rng3);
  for (double la : unit.log_amp) CHECK(la == 0.0);
}

TEST_CASE("smooth process collapses when all alphas are one") {
  const DependenceTree tree =
      DependenceTree::build(testutil::three_layer_4leaf(1.0, 1.0, 1.0, 0.5));
  const KnotGrid grid = make_regular_grid({0, 1, 0, 1}, 3, 3);
  const auto bases = bases_for(tree, grid);
  RngStream rng(7);
  const LatentStableField field = draw_latent(tree, 9, rng);
  CHECK(smooth_process(tree, bases, field, "V2", {0.4, 0.7}) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single-knot smooth process is the composed amplitude") {
  const DependenceTree tree =
      DependenceTree::build(testutil::three_layer_4leaf(0.9, 0.7, 0.4, 0.8));
  const KnotGrid grid = make_regular_grid({0, 1, 0, 1}, 1, 1);
  const auto bases = bases_for(tree, grid);
  RngStream rng(8);
  const LatentStableField field = draw_latent(tree, 1, rng);
  const int leaf = tree.leaf_index("V3");
  const auto& path = tree.leaf_path(leaf);
  double expected = 1.0;
  for (int v : path)
    expected *= std::pow(field.amplitude(v, 0),
                         tree.amplitude_exponent(v, leaf));
  expected = std::pow(expected, tree.path_product(leaf));
  CHECK(smooth_process(tree, bases, field, "V3", {0.3, 0.3}) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("smooth process reproduces unit-Frechet margins in expectation") {
  const DependenceTree tree =
      DependenceTree::build(testutil::three_layer_4leaf(0.9, 0.7, 0.4, 0.6));
  const KnotGrid grid = make_regular_grid({0, 1, 0, 1}, 2, 2);
  const auto bases = bases_for(tree, grid);
  const int leaf = tree.leaf_index("V1");
  const double p = tree.path_product(leaf);
  const Site s{0.35, 0.65};
  RngStream rng(9);
  const int n = 100000;
  for (double z : {0.5, 1.0, 2.0}) {
    double sum = 0.0, sumsq = 0.0;
    RngStream local(9, static_cast<std::uint64_t>(z * 4));
    for (int i = 0; i < n; ++i) {
      const LatentStableField field = draw_latent(tree, 4, local);
      const double theta = smooth_process(tree, bases, field, "V1", s);
      const double v = std::exp(-std::pow(theta / z, 1.0 / p));
      sum += v;
      sumsq += v * v;
    }
    const double m = sum / n;
    const double se = std::sqrt((sumsq / n - m * m) / n);
    CHECK(std::abs(m - std::exp(-1.0 / z)) <= 3.0 * se);
  }
  (void)rng;
}

TEST_CASE("simulated margins are unit Frechet") {
  TreeSpec spec;
  spec.alpha = 0.8;
  TreeSpec node;
  node.alpha = 0.5;
  node.children.push_back(TreeLeaf{"X", 1.0});
  spec.children.push_back(node);
  const DependenceTree tree = DependenceTree::build(spec);
  const KnotGrid grid = make_regular_grid({0, 2, 0, 2}, 3, 3);
  const auto bases = bases_for(tree, grid);
  const std::vector<Site> sites{{1.0, 1.0}};
  const MaxStableSample sample = simulate(tree, bases, sites, 10000, 321);
  long below = 0;
  for (int r = 0; r < sample.n_rep; ++r)
    if (sample.at(0, 0, r) <= 1.0) ++below;
  const double phat = static_cast<double>(below) / sample.n_rep;
  const double se = std::sqrt(std::exp(-1.0) * (1 - std::exp(-1.0)) /
                              sample.n_rep);
  CHECK(std::abs(phat - std::exp(-1.0)) <= 3.0 * se);

  std::vector<double> values(sample.n_rep);
  for (int r = 0; r < sample.n_rep; ++r) values[r] = sample.at(0, 0, r);
  const auto ks = testutil::ks_test(
      values, [](double z) { return std::exp(-1.0 / z); });
  CHECK(ks.p_value > 0.01);
}

TEST_CASE("independence case gives empirical theta near 2") {
  const DependenceTree tree =
      DependenceTree::build(testutil::three_layer_4leaf(1.0, 1.0, 1.0, 0.4));
  const KnotGrid grid = make_regular_grid({0, 1, 0, 1}, 2, 2);
  const auto bases = bases_for(tree, grid);
  const std::vector<Site> sites{{0.5, 0.5}};
  const MaxStableSample sample = simulate(tree, bases, sites, 10000, 17);
  std::vector<double> x(sample.n_rep), y(sample.n_rep);
  for (int r = 0; r < sample.n_rep; ++r) {
    x[r] = sample.at(0, 0, r);
    y[r] = sample.at(2, 0, r);
  }
  const EmpiricalTheta theta = empirical_extremal_coefficient(x, y);
  CHECK(std::abs(theta.estimate - 2.0) < 0.05);
}

TEST_CASE("coincident-site dependence approaches the nugget limits") {
  const DependenceTree tree =
      DependenceTree::build(testutil::three_layer_4leaf(0.9, 0.7, 0.4, 0.5));
  const KnotGrid grid = make_regular_grid({0, 1, 0, 1}, 3, 3);
  const auto bases = bases_for(tree, grid);
  // The same location twice: independent noise, shared smooth process.
  const std::vector<Site> sites{{0.52, 0.52}, {0.52, 0.52}};
  const MaxStableSample sample = simulate(tree, bases, sites, 6000, 99);
  std::vector<double> x(sample.n_rep), y(sample.n_rep);
  for (int r = 0; r < sample.n_rep; ++r) {
    x[r] = sample.at(0, 0, r);
    y[r] = sample.at(0, 1, r);  // same leaf, duplicated site
  }
  EmpiricalTheta t_same = empirical_extremal_coefficient(x, y);
  CHECK(std::abs(t_same.estimate - std::pow(2.0, 0.252)) < 0.08);

  for (int r = 0; r < sample.n_rep; ++r) y[r] = sample.at(1, 0, r);
  EmpiricalTheta t_intra = empirical_extremal_coefficient(x, y);
  CHECK(std::abs(t_intra.estimate - std::pow(2.0, 0.63)) < 0.08);

  for (int r = 0; r < sample.n_rep; ++r) y[r] = sample.at(2, 0, r);
  EmpiricalTheta t_inter = empirical_extremal_coefficient(x, y);
  CHECK(std::abs(t_inter.estimate - std::pow(2.0, 0.9)) < 0.08);
}

TEST_CASE("max-stability: rescaled maxima keep the joint distribution") {
  TreeSpec spec;
  spec.alpha = 0.7;
  spec.children.push_back(TreeLeaf{"X", 0.8});
  const DependenceTree tree = DependenceTree::build(spec);
  const KnotGrid grid = make_regular_grid({0, 1, 0, 1}, 2, 2);
  const auto bases = bases_for(tree, grid);
  const std::vector<Site> sites{{0.3, 0.3}, {0.7, 0.6}};

  const int n_pool = 25, m = 4000;
  const double z1 = 1.2, z2 = 0.9;
  const MaxStableSample big =
      simulate(tree, bases, sites, n_pool * m, 2024);
  long hit_single = 0, hit_max = 0;
  for (int j = 0; j < m; ++j) {
    double mx1 = 0.0, mx2 = 0.0;
    for (int i = 0; i < n_pool; ++i) {
      mx1 = std::max(mx1, big.at(0, 0, j * n_pool + i));
      mx2 = std::max(mx2, big.at(0, 1, j * n_pool + i));
    }
    if (mx1 / n_pool <= z1 && mx2 / n_pool <= z2) ++hit_max;
    if (big.at(0, 0, j) <= z1 && big.at(0, 1, j) <= z2) ++hit_single;
  }
  const double p1 = static_cast<double>(hit_single) / m;
  const double p2 = static_cast<double>(hit_max) / m;
  const double se =
      std::sqrt(p1 * (1 - p1) / m) + std::sqrt(p2 * (1 - p2) / m);
  CHECK(std::abs(p1 - p2) <= 3.0 * se);
}

TEST_CASE("parallel and serial simulation are bit-identical") {
  const DependenceTree tree =
      DependenceTree::build(testutil::three_layer_4leaf(0.85, 0.65, 0.5, 0.7));
  const KnotGrid grid = make_regular_grid({0, 2, 0, 2}, 3, 3);
  const auto bases = bases_for(tree, grid);
  const std::vector<Site> sites{{0.4, 0.4}, {1.6, 1.1}, {0.2, 1.9}};
#ifdef _OPENMP
  omp_set_num_threads(2);
#endif
  const MaxStableSample par = simulate(tree, bases, sites, 64, 5150);
  const MaxStableSample ser =
      ref::simulate_serial(tree, bases, sites, 64, 5150);
#ifdef _OPENMP
  omp_set_num_threads(1);
#endif
  const MaxStableSample one = simulate(tree, bases, sites, 64, 5150);
  CHECK(par.values == ser.values);
  CHECK(par.values == one.values);
}

TEST_CASE("gev transforms round trip on samples") {
  TreeSpec spec;
  spec.alpha = 0.6;
  spec.children.push_back(TreeLeaf{"X", 0.5});
  const DependenceTree tree = DependenceTree::build(spec);
  const KnotGrid grid = make_regular_grid({0, 1, 0, 1}, 2, 2);
  const auto bases = bases_for(tree, grid);
  const std::vector<Site> sites{{0.2, 0.2}, {0.8, 0.8}};
  const MaxStableSample frechet = simulate(tree, bases, sites, 50, 7);

  const std::vector<GevParams> margins(2, GevParams{3.0, 2.0, 0.25});
  const MaxStableSample gev = to_gev(frechet, margins);
  CHECK(gev.scale == SampleScale::gev);
  const FromGevResult back = from_gev(gev, margins);
  CHECK(back.violations.empty());
  for (std::size_t i = 0; i < frechet.values.size(); ++i)
    CHECK(std::abs(back.sample.values[i] - frechet.values[i]) <=
          1e-10 * frechet.values[i]);

  // Identity margins leave the values alone.
  const std::vector<GevParams> unit(2, GevParams{1.0, 1.0, 1.0});
  const MaxStableSample same = to_gev(frechet, unit);
  for (std::size_t i = 0; i < frechet.values.size(); ++i)
    CHECK(same.values[i] == doctest::Approx(frechet.values[i]));

  // Support violations are reported per cell.
  const std::vector<GevParams> shifted(2, GevParams{5.0, 0.5, 0.5});
  MaxStableSample bad = gev;
  bad.values[0] = -100.0;
  const FromGevResult rep = from_gev(bad, shifted);
  CHECK_FALSE(rep.violations.empty());
  CHECK(rep.violations[0].leaf == 0);
  CHECK(rep.violations[0].site == 0);
  CHECK(rep.violations[0].rep == 0);
}

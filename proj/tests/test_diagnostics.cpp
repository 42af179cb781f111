#include <cmath>
#include <sstream>

#include "doctest.h"
#include "nestmax/diagnostics.hpp"
#include "testutil.hpp"

using namespace nestmax;

TEST_CASE("ess of an i.i.d. chain is close to n") {
  RngStream rng(70);
  std::vector<double> x(10000);
  for (auto& v : x) v = rng.normal();
  const EssResult r = ess(x);
  CHECK_FALSE(r.degenerate);
  CHECK(std::abs(r.ess - 10000.0) < 0.15 * 10000.0);
}

TEST_CASE("ess of an AR(1) chain matches the analytic value") {
  // AR(1) with rho = 0.5 has ESS = n (1-rho)/(1+rho) = n/3.
  RngStream rng(71);
  const int n = 100000;
  std::vector<double> x(n);
  x[0] = rng.normal();
  for (int i = 1; i < n; ++i)
    x[i] = 0.5 * x[i - 1] + std::sqrt(0.75) * rng.normal();
  const EssResult r = ess(x);
  CHECK(std::abs(r.ess - n / 3.0) < 0.10 * (n / 3.0));
}

TEST_CASE("constant chains are degenerate") {
  const std::vector<double> x(100, 2.5);
  const EssResult r = ess(x);
  CHECK(r.degenerate);
  CHECK(r.ess == 0.0);
  CHECK_THROWS_AS(ess(std::vector<double>(5, 1.0)), std::domain_error);
}

TEST_CASE("ess is invariant under affine maps and bounded by n") {
  RngStream rng(72);
  std::vector<double> x(5000), y(5000);
  x[0] = rng.normal();
  for (std::size_t i = 1; i < x.size(); ++i)
    x[i] = 0.3 * x[i - 1] + rng.normal();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = -4.0 * x[i] + 7.0;
  const EssResult rx = ess(x), ry = ess(y);
  CHECK(rx.ess == doctest::Approx(ry.ess).epsilon(1e-12));
  CHECK(rx.ess <= x.size());
}

TEST_CASE("acf starts at one") {
  RngStream rng(73);
  std::vector<double> x(500);
  for (auto& v : x) v = rng.uniform();
  const auto rho = acf(x, 10);
  CHECK(rho[0] == 1.0);
  CHECK(rho.size() == 11);
}

TEST_CASE("F-madogram estimator endpoints") {
  std::vector<double> x(2000), y(2000);
  RngStream rng(74);
  for (auto& v : x) v = -1.0 / std::log(rng.uniform());
  y = x;
  const EmpiricalTheta same = empirical_extremal_coefficient(x, y);
  CHECK(same.estimate == doctest::Approx(1.0));

  for (auto& v : y) v = -1.0 / std::log(rng.uniform());
  const EmpiricalTheta ind = empirical_extremal_coefficient(x, y);
  CHECK(ind.estimate > 1.9);
  CHECK(ind.estimate <= 2.0);
  CHECK(ind.ci_low <= ind.estimate);
  CHECK(ind.ci_high >= ind.estimate);
}

TEST_CASE("independent unit Frechet pairs give theta near 2") {
  RngStream rng(75);
  const int n = 10000;
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = -1.0 / std::log(rng.uniform());
    y[i] = -1.0 / std::log(rng.uniform());
  }
  const EmpiricalTheta t = empirical_extremal_coefficient(x, y);
  CHECK(std::abs(t.estimate - 2.0) <= 0.05);
  const double naive = naive_extremal_coefficient(x, y);
  CHECK(std::abs(naive - 2.0) <= 0.06);
}

TEST_CASE("theta estimate is rank-based, hence transform invariant") {
  RngStream rng(76);
  const int n = 3000;
  std::vector<double> x(n), y(n), xt(n), yt(n);
  for (int i = 0; i < n; ++i) {
    x[i] = -1.0 / std::log(rng.uniform());
    y[i] = 0.5 * x[i] + -1.0 / std::log(rng.uniform());
    xt[i] = std::log(x[i]);
    yt[i] = std::pow(y[i], 3.0);
  }
  const EmpiricalTheta a = empirical_extremal_coefficient(x, y);
  const EmpiricalTheta b = empirical_extremal_coefficient(xt, yt);
  CHECK(a.estimate == doctest::Approx(b.estimate).epsilon(1e-12));
}

TEST_CASE("bootstrap CI brackets the estimate") {
  RngStream rng(77);
  const int n = 500;
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = -1.0 / std::log(rng.uniform());
    y[i] = std::max(x[i], -1.0 / std::log(rng.uniform()));
  }
  EmpiricalThetaOptions opts;
  opts.bootstrap = 200;
  opts.bootstrap_seed = 8;
  const EmpiricalTheta t = empirical_extremal_coefficient(x, y, opts);
  CHECK(t.ci_low <= t.estimate);
  CHECK(t.ci_high >= t.estimate);
  CHECK(t.ci_low >= 1.0);
  CHECK(t.ci_high <= 2.0);
}

TEST_CASE("short series are rejected") {
  std::vector<double> x(10, 1.0), y(10, 2.0);
  CHECK_THROWS_AS(empirical_extremal_coefficient(x, y), std::domain_error);
}

namespace {

DependenceTree unit_tree() {
  TreeSpec spec;
  spec.alpha = 1.0;
  TreeSpec a, b;
  a.alpha = 1.0;
  a.children.push_back(TreeLeaf{"A", 0.5});
  b.alpha = 1.0;
  b.children.push_back(TreeLeaf{"B", 0.5});
  spec.children.push_back(a);
  spec.children.push_back(b);
  return DependenceTree::build(spec);
}

}  // namespace

TEST_CASE("posterior predictive quantiles: Frechet closed forms") {
  const DependenceTree tree = unit_tree();
  const KnotGrid grid = make_regular_grid({0, 1, 0, 1}, 2, 2);
  // Degenerate one-draw "chain" at all alphas = 1.
  const std::vector<ParameterDraw> draws{
      {{1.0, 1.0, 1.0}, {0.5, 0.5}}};
  const std::vector<Site> sites{{0.5, 0.5}};
  const double p_grid[] = {0.25, 0.5, 0.8};
  const std::pair<double, std::string> labels[] = {{0.5, "median"}};

  // A single leaf at a single site: z_p = -1/log p.
  const int leaf_a[] = {0};
  const auto rows_single = posterior_predictive_max_quantile(
      draws, tree, grid, sites, leaf_a, p_grid, labels, 200000, 10);
  for (const auto& r : rows_single)
    CHECK(std::abs(r.z - (-1.0 / std::log(r.p))) < 0.03 * r.z);
  CHECK(rows_single[1].label == "median");
  CHECK(rows_single[0].label.empty());
  CHECK(rows_single[0].gumbel ==
        doctest::Approx(-std::log(-std::log(0.25))));

  // Maximum of two independent unit Frechet cells: quantile of the max is
  // -2/log p; at p = 0.25 that is 1.4427.
  const int leaf_ab[] = {0, 1};
  const auto rows_max = posterior_predictive_max_quantile(
      draws, tree, grid, sites, leaf_ab, p_grid, labels, 200000, 11);
  CHECK(std::abs(rows_max[0].z - (-2.0 / std::log(0.25))) <
        0.03 * rows_max[0].z);
  // Monotone in p, and the superset maximum dominates the singleton.
  for (std::size_t i = 1; i < rows_max.size(); ++i)
    CHECK(rows_max[i].z >= rows_max[i - 1].z);
  for (std::size_t i = 0; i < rows_max.size(); ++i)
    CHECK(rows_max[i].z >= rows_single[i].z - 1e-9);
}

TEST_CASE("posterior predictive rejects bad input") {
  const DependenceTree tree = unit_tree();
  const KnotGrid grid = make_regular_grid({0, 1, 0, 1}, 2, 2);
  const std::vector<ParameterDraw> draws{{{1.0, 1.0, 1.0}, {0.5, 0.5}}};
  const std::vector<Site> sites{{0.5, 0.5}};
  const double p_grid[] = {0.5};
  CHECK_THROWS_AS(posterior_predictive_max_quantile(
                      draws, tree, grid, sites, {}, p_grid, {}, 100, 1),
                  std::domain_error);
  const int leaves[] = {0};
  const double bad_p[] = {1.5};
  CHECK_THROWS_AS(posterior_predictive_max_quantile(
                      draws, tree, grid, sites, leaves, bad_p, {}, 100, 1),
                  std::domain_error);
}

TEST_CASE("trace export writes rows plus an acf sidecar") {
  const std::vector<int> iters{10, 20, 30};
  const std::vector<double> vals{0.5, 0.7, 0.6};
  std::ostringstream trace, acf_os;
  export_trace(trace, acf_os, iters, vals, 2);
  CHECK(trace.str() ==
        "iteration,value\n10,0.5\n20,0.7\n30,0.6\n");
  CHECK(acf_os.str().rfind("lag,acf\n0,1\n", 0) == 0);
}

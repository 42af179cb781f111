// Timing comparison of the OpenMP kernels against the serial reference.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "nestmax/dependence.hpp"
#include "nestmax/inference.hpp"
#include "nestmax/reference.hpp"
#include "nestmax/simulate.hpp"

using namespace nestmax;

namespace {

template <typename F>
double time_it(F&& f, int repeats = 3) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main() {
  // Two-cluster tree, 10x10 knots, 49 sites, 500 replicates.
  TreeSpec spec;
  spec.alpha = 0.8;
  for (int t = 0; t < 2; ++t) {
    TreeSpec cluster;
    cluster.alpha = 0.6 + 0.1 * t;
    for (int k = 0; k < 2; ++k)
      cluster.children.push_back(
          TreeLeaf{"V" + std::to_string(2 * t + k + 1), 1.5});
    spec.children.push_back(cluster);
  }
  const DependenceTree tree = DependenceTree::build(spec);
  const KnotGrid grid = make_regular_grid({0, 6, 0, 6}, 10, 10);
  std::vector<KernelBasis> bases;
  for (const auto& leaf : tree.leaves()) bases.push_back({grid, leaf.tau});
  const KnotGrid site_grid = make_regular_grid({0, 6, 0, 6}, 7, 7);
  const std::vector<Site>& sites = site_grid.knots;
  const int n_rep = 500;

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("nestmax benchmark (%d OpenMP threads)\n", threads);
  std::printf("%-34s %10s %10s %8s\n", "kernel", "serial[s]", "openmp[s]",
              "speedup");

  MaxStableSample parallel_out, serial_out;
  const double t_sim_omp = time_it(
      [&] { parallel_out = simulate(tree, bases, sites, n_rep, 42); });
  const double t_sim_ser = time_it([&] {
    serial_out = ref::simulate_serial(tree, bases, sites, n_rep, 42);
  });
  const bool same = parallel_out.values == serial_out.values;
  std::printf("%-34s %10.4f %10.4f %7.2fx  (bit-identical: %s)\n",
              "simulate (500 replicates)", t_sim_ser, t_sim_omp,
              t_sim_ser / t_sim_omp, same ? "yes" : "NO");

  // Likelihood sweep: one MCMC step over the simulated data.
  FitData data;
  data.sites.assign(sites.begin(), sites.end());
  data.n_leaves = tree.leaf_count();
  data.n_sites = static_cast<int>(sites.size());
  data.n_rep = n_rep;
  data.values = serial_out.values;
  const Prior prior = Prior::from_sites(data.sites);
  McmcConfig cfg;
  cfg.iterations = 4;
  cfg.burn_in = 0;
  cfg.seed = 7;

  McmcConfig short_cfg = cfg;
  short_cfg.iterations = 5;
  short_cfg.burn_in = 1;
  const double t_chain = time_it(
      [&] { run_chain(data, tree, grid, prior, short_cfg, 0); }, 1);
  std::printf("%-34s %10s %10.4f\n", "mcmc sweep x5 (cached kernels)", "-",
              t_chain);

  const EvaluationPoint pt{
      {sites[0], sites[10], sites[20]},
      std::vector<std::vector<Level>>(
          tree.leaf_count(),
          std::vector<Level>{Level{1.0}, Level{2.0}, Level{0.5}})};
  double v1 = 0, v2 = 0;
  const double t_exp = time_it([&] {
    for (int i = 0; i < 200; ++i) v1 = exponent(tree, bases, pt);
  });
  const double t_exp_ref = time_it([&] {
    for (int i = 0; i < 200; ++i) v2 = ref::exponent_direct(tree, bases, pt);
  });
  std::printf("%-34s %10.4f %10.4f   (log-space vs direct, |dV|=%.2e)\n",
              "exponent x200", t_exp_ref, t_exp, std::abs(v1 - v2));
  return 0;
}

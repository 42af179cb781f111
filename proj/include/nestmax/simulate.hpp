#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nestmax/dependence.hpp"
#include "nestmax/gev.hpp"
#include "nestmax/kernel.hpp"
#include "nestmax/rng.hpp"
#include "nestmax/tree.hpp"

namespace nestmax {

// One positive stable draw per internal tree node per knot.
struct LatentStableField {
  int n_nodes = 0;
  int n_knots = 0;
  std::vector<double> log_amp;  // [node * n_knots + knot], log scale

  double amplitude(int node, int knot) const {
    return std::exp(log_amp[node * n_knots + knot]);
  }
};

LatentStableField draw_latent(const DependenceTree& tree, int n_knots,
                              RngStream& rng);

// The smooth spatial profile of one leaf variable given a latent field:
//   theta(s) = { sum_l Btilde_l w_l(s)^{1/p} }^p,
// where p is the leaf's path product and Btilde_l composes the amplitudes
// along the leaf's ancestor chain with reciprocal-alpha exponents.
double smooth_process(const DependenceTree& tree,
                      std::span<const KernelBasis> bases,
                      const LatentStableField& latent, const LeafId& leaf,
                      Site s);

enum class SampleScale { frechet, gev };

// Simulated field values, leaf-major, then site, then replicate.
struct MaxStableSample {
  std::vector<LeafId> leaves;       // canonical order
  std::vector<std::string> site_ids;
  std::vector<Site> sites;
  int n_rep = 0;
  SampleScale scale = SampleScale::frechet;
  std::uint64_t seed = 0;  // provenance
  std::vector<double> values;

  double& at(int leaf, int site, int rep) {
    return values[(static_cast<std::size_t>(leaf) * sites.size() + site) *
                      n_rep +
                  rep];
  }
  double at(int leaf, int site, int rep) const {
    return values[(static_cast<std::size_t>(leaf) * sites.size() + site) *
                      n_rep +
                  rep];
  }
};

// Exact simulation: per replicate a fresh latent field and, per leaf and
// site, independent Frechet-type noise with shape 1/path product times the
// smooth profile.  Replicates own RNG streams (seed, tag, replicate) and
// may run on OpenMP workers; the output is identical for any worker count.
MaxStableSample simulate(const DependenceTree& tree,
                         std::span<const KernelBasis> bases,
                         std::span<const Site> sites, int n_rep,
                         std::uint64_t seed);

// GEV transforms between the unit-Frechet and observation scales; params
// indexed per (leaf, site) in sample layout order.
struct CellViolation {
  int leaf, site, rep;
  double value;
};

MaxStableSample to_gev(const MaxStableSample& sample,
                       std::span<const GevParams> params);

struct FromGevResult {
  MaxStableSample sample;
  std::vector<CellViolation> violations;  // cells outside the GEV support
};

FromGevResult from_gev(const MaxStableSample& data,
                       std::span<const GevParams> params);

namespace ref {
// Plain serial loop over replicates; bit-identical to simulate() above.
MaxStableSample simulate_serial(const DependenceTree& tree,
                                std::span<const KernelBasis> bases,
                                std::span<const Site> sites, int n_rep,
                                std::uint64_t seed);
}  // namespace ref

}  // namespace nestmax

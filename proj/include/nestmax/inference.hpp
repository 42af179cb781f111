#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nestmax/gev.hpp"
#include "nestmax/kernel.hpp"
#include "nestmax/rng.hpp"
#include "nestmax/tree.hpp"

namespace nestmax {

// Priors of the dependence parameters: alphas are Unif(0,1); bandwidths
// follow tau_scale * Beta(2,5) with tau_scale = 0.5 * h_max, h_max the
// maximum inter-site distance.
struct Prior {
  double tau_scale = 1.0;

  static Prior from_sites(std::span<const Site> sites);

  double log_alpha_prior(double a) const;
  double log_tau_prior(double tau) const;
  double sample_tau(RngStream& rng) const;  // one prior draw
};

struct McmcConfig {
  long iterations = 0;     // R
  long burn_in = -1;       // negative: default R/5
  long thinning = 1;
  std::uint64_t seed = 0;
  bool fix_taus = false;   // keep bandwidths at their tree values
  double target_acceptance = 0.30;  // Robbins-Monro target during burn-in
  double init_scale_alpha = 0.5;
  double init_scale_tau = 0.3;
  double init_scale_latent = 1.2;

  long effective_burn_in() const {
    return burn_in >= 0 ? burn_in : iterations / 5;
  }
  void validate() const;
};

// Inference-side view of the data: values per (leaf, site, replicate) in
// the tree's canonical leaf order, NaN marking missing cells.  Margins are
// empty for unit-Frechet data.
struct FitData {
  std::vector<Site> sites;
  int n_leaves = 0, n_sites = 0, n_rep = 0;
  std::vector<double> values;       // [(leaf*D + site)*n_rep + rep]
  std::vector<GevParams> margins;   // per (leaf, site); empty = unit Frechet

  double value(int leaf, int site, int rep) const {
    return values[(static_cast<std::size_t>(leaf) * n_sites + site) * n_rep +
                  rep];
  }
};

// Current MCMC state: dependence parameters plus the per-replicate latent
// amplitudes and their auxiliary uniforms, stored on the unconstrained
// scales the random walks operate on.
struct McmcState {
  std::vector<double> alphas;     // per internal node, canonical order
  std::vector<double> taus;       // per leaf, canonical order
  int n_knots = 0, n_rep = 0;
  std::vector<double> log_amp;    // [(node*L + knot)*n_rep + rep]
  std::vector<double> logit_aux;  // same layout
  double log_posterior = 0.0;
};

struct BlockStats {
  std::string name;
  long proposals = 0;
  long accepts = 0;
  double scale = 0.0;

  double rate() const {
    return proposals > 0 ? static_cast<double>(accepts) / proposals : 0.0;
  }
};

struct PosteriorChain {
  std::vector<std::string> names;          // alphas, taus, log_posterior
  std::vector<int> iterations;             // retained sweep indices
  std::vector<std::vector<double>> draws;  // [param][retained]
  std::vector<BlockStats> blocks;
  long R = 0, burn_in = 0, thinning = 1;
  std::uint64_t seed = 0;

  std::size_t length() const { return iterations.size(); }
  const std::vector<double>& param(const std::string& name) const;
};

// Conditional log likelihood of the data given the latent fields: the sum
// over leaves/sites/replicates of the GEV(mu*, sigma*, xi*) log density
// induced by the hierarchy, which for unit-Frechet margins is the
// Frechet-noise form with shape 1/path product.  Support violations give
// -inf, never an exception.  Direct (uncached) evaluation.
double log_conditional_likelihood(const McmcState& state, const FitData& data,
                                  const DependenceTree& tree,
                                  std::span<const KernelBasis> bases);

// One full Metropolis-Hastings sweep: every latent pair, then alphas from
// the deepest level up to the root, then bandwidths, updated one by one.
McmcState mh_step(const McmcState& state, const FitData& data,
                  const DependenceTree& tree, const KnotGrid& grid,
                  const Prior& prior, const McmcConfig& config,
                  RngStream& rng);

// Full chain: dispersed start, burn-in with Robbins-Monro scale adaptation
// (frozen afterwards), thinned retention, per-block acceptance bookkeeping.
// chain_index selects the RNG stream family and the dispersed start.
PosteriorChain run_chain(const FitData& data, const DependenceTree& tree,
                         const KnotGrid& grid, const Prior& prior,
                         const McmcConfig& config, int chain_index = 0);

// Per-cell GEV fits over replicates and the probability-integral transform
// of the data to the unit-Frechet scale.  Cells that fail to converge are
// flagged and their values dropped (NaN).
struct MarginCell {
  int leaf = 0, site = 0;
  GevParams params;
  bool converged = false;
  int n = 0;
};

struct MarginsFit {
  std::vector<MarginCell> cells;  // leaf-major
  FitData frechet;                // transformed data, margins cleared
  std::vector<std::string> warnings;
};

MarginsFit fit_margins_gev(const FitData& data);

}  // namespace nestmax

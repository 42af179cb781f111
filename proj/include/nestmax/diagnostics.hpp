#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nestmax/gev.hpp"
#include "nestmax/kernel.hpp"
#include "nestmax/rng.hpp"
#include "nestmax/tree.hpp"

namespace nestmax {

// Sample autocorrelations up to max_lag (inclusive); acf[0] == 1.
std::vector<double> acf(std::span<const double> chain, int max_lag);

// Effective sample size n / (1 + 2 sum rho_k) with the autocovariance sum
// truncated by Geyer's initial monotone positive-pair rule.  Constant
// chains return 0 with the degenerate flag set.
struct EssResult {
  double ess = 0.0;
  bool degenerate = false;
  int pairs_used = 0;
};

EssResult ess(std::span<const double> chain);

// F-madogram estimate of the pairwise extremal coefficient from replicate
// vectors: nu = mean |F(x) - F(y)| / 2 on empirical ranks, and
// theta = (1 + 2 nu)/(1 - 2 nu), clamped to [1,2].
struct EmpiricalTheta {
  double estimate = 1.0;
  double ci_low = 1.0, ci_high = 2.0;
  double nu = 0.0;
  int n_rep = 0;
  bool ties = false;     // midranks were used
  bool low_n = false;    // fewer than 50 replicates
};

struct EmpiricalThetaOptions {
  int bootstrap = 0;  // 0: delta-method CI; >0: bootstrap resamples
  std::uint64_t bootstrap_seed = 0;
};

EmpiricalTheta empirical_extremal_coefficient(
    std::span<const double> x, std::span<const double> y,
    const EmpiricalThetaOptions& opts = {});

// Cross-check estimator on Frechet-scale data: n / sum 1/max(x_i, y_i).
double naive_extremal_coefficient(std::span<const double> x,
                                  std::span<const double> y);

// Posterior-predictive quantiles of the maximum over a leaf/site subset.
// For each retained draw of (alphas, taus) the field is simulated n_sim
// times, the subset maximum collected, and the pooled sample sorted, so
// the quantile table is monotone in p by construction.
struct ParameterDraw {
  std::vector<double> alphas;  // per internal node, canonical order
  std::vector<double> taus;    // per leaf, canonical order
};

struct QuantileRow {
  double p;
  double gumbel;  // -log(-log p)
  double z;
  std::string label;
};

// `sites` is the prediction site subset; `leaf_subset` holds canonical
// leaf indices.  When margins are given (one per leaf_subset x site cell)
// the maxima are taken on the GEV scale.
std::vector<QuantileRow> posterior_predictive_max_quantile(
    std::span<const ParameterDraw> draws, const DependenceTree& tree,
    const KnotGrid& grid, std::span<const Site> sites,
    std::span<const int> leaf_subset, std::span<const double> p_grid,
    std::span<const std::pair<double, std::string>> labels, int n_sim,
    std::uint64_t seed, std::span<const GevParams> margins = {});

// Trace and ACF sidecar export for one chain parameter (plot data only).
void export_trace(std::ostream& trace_os, std::ostream& acf_os,
                  std::span<const int> iterations,
                  std::span<const double> values, int max_lag);

}  // namespace nestmax

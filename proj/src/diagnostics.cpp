#include "nestmax/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "nestmax/simulate.hpp"
#include "nestmax/util.hpp"

namespace nestmax {

std::vector<double> acf(std::span<const double> chain, int max_lag) {
  const int n = static_cast<int>(chain.size());
  if (n < 2) throw std::domain_error("acf: chain too short");
  max_lag = std::min(max_lag, n - 1);
  const double mean =
      std::accumulate(chain.begin(), chain.end(), 0.0) / n;
  std::vector<double> rho(max_lag + 1, 0.0);
  double c0 = 0.0;
  for (double x : chain) c0 += (x - mean) * (x - mean);
  c0 /= n;
  rho[0] = 1.0;
  if (c0 == 0.0) return rho;  // constant chain: acf beyond lag 0 undefined
  for (int k = 1; k <= max_lag; ++k) {
    double ck = 0.0;
    for (int i = 0; i + k < n; ++i)
      ck += (chain[i] - mean) * (chain[i + k] - mean);
    rho[k] = ck / n / c0;
  }
  return rho;
}

EssResult ess(std::span<const double> chain) {
  const int n = static_cast<int>(chain.size());
  if (n < 10) throw std::domain_error("ess: chain must have length >= 10");
  const double mean =
      std::accumulate(chain.begin(), chain.end(), 0.0) / n;
  double c0 = 0.0;
  for (double x : chain) c0 += (x - mean) * (x - mean);
  c0 /= n;
  if (c0 == 0.0) return {0.0, true, 0};

  auto gamma = [&](int k) {
    double ck = 0.0;
    for (int i = 0; i + k < n; ++i)
      ck += (chain[i] - mean) * (chain[i + k] - mean);
    return ck / n;
  };

  // Geyer: sum even-odd pairs G_m = gamma_{2m} + gamma_{2m+1} while they
  // stay positive, enforcing monotone decrease.
  double tau = -1.0;
  double prev = std::numeric_limits<double>::infinity();
  int pairs = 0;
  for (int m = 0; 2 * m + 1 < n; ++m) {
    double g = gamma(2 * m) + gamma(2 * m + 1);
    if (g <= 0.0) break;
    g = std::min(g, prev);
    prev = g;
    tau += 2.0 * g / c0;
    ++pairs;
  }
  tau = std::max(tau, 1.0);
  EssResult res;
  res.ess = std::min(static_cast<double>(n), n / tau);
  res.pairs_used = pairs;
  return res;
}

namespace {

// Empirical CDF values rank/(n+1); ties get midranks.
std::vector<double> rank_cdf(std::span<const double> x, bool& ties) {
  const int n = static_cast<int>(x.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return x[a] < x[b]; });
  std::vector<double> cdf(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    if (j > i) ties = true;
    const double midrank = 0.5 * (i + j) + 1.0;
    for (int k = i; k <= j; ++k) cdf[idx[k]] = midrank / (n + 1.0);
    i = j + 1;
  }
  return cdf;
}

double theta_from_nu(double nu) {
  const double t = (1.0 + 2.0 * nu) / (1.0 - 2.0 * nu);
  return std::clamp(t, 1.0, 2.0);
}

}  // namespace

EmpiricalTheta empirical_extremal_coefficient(
    std::span<const double> x, std::span<const double> y,
    const EmpiricalThetaOptions& opts) {
  if (x.size() != y.size())
    throw std::invalid_argument(
        "empirical_extremal_coefficient: unequal lengths");
  const int n = static_cast<int>(x.size());
  if (n < 20)
    throw std::domain_error(
        "empirical_extremal_coefficient: needs at least 20 replicates");

  EmpiricalTheta out;
  out.n_rep = n;
  out.low_n = n < 50;
  const std::vector<double> fx = rank_cdf(x, out.ties);
  const std::vector<double> fy = rank_cdf(y, out.ties);

  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 * std::abs(fx[i] - fy[i]);
  const double nu = std::accumulate(w.begin(), w.end(), 0.0) / n;
  out.nu = nu;
  out.estimate = theta_from_nu(nu);

  if (opts.bootstrap > 0) {
    RngStream rng(opts.bootstrap_seed, fnv1a("theta-bootstrap"));
    std::vector<double> bx(n), by(n), thetas(opts.bootstrap);
    for (int b = 0; b < opts.bootstrap; ++b) {
      for (int i = 0; i < n; ++i) {
        const int j = static_cast<int>(rng.next_u64() % n);
        bx[i] = x[j];
        by[i] = y[j];
      }
      bool t = false;
      const auto fbx = rank_cdf(bx, t);
      const auto fby = rank_cdf(by, t);
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += 0.5 * std::abs(fbx[i] - fby[i]);
      thetas[b] = theta_from_nu(s / n);
    }
    out.ci_low = quantile(thetas, 0.025);
    out.ci_high = quantile(thetas, 0.975);
  } else {
    // Delta method: dtheta/dnu = 4/(1 - 2 nu)^2.
    double var = 0.0;
    for (double v : w) var += (v - nu) * (v - nu);
    var /= (n > 1 ? n - 1 : 1);
    const double se_nu = std::sqrt(var / n);
    const double d = 4.0 / ((1.0 - 2.0 * nu) * (1.0 - 2.0 * nu));
    out.ci_low = out.estimate - 1.959963984540054 * d * se_nu;
    out.ci_high = out.estimate + 1.959963984540054 * d * se_nu;
  }
  out.ci_low = std::clamp(out.ci_low, 1.0, 2.0);
  out.ci_high = std::clamp(out.ci_high, 1.0, 2.0);
  out.ci_low = std::min(out.ci_low, out.estimate);
  out.ci_high = std::max(out.ci_high, out.estimate);
  return out;
}

double naive_extremal_coefficient(std::span<const double> x,
                                  std::span<const double> y) {
  if (x.size() != y.size() || x.empty())
    throw std::invalid_argument("naive_extremal_coefficient: bad input");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += 1.0 / std::max(x[i], y[i]);
  return std::clamp(static_cast<double>(x.size()) / s, 1.0, 2.0);
}

std::vector<QuantileRow> posterior_predictive_max_quantile(
    std::span<const ParameterDraw> draws, const DependenceTree& tree,
    const KnotGrid& grid, std::span<const Site> sites,
    std::span<const int> leaf_subset, std::span<const double> p_grid,
    std::span<const std::pair<double, std::string>> labels, int n_sim,
    std::uint64_t seed, std::span<const GevParams> margins) {
  if (draws.empty())
    throw std::domain_error("posterior predictive: chain is empty");
  if (leaf_subset.empty())
    throw std::domain_error("posterior predictive: leaf subset is empty");
  if (sites.empty())
    throw std::domain_error("posterior predictive: site subset is empty");
  if (!margins.empty() &&
      margins.size() != leaf_subset.size() * sites.size())
    throw std::invalid_argument(
        "posterior predictive: margins must cover leaf_subset x sites");
  for (double p : p_grid)
    if (!(p > 0.0 && p < 1.0))
      throw std::domain_error("posterior predictive: p must lie in (0,1)");

  const int n_draws = static_cast<int>(draws.size());
  const int n_sites = static_cast<int>(sites.size());
  std::vector<double> maxima(static_cast<std::size_t>(n_draws) * n_sim);

  // Simulation streams are keyed per draw, so the pooled sample does not
  // depend on how draws are scheduled across workers.
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n_draws; ++j) {
    const TreeSpec spec =
        assign_parameters(tree, draws[j].alphas, draws[j].taus);
    const DependenceTree draw_tree = DependenceTree::build(spec);
    std::vector<KernelBasis> bases;
    for (const auto& leaf : draw_tree.leaves())
      bases.push_back({grid, leaf.tau});
    const MaxStableSample sim =
        ref::simulate_serial(draw_tree, bases, sites, n_sim,
                             mix64(seed ^ mix64(stream_tag::predictive + j)));
    for (int r = 0; r < n_sim; ++r) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < leaf_subset.size(); ++i)
        for (int d = 0; d < n_sites; ++d) {
          double v = sim.at(leaf_subset[i], d, r);
          if (!margins.empty())
            v = frechet_to_gev(v, margins[i * n_sites + d]);
          mx = std::max(mx, v);
        }
      maxima[static_cast<std::size_t>(j) * n_sim + r] = mx;
    }
  }

  std::sort(maxima.begin(), maxima.end());
  std::vector<QuantileRow> rows;
  rows.reserve(p_grid.size());
  for (double p : p_grid) {
    QuantileRow row;
    row.p = p;
    row.gumbel = -std::log(-std::log(p));
    const double h = p * (static_cast<double>(maxima.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    row.z = lo + 1 < maxima.size()
                ? maxima[lo] * (1.0 - frac) + maxima[lo + 1] * frac
                : maxima.back();
    for (const auto& [lp, name] : labels)
      if (std::abs(lp - p) < 1e-9) row.label = name;
    rows.push_back(std::move(row));
  }
  return rows;
}

void export_trace(std::ostream& trace_os, std::ostream& acf_os,
                  std::span<const int> iterations,
                  std::span<const double> values, int max_lag) {
  if (iterations.size() != values.size())
    throw std::invalid_argument("export_trace: length mismatch");
  trace_os << "iteration,value\n";
  for (std::size_t i = 0; i < values.size(); ++i)
    trace_os << iterations[i] << ',' << format_double(values[i]) << '\n';
  const std::vector<double> rho =
      acf(values, std::min<int>(max_lag, static_cast<int>(values.size()) - 1));
  acf_os << "lag,acf\n";
  for (std::size_t k = 0; k < rho.size(); ++k)
    acf_os << k << ',' << format_double(rho[k]) << '\n';
}

}  // namespace nestmax

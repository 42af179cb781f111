#include "nestmax/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "nestmax/stable.hpp"
#include "nestmax/util.hpp"

namespace nestmax {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p) - std::log1p(-p); }

// log{b(1-b)} for b = logistic(x); the Jacobian of the logit transform.
double log_jac_logit(double x) {
  const double ax = std::abs(x);
  return -(ax + 2.0 * std::log1p(std::exp(-ax)));
}

// Augmented stable log density in terms of log-amplitude; mirrors
// log_density_augmented but avoids exponentiating the amplitude.
double aug_logpdf(double log_amp, double aux, double alpha) {
  constexpr double eps = 1e-12;
  const double om = 1.0 - alpha;
  double b = aux;
  if (b < eps) b = eps;
  if (b > 1.0 - eps) b = 1.0 - eps;
  const double log_c = stable_log_c(alpha, b);
  const double log_pow = log_c - (alpha / om) * log_amp;
  if (log_pow > 700.0) return kNegInf;
  return std::log(alpha) - std::log(om) - log_amp / om + log_c -
         std::exp(log_pow);
}

}  // namespace

Prior Prior::from_sites(std::span<const Site> sites) {
  if (sites.size() < 2)
    throw std::invalid_argument("Prior::from_sites: needs at least two sites");
  double hmax = 0.0;
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j)
      hmax = std::max(hmax, distance(sites[i], sites[j]));
  if (!(hmax > 0.0))
    throw std::invalid_argument("Prior::from_sites: all sites coincide");
  return Prior{0.5 * hmax};
}

double Prior::log_alpha_prior(double a) const {
  return (a > 0.0 && a < 1.0) ? 0.0 : kNegInf;
}

double Prior::log_tau_prior(double tau) const {
  const double x = tau / tau_scale;
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  // Beta(2,5): 1/B(2,5) = 30.
  return std::log(30.0) + std::log(x) + 4.0 * std::log1p(-x) -
         std::log(tau_scale);
}

double Prior::sample_tau(RngStream& rng) const {
  // Beta(2,5) from integer-shape gamma sums.
  double g2 = rng.exponential() + rng.exponential();
  double g5 = 0.0;
  for (int i = 0; i < 5; ++i) g5 += rng.exponential();
  return tau_scale * g2 / (g2 + g5);
}

void McmcConfig::validate() const {
  if (iterations < 1)
    throw std::invalid_argument("mcmc: iterations must be >= 1");
  if (effective_burn_in() >= iterations)
    throw std::invalid_argument("mcmc: burn_in must be below iterations");
  if (thinning < 1) throw std::invalid_argument("mcmc: thinning must be >= 1");
}

const std::vector<double>& PosteriorChain::param(
    const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return draws[i];
  throw std::out_of_range("chain has no parameter \"" + name + "\"");
}

namespace {

// The conditional log density of one observation given its smooth profile:
//   llik = -log(p sigma) + log W + (p xi + 1) log core - W core,
// with W = theta^{1/p} and core = {1 + xi (z - mu)/sigma}^{-1/(p xi)}
// (Gumbel limit below kGumbelEps).  Unit Frechet is GEV(1,1,1).
struct CellTerms {
  double cz;      // core factor; NaN marks a missing cell
  double cconst;  // W-independent part of the log density
};

CellTerms cell_terms(double z, const GevParams& g, double p) {
  if (std::isnan(z)) return {kNaN, 0.0};
  double log_core;
  if (std::abs(g.xi) < kGumbelEps) {
    log_core = -(z - g.mu) / (p * g.sigma);
  } else {
    const double arg = 1.0 + g.xi * (z - g.mu) / g.sigma;
    if (!(arg > 0.0)) return {0.0, kNegInf};  // outside the GEV support
    log_core = -std::log(arg) / (p * g.xi);
  }
  const double core = std::exp(log_core);
  const double cconst =
      -std::log(p * g.sigma) + (p * g.xi + 1.0) * log_core;
  return {core, cconst};
}

struct Engine {
  const DependenceTree& tree;
  const FitData& data;
  const Prior& prior;
  McmcConfig cfg;
  const KnotGrid& grid;

  int V, K, L, D, N;

  // Parameters and latent state.
  std::vector<double> alpha;   // V
  std::vector<double> tau;     // K
  std::vector<double> pk;      // K, path products
  std::vector<double> logA;    // (v*L + l)*N + r
  std::vector<double> logitB;  // same layout

  // Per-leaf path structure; exponents depend on the current alphas.
  std::vector<std::vector<int>> path;       // [k] node indices, root first
  std::vector<std::vector<double>> path_e;  // [k] amplitude exponents
  std::vector<std::vector<int>> leaves_under;  // [v]
  std::vector<double> expo;                 // [v*K + k], 0 when off-path

  // Caches (per-leaf / per-node vectors so accepts swap in O(1)).
  std::vector<std::vector<double>> lw;       // [k][l*D + d] log weights
  std::vector<std::vector<double>> wp;       // [k][l*D + d] exp(lw/p)
  std::vector<std::vector<double>> Bt;       // [k][l*N + r]
  std::vector<std::vector<double>> Wv;       // [k][r*D + d]
  std::vector<std::vector<double>> czv;      // [k][r*D + d]
  std::vector<std::vector<double>> ccv;      // [k][r*D + d]
  std::vector<std::vector<double>> llik_kr;  // [k][r]
  std::vector<std::vector<double>> aug_lp;   // [v][l*N + r]

  // Candidate scratch, same shapes.
  std::vector<std::vector<double>> lw_c, wp_c, Bt_c, Wv_c, czv_c, ccv_c,
      llik_kr_c, aug_lp_c;
  std::vector<double> partial_r;    // [N] per-replicate reduction buffer
  std::vector<double> scratch_w;    // [N*K*D] latent-update W rows
  std::vector<double> scratch_dll;  // [N*K] latent-update per-leaf deltas

  // Proposal scales and acceptance bookkeeping.
  std::vector<double> scale_alpha, scale_tau, scale_lat;
  std::vector<long> lat_prop, lat_acc;          // [v*N + r], per sweep
  std::vector<long> frozen_prop, frozen_acc;    // per block, after burn-in
  std::vector<long> adapt_prop, adapt_acc;      // per block, during burn-in
  std::vector<std::string> block_names;
  std::vector<int> alpha_update_order;

  std::vector<RngStream> lat_rng;
  RngStream param_rng{0};

  Engine(const DependenceTree& tree_, const FitData& data_,
         const KnotGrid& grid_, const Prior& prior_, const McmcConfig& cfg_)
      : tree(tree_), data(data_), prior(prior_), cfg(cfg_), grid(grid_) {
    cfg.validate();
    V = tree.node_count();
    K = tree.leaf_count();
    L = static_cast<int>(grid.knots.size());
    D = data.n_sites;
    N = data.n_rep;
    if (data.n_leaves != K)
      throw std::invalid_argument("mcmc: data leaves do not match the tree");
    if (!data.margins.empty() &&
        data.margins.size() != static_cast<std::size_t>(K) * D)
      throw std::invalid_argument("mcmc: margins must cover every cell");
    if (L < 1) throw std::invalid_argument("mcmc: knot grid is empty");
    if (data.margins.empty())
      for (double z : data.values)
        if (!std::isnan(z) && !(z > 0.0))
          throw std::invalid_argument(
              "mcmc: unit-Frechet data must be positive");

    alpha.resize(V);
    tau.resize(K);
    pk.resize(K);
    for (int v = 0; v < V; ++v) alpha[v] = tree.node_alpha(v);
    for (int k = 0; k < K; ++k) tau[k] = tree.leaves()[k].tau;

    path.resize(K);
    path_e.resize(K);
    leaves_under.resize(V);
    for (int k = 0; k < K; ++k) path[k] = tree.leaf_path(k);
    for (int v = 0; v < V; ++v) leaves_under[v] = tree.node_leaves(v);
    expo.assign(static_cast<std::size_t>(V) * K, 0.0);

    const std::size_t lat_size = static_cast<std::size_t>(V) * L * N;
    logA.assign(lat_size, 0.0);
    logitB.assign(lat_size, 0.0);

    auto alloc = [&](std::vector<std::vector<double>>& a, int outer,
                     std::size_t inner) {
      a.assign(outer, std::vector<double>(inner, 0.0));
    };
    alloc(lw, K, static_cast<std::size_t>(L) * D);
    alloc(wp, K, static_cast<std::size_t>(L) * D);
    alloc(Bt, K, static_cast<std::size_t>(L) * N);
    alloc(Wv, K, static_cast<std::size_t>(N) * D);
    alloc(czv, K, static_cast<std::size_t>(N) * D);
    alloc(ccv, K, static_cast<std::size_t>(N) * D);
    alloc(llik_kr, K, N);
    alloc(aug_lp, V, static_cast<std::size_t>(L) * N);
    lw_c = lw;
    wp_c = wp;
    Bt_c = Bt;
    Wv_c = Wv;
    czv_c = czv;
    ccv_c = ccv;
    llik_kr_c = llik_kr;
    aug_lp_c = aug_lp;
    partial_r.assign(std::max(N, 1), 0.0);
    scratch_w.assign(static_cast<std::size_t>(std::max(N, 1)) * K * D, 0.0);
    scratch_dll.assign(static_cast<std::size_t>(std::max(N, 1)) * K, 0.0);

    scale_alpha.assign(V, cfg.init_scale_alpha);
    scale_tau.assign(K, cfg.init_scale_tau);
    scale_lat.assign(V, cfg.init_scale_latent);
    lat_prop.assign(static_cast<std::size_t>(V) * std::max(N, 1), 0);
    lat_acc = lat_prop;

    for (int v = 0; v < V; ++v)
      block_names.push_back("latent_" + tree.node_label(v));
    for (int v = 0; v < V; ++v) block_names.push_back(tree.node_label(v));
    for (int k = 0; k < K; ++k)
      block_names.push_back("tau_" + tree.leaves()[k].id);
    frozen_prop.assign(block_names.size(), 0);
    frozen_acc.assign(block_names.size(), 0);
    adapt_prop.assign(block_names.size(), 0);
    adapt_acc.assign(block_names.size(), 0);

    // Alphas update deepest level first, the root last.
    alpha_update_order.resize(V);
    std::iota(alpha_update_order.begin(), alpha_update_order.end(), 0);
    std::vector<int> depth(V, 0);
    for (int v = 1; v < V; ++v) depth[v] = depth[tree.node_parent(v)] + 1;
    std::stable_sort(alpha_update_order.begin(), alpha_update_order.end(),
                     [&](int a, int b) { return depth[a] > depth[b]; });

    rebuild_exponents();
  }

  void rebuild_exponents() {
    std::fill(expo.begin(), expo.end(), 0.0);
    for (int k = 0; k < K; ++k) {
      const auto& pth = path[k];
      const int m = static_cast<int>(pth.size());
      path_e[k].assign(m, 1.0);
      for (int j = m - 2; j >= 0; --j)
        path_e[k][j] = path_e[k][j + 1] / alpha[pth[j + 1]];
      double prod = 1.0;
      for (int v : pth) prod *= alpha[v];
      pk[k] = prod;
      for (int j = 0; j < m; ++j) expo[pth[j] * K + k] = path_e[k][j];
    }
  }

  // ---- cache recompute helpers -------------------------------------------

  void compute_lw(double tau_k, std::vector<double>& out) const {
    const KernelBasis basis{grid, tau_k};
    for (int d = 0; d < D; ++d) {
      const std::vector<double> w = log_weights(basis, data.sites[d]);
      for (int l = 0; l < L; ++l) out[static_cast<std::size_t>(l) * D + d] = w[l];
    }
  }

  void compute_wp(const std::vector<double>& lw_k, double p,
                  std::vector<double>& out) const {
    const double inv_p = 1.0 / p;
    for (std::size_t i = 0; i < lw_k.size(); ++i)
      out[i] = std::exp(lw_k[i] * inv_p);
  }

  void compute_cells(int k, double p, std::vector<double>& cz_out,
                     std::vector<double>& cc_out) const {
    static const GevParams unit{1.0, 1.0, 1.0};
    for (int r = 0; r < N; ++r)
      for (int d = 0; d < D; ++d) {
        const GevParams& g = data.margins.empty()
                                 ? unit
                                 : data.margins[static_cast<std::size_t>(k) * D + d];
        const CellTerms t = cell_terms(data.value(k, d, r), g, p);
        cz_out[static_cast<std::size_t>(r) * D + d] = t.cz;
        cc_out[static_cast<std::size_t>(r) * D + d] = t.cconst;
      }
  }

  // log Btilde for leaf k at (l, r) under the exponents in e.
  double compose_log_bt(int k, const std::vector<double>& e, int l,
                        int r) const {
    const auto& pth = path[k];
    double s = 0.0;
    for (std::size_t j = 0; j < pth.size(); ++j)
      s += e[j] * logA[(static_cast<std::size_t>(pth[j]) * L + l) * N + r];
    return s;
  }

  void compute_bt_rep(int k, const std::vector<double>& e, int r,
                      std::vector<double>& out) const {
    for (int l = 0; l < L; ++l)
      out[static_cast<std::size_t>(l) * N + r] =
          std::exp(compose_log_bt(k, e, l, r));
  }

  void compute_w_rep(const std::vector<double>& bt,
                     const std::vector<double>& wp_k, int r,
                     std::vector<double>& w_out) const {
    double* wr = w_out.data() + static_cast<std::size_t>(r) * D;
    for (int d = 0; d < D; ++d) wr[d] = 0.0;
    for (int l = 0; l < L; ++l) {
      const double b = bt[static_cast<std::size_t>(l) * N + r];
      const double* wl = wp_k.data() + static_cast<std::size_t>(l) * D;
      for (int d = 0; d < D; ++d) wr[d] += b * wl[d];
    }
  }

  double llik_rep(const std::vector<double>& w,
                  const std::vector<double>& cz_k,
                  const std::vector<double>& cc_k, int r) const {
    const double* wr = w.data() + static_cast<std::size_t>(r) * D;
    const double* czr = cz_k.data() + static_cast<std::size_t>(r) * D;
    const double* ccr = cc_k.data() + static_cast<std::size_t>(r) * D;
    double s = 0.0;
    for (int d = 0; d < D; ++d) {
      if (std::isnan(czr[d])) continue;
      const double w_d = wr[d];
      if (!(w_d > 0.0) || !std::isfinite(w_d)) return kNegInf;
      s += ccr[d] + std::log(w_d) - w_d * czr[d];
    }
    return s;
  }

  void compute_aug_rep(int v, double a, int r, std::vector<double>& out) const {
    for (int l = 0; l < L; ++l) {
      const std::size_t idx = (static_cast<std::size_t>(v) * L + l) * N + r;
      out[static_cast<std::size_t>(l) * N + r] =
          aug_logpdf(logA[idx], logistic(logitB[idx]), alpha_clamped(a));
    }
  }

  static double alpha_clamped(double a) { return std::min(a, 1.0 - 1e-12); }

  // Rebuild every cache from the current state.
  void refresh_all() {
    rebuild_exponents();
    for (int k = 0; k < K; ++k) {
      compute_lw(tau[k], lw[k]);
      compute_wp(lw[k], pk[k], wp[k]);
      compute_cells(k, pk[k], czv[k], ccv[k]);
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < N; ++r) {
      for (int k = 0; k < K; ++k) {
        compute_bt_rep(k, path_e[k], r, Bt[k]);
        compute_w_rep(Bt[k], wp[k], r, Wv[k]);
        llik_kr[k][r] = llik_rep(Wv[k], czv[k], ccv[k], r);
      }
      for (int v = 0; v < V; ++v) compute_aug_rep(v, alpha[v], r, aug_lp[v]);
    }
  }

  double total_llik() const {
    double s = 0.0;
    for (int k = 0; k < K; ++k) s += pairwise_sum(llik_kr[k]);
    return s;
  }

  double total_aug() const {
    double s = 0.0;
    for (int v = 0; v < V; ++v) s += pairwise_sum(aug_lp[v]);
    return s;
  }

  double log_posterior() const {
    double lp = total_llik() + total_aug();
    for (int v = 0; v < V; ++v) lp += prior.log_alpha_prior(alpha[v]);
    if (!cfg.fix_taus)
      for (int k = 0; k < K; ++k) lp += prior.log_tau_prior(tau[k]);
    return lp;
  }

  // ---- updates ------------------------------------------------------------

  void latent_updates_rep(int r, RngStream& rng) {
    double* w_scr = scratch_w.data() + static_cast<std::size_t>(r) * K * D;
    double* dll = scratch_dll.data() + static_cast<std::size_t>(r) * K;
    for (int v = 0; v < V; ++v) {
      const double s = scale_lat[v];
      const double a_v = alpha_clamped(alpha[v]);
      long prop = 0, acc = 0;
      for (int l = 0; l < L; ++l) {
        const std::size_t idx = (static_cast<std::size_t>(v) * L + l) * N + r;
        const double la = logA[idx];
        const double lb = logitB[idx];
        const double la_c = la + s * rng.normal();
        const double lb_c = lb + s * rng.normal();
        const double lp_old = aug_lp[v][static_cast<std::size_t>(l) * N + r];
        const double lp_new = aug_logpdf(la_c, logistic(lb_c), a_v);
        double ratio = lp_new - lp_old + (la_c - la) + log_jac_logit(lb_c) -
                       log_jac_logit(lb);
        const auto& under = leaves_under[v];
        if (std::isfinite(ratio)) {
          int slot = 0;
          for (int k : under) {
            const double f = std::exp(expo[v * K + k] * (la_c - la));
            const double bt = Bt[k][static_cast<std::size_t>(l) * N + r];
            const double dbt = bt * (f - 1.0);
            const double* wr = Wv[k].data() + static_cast<std::size_t>(r) * D;
            const double* wl = wp[k].data() + static_cast<std::size_t>(l) * D;
            const double* czr =
                czv[k].data() + static_cast<std::size_t>(r) * D;
            double* wc = w_scr + static_cast<std::size_t>(slot) * D;
            double d_sum = 0.0;
            for (int d = 0; d < D; ++d) {
              double w_new = wr[d] + dbt * wl[d];
              if (!(w_new > 0.0))
                w_new = std::numeric_limits<double>::min();
              wc[d] = w_new;
              if (!std::isnan(czr[d]))
                d_sum += std::log(w_new / wr[d]) - (w_new - wr[d]) * czr[d];
            }
            dll[slot] = d_sum;
            ratio += d_sum;
            ++slot;
          }
        }
        ++prop;
        if (std::isfinite(ratio) && std::log(rng.uniform()) < ratio) {
          ++acc;
          logA[idx] = la_c;
          logitB[idx] = lb_c;
          aug_lp[v][static_cast<std::size_t>(l) * N + r] = lp_new;
          int slot = 0;
          for (int k : under) {
            const double f = std::exp(expo[v * K + k] * (la_c - la));
            Bt[k][static_cast<std::size_t>(l) * N + r] *= f;
            double* wr = Wv[k].data() + static_cast<std::size_t>(r) * D;
            const double* wc = w_scr + static_cast<std::size_t>(slot) * D;
            for (int d = 0; d < D; ++d) wr[d] = wc[d];
            llik_kr[k][r] += dll[slot];
            ++slot;
          }
        }
      }
      lat_prop[static_cast<std::size_t>(v) * N + r] += prop;
      lat_acc[static_cast<std::size_t>(v) * N + r] += acc;
    }
  }

  bool update_alpha(int v) {
    const double a_old = alpha[v];
    const double a_new =
        logistic(logit(a_old) + scale_alpha[v] * param_rng.normal());
    const double u = param_rng.uniform();
    const double jac_new = std::log(a_new) + std::log1p(-a_new);
    if (!std::isfinite(jac_new)) return false;  // saturated proposal
    double ratio = jac_new - std::log(a_old) - std::log1p(-a_old);

    const auto& affected = leaves_under[v];
    // Candidate path products and exponents for the affected leaves.
    std::vector<std::vector<double>> e_c(affected.size());
    std::vector<double> pk_c(affected.size());
    for (std::size_t i = 0; i < affected.size(); ++i) {
      const int k = affected[i];
      const auto& pth = path[k];
      const int m = static_cast<int>(pth.size());
      e_c[i].assign(m, 1.0);
      for (int j = m - 2; j >= 0; --j) {
        const double a_j1 = pth[j + 1] == v ? a_new : alpha[pth[j + 1]];
        e_c[i][j] = e_c[i][j + 1] / a_j1;
      }
      double prod = 1.0;
      for (int u_n : pth) prod *= (u_n == v ? a_new : alpha[u_n]);
      pk_c[i] = prod;
    }
    for (std::size_t i = 0; i < affected.size(); ++i) {
      const int k = affected[i];
      compute_wp(lw[k], pk_c[i], wp_c[k]);
      compute_cells(k, pk_c[i], czv_c[k], ccv_c[k]);
    }
    const double a_cl = alpha_clamped(a_new);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < N; ++r) {
      double part = 0.0;
      for (std::size_t i = 0; i < affected.size(); ++i) {
        const int k = affected[i];
        compute_bt_rep(k, e_c[i], r, Bt_c[k]);
        compute_w_rep(Bt_c[k], wp_c[k], r, Wv_c[k]);
        llik_kr_c[k][r] = llik_rep(Wv_c[k], czv_c[k], ccv_c[k], r);
      }
      compute_aug_rep(v, a_cl, r, aug_lp_c[v]);
      for (int l = 0; l < L; ++l)
        part += aug_lp_c[v][static_cast<std::size_t>(l) * N + r] -
                aug_lp[v][static_cast<std::size_t>(l) * N + r];
      partial_r[r] = part;
    }
    if (N > 0) ratio += pairwise_sum(std::span(partial_r.data(), N));
    for (int k : affected)
      ratio += pairwise_sum(llik_kr_c[k]) - pairwise_sum(llik_kr[k]);

    if (!(std::isfinite(ratio) && std::log(u) < ratio)) return false;
    alpha[v] = a_new;
    for (std::size_t i = 0; i < affected.size(); ++i) {
      const int k = affected[i];
      pk[k] = pk_c[i];
      std::swap(wp[k], wp_c[k]);
      std::swap(czv[k], czv_c[k]);
      std::swap(ccv[k], ccv_c[k]);
      std::swap(Bt[k], Bt_c[k]);
      std::swap(Wv[k], Wv_c[k]);
      std::swap(llik_kr[k], llik_kr_c[k]);
    }
    std::swap(aug_lp[v], aug_lp_c[v]);
    rebuild_exponents();
    return true;
  }

  bool update_tau(int k) {
    const double t_old = tau[k];
    const double t_new =
        std::exp(std::log(t_old) + scale_tau[k] * param_rng.normal());
    const double u = param_rng.uniform();
    double ratio = prior.log_tau_prior(t_new) - prior.log_tau_prior(t_old) +
                   std::log(t_new) - std::log(t_old);
    if (!std::isfinite(ratio)) return false;

    compute_lw(t_new, lw_c[k]);
    compute_wp(lw_c[k], pk[k], wp_c[k]);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < N; ++r) {
      compute_w_rep(Bt[k], wp_c[k], r, Wv_c[k]);
      llik_kr_c[k][r] = llik_rep(Wv_c[k], czv[k], ccv[k], r);
    }
    ratio += pairwise_sum(llik_kr_c[k]) - pairwise_sum(llik_kr[k]);

    if (!(std::isfinite(ratio) && std::log(u) < ratio)) return false;
    tau[k] = t_new;
    std::swap(lw[k], lw_c[k]);
    std::swap(wp[k], wp_c[k]);
    std::swap(Wv[k], Wv_c[k]);
    std::swap(llik_kr[k], llik_kr_c[k]);
    return true;
  }

  // One full sweep; adapts proposal scales when adapt_step > 0.
  void sweep(long sweep_index, bool adapt) {
    std::fill(lat_prop.begin(), lat_prop.end(), 0);
    std::fill(lat_acc.begin(), lat_acc.end(), 0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < N; ++r) latent_updates_rep(r, lat_rng[r]);

    const double gamma =
        adapt ? 2.0 / std::pow(static_cast<double>(sweep_index) + 1.0, 0.6)
              : 0.0;
    auto record = [&](std::size_t block, long p, long a) {
      if (adapt) {
        adapt_prop[block] += p;
        adapt_acc[block] += a;
      } else {
        frozen_prop[block] += p;
        frozen_acc[block] += a;
      }
    };
    auto adapt_scale = [&](double& s, double rate) {
      if (!adapt) return;
      s *= std::exp(gamma * (rate - cfg.target_acceptance));
      s = std::clamp(s, 1e-4, 50.0);
    };

    for (int v = 0; v < V; ++v) {
      long p = 0, a = 0;
      for (int r = 0; r < N; ++r) {
        p += lat_prop[static_cast<std::size_t>(v) * N + r];
        a += lat_acc[static_cast<std::size_t>(v) * N + r];
      }
      record(v, p, a);
      if (p > 0) adapt_scale(scale_lat[v], static_cast<double>(a) / p);
    }

    for (int v : alpha_update_order) {
      const bool acc = update_alpha(v);
      record(static_cast<std::size_t>(V) + v, 1, acc ? 1 : 0);
      adapt_scale(scale_alpha[v], acc ? 1.0 : 0.0);
    }
    if (!cfg.fix_taus) {
      for (int k = 0; k < K; ++k) {
        const bool acc = update_tau(k);
        record(static_cast<std::size_t>(2) * V + k, 1, acc ? 1 : 0);
        adapt_scale(scale_tau[k], acc ? 1.0 : 0.0);
      }
    }
    // Incremental caches drift at floating-point speed; rebuild on a fixed
    // schedule so long chains stay exact.
    if (sweep_index % 2000 == 0) refresh_all();
  }

  // ---- state transfer ----------------------------------------------------

  McmcState export_state() const {
    McmcState st;
    st.alphas = alpha;
    st.taus = tau;
    st.n_knots = L;
    st.n_rep = N;
    st.log_amp = logA;
    st.logit_aux = logitB;
    st.log_posterior = log_posterior();
    return st;
  }

  void import_state(const McmcState& st) {
    if (static_cast<int>(st.alphas.size()) != V ||
        static_cast<int>(st.taus.size()) != K || st.n_knots != L ||
        st.n_rep != N)
      throw std::invalid_argument("mcmc: state dimensions do not match");
    alpha = st.alphas;
    tau = st.taus;
    logA = st.log_amp;
    logitB = st.logit_aux;
    refresh_all();
  }

  void init_streams(int chain_index) {
    param_rng = RngStream(cfg.seed, stream_tag::chain,
                          static_cast<std::uint64_t>(chain_index));
    lat_rng.clear();
    lat_rng.reserve(N);
    for (int r = 0; r < N; ++r)
      lat_rng.emplace_back(cfg.seed, stream_tag::latent,
                           static_cast<std::uint64_t>(chain_index),
                           static_cast<std::uint64_t>(r));
  }

  void dispersed_start(int chain_index) {
    RngStream init_rng(cfg.seed, stream_tag::init,
                       static_cast<std::uint64_t>(chain_index));
    for (int v = 0; v < V; ++v) alpha[v] = init_rng.uniform(0.15, 0.9);
    if (!cfg.fix_taus)
      for (int k = 0; k < K; ++k)
        tau[k] = std::clamp(prior.sample_tau(init_rng), 0.02 * prior.tau_scale,
                            0.98 * prior.tau_scale);
    std::fill(logA.begin(), logA.end(), 0.0);
    std::fill(logitB.begin(), logitB.end(), 0.0);
    refresh_all();
  }
};

}  // namespace

double log_conditional_likelihood(const McmcState& state, const FitData& data,
                                  const DependenceTree& tree,
                                  std::span<const KernelBasis> bases) {
  const int K = tree.leaf_count();
  if (static_cast<int>(bases.size()) != K)
    throw std::invalid_argument(
        "log_conditional_likelihood: one basis per leaf required");
  const int L = state.n_knots;
  static const GevParams unit{1.0, 1.0, 1.0};
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    const double p = [&] {
      double prod = 1.0;
      for (int v : tree.leaf_path(k)) prod *= state.alphas[v];
      return prod;
    }();
    const auto& pth = tree.leaf_path(k);
    std::vector<double> e(pth.size(), 1.0);
    for (int j = static_cast<int>(pth.size()) - 2; j >= 0; --j)
      e[j] = e[j + 1] / state.alphas[pth[j + 1]];
    for (int d = 0; d < data.n_sites; ++d) {
      const std::vector<double> lwd = log_weights(bases[k], data.sites[d]);
      for (int r = 0; r < data.n_rep; ++r) {
        const double z = data.value(k, d, r);
        if (std::isnan(z)) continue;
        // log W = logsumexp_l( log Btilde + log w / p )
        double m = kNegInf;
        std::vector<double> terms(L);
        for (int l = 0; l < L; ++l) {
          double lb = 0.0;
          for (std::size_t j = 0; j < pth.size(); ++j)
            lb += e[j] *
                  state.log_amp[(static_cast<std::size_t>(pth[j]) * L + l) *
                                    data.n_rep +
                                r];
          terms[l] = lb + lwd[l] / p;
          m = std::max(m, terms[l]);
        }
        double sum = 0.0;
        for (double t : terms) sum += std::exp(t - m);
        const double log_w = m + std::log(sum);
        const GevParams& g =
            data.margins.empty()
                ? unit
                : data.margins[static_cast<std::size_t>(k) * data.n_sites + d];
        const CellTerms ct = cell_terms(z, g, p);
        if (ct.cconst == kNegInf) return kNegInf;
        total += ct.cconst + log_w - std::exp(log_w) * ct.cz;
      }
    }
  }
  return total;
}

McmcState mh_step(const McmcState& state, const FitData& data,
                  const DependenceTree& tree, const KnotGrid& grid,
                  const Prior& prior, const McmcConfig& config,
                  RngStream& rng) {
  McmcConfig cfg = config;
  if (cfg.iterations < 1) cfg.iterations = 1;
  if (cfg.burn_in < 0) cfg.burn_in = 0;
  Engine eng(tree, data, grid, prior, cfg);
  // Streams for this one sweep are derived from the caller's stream.
  const std::uint64_t step_seed = rng.next_u64();
  eng.cfg.seed = step_seed;
  eng.init_streams(0);
  eng.import_state(state);
  eng.sweep(1, false);
  return eng.export_state();
}

PosteriorChain run_chain(const FitData& data, const DependenceTree& tree,
                         const KnotGrid& grid, const Prior& prior,
                         const McmcConfig& config, int chain_index) {
  config.validate();
  Engine eng(tree, data, grid, prior, config);
  eng.init_streams(chain_index);
  eng.dispersed_start(chain_index);

  const double lp0 = eng.log_posterior();
  if (!std::isfinite(lp0))
    throw NumericalError(
        "run_chain: log posterior is not finite at the initial state; "
        "check data scale and margins");

  const long R = config.iterations;
  const long burn = config.effective_burn_in();
  const long thin = config.thinning;

  PosteriorChain chain;
  chain.R = R;
  chain.burn_in = burn;
  chain.thinning = thin;
  chain.seed = config.seed;
  for (int v = 0; v < eng.V; ++v) chain.names.push_back(tree.node_label(v));
  for (int k = 0; k < eng.K; ++k)
    chain.names.push_back("tau_" + tree.leaves()[k].id);
  chain.names.push_back("log_posterior");
  chain.draws.assign(chain.names.size(), {});
  const long retained = (R - burn) / thin;
  for (auto& d : chain.draws) d.reserve(retained);

  for (long it = 1; it <= R; ++it) {
    eng.sweep(it, it <= burn);
    if (it > burn && (it - burn) % thin == 0) {
      chain.iterations.push_back(static_cast<int>(it));
      std::size_t col = 0;
      for (int v = 0; v < eng.V; ++v) chain.draws[col++].push_back(eng.alpha[v]);
      for (int k = 0; k < eng.K; ++k) chain.draws[col++].push_back(eng.tau[k]);
      chain.draws[col].push_back(eng.log_posterior());
    }
  }

  for (std::size_t b = 0; b < eng.block_names.size(); ++b) {
    BlockStats st;
    st.name = eng.block_names[b];
    const bool frozen_any = eng.frozen_prop[b] > 0;
    st.proposals = frozen_any ? eng.frozen_prop[b] : eng.adapt_prop[b];
    st.accepts = frozen_any ? eng.frozen_acc[b] : eng.adapt_acc[b];
    if (b < static_cast<std::size_t>(eng.V))
      st.scale = eng.scale_lat[b];
    else if (b < static_cast<std::size_t>(2 * eng.V))
      st.scale = eng.scale_alpha[b - eng.V];
    else
      st.scale = eng.scale_tau[b - 2 * eng.V];
    chain.blocks.push_back(std::move(st));
  }
  if (config.fix_taus)
    chain.blocks.erase(
        std::remove_if(chain.blocks.begin(), chain.blocks.end(),
                       [](const BlockStats& b) {
                         return b.name.rfind("tau_", 0) == 0 &&
                                b.proposals == 0;
                       }),
        chain.blocks.end());
  return chain;
}

MarginsFit fit_margins_gev(const FitData& data) {
  MarginsFit out;
  out.frechet = data;
  out.frechet.margins.clear();
  const int K = data.n_leaves, D = data.n_sites, N = data.n_rep;
  std::vector<double> cell(N);
  for (int k = 0; k < K; ++k) {
    for (int d = 0; d < D; ++d) {
      int n_obs = 0;
      for (int r = 0; r < N; ++r) {
        cell[r] = data.value(k, d, r);
        if (!std::isnan(cell[r])) ++n_obs;
      }
      MarginCell mc;
      mc.leaf = k;
      mc.site = d;
      mc.n = n_obs;
      if (n_obs < 15) {
        std::ostringstream os;
        os << "margin cell (leaf " << k << ", site " << d << ") has only "
           << n_obs << " replicates";
        out.warnings.push_back(os.str());
      }
      const GevFit fit = fit_gev_mle(cell);
      mc.converged = fit.converged;
      mc.params = fit.params;
      const std::size_t base =
          (static_cast<std::size_t>(k) * D + d) * static_cast<std::size_t>(N);
      if (!fit.converged) {
        std::ostringstream os;
        os << "GEV fit did not converge for (leaf " << k << ", site " << d
           << "); cell excluded";
        out.warnings.push_back(os.str());
        for (int r = 0; r < N; ++r)
          out.frechet.values[base + r] = std::numeric_limits<double>::quiet_NaN();
      } else {
        for (int r = 0; r < N; ++r) {
          const double x = data.value(k, d, r);
          out.frechet.values[base + r] =
              std::isnan(x) ? std::numeric_limits<double>::quiet_NaN()
                            : gev_to_frechet(x, fit.params);
        }
      }
      out.cells.push_back(mc);
    }
  }
  return out;
}

}  // namespace nestmax

#include "nestmax/simulate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "nestmax/stable.hpp"

namespace nestmax {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

LatentStableField draw_latent(const DependenceTree& tree, int n_knots,
                              RngStream& rng) {
  if (n_knots < 1) throw std::domain_error("draw_latent: n_knots must be >= 1");
  LatentStableField field;
  field.n_nodes = tree.node_count();
  field.n_knots = n_knots;
  field.log_amp.resize(static_cast<std::size_t>(field.n_nodes) * n_knots);
  for (int v = 0; v < field.n_nodes; ++v) {
    const StableParam p{tree.node_alpha(v)};
    for (int l = 0; l < n_knots; ++l)
      field.log_amp[v * n_knots + l] = sample_positive_stable_log(p, rng);
  }
  return field;
}

namespace {

// log Btilde[l] for one leaf: sum over the ancestor chain of
// amplitude_exponent * log A.
void compose_log_amplitudes(const DependenceTree& tree,
                            const LatentStableField& latent, int leaf,
                            std::vector<double>& out) {
  const int L = latent.n_knots;
  out.assign(L, 0.0);
  for (int v : tree.leaf_path(leaf)) {
    const double e = tree.amplitude_exponent(v, leaf);
    const double* la = latent.log_amp.data() + static_cast<std::size_t>(v) * L;
    for (int l = 0; l < L; ++l) out[l] += e * la[l];
  }
}

// log theta(s) = p * logsumexp_l( log Btilde_l + log w_l(s) / p ).
double log_smooth(const DependenceTree& tree, const KernelBasis& basis,
                  std::span<const double> log_btilde, int leaf, Site s) {
  const double p = tree.path_product(leaf);
  const std::vector<double> lw = log_weights(basis, s);
  double m = kNegInf;
  std::vector<double> terms(lw.size());
  for (std::size_t l = 0; l < lw.size(); ++l) {
    terms[l] = log_btilde[l] + lw[l] / p;
    m = std::max(m, terms[l]);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - m);
  return p * (m + std::log(sum));
}

// Kernel weights do not vary across replicates; precompute
// log w_l(s_d) / p per leaf so the replicate loop is pure arithmetic.
struct WeightTable {
  int n_leaves, n_sites, n_knots;
  std::vector<double> lw_over_p;  // [(leaf*n_sites + site)*n_knots + knot]

  WeightTable(const DependenceTree& tree, std::span<const KernelBasis> bases,
              std::span<const Site> sites)
      : n_leaves(tree.leaf_count()),
        n_sites(static_cast<int>(sites.size())),
        n_knots(static_cast<int>(bases[0].grid.size())) {
    lw_over_p.resize(static_cast<std::size_t>(n_leaves) * n_sites * n_knots);
    for (int li = 0; li < n_leaves; ++li) {
      const double inv_p = 1.0 / tree.path_product(li);
      for (int d = 0; d < n_sites; ++d) {
        const std::vector<double> lw = log_weights(bases[li], sites[d]);
        double* dst =
            lw_over_p.data() +
            (static_cast<std::size_t>(li) * n_sites + d) * n_knots;
        for (int l = 0; l < n_knots; ++l) dst[l] = lw[l] * inv_p;
      }
    }
  }
};

void simulate_one_replicate(const DependenceTree& tree,
                            const WeightTable& wt, std::uint64_t seed,
                            int rep, MaxStableSample& out) {
  RngStream rng(seed, stream_tag::simulate, static_cast<std::uint64_t>(rep));
  const int L = wt.n_knots;
  const LatentStableField latent = draw_latent(tree, L, rng);
  std::vector<double> log_btilde;
  for (int li = 0; li < tree.leaf_count(); ++li) {
    const double p = tree.path_product(li);
    compose_log_amplitudes(tree, latent, li, log_btilde);
    for (int d = 0; d < wt.n_sites; ++d) {
      const double* wlp =
          wt.lw_over_p.data() +
          (static_cast<std::size_t>(li) * wt.n_sites + d) * L;
      double m = kNegInf;
      for (int l = 0; l < L; ++l) m = std::max(m, log_btilde[l] + wlp[l]);
      double sum = 0.0;
      for (int l = 0; l < L; ++l)
        sum += std::exp(log_btilde[l] + wlp[l] - m);
      const double log_theta = p * (m + std::log(sum));
      // U = (-log Unif)^{-p} by inversion: one uniform per cell.
      const double log_u = -p * std::log(rng.exponential());
      out.at(li, d, rep) = std::exp(log_u + log_theta);
    }
  }
}

MaxStableSample make_sample_shell(const DependenceTree& tree,
                                  std::span<const KernelBasis> bases,
                                  std::span<const Site> sites, int n_rep,
                                  std::uint64_t seed) {
  if (n_rep < 1) throw std::domain_error("simulate: n_rep must be >= 1");
  if (static_cast<int>(bases.size()) != tree.leaf_count())
    throw std::invalid_argument("simulate: one kernel basis per leaf required");
  for (const auto& b : bases) validate_basis(b);
  MaxStableSample out;
  for (const auto& leaf : tree.leaves()) out.leaves.push_back(leaf.id);
  out.sites.assign(sites.begin(), sites.end());
  out.site_ids.reserve(sites.size());
  for (std::size_t d = 0; d < sites.size(); ++d)
    out.site_ids.push_back("s" + std::to_string(d + 1));
  out.n_rep = n_rep;
  out.scale = SampleScale::frechet;
  out.seed = seed;
  out.values.resize(static_cast<std::size_t>(tree.leaf_count()) *
                    sites.size() * n_rep);
  return out;
}

}  // namespace

double smooth_process(const DependenceTree& tree,
                      std::span<const KernelBasis> bases,
                      const LatentStableField& latent, const LeafId& leaf,
                      Site s) {
  const int li = tree.leaf_index(leaf);
  if (latent.n_nodes != tree.node_count() ||
      latent.n_knots != static_cast<int>(bases[li].grid.size()))
    throw std::invalid_argument(
        "smooth_process: latent field dimensions do not match");
  std::vector<double> log_btilde;
  compose_log_amplitudes(tree, latent, li, log_btilde);
  return std::exp(log_smooth(tree, bases[li], log_btilde, li, s));
}

MaxStableSample simulate(const DependenceTree& tree,
                         std::span<const KernelBasis> bases,
                         std::span<const Site> sites, int n_rep,
                         std::uint64_t seed) {
  MaxStableSample out = make_sample_shell(tree, bases, sites, n_rep, seed);
  const WeightTable wt(tree, bases, sites);
#pragma omp parallel for schedule(static)
  for (int rep = 0; rep < n_rep; ++rep)
    simulate_one_replicate(tree, wt, seed, rep, out);
  return out;
}

namespace ref {
MaxStableSample simulate_serial(const DependenceTree& tree,
                                std::span<const KernelBasis> bases,
                                std::span<const Site> sites, int n_rep,
                                std::uint64_t seed) {
  MaxStableSample out = make_sample_shell(tree, bases, sites, n_rep, seed);
  const WeightTable wt(tree, bases, sites);
  for (int rep = 0; rep < n_rep; ++rep)
    simulate_one_replicate(tree, wt, seed, rep, out);
  return out;
}
}  // namespace ref

MaxStableSample to_gev(const MaxStableSample& sample,
                       std::span<const GevParams> params) {
  if (sample.scale != SampleScale::frechet)
    throw std::domain_error("to_gev: input must be on the unit-Frechet scale");
  const std::size_t n_cells = sample.leaves.size() * sample.sites.size();
  if (params.size() != n_cells)
    throw std::invalid_argument("to_gev: one GevParams per (leaf, site) cell");
  MaxStableSample out = sample;
  out.scale = SampleScale::gev;
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    if (!(params[cell].sigma > 0.0))
      throw std::domain_error("to_gev: sigma must be positive");
    for (int r = 0; r < sample.n_rep; ++r) {
      const double z = sample.values[cell * sample.n_rep + r];
      if (std::isnan(z)) continue;
      if (!(z > 0.0))
        throw std::domain_error("to_gev: Frechet values must be positive");
      out.values[cell * sample.n_rep + r] = frechet_to_gev(z, params[cell]);
    }
  }
  return out;
}

FromGevResult from_gev(const MaxStableSample& data,
                       std::span<const GevParams> params) {
  const std::size_t n_cells = data.leaves.size() * data.sites.size();
  if (params.size() != n_cells)
    throw std::invalid_argument(
        "from_gev: one GevParams per (leaf, site) cell");
  FromGevResult res;
  res.sample = data;
  res.sample.scale = SampleScale::frechet;
  const int D = static_cast<int>(data.sites.size());
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    for (int r = 0; r < data.n_rep; ++r) {
      const double x = data.values[cell * data.n_rep + r];
      if (std::isnan(x)) continue;
      const double z = gev_to_frechet(x, params[cell]);
      if (std::isnan(z)) {
        res.violations.push_back(
            {static_cast<int>(cell) / D, static_cast<int>(cell) % D, r, x});
        res.sample.values[cell * data.n_rep + r] =
            std::numeric_limits<double>::quiet_NaN();
      } else {
        res.sample.values[cell * data.n_rep + r] = z;
      }
    }
  }
  return res;
}

}  // namespace nestmax

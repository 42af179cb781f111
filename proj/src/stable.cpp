#include "nestmax/stable.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nestmax {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kAuxEps = 1e-12;
}  // namespace

void validate_stable_param(StableParam p) {
  if (!(p.alpha > 0.0) || !(p.alpha <= 1.0) || !std::isfinite(p.alpha))
    throw std::domain_error("stable: alpha must lie in (0,1]");
}

// c(b; alpha) = {sin(a*pi*b)/sin(pi*b)}^{1/(1-a)} * sin((1-a)*pi*b)/sin(a*pi*b),
// the Kanter/Stephenson integrand.  Conditional on aux = b, the amplitude
// satisfies A^{-a/(1-a)} ~ Exp(c(b)), which is both the sampler and the
// augmented density below.
double stable_log_c(double alpha, double b) {
  const double psi = kPi * b;
  const double om = 1.0 - alpha;
  return (alpha / om) * std::log(std::sin(alpha * psi)) +
         std::log(std::sin(om * psi)) - (1.0 / om) * std::log(std::sin(psi));
}

double sample_positive_stable_log(StableParam p, RngStream& rng) {
  validate_stable_param(p);
  if (p.alpha == 1.0) return 0.0;
  const double u = rng.uniform();
  const double e = rng.exponential();
  return ((1.0 - p.alpha) / p.alpha) *
         (stable_log_c(p.alpha, u) - std::log(e));
}

double sample_positive_stable_one(StableParam p, RngStream& rng) {
  return std::exp(sample_positive_stable_log(p, rng));
}

std::vector<double> sample_positive_stable(StableParam p, std::size_t n,
                                           RngStream& rng) {
  validate_stable_param(p);
  if (n < 1) throw std::domain_error("stable: sample size must be >= 1");
  std::vector<double> out(n);
  if (p.alpha == 1.0) {
    for (auto& a : out) a = 1.0;
    return out;
  }
  for (auto& a : out) a = sample_positive_stable_one(p, rng);
  return out;
}

double log_density_augmented(const StableAuxPair& pair, StableParam p) {
  validate_stable_param(p);
  if (p.alpha == 1.0)
    throw std::domain_error(
        "stable: alpha = 1 is a point mass and has no density");
  if (!(pair.amplitude > 0.0))
    throw std::domain_error("stable: amplitude must be positive");
  const double a = p.alpha;
  const double om = 1.0 - a;
  double b = pair.aux;
  if (b < kAuxEps) b = kAuxEps;
  if (b > 1.0 - kAuxEps) b = 1.0 - kAuxEps;
  const double log_c = stable_log_c(a, b);
  const double log_amp = std::log(pair.amplitude);
  // exp(log_c - (a/om) log A) can overflow for extreme amplitudes; the
  // density has genuinely underflowed there, so report -inf.
  const double log_pow = log_c - (a / om) * log_amp;
  const double tail = log_pow > 700.0 ? std::numeric_limits<double>::infinity()
                                      : std::exp(log_pow);
  return std::log(a) - std::log(om) - (1.0 / om) * log_amp + log_c - tail;
}

std::vector<LaplacePoint> laplace_check(StableParam p,
                                        std::span<const double> t_grid,
                                        std::size_t n, RngStream& rng) {
  validate_stable_param(p);
  if (n < 10000)
    throw std::domain_error("laplace_check: needs at least 10^4 draws");
  const std::vector<double> draws = sample_positive_stable(p, n, rng);
  std::vector<LaplacePoint> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    if (!(t >= 0.0)) throw std::domain_error("laplace_check: t must be >= 0");
    double sum = 0.0, sumsq = 0.0;
    for (double a : draws) {
      const double v = std::exp(-t * a);
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / static_cast<double>(n);
    const double var =
        std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
    out.push_back({t, mean, std::sqrt(var / static_cast<double>(n))});
  }
  return out;
}

}  // namespace nestmax

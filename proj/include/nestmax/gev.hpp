#pragma once

#include <span>
#include <vector>

namespace nestmax {

struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;  // > 0
  double xi = 0.0;
};

// |xi| below this uses the Gumbel limit throughout.
inline constexpr double kGumbelEps = 1e-8;

double gev_log_pdf(double x, const GevParams& p);
double gev_cdf(double x, const GevParams& p);
double gev_quantile(double q, const GevParams& p);

// Unit-Frechet -> GEV:  z* = mu + sigma (z^xi - 1)/xi  (mu + sigma log z at
// the Gumbel limit).
double frechet_to_gev(double z, const GevParams& p);
// GEV -> unit-Frechet:  z = {1 + xi (z* - mu)/sigma}^{1/xi}; requires the
// argument of the brace to be positive (returns NaN otherwise).
double gev_to_frechet(double x, const GevParams& p);

struct GevFit {
  GevParams params;
  bool converged = false;
  double nll = 0.0;
  int n = 0;
};

// Maximum-likelihood fit by Nelder-Mead on (mu, log sigma, xi), started
// from Gumbel moment estimates.  NaN entries are skipped.
GevFit fit_gev_mle(std::span<const double> data);

}  // namespace nestmax

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nestmax/rng.hpp"

namespace nestmax {

// Positive alpha-stable law PS(alpha), defined by the Laplace transform
// E exp(-t A) = exp(-t^alpha) for t >= 0 and alpha in (0,1].  alpha = 1 is
// the point mass at 1.
struct StableParam {
  double alpha;
};

// Throws std::domain_error unless alpha lies in (0,1].
void validate_stable_param(StableParam p);

// One exact draw (Kanter transformation of one uniform and one unit
// exponential; no rejection).
double sample_positive_stable_one(StableParam p, RngStream& rng);

// The same draw on the log scale; stays finite where the amplitude itself
// would overflow.
double sample_positive_stable_log(StableParam p, RngStream& rng);

std::vector<double> sample_positive_stable(StableParam p, std::size_t n,
                                           RngStream& rng);

// Auxiliary-variable representation of the PS density: a joint density
// f(amplitude, aux) on (0,inf) x (0,1) whose aux-marginal is the PS(alpha)
// density.  Used by the MCMC so the intractable marginal is never needed.
struct StableAuxPair {
  double amplitude;  // > 0
  double aux;        // in (0,1)
};

// log f(amplitude, aux; alpha).  Requires alpha < 1 strictly (throws
// std::domain_error for the degenerate alpha = 1).  aux is clamped to
// [1e-12, 1 - 1e-12]; the integrand diverges at the endpoints.
double log_density_augmented(const StableAuxPair& pair, StableParam p);

// log of the Kanter integrand factor c(aux; alpha); exposed for tests.
double stable_log_c(double alpha, double aux);

// Monte-Carlo estimate of the Laplace transform on a grid of t values,
// with standard errors; one sample of size n is shared across the grid.
struct LaplacePoint {
  double t;
  double estimate;
  double std_error;
};

std::vector<LaplacePoint> laplace_check(StableParam p,
                                        std::span<const double> t_grid,
                                        std::size_t n, RngStream& rng);

}  // namespace nestmax

#pragma once

#include <cstdint>

#include "nestmax/dependence.hpp"
#include "nestmax/simulate.hpp"

namespace nestmax::ref {

// Direct linear-space evaluation of the exponent function in long double;
// the tolerance reference for the log-space production path.
double exponent_direct(const DependenceTree& tree,
                       std::span<const KernelBasis> bases,
                       const EvaluationPoint& point);

// Monte-Carlo joint CDF by the hierarchical identity: average over latent
// draws of the conditional CDF product
//   prod_{cells} exp{-W_cell * z^{-1/p}},  W = theta^{1/p}.
// Independent of the closed-form exponent code path.
struct McCdf {
  double estimate;
  double std_error;
  std::size_t n_draws;
};

McCdf joint_cdf_monte_carlo(const DependenceTree& tree,
                            std::span<const KernelBasis> bases,
                            const EvaluationPoint& point,
                            std::size_t n_draws, std::uint64_t seed);

}  // namespace nestmax::ref

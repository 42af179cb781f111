#include "nestmax/gev.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace nestmax {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

double gev_log_pdf(double x, const GevParams& p) {
  const double s = (x - p.mu) / p.sigma;
  if (std::abs(p.xi) < kGumbelEps) {
    return -std::log(p.sigma) - s - std::exp(-s);
  }
  const double arg = 1.0 + p.xi * s;
  if (!(arg > 0.0)) return -kInf;
  const double log_t = -std::log(arg) / p.xi;  // log of t(x)
  return -std::log(p.sigma) + (p.xi + 1.0) * log_t - std::exp(log_t);
}

double gev_cdf(double x, const GevParams& p) {
  const double s = (x - p.mu) / p.sigma;
  if (std::abs(p.xi) < kGumbelEps) return std::exp(-std::exp(-s));
  const double arg = 1.0 + p.xi * s;
  if (!(arg > 0.0)) return p.xi > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::pow(arg, -1.0 / p.xi));
}

double gev_quantile(double q, const GevParams& p) {
  const double y = -std::log(q);  // unit-exponential quantile
  if (std::abs(p.xi) < kGumbelEps) return p.mu - p.sigma * std::log(y);
  return p.mu + p.sigma * (std::pow(y, -p.xi) - 1.0) / p.xi;
}

double frechet_to_gev(double z, const GevParams& p) {
  if (std::abs(p.xi) < kGumbelEps) return p.mu + p.sigma * std::log(z);
  return p.mu + p.sigma * (std::pow(z, p.xi) - 1.0) / p.xi;
}

double gev_to_frechet(double x, const GevParams& p) {
  if (std::abs(p.xi) < kGumbelEps)
    return std::exp((x - p.mu) / p.sigma);
  const double arg = 1.0 + p.xi * (x - p.mu) / p.sigma;
  if (!(arg > 0.0)) return kNaN;
  return std::pow(arg, 1.0 / p.xi);
}

namespace {

double gev_nll(const std::array<double, 3>& theta,
               std::span<const double> data) {
  const GevParams p{theta[0], std::exp(theta[1]), theta[2]};
  if (std::abs(p.xi) > 5.0) return kInf;
  double nll = 0.0;
  for (double x : data) {
    if (std::isnan(x)) continue;
    const double lp = gev_log_pdf(x, p);
    if (!std::isfinite(lp)) return kInf;
    nll -= lp;
  }
  return nll;
}

// Nelder-Mead on R^3.
std::array<double, 3> nelder_mead(
    const std::array<double, 3>& start, double step,
    const std::function<double(const std::array<double, 3>&)>& f,
    int max_iter, bool& converged) {
  constexpr int n = 3;
  std::array<std::array<double, 3>, n + 1> x;
  std::array<double, n + 1> fx;
  x[0] = start;
  fx[0] = f(x[0]);
  for (int i = 0; i < n; ++i) {
    x[i + 1] = start;
    x[i + 1][i] += step;
    fx[i + 1] = f(x[i + 1]);
  }
  auto order = [&] {
    std::array<int, n + 1> idx{0, 1, 2, 3};
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return fx[a] < fx[b]; });
    std::array<std::array<double, 3>, n + 1> xs;
    std::array<double, n + 1> fs;
    for (int i = 0; i <= n; ++i) {
      xs[i] = x[idx[i]];
      fs[i] = fx[idx[i]];
    }
    x = xs;
    fx = fs;
  };
  converged = false;
  for (int it = 0; it < max_iter; ++it) {
    order();
    if (std::isfinite(fx[0]) && std::isfinite(fx[n]) &&
        std::abs(fx[n] - fx[0]) < 1e-10 * (1.0 + std::abs(fx[0]))) {
      converged = true;
      break;
    }
    std::array<double, 3> centroid{};
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < 3; ++k) centroid[k] += x[i][k] / n;
    auto blend = [&](double coef) {
      std::array<double, 3> p;
      for (int k = 0; k < 3; ++k)
        p[k] = centroid[k] + coef * (x[n][k] - centroid[k]);
      return p;
    };
    const auto xr = blend(-1.0);
    const double fr = f(xr);
    if (fr < fx[0]) {
      const auto xe = blend(-2.0);
      const double fe = f(xe);
      if (fe < fr) {
        x[n] = xe;
        fx[n] = fe;
      } else {
        x[n] = xr;
        fx[n] = fr;
      }
    } else if (fr < fx[n - 1]) {
      x[n] = xr;
      fx[n] = fr;
    } else {
      const auto xc = blend(0.5);
      const double fc = f(xc);
      if (fc < fx[n]) {
        x[n] = xc;
        fx[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          for (int k = 0; k < 3; ++k) x[i][k] = 0.5 * (x[i][k] + x[0][k]);
          fx[i] = f(x[i]);
        }
      }
    }
  }
  order();
  converged = converged && std::isfinite(fx[0]);
  return x[0];
}

}  // namespace

GevFit fit_gev_mle(std::span<const double> data) {
  std::vector<double> clean;
  clean.reserve(data.size());
  for (double x : data)
    if (!std::isnan(x)) clean.push_back(x);
  GevFit fit;
  fit.n = static_cast<int>(clean.size());
  if (fit.n < 2) return fit;

  const double mean =
      std::accumulate(clean.begin(), clean.end(), 0.0) / fit.n;
  double var = 0.0;
  for (double x : clean) var += (x - mean) * (x - mean);
  var /= fit.n;
  if (!(var > 0.0)) return fit;  // constant data cannot be fitted

  // Gumbel moment start: sigma = sd sqrt(6)/pi, mu = mean - gamma sigma.
  const double sigma0 = std::sqrt(6.0 * var) / 3.14159265358979323846;
  const double mu0 = mean - 0.5772156649015329 * sigma0;
  const std::array<double, 3> start{mu0, std::log(sigma0), 0.1};

  bool converged = false;
  auto f = [&clean](const std::array<double, 3>& th) {
    return gev_nll(th, clean);
  };
  std::array<double, 3> best = nelder_mead(start, 0.2, f, 2000, converged);
  // One restart from the optimum tightens loose simplexes.
  if (converged) best = nelder_mead(best, 0.05, f, 2000, converged);

  fit.params = {best[0], std::exp(best[1]), best[2]};
  fit.nll = f(best);
  fit.converged = converged && std::isfinite(fit.nll);
  return fit;
}

}  // namespace nestmax

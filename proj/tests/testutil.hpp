#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nestmax/tree.hpp"

namespace testutil {

// Adaptive Simpson quadrature.
inline double simpson_rec(const std::function<double(double)>& f, double a,
                          double b, double fa, double fm, double fb,
                          double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-10) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40);
}

// Levy density with Laplace transform exp(-sqrt(t)); the closed form of
// the positive 1/2-stable law.
inline double levy_pdf(double a) {
  return 0.5 / std::sqrt(3.14159265358979323846) * std::pow(a, -1.5) *
         std::exp(-0.25 / a);
}

// Kolmogorov-Smirnov test against a continuous CDF.
struct KsResult {
  double statistic;
  double p_value;
};

inline KsResult ks_test(std::vector<double> x,
                        const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    d = std::max(d, std::abs(F - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - F));
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) *
         std::exp(-2.0 * k * k * lambda * lambda);
  return {d, std::clamp(p, 0.0, 1.0)};
}

// Two-layer tree: root alpha0 over one single-leaf alpha node per leaf.
inline nestmax::TreeSpec two_layer(double alpha0,
                                   std::span<const double> alphas,
                                   std::span<const double> taus,
                                   std::span<const std::string> names) {
  nestmax::TreeSpec root;
  root.alpha = alpha0;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    nestmax::TreeSpec node;
    node.alpha = alphas[k];
    node.children.push_back(nestmax::TreeLeaf{names[k], taus[k]});
    root.children.push_back(node);
  }
  return root;
}

// The four-leaf, three-layer tree used throughout: root alpha0, two
// clusters alpha_t, two single-leaf alpha_{t;k} nodes per cluster.
inline nestmax::TreeSpec three_layer_4leaf(double a0, double at, double atk,
                                           double tau) {
  nestmax::TreeSpec root;
  root.alpha = a0;
  int id = 0;
  for (int t = 0; t < 2; ++t) {
    nestmax::TreeSpec cluster;
    cluster.alpha = at;
    for (int k = 0; k < 2; ++k) {
      nestmax::TreeSpec node;
      node.alpha = atk;
      node.children.push_back(
          nestmax::TreeLeaf{"V" + std::to_string(++id), tau});
      cluster.children.push_back(node);
    }
    root.children.push_back(cluster);
  }
  return root;
}

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sd(std::span<const double> v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace testutil

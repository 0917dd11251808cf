#pragma once

// Test-only reference computations. Nothing here calls into the library's
// numerical paths; each function follows the textbook definition directly.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>
#include <vector>

namespace oracle {

inline double gaussian_density(double y, double mean, double var) {
  return std::exp(-0.5 * (y - mean) * (y - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Precision at each relevant rank, averaged, by explicit counting.
inline double average_precision(const std::vector<std::string>& ranked, const std::set<std::string>& relevant) {
  double total = 0.0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (!relevant.count(ranked[r])) continue;
    std::size_t hits_in_top = 0;
    for (std::size_t i = 0; i <= r; ++i) hits_in_top += relevant.count(ranked[i]);
    total += static_cast<double>(hits_in_top) / static_cast<double>(r + 1);
  }
  return total / static_cast<double>(relevant.size());
}

/// Spearman's rho via the squared rank-difference formula (no ties).
inline double spearman(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const double n = static_cast<double>(a.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto j = static_cast<double>(std::find(b.begin(), b.end(), a[i]) - b.begin());
    d2 += (static_cast<double>(i) - j) * (static_cast<double>(i) - j);
  }
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

/// L1 logistic objective from dense rows, labels in {0,1}.
inline double l1_logistic(const Eigen::MatrixXd& x, const std::vector<int>& labels, const Eigen::VectorXd& w,
                          double lambda) {
  double f = lambda * w.cwiseAbs().sum();
  for (Eigen::Index l = 0; l < x.rows(); ++l) {
    const double y = labels[static_cast<std::size_t>(l)] == 1 ? 1.0 : -1.0;
    f += std::log(1.0 + std::exp(-y * x.row(l).dot(w)));
  }
  return f;
}

/// Minimiser of the 2-d L1 logistic objective over [-5, 5]^2 on a 1e-3 grid.
/// A 0.05 grid locates the basin first (the objective is convex), then the
/// 1e-3 grid is scanned over a +-0.1 window around it. Returns false if the
/// minimiser sits on the box boundary.
inline bool grid_minimiser(const Eigen::MatrixXd& x, const std::vector<int>& labels, double lambda,
                           Eigen::Vector2d& best) {
  auto f = [&](double a, double b) { return l1_logistic(x, labels, Eigen::Vector2d(a, b), lambda); };
  double best_f = INFINITY;
  for (int i = -100; i <= 100; ++i)
    for (int j = -100; j <= 100; ++j) {
      const double v = f(0.05 * i, 0.05 * j);
      if (v < best_f) {
        best_f = v;
        best = {0.05 * i, 0.05 * j};
      }
    }
  const long ci = std::lround(best[0] * 1000.0);
  const long cj = std::lround(best[1] * 1000.0);
  best_f = INFINITY;
  for (long i = std::max(-5000L, ci - 100); i <= std::min(5000L, ci + 100); ++i)
    for (long j = std::max(-5000L, cj - 100); j <= std::min(5000L, cj + 100); ++j) {
      const double v = f(1e-3 * static_cast<double>(i), 1e-3 * static_cast<double>(j));
      if (v < best_f) {
        best_f = v;
        best = {1e-3 * static_cast<double>(i), 1e-3 * static_cast<double>(j)};
      }
    }
  return std::abs(best[0]) < 5.0 - 1e-9 && std::abs(best[1]) < 5.0 - 1e-9;
}

/// Batch-means Monte Carlo standard error of a chain's mean.
inline double batch_means_se(const Eigen::VectorXd& chain, int batches = 20) {
  const Eigen::Index size = chain.size() / batches;
  Eigen::VectorXd means(batches);
  for (int b = 0; b < batches; ++b) means[b] = chain.segment(b * size, size).mean();
  const double mu = means.mean();
  const double var = (means.array() - mu).square().sum() / (batches - 1);
  return std::sqrt(var / batches);
}

}  // namespace oracle

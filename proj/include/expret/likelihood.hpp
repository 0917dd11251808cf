#pragma once

// Per-sample log-likelihoods and the retrieval scores built from them.

#include "expret/core.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <span>

namespace expret {

/// Probit success probabilities are clamped to this range before taking logs.
inline constexpr double kProbitProbFloor = 1e-300;
inline constexpr double kProbitProbCeil = 1.0 - 1e-16;

/// Counts loglik_experiment evaluations. Relaxed atomic; ordering is irrelevant.
class EvaluationCounter {
 public:
  void add(std::uint64_t n = 1) noexcept { count_.fetch_add(n, std::memory_order_relaxed); }
  std::uint64_t value() const noexcept { return count_.load(std::memory_order_relaxed); }
  void reset() noexcept { count_.store(0, std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

/// log p(y | x, theta) for one observation.
double loglik_point(std::span<const double> sample, ModelKind kind, std::span<const double> x, double y);

/// Sum of loglik_point over every observation of `query`.
double loglik_experiment(std::span<const double> sample, ModelKind kind, const Experiment& query);

/// ll_k = log p(query | theta_k) for every sample; entries with a zero weight
/// are skipped (left at -inf) when `weights` is given.
Eigen::VectorXd sample_logliks(const PosteriorSampleSet& samples, const Experiment& query,
                               const Eigen::VectorXd* weights = nullptr, EvaluationCounter* counter = nullptr);

/// log of the weighted mean (1/m) sum_k w_k exp(ll_k), stabilised by the max
/// over samples with nonzero weight. Returns -inf when the weighted sum is
/// not positive.
double log_weighted_mean(const Eigen::VectorXd& logliks, const Eigen::VectorXd& weights);

/// log of the plain Monte Carlo marginal likelihood estimate.
double ml_uniform(const Experiment& query, const PosteriorSampleSet& samples, EvaluationCounter* counter = nullptr);
double ml_uniform_from_logliks(const Eigen::VectorXd& logliks);

/// Weighted estimate in the linear domain, relative to the query-global shift:
/// (1/m) sum_k w_k exp(ll_k - shift). Zero-weight samples are not evaluated.
double ml_weighted(const Experiment& query, const PosteriorSampleSet& samples, const WeightVector& weights,
                   double shift, EvaluationCounter* counter = nullptr);

/// Log-likelihoods of one query under every sample of every candidate.
struct LogLikTable {
  std::string query_id;
  std::map<std::string, Eigen::VectorXd> logliks;
  double global_shift = -std::numeric_limits<double>::infinity();
};

/// Builds the table over `candidate_ids` (the query itself is skipped). When
/// `weights` is given only nonzero-weight samples are evaluated and the shift
/// is the max over the evaluated entries.
LogLikTable build_loglik_table(const ModelBank& bank, const Experiment& query,
                               const std::vector<std::string>& candidate_ids,
                               const std::map<std::string, WeightVector>* weights = nullptr,
                               EvaluationCounter* counter = nullptr);

struct RankOptions {
  /// Interval used in place of learned weights that are all zero.
  unsigned fallback_every_k = 10;
  EvaluationCounter* counter = nullptr;
};

/// Ranks every bank experiment except the query by marginal likelihood.
/// ml_uniform scores are log ML; ml_weighted scores are log of the weighted
/// estimate (same order as the linear-domain value under one shift, without
/// underflow), -inf when the weighted sum is not positive.
RankingResult rank_by_ml(const ModelBank& bank, const Experiment& query, RankMethod method,
                         const RankOptions& options = {});

/// Ranks by negative l2 distance between posterior means of the weights.
RankingResult l2_baseline_rank(const ModelBank& bank, const PosteriorSampleSet& query_posterior);

}  // namespace expret

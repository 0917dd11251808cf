#include "expret/likelihood.hpp"

#include "expret/error.hpp"
#include "expret/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace expret {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_dims(const PosteriorSampleSet& samples, const Experiment& query) {
  if (samples.weight_dim() != query.dim())
    throw DataError("dimension mismatch: samples of '" + samples.experiment_id + "' have " +
                    std::to_string(samples.weight_dim()) + " weights, query '" + query.id + "' has " +
                    std::to_string(query.dim()) + " covariates");
}

double probit_point(double eta, double y) {
  const double p = std::clamp(normal_cdf(eta), kProbitProbFloor, kProbitProbCeil);
  return y == 1.0 ? std::log(p) : (y == 0.0 ? std::log1p(-p) : y * std::log(p) + (1.0 - y) * std::log1p(-p));
}

}  // namespace

double loglik_point(std::span<const double> sample, ModelKind kind, std::span<const double> x, double y) {
  const std::size_t d = x.size();
  const std::size_t needed = kind == ModelKind::linear ? d + 1 : d;
  if (sample.size() != needed)
    throw DataError("sample has " + std::to_string(sample.size()) + " entries, expected " + std::to_string(needed));
  if (!std::isfinite(y)) throw DataError("non-finite outcome");
  double eta = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    if (!std::isfinite(x[j]) || !std::isfinite(sample[j])) throw DataError("non-finite covariate or weight");
    eta += sample[j] * x[j];
  }
  if (kind == ModelKind::linear) {
    const double log_var = sample[d];
    if (!std::isfinite(log_var)) throw DataError("non-finite log noise variance");
    const double r = y - eta;
    return -0.5 * (std::log(2.0 * std::numbers::pi) + log_var) - 0.5 * r * r * std::exp(-log_var);
  }
  return probit_point(eta, y);
}

double loglik_experiment(std::span<const double> sample, ModelKind kind, const Experiment& query) {
  const Index d = query.dim();
  const std::size_t needed = kind == ModelKind::linear ? static_cast<std::size_t>(d) + 1 : static_cast<std::size_t>(d);
  if (sample.size() != needed) throw DataError("dimension mismatch against query '" + query.id + "'");
  Eigen::VectorXd x(d);
  double total = 0.0;
  for (Index i = 0; i < query.size(); ++i) {
    x = query.covariates.row(i).transpose();
    total += loglik_point(sample, kind, {x.data(), static_cast<std::size_t>(d)}, query.outcomes[i]);
  }
  return total;
}

Eigen::VectorXd sample_logliks(const PosteriorSampleSet& samples, const Experiment& query,
                               const Eigen::VectorXd* weights, EvaluationCounter* counter) {
  require_dims(samples, query);
  const Index m = samples.size();
  const Index d = query.dim();
  if (weights && weights->size() != m)
    throw DataError("weight vector of '" + samples.experiment_id + "' has length " +
                    std::to_string(weights->size()) + ", expected " + std::to_string(m));
  if (!query.covariates.allFinite() || !query.outcomes.allFinite())
    throw DataError("query '" + query.id + "' has non-finite measurements");

  std::vector<Index> active;
  active.reserve(static_cast<std::size_t>(m));
  for (Index k = 0; k < m; ++k)
    if (!weights || (*weights)[k] != 0.0) active.push_back(k);

  Eigen::VectorXd out = Eigen::VectorXd::Constant(m, kNegInf);
  if (counter) counter->add(active.size());
  if (active.empty()) return out;

  const auto n_active = static_cast<Index>(active.size());
  Eigen::MatrixXd w(d, n_active);
  for (Index a = 0; a < n_active; ++a) w.col(a) = samples.samples.row(active[a]).head(d).transpose();
  if (!w.allFinite()) throw DataError("non-finite weights in samples of '" + samples.experiment_id + "'");
  const Eigen::MatrixXd eta = query.covariates * w;  // n x active
  const double n = static_cast<double>(query.size());

  for (Index a = 0; a < n_active; ++a) {
    const Index k = active[a];
    double ll = 0.0;
    if (samples.model_kind == ModelKind::linear) {
      const double log_var = samples.samples(k, d);
      if (!std::isfinite(log_var)) throw DataError("non-finite log noise variance in '" + samples.experiment_id + "'");
      const double rss = (query.outcomes - eta.col(a)).squaredNorm();
      ll = -0.5 * n * (std::log(2.0 * std::numbers::pi) + log_var) - 0.5 * rss * std::exp(-log_var);
    } else {
      for (Index i = 0; i < query.size(); ++i) ll += probit_point(eta(i, a), query.outcomes[i]);
    }
    out[k] = ll;
  }
  return out;
}

double log_weighted_mean(const Eigen::VectorXd& logliks, const Eigen::VectorXd& weights) {
  if (logliks.size() != weights.size()) throw DataError("log-likelihood and weight lengths differ");
  if (logliks.size() == 0) throw DataError("empty sample set");
  double shift = kNegInf;
  for (Index k = 0; k < logliks.size(); ++k)
    if (weights[k] != 0.0) shift = std::max(shift, logliks[k]);
  if (shift == kNegInf) return kNegInf;
  double sum = 0.0;
  for (Index k = 0; k < logliks.size(); ++k)
    if (weights[k] != 0.0) sum += weights[k] * std::exp(logliks[k] - shift);
  if (!(sum > 0.0)) return kNegInf;
  return shift + std::log(sum) - std::log(static_cast<double>(logliks.size()));
}

double ml_uniform_from_logliks(const Eigen::VectorXd& logliks) {
  return log_weighted_mean(logliks, Eigen::VectorXd::Ones(logliks.size()));
}

double ml_uniform(const Experiment& query, const PosteriorSampleSet& samples, EvaluationCounter* counter) {
  if (samples.size() < 1) throw DataError("empty sample set for '" + samples.experiment_id + "'");
  return ml_uniform_from_logliks(sample_logliks(samples, query, nullptr, counter));
}

double ml_weighted(const Experiment& query, const PosteriorSampleSet& samples, const WeightVector& weights,
                   double shift, EvaluationCounter* counter) {
  const Eigen::VectorXd ll = sample_logliks(samples, query, &weights.weights, counter);
  double sum = 0.0;
  for (Index k = 0; k < ll.size(); ++k)
    if (weights.weights[k] != 0.0) sum += weights.weights[k] * std::exp(ll[k] - shift);
  return sum / static_cast<double>(ll.size());
}

LogLikTable build_loglik_table(const ModelBank& bank, const Experiment& query,
                               const std::vector<std::string>& candidate_ids,
                               const std::map<std::string, WeightVector>* weights, EvaluationCounter* counter) {
  LogLikTable table;
  table.query_id = query.id;
  for (const auto& id : candidate_ids) {
    if (id == query.id) continue;
    const Eigen::VectorXd* w = nullptr;
    if (weights) {
      auto it = weights->find(id);
      if (it == weights->end()) throw DataError("no weights for experiment '" + id + "'");
      w = &it->second.weights;
    }
    Eigen::VectorXd ll = sample_logliks(bank.posterior(id), query, w, counter);
    for (Index k = 0; k < ll.size(); ++k)
      if (!w || (*w)[k] != 0.0) table.global_shift = std::max(table.global_shift, ll[k]);
    table.logliks.emplace(id, std::move(ll));
  }
  return table;
}

RankingResult rank_by_ml(const ModelBank& bank, const Experiment& query, RankMethod method,
                         const RankOptions& options) {
  if (method == RankMethod::l2_baseline) throw UsageError("rank_by_ml handles ml_uniform and ml_weighted only");
  if (bank.experiments.empty()) throw DataError("empty bank");
  if (query.dim() != bank.dim())
    throw DataError("query '" + query.id + "' has dimension " + std::to_string(query.dim()) + ", bank has " +
                    std::to_string(bank.dim()));

  RankingResult result;
  result.query_id = query.id;
  result.method = method;
  for (const auto& exp : bank.experiments) {
    if (exp.id == query.id) continue;
    const PosteriorSampleSet& post = bank.posterior(exp.id);
    double score = kNegInf;
    if (method == RankMethod::ml_uniform) {
      score = ml_uniform(query, post, options.counter);
    } else {
      auto it = bank.weights.find(exp.id);
      if (it == bank.weights.end()) throw DataError("no trained weights for experiment '" + exp.id + "'");
      WeightVector weights = it->second;
      if (weights.weights.size() != post.size())
        throw DataError("weight vector of '" + exp.id + "' does not match its sample count");
      if (weights.nonzeros() == 0) {
        const unsigned k = std::min<unsigned>(options.fallback_every_k, static_cast<unsigned>(post.size()));
        weights = thin_every_k(post, k);
        result.warnings.push_back("experiment '" + exp.id + "' has all-zero weights; using every_k(" +
                                  std::to_string(k) + ")");
      }
      const Eigen::VectorXd ll = sample_logliks(post, query, &weights.weights, options.counter);
      score = log_weighted_mean(ll, weights.weights);
    }
    result.ranked.push_back({exp.id, score});
  }
  sort_ranked(result.ranked);
  return result;
}

RankingResult l2_baseline_rank(const ModelBank& bank, const PosteriorSampleSet& query_posterior) {
  RankingResult result;
  result.query_id = query_posterior.experiment_id;
  result.method = RankMethod::l2_baseline;
  const Eigen::VectorXd query_mean = query_posterior.weight_mean();
  for (const auto& exp : bank.experiments) {
    if (exp.id == query_posterior.experiment_id) continue;
    const PosteriorSampleSet& post = bank.posterior(exp.id);
    if (post.weight_dim() != query_mean.size())
      throw DataError("dimension mismatch between query '" + result.query_id + "' and '" + exp.id + "'");
    result.ranked.push_back({exp.id, -(query_mean - post.weight_mean()).norm()});
  }
  sort_ranked(result.ranked);
  return result;
}

}  // namespace expret

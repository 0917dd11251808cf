#pragma once

// Domain types shared by every module: experiments, posterior sample sets,
// per-sample weights, the model bank and ranking results.

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace expret {

using Index = Eigen::Index;

enum class OutcomeKind { continuous, binary };
enum class ModelKind { linear, probit };

std::string to_string(OutcomeKind kind);
std::string to_string(ModelKind kind);
OutcomeKind parse_outcome_kind(const std::string& text);
ModelKind parse_model_kind(const std::string& text);

/// A set of (covariate row, outcome) measurements from one study.
struct Experiment {
  std::string id;
  Eigen::MatrixXd covariates;  // n x d, one observation per row
  Eigen::VectorXd outcomes;    // n
  OutcomeKind outcome_kind = OutcomeKind::continuous;
  std::optional<std::string> label;

  Index size() const { return covariates.rows(); }
  Index dim() const { return covariates.cols(); }
};

/// Hyperparameters of the Gibbs samplers.
///
/// The optional clamps pin the per-weight precisions and the noise precision
/// of the linear sampler to fixed values (a degenerate gamma prior). They exist
/// so the sampler can be checked against the closed-form conjugate posterior.
struct SamplerConfig {
  unsigned n_samples = 100;
  unsigned burn_in = 500;
  unsigned thin = 1;
  double gamma_shape = 1e-3;
  double gamma_rate = 1e-3;
  double probit_prior_precision = 1.0;
  std::optional<double> fixed_weight_precision;
  std::optional<double> fixed_noise_precision;

  bool operator==(const SamplerConfig&) const = default;
};

/// Posterior draws of one fitted model. Linear rows are [w_1..w_d, log noise
/// variance]; probit rows are [w_1..w_d].
struct PosteriorSampleSet {
  std::string experiment_id;
  ModelKind model_kind = ModelKind::linear;
  Eigen::MatrixXd samples;  // m x p
  std::uint64_t seed = 0;
  SamplerConfig sampler_config;

  Index size() const { return samples.rows(); }
  Index weight_dim() const {
    return model_kind == ModelKind::linear ? samples.cols() - 1 : samples.cols();
  }
  /// Posterior mean of the regression weights (noise entry excluded).
  Eigen::VectorXd weight_mean() const;
};

struct WeightSource {
  enum class Kind { uniform, every_k, learned };
  Kind kind = Kind::uniform;
  unsigned k = 0;  // only meaningful for every_k

  bool operator==(const WeightSource&) const = default;
};

std::string to_string(const WeightSource& source);
WeightSource parse_weight_source(const std::string& text);

struct WeightVector {
  std::string experiment_id;
  Eigen::VectorXd weights;
  WeightSource source;

  static WeightVector uniform(std::string id, Index m);
  Index nonzeros() const;
};

/// The retrieval database: experiments with their posteriors and (once
/// trained) per-sample weights. Experiments keep insertion order.
struct ModelBank {
  std::vector<Experiment> experiments;
  std::map<std::string, PosteriorSampleSet> posteriors;
  std::map<std::string, WeightVector> weights;

  const Experiment& experiment(const std::string& id) const;
  const PosteriorSampleSet& posterior(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::vector<std::string> ids() const;
  /// Shared covariate dimension; 0 for an empty bank.
  Index dim() const;

  /// Restricts to the given ids, keeping posteriors and weights.
  ModelBank subset(const std::vector<std::string>& ids) const;
};

enum class RankMethod { ml_uniform, ml_weighted, l2_baseline };

std::string to_string(RankMethod method);
RankMethod parse_rank_method(const std::string& text);

struct RankedItem {
  std::string experiment_id;
  double score = 0.0;
};

struct RankingResult {
  std::string query_id;
  RankMethod method = RankMethod::ml_uniform;
  std::vector<RankedItem> ranked;
  std::vector<std::string> warnings;

  std::vector<std::string> ids() const;
};

/// Sorts by score descending, ties (and NaN-free equal scores) by id.
void sort_ranked(std::vector<RankedItem>& items);

using ValidationReport = std::vector<std::string>;

/// Lists every invariant breach of `exp`; an empty report means valid.
ValidationReport validate_experiment(const Experiment& exp);

/// Checks bank-level invariants (shared dimension, key consistency, sample
/// shapes). Experiment-level checks are included.
ValidationReport validate_bank(const ModelBank& bank);

struct BankSplit {
  std::vector<std::string> database_ids;
  std::vector<std::string> query_ids;
};

/// Seeded random partition into database and query ids. The database gets
/// round(train_fraction * D) experiments; both lists keep bank order.
BankSplit split_bank(const ModelBank& bank, double train_fraction, std::uint64_t seed);

}  // namespace expret

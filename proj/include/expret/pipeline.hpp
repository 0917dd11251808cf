#pragma once

// End-to-end workflows shared by the CLI and the acceptance suite: fitting a
// bank, learning weights on a database split, and scoring query splits.

#include "expret/core.hpp"
#include "expret/evalmetrics.hpp"
#include "expret/ranklearn.hpp"
#include "expret/synth.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace expret {

/// Fits a posterior for every experiment lacking one. Each experiment's
/// chain is seeded from (seed, id) so results do not depend on `workers`.
void fit_bank(ModelBank& bank, const SamplerConfig& cfg, std::uint64_t seed, unsigned workers = 1);

struct TrainingConfig {
  unsigned k_top = 25;
  double lambda = 1.0;
  SolverOptions solver;
};

struct TrainingOutcome {
  std::map<std::string, WeightVector> weights;
  unsigned k_used = 0;
  std::size_t triplets = 0;
  double positive_label_fraction = 0.0;
  unsigned solver_sweeps = 0;
  double kkt_violation = 0.0;
  bool kkt_ok = false;
  Index negative_weights = 0;
  std::vector<std::string> all_zero;
  std::vector<std::string> warnings;
};

/// Learns sparse weights on `database` (every experiment doubles as a
/// training query). K is clamped to D - 2 with a warning.
TrainingOutcome train_weights(const ModelBank& database, const TrainingConfig& cfg, std::uint64_t seed);

/// Every-k indicator weights for each experiment with a posterior.
std::map<std::string, WeightVector> every_k_weights(const ModelBank& bank, unsigned k);

struct MethodEvaluation {
  std::string name;  // ml_uniform, l2_baseline, every_k, learned
  std::vector<RankingResult> rankings;
  EvalReport report;
};

struct SplitEvaluation {
  std::vector<MethodEvaluation> methods;
  std::vector<std::string> skipped_queries;  // no relevant database items
  std::vector<std::string> warnings;

  const MethodEvaluation& method(const std::string& name) const;
};

struct EvalOptions {
  unsigned every_k = 10;
  unsigned k_top = 0;
  double lambda = 0.0;
  SparsityReading reading = SparsityReading::stored_fraction;
  bool include_l2 = true;
};

/// Ranks each query against the database with the full-sample estimator,
/// the l2 baseline, every-k thinning and the learned weights (when given).
/// MAP is reported when every experiment carries a label, Spearman against
/// the full-sample ranking always.
SplitEvaluation evaluate_split(const ModelBank& bank, const BankSplit& split,
                               const std::map<std::string, WeightVector>* learned, const EvalOptions& options);

/// One sweep cell of the synthetic protocol.
struct SweepCell {
  unsigned dim = 10;
  double n_rate = 18.0;
  double snr_ratio = 0.5;
  unsigned n_samples = 100;

  std::string name() const;
};

std::vector<SweepCell> sweep_cells(const std::vector<unsigned>& dims, const std::vector<double>& n_rates,
                                   const std::vector<double>& snr_ratios, const std::vector<unsigned>& sample_counts);

struct ProtocolConfig {
  SynthConfig synth;
  SamplerConfig sampler;
  TrainingConfig training;
  EvalOptions eval;
  double train_fraction = 0.75;
};

struct ProtocolResult {
  SplitEvaluation evaluation;
  TrainingOutcome training;
  std::size_t experiments = 0;
};

/// Generate -> fit -> split -> train -> evaluate, all seeded from `seed`.
ProtocolResult run_synthetic_protocol(const ProtocolConfig& cfg, std::uint64_t seed);

/// Split -> train -> evaluate on a bank whose posteriors are already fitted.
ProtocolResult run_bank_protocol(const ModelBank& bank, const ProtocolConfig& cfg, std::uint64_t seed);

/// Runs `jobs` on up to `workers` threads; exceptions propagate after all
/// jobs finish (first one wins).
void run_parallel(std::size_t jobs, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace expret

#pragma once

// Retrieval quality and compression metrics.

#include "expret/core.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace expret {

/// How the "sparsity" term of the combined metric is read.
enum class SparsityReading {
  stored_fraction,  // sparsity = fraction of samples kept (default)
  pruned_fraction,  // sparsity = fraction of samples discarded
};

/// Mean of precision@r over the ranks r of the relevant items.
double average_precision(const RankingResult& ranking, const std::set<std::string>& relevant);

/// Relevance of a candidate to a query: both carry the same label.
using LabelMap = std::map<std::string, std::string>;

std::set<std::string> relevant_set(const RankingResult& ranking, const LabelMap& labels);

double mean_average_precision(const std::vector<RankingResult>& rankings, const LabelMap& labels);

/// Pearson correlation of rank positions between two orderings of one id set.
double spearman_rho(const RankingResult& a, const RankingResult& b);

/// Nonzero weights over total samples.
double storage_fraction(const std::map<std::string, WeightVector>& weights);

/// (1 - sparsity) * performance. Negative performance (Spearman) is clamped
/// to 0 here and only here.
double combined_metric(double performance, double fraction,
                       SparsityReading reading = SparsityReading::stored_fraction);

struct EvalReport {
  std::string method;
  std::map<std::string, double> per_query_ap;
  std::map<std::string, double> per_query_spearman;
  std::optional<double> map;
  std::optional<double> spearman;
  double storage_fraction = 1.0;
  std::optional<double> combined;
  unsigned k_top = 0;
  double lambda = 0.0;
};

}  // namespace expret

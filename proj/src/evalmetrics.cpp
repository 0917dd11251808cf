#include "expret/evalmetrics.hpp"

#include "expret/error.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace expret {

double average_precision(const RankingResult& ranking, const std::set<std::string>& relevant) {
  if (relevant.empty()) throw DataError("query '" + ranking.query_id + "' has no relevant experiments");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranking.ranked.size(); ++r) {
    if (relevant.count(ranking.ranked[r].experiment_id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  if (hits != relevant.size())
    throw DataError("relevant set of query '" + ranking.query_id + "' is not contained in its ranking");
  return sum / static_cast<double>(relevant.size());
}

std::set<std::string> relevant_set(const RankingResult& ranking, const LabelMap& labels) {
  auto q = labels.find(ranking.query_id);
  if (q == labels.end()) throw DataError("query '" + ranking.query_id + "' has no label");
  std::set<std::string> out;
  for (const auto& item : ranking.ranked) {
    auto it = labels.find(item.experiment_id);
    if (it != labels.end() && it->second == q->second) out.insert(item.experiment_id);
  }
  return out;
}

double mean_average_precision(const std::vector<RankingResult>& rankings, const LabelMap& labels) {
  if (rankings.empty()) throw DataError("no rankings to average");
  double sum = 0.0;
  for (const auto& r : rankings) sum += average_precision(r, relevant_set(r, labels));
  return sum / static_cast<double>(rankings.size());
}

double spearman_rho(const RankingResult& a, const RankingResult& b) {
  const std::size_t n = a.ranked.size();
  if (n != b.ranked.size()) throw DataError("rankings cover different numbers of experiments");
  std::unordered_map<std::string, std::size_t> pos_b;
  for (std::size_t i = 0; i < n; ++i) pos_b.emplace(b.ranked[i].experiment_id, i);
  if (pos_b.size() != n) throw DataError("ranking contains duplicate ids");
  if (n < 2) throw DataError("rank correlation needs at least two items");
  // Ranks are permutations of 0..n-1, so both means and variances coincide.
  const double mean = 0.5 * static_cast<double>(n - 1);
  double cov = 0.0;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto it = pos_b.find(a.ranked[i].experiment_id);
    if (it == pos_b.end()) throw DataError("id '" + a.ranked[i].experiment_id + "' missing from second ranking");
    const double da = static_cast<double>(i) - mean;
    cov += da * (static_cast<double>(it->second) - mean);
    var += da * da;
  }
  return cov / var;
}

double storage_fraction(const std::map<std::string, WeightVector>& weights) {
  if (weights.empty()) throw DataError("no weight vectors");
  Index kept = 0;
  Index total = 0;
  for (const auto& [id, w] : weights) {
    kept += w.nonzeros();
    total += w.weights.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(total);
}

double combined_metric(double performance, double fraction, SparsityReading reading) {
  if (!(performance >= -1.0 && performance <= 1.0)) throw UsageError("performance outside [-1, 1]");
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw UsageError("storage fraction outside [0, 1]");
  const double sparsity = reading == SparsityReading::stored_fraction ? fraction : 1.0 - fraction;
  return (1.0 - sparsity) * std::max(performance, 0.0);
}

}  // namespace expret

#include "expret/core.hpp"

#include "expret/error.hpp"
#include "expret/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace expret {

std::string to_string(OutcomeKind kind) {
  return kind == OutcomeKind::binary ? "binary" : "continuous";
}

std::string to_string(ModelKind kind) { return kind == ModelKind::probit ? "probit" : "linear"; }

OutcomeKind parse_outcome_kind(const std::string& text) {
  if (text == "continuous") return OutcomeKind::continuous;
  if (text == "binary") return OutcomeKind::binary;
  throw DataError("unknown outcome kind '" + text + "'");
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "linear") return ModelKind::linear;
  if (text == "probit") return ModelKind::probit;
  throw DataError("unknown model kind '" + text + "'");
}

Eigen::VectorXd PosteriorSampleSet::weight_mean() const {
  if (samples.rows() == 0) return Eigen::VectorXd::Zero(weight_dim());
  return samples.leftCols(weight_dim()).colwise().mean().transpose();
}

std::string to_string(const WeightSource& source) {
  switch (source.kind) {
    case WeightSource::Kind::uniform:
      return "uniform";
    case WeightSource::Kind::every_k:
      return "every_k(" + std::to_string(source.k) + ")";
    case WeightSource::Kind::learned:
      return "learned";
  }
  return "uniform";
}

WeightSource parse_weight_source(const std::string& text) {
  if (text == "uniform") return {WeightSource::Kind::uniform, 0};
  if (text == "learned") return {WeightSource::Kind::learned, 0};
  if (text.starts_with("every_k(") && text.ends_with(")")) {
    const std::string inner = text.substr(8, text.size() - 9);
    try {
      const unsigned long k = std::stoul(inner);
      if (k >= 1) return {WeightSource::Kind::every_k, static_cast<unsigned>(k)};
    } catch (const std::exception&) {
    }
  }
  throw DataError("unknown weight source '" + text + "'");
}

WeightVector WeightVector::uniform(std::string id, Index m) {
  return {std::move(id), Eigen::VectorXd::Ones(m), {WeightSource::Kind::uniform, 0}};
}

Index WeightVector::nonzeros() const { return (weights.array() != 0.0).count(); }

const Experiment& ModelBank::experiment(const std::string& id) const {
  for (const auto& e : experiments)
    if (e.id == id) return e;
  throw DataError("experiment '" + id + "' not in bank");
}

const PosteriorSampleSet& ModelBank::posterior(const std::string& id) const {
  auto it = posteriors.find(id);
  if (it == posteriors.end()) throw DataError("no posterior samples for experiment '" + id + "'");
  return it->second;
}

bool ModelBank::contains(const std::string& id) const {
  return std::any_of(experiments.begin(), experiments.end(),
                     [&](const Experiment& e) { return e.id == id; });
}

std::vector<std::string> ModelBank::ids() const {
  std::vector<std::string> out;
  out.reserve(experiments.size());
  for (const auto& e : experiments) out.push_back(e.id);
  return out;
}

Index ModelBank::dim() const { return experiments.empty() ? 0 : experiments.front().dim(); }

ModelBank ModelBank::subset(const std::vector<std::string>& keep) const {
  ModelBank out;
  for (const auto& id : keep) {
    out.experiments.push_back(experiment(id));
    if (auto it = posteriors.find(id); it != posteriors.end()) out.posteriors.emplace(id, it->second);
    if (auto it = weights.find(id); it != weights.end()) out.weights.emplace(id, it->second);
  }
  return out;
}

std::string to_string(RankMethod method) {
  switch (method) {
    case RankMethod::ml_uniform:
      return "ml_uniform";
    case RankMethod::ml_weighted:
      return "ml_weighted";
    case RankMethod::l2_baseline:
      return "l2_baseline";
  }
  return "ml_uniform";
}

RankMethod parse_rank_method(const std::string& text) {
  if (text == "ml_uniform") return RankMethod::ml_uniform;
  if (text == "ml_weighted") return RankMethod::ml_weighted;
  if (text == "l2_baseline") return RankMethod::l2_baseline;
  throw UsageError("unknown ranking method '" + text + "'");
}

std::vector<std::string> RankingResult::ids() const {
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (const auto& item : ranked) out.push_back(item.experiment_id);
  return out;
}

void sort_ranked(std::vector<RankedItem>& items) {
  std::sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.experiment_id < b.experiment_id;
  });
}

ValidationReport validate_experiment(const Experiment& exp) {
  ValidationReport report;
  if (exp.id.empty()) report.push_back("empty id");
  if (exp.size() < 1) report.push_back("no observations");
  if (exp.dim() < 1) report.push_back("zero covariate dimension");
  if (exp.outcomes.size() != exp.size()) report.push_back("outcome count differs from covariate rows");
  if (!exp.covariates.allFinite()) report.push_back("non-finite covariate");
  if (!exp.outcomes.allFinite()) report.push_back("non-finite outcome");
  if (exp.outcome_kind == OutcomeKind::binary) {
    const bool binary = std::all_of(exp.outcomes.begin(), exp.outcomes.end(),
                                    [](double y) { return y == 0.0 || y == 1.0; });
    if (!binary) report.push_back("non-binary outcome");
  }
  return report;
}

ValidationReport validate_bank(const ModelBank& bank) {
  ValidationReport report;
  std::set<std::string> seen;
  const Index d = bank.dim();
  for (const auto& exp : bank.experiments) {
    for (const auto& v : validate_experiment(exp)) report.push_back(exp.id + ": " + v);
    if (!seen.insert(exp.id).second) report.push_back(exp.id + ": duplicate id");
    if (exp.dim() != d) report.push_back(exp.id + ": covariate dimension differs from bank");
  }
  for (const auto& [id, post] : bank.posteriors) {
    if (!seen.count(id)) {
      report.push_back(id + ": posterior without experiment");
      continue;
    }
    if (post.size() < 1) report.push_back(id + ": empty sample set");
    if (!post.samples.allFinite()) report.push_back(id + ": non-finite sample");
    const Index expected = post.model_kind == ModelKind::linear ? d + 1 : d;
    if (post.samples.cols() != expected) report.push_back(id + ": sample width mismatch");
  }
  for (const auto& [id, w] : bank.weights) {
    if (!seen.count(id)) {
      report.push_back(id + ": weights without experiment");
      continue;
    }
    auto it = bank.posteriors.find(id);
    if (it != bank.posteriors.end() && it->second.size() != w.weights.size())
      report.push_back(id + ": weight length differs from sample count");
    if (w.source.kind == WeightSource::Kind::every_k) {
      for (Index k = 0; k < w.weights.size(); ++k) {
        const double expected_w = (k % w.source.k == 0) ? 1.0 : 0.0;
        if (w.weights[k] != expected_w) {
          report.push_back(id + ": every_k weights not a 0/1 indicator");
          break;
        }
      }
    }
  }
  return report;
}

BankSplit split_bank(const ModelBank& bank, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw UsageError("train fraction must lie in (0, 1)");
  const std::size_t total = bank.experiments.size();
  if (total < 4) throw DataError("bank has " + std::to_string(total) + " experiments; need at least 4 to split");
  const auto n_db = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(total)));
  if (n_db < 1 || n_db >= total)
    throw DataError("train fraction leaves an empty database or query set");

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "split"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> in_db(total, false);
  for (std::size_t i = 0; i < n_db; ++i) in_db[order[i]] = true;

  BankSplit split;
  for (std::size_t i = 0; i < total; ++i)
    (in_db[i] ? split.database_ids : split.query_ids).push_back(bank.experiments[i].id);
  return split;
}

}  // namespace expret

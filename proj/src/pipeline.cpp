#include "expret/pipeline.hpp"

#include "expret/error.hpp"
#include "expret/likelihood.hpp"
#include "expret/rng.hpp"
#include "expret/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace expret {

void run_parallel(std::size_t jobs, unsigned workers, const std::function<void(std::size_t)>& body) {
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(jobs, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

void fit_bank(ModelBank& bank, const SamplerConfig& cfg, std::uint64_t seed, unsigned workers) {
  std::vector<const Experiment*> todo;
  for (const auto& exp : bank.experiments)
    if (!bank.posteriors.count(exp.id)) todo.push_back(&exp);
  std::vector<PosteriorSampleSet> fitted(todo.size());
  run_parallel(todo.size(), workers, [&](std::size_t i) {
    fitted[i] = fit_posterior(*todo[i], cfg, derive_seed(seed, "fit:" + todo[i]->id));
  });
  for (auto& post : fitted) {
    std::string id = post.experiment_id;
    bank.posteriors.emplace(std::move(id), std::move(post));
  }
}

TrainingOutcome train_weights(const ModelBank& database, const TrainingConfig& cfg, std::uint64_t seed) {
  const std::vector<std::string> ids = database.ids();
  const auto n = static_cast<unsigned>(ids.size());
  if (n < 3) throw DataError("weight learning needs at least 3 database experiments");
  TrainingOutcome out;
  out.k_used = std::min(cfg.k_top, n - 2);
  if (out.k_used < 1) throw UsageError("K must be >= 1");
  if (out.k_used != cfg.k_top)
    out.warnings.push_back("K=" + std::to_string(cfg.k_top) + " exceeds D-2; using K=" + std::to_string(out.k_used));

  const PairLogLiks pairs = compute_pair_logliks(database, ids);
  const ScoreTable scores = ground_truth_scores(pairs);
  const SparseDesign design =
      SparseDesign::assemble(database, pairs, build_triplets(scores, out.k_used), derive_seed(seed, "design"));
  out.triplets = static_cast<std::size_t>(design.rows());
  std::size_t positives = 0;
  for (Index l = 0; l < design.rows(); ++l) positives += design.label(l) == 1 ? 1 : 0;
  out.positive_label_fraction = design.rows() ? static_cast<double>(positives) / static_cast<double>(design.rows()) : 0.0;

  SolverOptions solver = cfg.solver;
  solver.lambda = cfg.lambda;
  const SolverResult result = solve_l1_logistic(design, solver);
  out.solver_sweeps = result.iterations;
  out.kkt_violation = result.final_kkt_violation;
  out.kkt_ok = satisfies_kkt(logistic_gradient(design, result.weights), result.weights, cfg.lambda);

  ExtractedWeights extracted = extract_weights(result, database);
  out.weights = std::move(extracted.weights);
  out.all_zero = std::move(extracted.all_zero);
  out.negative_weights = extracted.negative_weights;
  for (const auto& id : out.all_zero) out.warnings.push_back("experiment '" + id + "' received all-zero weights");
  return out;
}

std::map<std::string, WeightVector> every_k_weights(const ModelBank& bank, unsigned k) {
  std::map<std::string, WeightVector> out;
  for (const auto& [id, post] : bank.posteriors)
    out.emplace(id, thin_every_k(post, std::min<unsigned>(k, static_cast<unsigned>(post.size()))));
  return out;
}

const MethodEvaluation& SplitEvaluation::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.name == name) return m;
  throw UsageError("no evaluation for method '" + name + "'");
}

SplitEvaluation evaluate_split(const ModelBank& bank, const BankSplit& split,
                               const std::map<std::string, WeightVector>* learned, const EvalOptions& options) {
  ModelBank database = bank.subset(split.database_ids);
  database.weights.clear();

  ModelBank thinned = database;
  thinned.weights = every_k_weights(database, options.every_k);
  ModelBank trained = database;
  if (learned) {
    for (const auto& id : split.database_ids) {
      auto it = learned->find(id);
      if (it == learned->end()) throw DataError("no learned weights for database experiment '" + id + "'");
      trained.weights.emplace(id, it->second);
    }
  }

  const bool labelled = std::all_of(bank.experiments.begin(), bank.experiments.end(),
                                    [](const Experiment& e) { return e.label.has_value(); });
  LabelMap labels;
  if (labelled)
    for (const auto& e : bank.experiments) labels.emplace(e.id, *e.label);

  SplitEvaluation out;
  std::vector<std::string> names = {"ml_uniform"};
  if (options.include_l2) names.push_back("l2_baseline");
  names.push_back("every_k");
  if (learned) names.push_back("learned");
  for (const auto& name : names) out.methods.push_back({name, {}, {}});
  auto slot = [&](const std::string& name) -> MethodEvaluation& {
    for (auto& m : out.methods)
      if (m.name == name) return m;
    throw UsageError(name);
  };

  for (const auto& qid : split.query_ids) {
    const Experiment& query = bank.experiment(qid);
    slot("ml_uniform").rankings.push_back(rank_by_ml(database, query, RankMethod::ml_uniform));
    if (options.include_l2) slot("l2_baseline").rankings.push_back(l2_baseline_rank(database, bank.posterior(qid)));
    slot("every_k").rankings.push_back(rank_by_ml(thinned, query, RankMethod::ml_weighted));
    if (learned) {
      RankingResult r = rank_by_ml(trained, query, RankMethod::ml_weighted);
      for (const auto& w : r.warnings) out.warnings.push_back(w);
      slot("learned").rankings.push_back(std::move(r));
    }
  }

  if (labelled) {
    for (std::size_t i = 0; i < split.query_ids.size(); ++i)
      if (relevant_set(out.methods.front().rankings[i], labels).empty()) out.skipped_queries.push_back(split.query_ids[i]);
  }

  for (auto& m : out.methods) {
    EvalReport& rep = m.report;
    rep.method = m.name;
    rep.k_top = options.k_top;
    rep.lambda = options.lambda;
    if (m.name == "every_k") {
      rep.storage_fraction = storage_fraction(thinned.weights);
    } else if (m.name == "learned") {
      rep.storage_fraction = storage_fraction(trained.weights);
    } else {
      rep.storage_fraction = 1.0;
    }

    double rho_sum = 0.0;
    for (std::size_t i = 0; i < m.rankings.size(); ++i) {
      const double rho = m.rankings[i].ranked.size() >= 2
                             ? spearman_rho(m.rankings[i], out.methods.front().rankings[i])
                             : 1.0;
      rep.per_query_spearman[m.rankings[i].query_id] = rho;
      rho_sum += rho;
    }
    if (!m.rankings.empty()) rep.spearman = rho_sum / static_cast<double>(m.rankings.size());

    if (labelled) {
      std::vector<RankingResult> scored;
      for (const auto& r : m.rankings)
        if (std::find(out.skipped_queries.begin(), out.skipped_queries.end(), r.query_id) == out.skipped_queries.end())
          scored.push_back(r);
      for (const auto& r : scored) rep.per_query_ap[r.query_id] = average_precision(r, relevant_set(r, labels));
      if (!scored.empty()) rep.map = mean_average_precision(scored, labels);
    }
    const std::optional<double> performance = labelled ? rep.map : rep.spearman;
    if (performance) rep.combined = combined_metric(*performance, rep.storage_fraction, options.reading);
  }
  return out;
}

std::string SweepCell::name() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "d%u_n%g_snr%g_m%u", dim, n_rate, snr_ratio, n_samples);
  return buf;
}

std::vector<SweepCell> sweep_cells(const std::vector<unsigned>& dims, const std::vector<double>& n_rates,
                                   const std::vector<double>& snr_ratios, const std::vector<unsigned>& sample_counts) {
  if (dims.empty() || n_rates.empty() || snr_ratios.empty() || sample_counts.empty())
    throw UsageError("every sweep grid must be nonempty");
  std::vector<SweepCell> cells;
  for (unsigned d : dims)
    for (double n : n_rates)
      for (double r : snr_ratios)
        for (unsigned m : sample_counts) cells.push_back({d, n, r, m});
  return cells;
}

ProtocolResult run_bank_protocol(const ModelBank& bank, const ProtocolConfig& cfg, std::uint64_t seed) {
  ProtocolResult out;
  out.experiments = bank.experiments.size();
  const BankSplit split = split_bank(bank, cfg.train_fraction, derive_seed(seed, "split"));
  const ModelBank database = bank.subset(split.database_ids);
  out.training = train_weights(database, cfg.training, derive_seed(seed, "train"));
  EvalOptions eval = cfg.eval;
  eval.k_top = out.training.k_used;
  eval.lambda = cfg.training.lambda;
  out.evaluation = evaluate_split(bank, split, &out.training.weights, eval);
  return out;
}

ProtocolResult run_synthetic_protocol(const ProtocolConfig& cfg, std::uint64_t seed) {
  SynthBank synth = cfg.synth.clusters == 0 ? gen_unclustered(cfg.synth, derive_seed(seed, "synth"))
                                            : gen_clustered(cfg.synth, derive_seed(seed, "synth"));
  fit_bank(synth.bank, cfg.sampler, derive_seed(seed, "fit"));
  return run_bank_protocol(synth.bank, cfg, seed);
}

}  // namespace expret

#include "expret/core.hpp"
#include "expret/dataio.hpp"
#include "expret/error.hpp"
#include "expret/likelihood.hpp"
#include "expret/pipeline.hpp"
#include "expret/rng.hpp"
#include "expret/samplers.hpp"
#include "expret/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace expret;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// Errors go to stderr as one line: `error <kind>: <message>`.
int report_error(const char* kind, std::string message, int code) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  std::cerr << "error " << kind << ": " << message << '\n';
  return code;
}

void print_warnings(const std::vector<std::string>& warnings) {
  std::set<std::string> seen;
  for (const auto& w : warnings)
    if (seen.insert(w).second) std::cerr << "warning: " << w << '\n';
}

struct Options {
  std::string bank;
  std::string bundle;
  std::string out;
  std::uint64_t seed = 1;
  unsigned k_top = 25;
  double lambda = 1.0;
  unsigned every_k = 10;
  std::string method = "ml_uniform";
  double train_fraction = 0.75;
  unsigned workers = 1;
  bool text = false;

  // synth
  std::string shape = "clustered";
  unsigned clusters = 20;
  unsigned total = 200;
  unsigned dim = 10;
  double n_rate = 18.0;
  double snr = 0.5;

  // fit
  unsigned samples = 100;
  unsigned burn_in = 500;
  unsigned thin = 1;

  // query
  std::string query;

  // sweep
  std::vector<unsigned> grid_d = {10, 18, 32};
  std::vector<double> grid_n = {10, 18, 32};
  std::vector<double> grid_snr = {0.1, 0.5, 1.0};
  std::vector<unsigned> grid_m = {100, 500};
};

BankEncoding encoding(const Options& o) { return o.text ? BankEncoding::text : BankEncoding::binary; }

SamplerConfig sampler_config(const Options& o) {
  SamplerConfig cfg;
  cfg.n_samples = o.samples;
  cfg.burn_in = o.burn_in;
  cfg.thin = o.thin;
  return cfg;
}

ProtocolConfig protocol_config(const Options& o) {
  ProtocolConfig cfg;
  cfg.training.k_top = o.k_top;
  cfg.training.lambda = o.lambda;
  cfg.eval.every_k = o.every_k;
  cfg.train_fraction = o.train_fraction;
  return cfg;
}

void print_evaluation(const SplitEvaluation& eval, std::ostream& os) {
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) s << *v; else s << "NA";
    return s.str();
  };
  for (const auto& m : eval.methods) {
    const EvalReport& r = m.report;
    os << m.name << " map=" << opt(r.map) << " spearman=" << opt(r.spearman) << " storage=" << r.storage_fraction
       << " combined=" << opt(r.combined) << '\n';
  }
}

void write_evaluation(const SplitEvaluation& eval, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<EvalReport> reports;
  std::vector<RankingResult> rankings;
  for (const auto& m : eval.methods) {
    reports.push_back(m.report);
    rankings.insert(rankings.end(), m.rankings.begin(), m.rankings.end());
  }
  export_report(reports, dir / "report.csv");
  export_rankings(rankings, dir / "rankings.csv");
}

int run_synth(const Options& o) {
  SynthBank synth;
  if (o.shape == "clustered" || o.shape == "unclustered") {
    SynthConfig cfg;
    cfg.clusters = o.shape == "clustered" ? o.clusters : 0;
    cfg.total = o.total;
    cfg.dim = o.dim;
    cfg.n_rate = o.n_rate;
    cfg.snr_ratio = o.snr;
    synth = cfg.clusters == 0 ? gen_unclustered(cfg, derive_seed(o.seed, "synth"))
                              : gen_clustered(cfg, derive_seed(o.seed, "synth"));
  } else if (o.shape == "landmine") {
    synth = gen_landmine_like({}, derive_seed(o.seed, "synth"));
  } else if (o.shape == "computer") {
    synth = gen_computer_like(derive_seed(o.seed, "synth"));
  } else {
    synth = gen_restaurant_like(derive_seed(o.seed, "synth"));
  }
  write_bundle(synth.bank, o.shape, o.out);
  std::cout << "wrote " << synth.bank.experiments.size() << " experiments to " << o.out << '\n';
  return 0;
}

int run_fit(const Options& o) {
  LoadedBundle loaded = load_bundle(o.bundle);
  print_warnings(loaded.warnings);
  fit_bank(loaded.bank, sampler_config(o), derive_seed(o.seed, "fit"), o.workers);
  save_bank(loaded.bank, o.out, encoding(o));
  std::cout << "fitted " << loaded.bank.posteriors.size() << " posteriors into " << o.out << '\n';
  return 0;
}

int run_rank_train(const Options& o) {
  ModelBank bank = load_bank(o.bank);
  bank.weights.clear();
  TrainingConfig cfg;
  cfg.k_top = o.k_top;
  cfg.lambda = o.lambda;
  TrainingOutcome trained = train_weights(bank, cfg, derive_seed(o.seed, "train"));
  print_warnings(trained.warnings);
  bank.weights = trained.weights;
  const fs::path out = o.out.empty() ? fs::path(o.bank) : fs::path(o.out);
  save_bank(bank, out, encoding(o));
  std::cout << "trained K=" << trained.k_used << " lambda=" << o.lambda << " triplets=" << trained.triplets
            << " storage=" << storage_fraction(bank.weights) << " kkt=" << trained.kkt_violation << '\n';
  return 0;
}

int run_query(const Options& o) {
  ModelBank bank = load_bank(o.bank);
  Experiment query;
  if (!o.bundle.empty()) {
    LoadedBundle loaded = load_bundle(o.bundle);
    print_warnings(loaded.warnings);
    auto it = std::find_if(loaded.bank.experiments.begin(), loaded.bank.experiments.end(),
                           [&](const Experiment& e) { return e.id == o.query; });
    if (it == loaded.bank.experiments.end()) throw DataError("query '" + o.query + "' not found in bundle " + o.bundle);
    query = *it;
  } else {
    if (!bank.contains(o.query)) throw DataError("query '" + o.query + "' not found in bank " + o.bank);
    query = bank.experiment(o.query);
  }

  RankingResult ranking;
  if (o.method == "every_k") {
    bank.weights = every_k_weights(bank, o.every_k);
    ranking = rank_by_ml(bank, query, RankMethod::ml_weighted);
  } else {
    const RankMethod method = parse_rank_method(o.method);
    if (method == RankMethod::l2_baseline) {
      PosteriorSampleSet posterior = bank.posteriors.count(query.id)
                                         ? bank.posterior(query.id)
                                         : fit_posterior(query, sampler_config(o), derive_seed(o.seed, "fit:" + query.id));
      ranking = l2_baseline_rank(bank, posterior);
    } else {
      if (method == RankMethod::ml_weighted && bank.weights.empty())
        throw DataError("bank " + o.bank + " has no trained weights; run rank-train first");
      RankOptions ropts;
      ropts.fallback_every_k = o.every_k;
      ranking = rank_by_ml(bank, query, method, ropts);
    }
  }
  print_warnings(ranking.warnings);
  if (o.out.empty()) {
    for (std::size_t r = 0; r < ranking.ranked.size(); ++r)
      std::cout << r + 1 << ',' << csv_field(ranking.ranked[r].experiment_id) << ',' << ranking.ranked[r].score << '\n';
  } else {
    export_rankings({ranking}, o.out);
  }
  return 0;
}

int run_eval(const Options& o) {
  const ModelBank bank = load_bank(o.bank);
  const ProtocolResult result = run_bank_protocol(bank, protocol_config(o), o.seed);
  print_warnings(result.training.warnings);
  print_warnings(result.evaluation.warnings);
  if (!o.out.empty()) write_evaluation(result.evaluation, o.out);
  print_evaluation(result.evaluation, std::cout);
  return 0;
}

int run_sweep(const Options& o) {
  const std::vector<SweepCell> cells = sweep_cells(o.grid_d, o.grid_n, o.grid_snr, o.grid_m);
  const fs::path root = o.out;
  fs::create_directories(root);
  std::vector<std::vector<EvalReport>> reports(cells.size());
  std::mutex log_mutex;
  run_parallel(cells.size(), o.workers, [&](std::size_t i) {
    const SweepCell& cell = cells[i];
    ProtocolConfig cfg = protocol_config(o);
    cfg.synth.clusters = o.clusters;
    cfg.synth.total = o.total;
    cfg.synth.dim = cell.dim;
    cfg.synth.n_rate = cell.n_rate;
    cfg.synth.snr_ratio = cell.snr_ratio;
    cfg.sampler.n_samples = cell.n_samples;
    cfg.sampler.burn_in = o.burn_in;
    const ProtocolResult result = run_synthetic_protocol(cfg, derive_seed(o.seed, cell.name()));
    write_evaluation(result.evaluation, root / cell.name());
    for (const auto& m : result.evaluation.methods) reports[i].push_back(m.report);
    std::lock_guard lock(log_mutex);
    std::cout << "cell " << cell.name() << " done" << std::endl;
  });

  std::ofstream summary(root / "summary.csv");
  summary << "cell,d,n,snr,m,method,K,lambda,storage_fraction,map,spearman,combined\n";
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    s.precision(17);
    if (v) s << *v;
    return s.str();
  };
  summary.precision(17);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const SweepCell& c = cells[i];
    for (const auto& r : reports[i])
      summary << c.name() << ',' << c.dim << ',' << c.n_rate << ',' << c.snr_ratio << ',' << c.n_samples << ','
              << r.method << ',' << r.k_top << ',' << r.lambda << ',' << r.storage_fraction << ',' << opt(r.map) << ','
              << opt(r.spearman) << ',' << opt(r.combined) << '\n';
  }
  if (!summary) throw DataError("failed writing " + (root / "summary.csv").string());
  return 0;
}

void add_seed(CLI::App* app, Options& o) { app->add_option("--seed", o.seed, "Global seed; all module seeds derive from it"); }

void add_training(CLI::App* app, Options& o) {
  app->add_option("--K", o.k_top, "Top-K relevant experiments per training query")->check(CLI::PositiveNumber);
  app->add_option("--lambda", o.lambda, "L1 penalty weight")->check(CLI::NonNegativeNumber);
}

void add_sampler(CLI::App* app, Options& o) {
  app->add_option("--samples", o.samples, "Posterior samples kept per experiment (m)")->check(CLI::PositiveNumber);
  app->add_option("--burn-in", o.burn_in, "Gibbs burn-in iterations");
  app->add_option("--thin", o.thin, "Gibbs thinning interval")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experiment retrieval by marginal likelihood with learned sample compression"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset bundle");
  synth->add_option("--shape", o.shape, "Bank shape")
      ->check(CLI::IsMember({"clustered", "unclustered", "landmine", "computer", "restaurant"}));
  synth->add_option("--clusters", o.clusters, "Cluster count for the clustered shape")->check(CLI::Range(2u, 100000u));
  synth->add_option("--total", o.total, "Experiment count for the unclustered shape");
  synth->add_option("--dim", o.dim, "Covariate dimension d")->check(CLI::PositiveNumber);
  synth->add_option("--n-rate", o.n_rate, "Poisson rate of observations per experiment");
  synth->add_option("--snr", o.snr, "Noise variance over signal variance");
  synth->add_option("--out", o.out, "Output bundle directory")->required();
  add_seed(synth, o);

  auto* fit = app.add_subcommand("fit", "Fit posterior samples for every experiment of a bundle");
  fit->add_option("--bundle", o.bundle, "Input bundle directory")->required()->check(CLI::ExistingDirectory);
  fit->add_option("--out", o.out, "Output bank directory")->required();
  add_sampler(fit, o);
  fit->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  fit->add_flag("--text", o.text, "Write samples as text instead of binary");
  add_seed(fit, o);

  auto* train = app.add_subcommand("rank-train", "Learn sparse per-sample weights for a bank");
  train->add_option("--bank", o.bank, "Bank directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", o.out, "Output bank directory (default: update --bank in place)");
  add_training(train, o);
  train->add_flag("--text", o.text, "Write samples as text instead of binary");
  add_seed(train, o);

  auto* query = app.add_subcommand("query", "Rank bank experiments for one query experiment");
  query->add_option("--bank", o.bank, "Bank directory")->required()->check(CLI::ExistingDirectory);
  query->add_option("--query", o.query, "Query experiment id")->required();
  query->add_option("--bundle", o.bundle, "Bundle holding the query (default: the bank itself)")
      ->check(CLI::ExistingDirectory);
  query->add_option("--method", o.method, "Ranking method")
      ->check(CLI::IsMember({"ml_uniform", "ml_weighted", "every_k", "l2_baseline"}));
  query->add_option("--every-k", o.every_k, "Thinning interval (every_k, and fallback for all-zero weights)")
      ->check(CLI::PositiveNumber);
  query->add_option("--out", o.out, "Rankings CSV (default: stdout)");
  add_sampler(query, o);
  add_seed(query, o);

  auto* eval = app.add_subcommand("eval", "Split a bank, learn weights on the database and score the queries");
  eval->add_option("--bank", o.bank, "Bank directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--train-fraction", o.train_fraction, "Database share of the split")->check(CLI::Range(0.0, 1.0));
  add_training(eval, o);
  eval->add_option("--every-k", o.every_k, "Thinning interval of the every-k baseline")->check(CLI::PositiveNumber);
  eval->add_option("--out", o.out, "Directory for report.csv and rankings.csv");
  add_seed(eval, o);

  auto* sweep = app.add_subcommand("sweep", "Run the synthetic protocol over a grid of set-ups");
  sweep->add_option("--grid-d", o.grid_d, "Dimensions")->delimiter(',');
  sweep->add_option("--grid-n", o.grid_n, "Observation rates")->delimiter(',');
  sweep->add_option("--grid-snr", o.grid_snr, "Noise/signal variance ratios")->delimiter(',');
  sweep->add_option("--grid-m", o.grid_m, "Posterior sample counts")->delimiter(',');
  sweep->add_option("--clusters", o.clusters, "Clusters per bank (0 = unclustered)");
  sweep->add_option("--total", o.total, "Experiment count when unclustered");
  sweep->add_option("--burn-in", o.burn_in, "Gibbs burn-in iterations");
  sweep->add_option("--train-fraction", o.train_fraction, "Database share of the split")->check(CLI::Range(0.0, 1.0));
  add_training(sweep, o);
  sweep->add_option("--every-k", o.every_k, "Thinning interval of the every-k baseline")->check(CLI::PositiveNumber);
  sweep->add_option("--workers", o.workers, "Cells run concurrently")->check(CLI::PositiveNumber);
  sweep->add_option("--out", o.out, "Output directory, one subdirectory per cell")->required();
  add_seed(sweep, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("usage", e.what(), kExitUsage);
  }

  try {
    if (*synth) return run_synth(o);
    if (*fit) return run_fit(o);
    if (*train) return run_rank_train(o);
    if (*query) return run_query(o);
    if (*eval) return run_eval(o);
    return run_sweep(o);
  } catch (const UsageError& e) {
    return report_error("usage", e.what(), kExitUsage);
  } catch (const DataError& e) {
    return report_error("data", e.what(), kExitData);
  } catch (const NumericalError& e) {
    return report_error("numerical", e.what(), kExitNumerical);
  } catch (const fs::filesystem_error& e) {
    return report_error("data", e.what(), kExitData);
  } catch (const std::exception& e) {
    return report_error("numerical", e.what(), kExitNumerical);
  }
}

#include "expret/synth.hpp"

#include "expret/error.hpp"
#include "expret/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace expret {

namespace {

void require_config(const SynthConfig& cfg) {
  if (cfg.dim < 1) throw UsageError("synthetic dimension must be >= 1");
  if (!(cfg.snr_ratio > 0.0)) throw UsageError("noise/signal ratio must be positive");
  if (!(cfg.n_rate > 0.0)) throw UsageError("observation rate must be positive");
  if (!(cfg.center_scale >= 0.0) || !(cfg.within_scale >= 0.0)) throw UsageError("scales must be non-negative");
}

Eigen::VectorXd gaussian_vector(Rng& rng, Index d, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (Index j = 0; j < d; ++j) v[j] = scale * normal(rng);
  return v;
}

std::string make_id(const char* prefix, unsigned index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04u", prefix, index);
  return buf;
}

// Draws n, covariates and outcomes for regressor w; noise variance is
// ratio * empirical variance of the noiseless signal.
Experiment linear_experiment(Rng& rng, std::string id, const Eigen::VectorXd& w, const SynthConfig& cfg,
                             SynthTruth& truth, bool& n_clamped) {
  std::poisson_distribution<int> n_draw(cfg.n_rate);
  int n = n_draw(rng);
  n_clamped = n < 2;
  n = std::max(n, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  Experiment exp;
  exp.id = std::move(id);
  exp.outcome_kind = OutcomeKind::continuous;
  exp.covariates.resize(n, w.size());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < w.size(); ++j) exp.covariates(i, j) = normal(rng);
  const Eigen::VectorXd signal = exp.covariates * w;
  const double signal_var = (signal.array() - signal.mean()).square().mean();
  const double noise_var = cfg.snr_ratio * signal_var;
  const double noise_sd = std::sqrt(noise_var);
  exp.outcomes.resize(n);
  for (Index i = 0; i < n; ++i) exp.outcomes[i] = signal[i] + noise_sd * normal(rng);
  truth = {w, signal_var, noise_var};
  return exp;
}

}  // namespace

SynthBank gen_clustered(const SynthConfig& cfg, std::uint64_t seed) {
  require_config(cfg);
  if (cfg.clusters < 2) throw UsageError("clustered generation needs at least 2 clusters");
  if (!(cfg.cluster_rate > 0.0)) throw UsageError("cluster rate must be positive");
  Rng rng(seed);
  const Index d = cfg.dim;
  std::vector<Eigen::VectorXd> centers;
  for (unsigned c = 0; c < cfg.clusters; ++c) centers.push_back(gaussian_vector(rng, d, cfg.center_scale));

  SynthBank out;
  std::poisson_distribution<int> count_draw(cfg.cluster_rate);
  bool any_count_unclamped = false;
  bool any_n_unclamped = false;
  unsigned serial = 0;
  for (unsigned c = 0; c < cfg.clusters; ++c) {
    int count = count_draw(rng);
    any_count_unclamped |= count >= 1;
    count = std::max(count, 1);
    for (int e = 0; e < count; ++e) {
      const Eigen::VectorXd w = centers[c] + gaussian_vector(rng, d, cfg.within_scale);
      SynthTruth truth;
      bool n_clamped = false;
      char prefix[24];
      std::snprintf(prefix, sizeof prefix, "c%02u_e", c);
      Experiment exp = linear_experiment(rng, make_id(prefix, serial++), w, cfg, truth, n_clamped);
      any_n_unclamped |= !n_clamped;
      exp.label = std::to_string(c);
      out.truth.emplace(exp.id, std::move(truth));
      out.bank.experiments.push_back(std::move(exp));
    }
  }
  if (!any_count_unclamped || !any_n_unclamped)
    throw UsageError("degenerate synthetic config: every Poisson draw was clamped");
  return out;
}

SynthBank gen_unclustered(const SynthConfig& cfg, std::uint64_t seed) {
  require_config(cfg);
  if (cfg.total < 4) throw UsageError("unclustered generation needs at least 4 experiments");
  Rng rng(seed);
  SynthBank out;
  bool any_n_unclamped = false;
  for (unsigned e = 0; e < cfg.total; ++e) {
    const Eigen::VectorXd w = gaussian_vector(rng, cfg.dim, cfg.center_scale);
    SynthTruth truth;
    bool n_clamped = false;
    Experiment exp = linear_experiment(rng, make_id("e", e), w, cfg, truth, n_clamped);
    any_n_unclamped |= !n_clamped;
    out.truth.emplace(exp.id, std::move(truth));
    out.bank.experiments.push_back(std::move(exp));
  }
  if (!any_n_unclamped) throw UsageError("degenerate synthetic config: every Poisson draw was clamped");
  return out;
}

SynthBank gen_landmine_like(const LandmineShape& shape, std::uint64_t seed) {
  if (shape.dim < 1 || shape.class_a < 1 || shape.class_b < 1) throw UsageError("invalid landmine shape");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::poisson_distribution<int> n_draw(shape.n_rate);
  const Index d = shape.dim;
  // Opposite-signed class centres keep the two regions well apart.
  const Eigen::VectorXd center = gaussian_vector(rng, d, shape.center_scale);
  const Eigen::VectorXd centers[2] = {center, -center};
  const unsigned counts[2] = {shape.class_a, shape.class_b};
  const char* names[2] = {"foliated", "desert"};

  SynthBank out;
  unsigned serial = 0;
  for (int c = 0; c < 2; ++c) {
    for (unsigned e = 0; e < counts[c]; ++e) {
      const Eigen::VectorXd w = centers[c] + gaussian_vector(rng, d, shape.within_scale);
      const int n = std::max(n_draw(rng), 2);
      Experiment exp;
      exp.id = make_id("task", serial++);
      exp.outcome_kind = OutcomeKind::binary;
      exp.label = names[c];
      exp.covariates.resize(n, d);
      exp.outcomes.resize(n);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) exp.covariates(i, j) = normal(rng);
        const double eta = exp.covariates.row(i).dot(w);
        exp.outcomes[i] = (eta + normal(rng) > 0.0) ? 1.0 : 0.0;
      }
      out.truth.emplace(exp.id, SynthTruth{w, 0.0, 1.0});
      out.bank.experiments.push_back(std::move(exp));
    }
  }
  return out;
}

namespace {

SynthBank ratings_bank(Rng& rng, unsigned experiments, const std::vector<int>& category_sizes, int n_min, int n_max,
                       double lo, double hi, double missing_rate, const char* prefix) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> n_draw(n_min, n_max);
  Index d = 0;
  for (int s : category_sizes) d += s;
  const double mid = 0.5 * (lo + hi);
  const double span = 0.5 * (hi - lo);

  SynthBank out;
  for (unsigned e = 0; e < experiments; ++e) {
    const Eigen::VectorXd w = gaussian_vector(rng, d, span / std::sqrt(static_cast<double>(category_sizes.size())));
    const int n = n_draw(rng);
    Experiment exp;
    exp.id = make_id(prefix, e);
    exp.outcome_kind = OutcomeKind::continuous;
    exp.covariates = Eigen::MatrixXd::Zero(n, d);
    exp.outcomes.resize(n);
    for (Index i = 0; i < n; ++i) {
      if (category_sizes.size() == static_cast<std::size_t>(d)) {
        for (Index j = 0; j < d; ++j) exp.covariates(i, j) = unif(rng) < 0.5 ? 1.0 : 0.0;
      } else {
        Index offset = 0;
        for (int s : category_sizes) {
          std::uniform_int_distribution<int> pick(0, s - 1);
          exp.covariates(i, offset + pick(rng)) = 1.0;
          offset += s;
        }
      }
      const double raw = mid + exp.covariates.row(i).dot(w) - w.sum() * 0.5 + 0.5 * normal(rng);
      exp.outcomes[i] = std::clamp(std::round(raw), lo, hi);
      if (unif(rng) < missing_rate) exp.outcomes[i] = std::numeric_limits<double>::quiet_NaN();
    }
    out.truth.emplace(exp.id, SynthTruth{w, 0.0, 0.25});
    out.bank.experiments.push_back(std::move(exp));
  }
  return out;
}

}  // namespace

SynthBank gen_computer_like(std::uint64_t seed, unsigned experiments, double missing_rate) {
  Rng rng(seed);
  return ratings_bank(rng, experiments, std::vector<int>(13, 1), 20, 20, 0.0, 10.0, missing_rate, "student");
}

SynthBank gen_restaurant_like(std::uint64_t seed, unsigned experiments) {
  Rng rng(seed);
  return ratings_bank(rng, experiments, {3, 3, 3, 3, 3, 3, 4}, 3, 18, 1.0, 3.0, 0.0, "customer");
}

}  // namespace expret

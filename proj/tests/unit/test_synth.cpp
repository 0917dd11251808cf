#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "expret/error.hpp"
#include "expret/synth.hpp"

#include <cmath>
#include <set>

using namespace expret;

namespace {

bool banks_equal(const ModelBank& a, const ModelBank& b) {
  if (a.experiments.size() != b.experiments.size()) return false;
  for (std::size_t i = 0; i < a.experiments.size(); ++i) {
    const auto& x = a.experiments[i];
    const auto& y = b.experiments[i];
    if (x.id != y.id || x.label != y.label || x.covariates != y.covariates) return false;
    if (x.outcomes.size() != y.outcomes.size()) return false;
    for (Index k = 0; k < x.outcomes.size(); ++k)
      if (!(x.outcomes[k] == y.outcomes[k] || (std::isnan(x.outcomes[k]) && std::isnan(y.outcomes[k])))) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("default clustered bank has about 200 experiments") {
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SynthBank s = gen_clustered({}, seed);
    CHECK(s.bank.experiments.size() > 120);
    CHECK(s.bank.experiments.size() < 280);
    total += static_cast<double>(s.bank.experiments.size());
    CHECK(validate_bank(s.bank).empty());
  }
  CHECK(total / 10.0 == doctest::Approx(200.0).epsilon(0.1));
}

TEST_CASE("clustered labels and dimensions") {
  SynthConfig cfg;
  cfg.clusters = 5;
  cfg.dim = 4;
  const SynthBank s = gen_clustered(cfg, 3);
  std::set<std::string> allowed;
  for (int c = 0; c < 5; ++c) allowed.insert(std::to_string(c));
  for (const auto& e : s.bank.experiments) {
    REQUIRE(e.label.has_value());
    CHECK(allowed.count(*e.label) == 1);
    CHECK(e.dim() == 4);
    CHECK(e.size() >= 2);
  }
}

TEST_CASE("zero within-cluster spread shares the regressor") {
  SynthConfig cfg;
  cfg.clusters = 4;
  cfg.within_scale = 0.0;
  const SynthBank s = gen_clustered(cfg, 9);
  std::map<std::string, Eigen::VectorXd> per_label;
  for (const auto& e : s.bank.experiments) {
    const auto& w = s.truth.at(e.id).w;
    auto [it, fresh] = per_label.emplace(*e.label, w);
    if (!fresh) CHECK(it->second == w);
  }
}

TEST_CASE("noise ratio scales residual variance") {
  SynthConfig lo, hi;
  lo.clusters = hi.clusters = 3;
  lo.n_rate = hi.n_rate = 100.0;
  lo.snr_ratio = 0.1;
  hi.snr_ratio = 1.0;
  const SynthBank a = gen_clustered(lo, 17);
  const SynthBank b = gen_clustered(hi, 17);
  REQUIRE(a.bank.experiments.size() == b.bank.experiments.size());
  for (std::size_t i = 0; i < a.bank.experiments.size(); ++i) {
    const auto& ea = a.bank.experiments[i];
    const auto& eb = b.bank.experiments[i];
    const auto& wa = a.truth.at(ea.id).w;
    CHECK(wa == b.truth.at(eb.id).w);
    const Eigen::VectorXd ra = ea.outcomes - ea.covariates * wa;
    const Eigen::VectorXd rb = eb.outcomes - eb.covariates * wa;
    const double ratio = rb.squaredNorm() / ra.squaredNorm();
    CHECK(ratio == doctest::Approx(10.0).epsilon(0.3));
  }
}

TEST_CASE("injected noise variance is r times the signal variance") {
  SynthConfig cfg;
  cfg.snr_ratio = 0.37;
  const SynthBank s = gen_clustered(cfg, 5);
  for (const auto& e : s.bank.experiments) {
    const SynthTruth& t = s.truth.at(e.id);
    const Eigen::VectorXd signal = e.covariates * t.w;
    const double var = (signal.array() - signal.mean()).square().mean();
    CHECK(t.signal_variance == var);
    CHECK(t.noise_variance == 0.37 * var);
  }
}

TEST_CASE("unclustered banks") {
  SynthConfig cfg;
  cfg.clusters = 0;
  cfg.total = 200;
  const SynthBank a = gen_unclustered(cfg, 1);
  CHECK(a.bank.experiments.size() == 200);
  for (const auto& e : a.bank.experiments) CHECK_FALSE(e.label.has_value());
  CHECK(banks_equal(a.bank, gen_unclustered(cfg, 1).bank));
  const SynthBank b = gen_unclustered(cfg, 2);
  CHECK(a.truth.begin()->second.w != b.truth.begin()->second.w);
  cfg.total = 3;
  CHECK_THROWS_AS(gen_unclustered(cfg, 1), UsageError);
}

TEST_CASE("generation is deterministic and seed sensitive") {
  const SynthBank a = gen_clustered({}, 77);
  CHECK(banks_equal(a.bank, gen_clustered({}, 77).bank));
  CHECK_FALSE(banks_equal(a.bank, gen_clustered({}, 78).bank));
}

TEST_CASE("degenerate configurations are rejected") {
  SynthConfig cfg;
  cfg.clusters = 1;
  CHECK_THROWS_AS(gen_clustered(cfg, 1), UsageError);
  cfg.clusters = 3;
  cfg.snr_ratio = 0.0;
  CHECK_THROWS_AS(gen_clustered(cfg, 1), UsageError);
  cfg.snr_ratio = 0.5;
  cfg.cluster_rate = 1e-9;
  cfg.n_rate = 1e-9;
  CHECK_THROWS_AS(gen_clustered(cfg, 1), UsageError);
}

TEST_CASE("dataset shape mimics") {
  const SynthBank mine = gen_landmine_like({}, 4);
  CHECK(mine.bank.experiments.size() == 29);
  int foliated = 0;
  for (const auto& e : mine.bank.experiments) {
    CHECK(e.dim() == 9);
    CHECK(e.outcome_kind == OutcomeKind::binary);
    foliated += *e.label == "foliated";
  }
  CHECK(foliated == 16);
  CHECK(validate_bank(mine.bank).empty());

  const SynthBank comp = gen_computer_like(4);
  CHECK(comp.bank.experiments.size() == 200);
  for (const auto& e : comp.bank.experiments) {
    CHECK(e.dim() == 13);
    CHECK(e.size() == 20);
    CHECK(((e.covariates.array() == 0.0) || (e.covariates.array() == 1.0)).all());
    for (double y : e.outcomes)
      if (!std::isnan(y)) CHECK((y >= 0.0 && y <= 10.0 && y == std::round(y)));
  }

  const SynthBank rest = gen_restaurant_like(4);
  CHECK(rest.bank.experiments.size() == 119);
  for (const auto& e : rest.bank.experiments) {
    CHECK(e.dim() == 22);
    CHECK(e.size() >= 3);
    CHECK(e.size() <= 18);
    CHECK((e.covariates.rowwise().sum().array() == 7.0).all());
  }
  CHECK(validate_bank(rest.bank).empty());
}

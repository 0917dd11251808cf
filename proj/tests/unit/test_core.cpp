#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "expret/core.hpp"
#include "expret/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

using namespace expret;

namespace {

Experiment linear_experiment(const std::string& id, Index n, Index d) {
  Experiment e;
  e.id = id;
  e.covariates = Eigen::MatrixXd::Random(n, d);
  e.outcomes = Eigen::VectorXd::Random(n);
  return e;
}

ModelBank bank_of(std::size_t count) {
  ModelBank bank;
  for (std::size_t i = 0; i < count; ++i) bank.experiments.push_back(linear_experiment("e" + std::to_string(i), 3, 2));
  return bank;
}

}  // namespace

TEST_CASE("well-formed experiment validates cleanly") {
  CHECK(validate_experiment(linear_experiment("ok", 5, 2)).empty());
}

TEST_CASE("binary experiment with outcome 2 reports one violation") {
  Experiment e = linear_experiment("bin", 4, 2);
  e.outcome_kind = OutcomeKind::binary;
  e.outcomes << 0, 1, 2, 1;
  const auto report = validate_experiment(e);
  REQUIRE(report.size() == 1);
  CHECK(report[0] == "non-binary outcome");
}

TEST_CASE("NaN covariate reports one violation") {
  Experiment e = linear_experiment("nan", 4, 2);
  e.covariates(1, 1) = std::numeric_limits<double>::quiet_NaN();
  const auto report = validate_experiment(e);
  REQUIRE(report.size() == 1);
  CHECK(report[0] == "non-finite covariate");
}

TEST_CASE("validation is pure") {
  Experiment e = linear_experiment("x", 4, 2);
  e.outcome_kind = OutcomeKind::binary;
  e.covariates(0, 0) = INFINITY;
  const Experiment copy = e;
  CHECK(validate_experiment(e) == validate_experiment(e));
  CHECK(e.covariates == copy.covariates);
  CHECK(e.outcomes == copy.outcomes);
}

TEST_CASE("bank validation catches mixed dimensions and bad sample widths") {
  ModelBank bank = bank_of(3);
  bank.experiments[2] = linear_experiment("e2", 3, 4);
  auto report = validate_bank(bank);
  CHECK(std::any_of(report.begin(), report.end(), [](const std::string& s) { return s.find("dimension") != s.npos; }));

  bank = bank_of(2);
  PosteriorSampleSet post;
  post.experiment_id = "e0";
  post.samples = Eigen::MatrixXd::Zero(5, 2);  // linear needs d + 1 = 3
  bank.posteriors.emplace("e0", post);
  report = validate_bank(bank);
  CHECK(report.size() == 1);
}

TEST_CASE("split of 200 experiments at 0.75 gives 150 + 50") {
  const ModelBank bank = bank_of(200);
  const BankSplit split = split_bank(bank, 0.75, 7);
  CHECK(split.database_ids.size() == 150);
  CHECK(split.query_ids.size() == 50);
}

TEST_CASE("split of 8 experiments gives 6 + 2, disjoint") {
  const ModelBank bank = bank_of(8);
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const BankSplit split = split_bank(bank, 0.75, seed);
    CHECK(split.database_ids.size() == 6);
    CHECK(split.query_ids.size() == 2);
  }
}

TEST_CASE("split is deterministic given the seed") {
  const ModelBank bank = bank_of(40);
  const BankSplit a = split_bank(bank, 0.75, 123);
  const BankSplit b = split_bank(bank, 0.75, 123);
  CHECK(a.database_ids == b.database_ids);
  CHECK(a.query_ids == b.query_ids);
  const BankSplit c = split_bank(bank, 0.75, 124);
  CHECK(c.database_ids != a.database_ids);
}

TEST_CASE("split is a partition for many seeds") {
  const ModelBank bank = bank_of(37);
  const auto all = bank.ids();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const BankSplit split = split_bank(bank, 0.6, seed);
    std::set<std::string> seen(split.database_ids.begin(), split.database_ids.end());
    for (const auto& id : split.query_ids) REQUIRE(seen.insert(id).second);
    REQUIRE(seen == std::set<std::string>(all.begin(), all.end()));
  }
}

TEST_CASE("split rejects tiny banks and bad fractions") {
  CHECK_THROWS_AS(split_bank(bank_of(3), 0.75, 1), DataError);
  CHECK_THROWS_AS(split_bank(bank_of(10), 1.0, 1), UsageError);
  CHECK_THROWS_AS(split_bank(bank_of(10), 0.0, 1), UsageError);
  CHECK_THROWS_AS(split_bank(bank_of(4), 0.99, 1), DataError);
}

TEST_CASE("ranking sort is descending with lexicographic ties") {
  std::vector<RankedItem> items = {{"b", 1.0}, {"a", 1.0}, {"c", 2.0}, {"d", -INFINITY}};
  sort_ranked(items);
  CHECK(items[0].experiment_id == "c");
  CHECK(items[1].experiment_id == "a");
  CHECK(items[2].experiment_id == "b");
  CHECK(items[3].experiment_id == "d");
}

TEST_CASE("weight source round-trips through text") {
  for (const WeightSource s : {WeightSource{WeightSource::Kind::uniform, 0}, WeightSource{WeightSource::Kind::learned, 0},
                               WeightSource{WeightSource::Kind::every_k, 7}})
    CHECK(parse_weight_source(to_string(s)) == s);
  CHECK_THROWS_AS(parse_weight_source("every_k(0)"), DataError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "expret/error.hpp"
#include "expret/evalmetrics.hpp"
#include "expret/rng.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <numeric>

using namespace expret;

namespace {

RankingResult ranking(const std::vector<std::string>& ids, const std::string& query = "q") {
  RankingResult r;
  r.query_id = query;
  double score = 0.0;
  for (const auto& id : ids) r.ranked.push_back({id, score--});
  return r;
}

std::vector<std::string> items(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("i" + std::to_string(i));
  return v;
}

}  // namespace

TEST_CASE("average precision examples") {
  CHECK(average_precision(ranking({"a", "b", "c"}), {"a", "c"}) == doctest::Approx(0.5 * (1.0 + 2.0 / 3.0)));
  CHECK(average_precision(ranking({"a", "b", "c", "d"}), {"a", "b"}) == 1.0);
  CHECK_THROWS_AS(average_precision(ranking({"a"}), {}), DataError);
  CHECK_THROWS_AS(average_precision(ranking({"a"}), {"z"}), DataError);
}

TEST_CASE("average precision matches the definitional oracle") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    auto ids = items(20);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::set<std::string> relevant;
    for (const auto& id : ids)
      if (std::bernoulli_distribution(0.3)(rng)) relevant.insert(id);
    if (relevant.empty()) relevant.insert(ids[7]);
    CHECK(std::abs(average_precision(ranking(ids), relevant) - oracle::average_precision(ids, relevant)) <= 1e-12);
  }
}

TEST_CASE("AP ignores the order of irrelevant items below the last relevant one") {
  Rng rng(2);
  auto ids = items(15);
  const std::set<std::string> relevant = {"i0", "i3", "i6"};
  const double base = average_precision(ranking(ids), relevant);
  for (int t = 0; t < 20; ++t) {
    std::shuffle(ids.begin() + 7, ids.end(), rng);
    CHECK(average_precision(ranking(ids), relevant) == base);
  }
}

TEST_CASE("mean average precision") {
  const LabelMap labels = {{"q1", "A"}, {"q2", "A"}, {"a", "A"}, {"b", "B"}, {"c", "A"}};
  const RankingResult r1 = ranking({"a", "c", "b"}, "q1");  // AP 1
  const RankingResult r2 = ranking({"b", "a", "c"}, "q2");  // AP (1/2)(1/2 + 2/3)
  CHECK(mean_average_precision({r1}, labels) == 1.0);
  const double ap2 = 0.5 * (0.5 + 2.0 / 3.0);
  CHECK(mean_average_precision({r1, r2}, labels) == doctest::Approx(0.5 * (1.0 + ap2)));
  const RankingResult r3 = ranking({"a", "b"}, "q1");
  const RankingResult r4 = ranking({"b", "a"}, "q1");
  CHECK(mean_average_precision({r3, r4}, labels) == doctest::Approx(0.75));

  LabelMap missing = labels;
  missing.erase("q2");
  CHECK_THROWS_AS(mean_average_precision({r2}, missing), DataError);
  CHECK_THROWS(mean_average_precision({}, labels));
}

TEST_CASE("swapping a relevant item upward never lowers MAP") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    auto ids = items(12);
    std::shuffle(ids.begin(), ids.end(), rng);
    LabelMap labels = {{"q", "A"}};
    for (const auto& id : ids) labels[id] = std::bernoulli_distribution(0.4)(rng) ? "A" : "B";
    labels[ids[5]] = "A";
    const double before = mean_average_precision({ranking(ids)}, labels);
    for (std::size_t i = 1; i < ids.size(); ++i) {
      if (labels[ids[i]] == "A" && labels[ids[i - 1]] == "B") {
        auto swapped = ids;
        std::swap(swapped[i], swapped[i - 1]);
        CHECK(mean_average_precision({ranking(swapped)}, labels) >= before);
      }
    }
  }
}

TEST_CASE("spearman rho") {
  const auto ids = items(10);
  auto reversed = ids;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(spearman_rho(ranking(ids), ranking(ids)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman_rho(ranking(ids), ranking(reversed)) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(spearman_rho(ranking({"a", "b"}), ranking({"b", "a"})) == doctest::Approx(-1.0));

  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    auto a = ids, b = ids;
    std::shuffle(a.begin(), a.end(), rng);
    std::shuffle(b.begin(), b.end(), rng);
    const double rho = spearman_rho(ranking(a), ranking(b));
    CHECK(std::abs(rho - oracle::spearman(a, b)) <= 1e-12);
    CHECK(rho == doctest::Approx(spearman_rho(ranking(b), ranking(a))).epsilon(1e-15));
    CHECK(spearman_rho(ranking(a), ranking(a)) == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(spearman_rho(ranking({"a", "b"}), ranking({"a", "c"})), DataError);
}

TEST_CASE("storage fraction") {
  std::map<std::string, WeightVector> w;
  w.emplace("a", WeightVector::uniform("a", 100));
  w.emplace("b", WeightVector::uniform("b", 50));
  CHECK(storage_fraction(w) == 1.0);
  for (auto& [id, v] : w) {
    Eigen::VectorXd k = Eigen::VectorXd::Zero(v.weights.size());
    for (Index i = 0; i < k.size(); i += 10) k[i] = 1.0;
    v.weights = k;
  }
  CHECK(storage_fraction(w) == doctest::Approx(0.1));
  for (auto& [id, v] : w) v.weights.setZero();
  CHECK(storage_fraction(w) == 0.0);
}

TEST_CASE("combined metric") {
  CHECK(combined_metric(0.8, 0.1) == doctest::Approx(0.72));
  CHECK(combined_metric(0.9, 1.0) == 0.0);
  CHECK(combined_metric(1.0, 0.0) == 1.0);
  CHECK(combined_metric(-0.4, 0.2) == 0.0);
  CHECK(combined_metric(0.8, 0.1, SparsityReading::pruned_fraction) == doctest::Approx(0.08));
  CHECK_THROWS_AS(combined_metric(1.5, 0.1), UsageError);
  CHECK_THROWS_AS(combined_metric(0.5, -0.1), UsageError);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const double p = 0.1 * i, f = 0.09 * j;
      CHECK(combined_metric(p + 0.05, f) >= combined_metric(p, f));
      CHECK(combined_metric(p, f + 0.05) <= combined_metric(p, f));
    }
}

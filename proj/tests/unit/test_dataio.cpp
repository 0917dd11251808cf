#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "expret/dataio.hpp"
#include "expret/error.hpp"
#include "expret/pipeline.hpp"
#include "expret/synth.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <json.hpp>

using namespace expret;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("expret_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string snapshot(const fs::path& dir) {
  std::string all;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != ".lock") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) all += f.filename().string() + "\n" + slurp(f) + "\n";
  return all;
}

// Minimal RFC 4180 reader used to check exported tables.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows(1);
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      rows.back().push_back(field);
      field.clear();
    } else if (c == '\n') {
      rows.back().push_back(field);
      field.clear();
      rows.emplace_back();
    } else {
      field += c;
    }
  }
  if (rows.back().empty()) rows.pop_back();
  return rows;
}

ModelBank fitted_bank(std::uint64_t seed, unsigned count) {
  SynthConfig cfg;
  cfg.clusters = 0;
  cfg.total = count;
  cfg.dim = 3;
  SynthBank s = gen_unclustered(cfg, seed);
  SamplerConfig sc;
  sc.n_samples = 20;
  sc.burn_in = 20;
  fit_bank(s.bank, sc, seed);
  return s.bank;
}

}  // namespace

TEST_CASE("landmine-shaped bundle loads with its class split") {
  TempDir dir("bundle_mine");
  const SynthBank mine = gen_landmine_like({}, 1);
  write_bundle(mine.bank, "landmine", dir.path);
  const LoadedBundle b = load_bundle(dir.path);
  CHECK(b.name == "landmine");
  CHECK(b.bank.experiments.size() == 29);
  CHECK(b.bank.dim() == 9);
  int foliated = 0, desert = 0;
  for (const auto& e : b.bank.experiments) {
    CHECK(e.outcome_kind == OutcomeKind::binary);
    foliated += *e.label == "foliated";
    desert += *e.label == "desert";
  }
  CHECK(foliated == 16);
  CHECK(desert == 13);
  for (std::size_t i = 0; i < 29; ++i) {
    CHECK(b.bank.experiments[i].id == mine.bank.experiments[i].id);
    CHECK(b.bank.experiments[i].covariates == mine.bank.experiments[i].covariates);
  }
}

TEST_CASE("computer-shaped bundle drops missing outcomes with a warning") {
  TempDir dir("bundle_comp");
  const SynthBank comp = gen_computer_like(2, 200, 0.05);
  write_bundle(comp.bank, "computer", dir.path);
  const LoadedBundle b = load_bundle(dir.path);
  CHECK(b.bank.experiments.size() == 200);
  CHECK(b.bank.dim() == 13);
  std::size_t missing = 0;
  std::size_t warned = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    const auto& src = comp.bank.experiments[i];
    const auto nan = static_cast<std::size_t>(src.outcomes.array().isNaN().count());
    missing += nan;
    warned += nan > 0;
    CHECK(b.bank.experiments[i].size() == src.size() - static_cast<Index>(nan));
    CHECK_FALSE(b.bank.experiments[i].label.has_value());
  }
  CHECK(missing > 0);
  CHECK(b.warnings.size() == warned);
  CHECK(validate_bank(b.bank).empty());
}

TEST_CASE("bundle defects name the file and line") {
  TempDir dir("bundle_bad");
  spit(dir.path / "manifest.json",
       R"({"name":"t","format_version":1,"outcome_kind":"continuous","d":2,)"
       R"("experiments":[{"id":"a","file":"a.csv","n":3}]})");
  spit(dir.path / "a.csv", "1,2,3\n4,x,6\n7,8,9\n");
  try {
    load_bundle(dir.path);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("a.csv:2") != std::string::npos);
  }
  spit(dir.path / "a.csv", "1,2,3\n4,5\n7,8,9\n");
  CHECK_THROWS_WITH_AS(load_bundle(dir.path), doctest::Contains("a.csv:2: expected 3 fields"), DataError);
  spit(dir.path / "a.csv", "1,2,3\n4,5,6\n");
  CHECK_THROWS_WITH_AS(load_bundle(dir.path), doctest::Contains("declares n=3"), DataError);
  fs::remove(dir.path / "a.csv");
  CHECK_THROWS_WITH_AS(load_bundle(dir.path), doctest::Contains("a.csv: missing"), DataError);
  spit(dir.path / "manifest.json", R"({"name":"t","format_version":9,"outcome_kind":"continuous","d":2,"experiments":[]})");
  CHECK_THROWS_WITH_AS(load_bundle(dir.path), doctest::Contains("version"), DataError);
}

TEST_CASE("bank round trip is lossless and idempotent") {
  TempDir dir("bank_rt");
  ModelBank bank = fitted_bank(3, 12);
  auto learned = every_k_weights(bank, 3);
  for (auto& [id, w] : learned) {
    w.weights *= -0.25;  // arbitrary signed values
    w.weights[1] = 1e-300;
    w.source = {WeightSource::Kind::learned, 0};
  }
  bank.weights = learned;
  bank.experiments[0].label = "lab,el \"x\"";

  save_bank(bank, dir.path / "one");
  const ModelBank back = load_bank(dir.path / "one");
  REQUIRE(back.experiments.size() == bank.experiments.size());
  for (std::size_t i = 0; i < bank.experiments.size(); ++i) {
    const auto& a = bank.experiments[i];
    const auto& b = back.experiments[i];
    CHECK(a.id == b.id);
    CHECK(a.label == b.label);
    CHECK(a.covariates == b.covariates);
    CHECK(a.outcomes == b.outcomes);
    const auto& pa = bank.posterior(a.id);
    const auto& pb = back.posterior(a.id);
    CHECK(pa.samples == pb.samples);
    CHECK(pa.seed == pb.seed);
    CHECK(pa.sampler_config == pb.sampler_config);
    const auto& wa = bank.weights.at(a.id);
    const auto& wb = back.weights.at(a.id);
    CHECK(wa.weights == wb.weights);
    CHECK((wa.weights.array() != 0.0).matrix() == (wb.weights.array() != 0.0).matrix());
    CHECK(wa.source == wb.source);
  }
  save_bank(back, dir.path / "two");
  CHECK(snapshot(dir.path / "one") == snapshot(dir.path / "two"));
}

TEST_CASE("text encoding is bit exact") {
  TempDir dir("bank_text");
  ModelBank bank = fitted_bank(4, 6);
  bank.posteriors.begin()->second.samples(0, 0) = 0.1 + 0.2;
  bank.posteriors.begin()->second.samples(1, 0) = -4.9406564584124654e-324;
  save_bank(bank, dir.path / "t", BankEncoding::text);
  const ModelBank back = load_bank(dir.path / "t");
  for (const auto& [id, p] : bank.posteriors) CHECK(p.samples == back.posterior(id).samples);
}

TEST_CASE("corrupted files are located") {
  TempDir dir("bank_bad");
  const ModelBank bank = fitted_bank(5, 5);
  const fs::path root = dir.path / "b";
  save_bank(bank, root);
  const fs::path victim = root / (file_stem_for(bank.experiments[2].id) + ".samples");
  const std::string bytes = slurp(victim);
  spit(victim, bytes.substr(0, 100));
  CHECK_THROWS_WITH_AS(load_bank(root), doctest::Contains("truncated at byte 100"), DataError);
  std::string flipped = bytes;
  flipped[64] ^= 0x01;
  spit(victim, flipped);
  CHECK_THROWS_WITH_AS(load_bank(root), doctest::Contains(victim.filename().string().c_str()), DataError);

  spit(victim, bytes);
  CHECK_NOTHROW(load_bank(root));
  auto manifest = nlohmann::json::parse(slurp(root / "bank.json"));
  manifest["format_version"] = 99;
  spit(root / "bank.json", manifest.dump());
  CHECK_THROWS_WITH_AS(load_bank(root), doctest::Contains("version"), DataError);
}

TEST_CASE("unsafe ids map to distinct file names") {
  CHECK(file_stem_for("plain_id-1") == "plain_id-1");
  CHECK(file_stem_for("a/b") != file_stem_for("a_b"));
  CHECK(file_stem_for("a/b").find('/') == std::string::npos);
  CHECK(file_stem_for("..").find("..") == std::string::npos);
}

TEST_CASE("report export") {
  TempDir dir("report");
  EvalReport single;
  single.method = "learned";
  single.per_query_ap["q1"] = 0.5;
  export_report({single}, dir.path / "one.csv");
  auto rows = parse_csv(slurp(dir.path / "one.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"query", "method", "K", "lambda", "storage_fraction", "metric", "value"});

  EvalReport r;
  r.method = "every_k";
  r.k_top = 25;
  r.lambda = 1.0;
  r.storage_fraction = 0.1;
  r.per_query_ap = {{"naïve,query", 0.25}, {"quote\"id", 1.0}, {"plain", 0.6}};
  r.map = (0.25 + 1.0 + 0.6) / 3.0;
  r.combined = combined_metric(*r.map, 0.1);
  export_report({r}, dir.path / "r.csv");
  rows = parse_csv(slurp(dir.path / "r.csv"));
  double sum = 0.0, exported_map = -1.0;
  int n = 0;
  std::set<std::string> queries;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 7);
    if (rows[i][5] == "AP") {
      sum += std::stod(rows[i][6]);
      ++n;
      queries.insert(rows[i][0]);
    }
    if (rows[i][5] == "MAP") exported_map = std::stod(rows[i][6]);
  }
  CHECK(queries == std::set<std::string>{"naïve,query", "quote\"id", "plain"});
  CHECK(sum / n == doctest::Approx(exported_map).epsilon(1e-15));
}

TEST_CASE("ranking export") {
  TempDir dir("rank");
  RankingResult r;
  r.query_id = "q,1";
  r.method = RankMethod::ml_uniform;
  r.ranked = {{"a", -1.5}, {"b", -2.0}};
  export_rankings({r}, dir.path / "r.csv");
  const auto rows = parse_csv(slurp(dir.path / "r.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == std::vector<std::string>{"q,1", "ml_uniform", "1", "a", "-1.5"});
}

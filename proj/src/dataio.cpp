#include "expret/dataio.hpp"

#include "expret/error.hpp"

#include <json.hpp>

#include <boost/crc.hpp>

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace expret {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary bank format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'E', 'X', 'P', 'R', 'M', 'A', 'T', '1'};
constexpr std::size_t kHeaderBytes = 8 + 8 + 8;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r") == std::string_view::npos;
}

// --- numeric matrix files ---------------------------------------------------

std::string encode_binary(const Eigen::MatrixXd& m) {
  std::string out(kHeaderBytes + static_cast<std::size_t>(m.size()) * 8 + 4, '\0');
  std::memcpy(out.data(), kMagic, 8);
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  std::memcpy(out.data() + 8, &rows, 8);
  std::memcpy(out.data() + 16, &cols, 8);
  std::size_t pos = kHeaderBytes;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j, pos += 8) {
      const double v = m(i, j);
      std::memcpy(out.data() + pos, &v, 8);
    }
  const std::uint32_t crc = crc32_of(out.substr(0, pos));
  std::memcpy(out.data() + pos, &crc, 4);
  return out;
}

Eigen::MatrixXd decode_binary(const std::string& bytes, const fs::path& path) {
  const std::string where = path.string();
  if (bytes.size() < kHeaderBytes)
    throw DataError(where + ": truncated at byte " + std::to_string(bytes.size()) + " inside the " +
                    std::to_string(kHeaderBytes) + "-byte header");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) throw DataError(where + ": bad magic header at byte 0");
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::memcpy(&rows, bytes.data() + 8, 8);
  std::memcpy(&cols, bytes.data() + 16, 8);
  if (rows > (1ULL << 32) || cols > (1ULL << 20)) throw DataError(where + ": implausible shape in header at byte 8");
  const std::size_t expected = kHeaderBytes + rows * cols * 8 + 4;
  if (bytes.size() < expected)
    throw DataError(where + ": truncated at byte " + std::to_string(bytes.size()) + ", expected " +
                    std::to_string(expected) + " bytes for " + std::to_string(rows) + "x" + std::to_string(cols));
  if (bytes.size() > expected)
    throw DataError(where + ": " + std::to_string(bytes.size() - expected) + " trailing bytes after byte " +
                    std::to_string(expected));
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + expected - 4, 4);
  const std::uint32_t computed = crc32_of(bytes.substr(0, expected - 4));
  if (stored != computed) {
    std::ostringstream msg;
    msg << where << ": CRC mismatch at byte " << (expected - 4) << " (stored " << std::hex << stored << ", computed "
        << computed << ")";
    throw DataError(msg.str());
  }
  Eigen::MatrixXd m(static_cast<Index>(rows), static_cast<Index>(cols));
  std::size_t pos = kHeaderBytes;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j, pos += 8) std::memcpy(&m(i, j), bytes.data() + pos, 8);
  return m;
}

std::string encode_text(const Eigen::MatrixXd& m) {
  std::ostringstream out;
  out << m.rows() << ' ' << m.cols() << '\n';
  char buf[40];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
  return out.str();
}

Eigen::MatrixXd decode_text(const std::string& bytes, const fs::path& path) {
  const std::string where = path.string();
  std::istringstream in(bytes);
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    return true;
  };
  if (!next_line()) throw DataError(where + ":1: missing shape line");
  std::istringstream head(line);
  long long rows = -1;
  long long cols = -1;
  if (!(head >> rows >> cols) || rows < 0 || cols < 0) throw DataError(where + ":1: malformed shape line");
  Eigen::MatrixXd m(rows, cols);
  for (long long i = 0; i < rows; ++i) {
    if (!next_line())
      throw DataError(where + ":" + std::to_string(line_no + 1) + ": truncated, expected " + std::to_string(rows) +
                      " rows, found " + std::to_string(i));
    const auto fields = split_fields(line, ' ');
    if (static_cast<long long>(fields.size()) != cols)
      throw DataError(where + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) + " values");
    for (long long j = 0; j < cols; ++j)
      if (!parse_double(fields[static_cast<std::size_t>(j)], m(i, j)))
        throw DataError(where + ":" + std::to_string(line_no) + ": malformed number");
  }
  while (next_line())
    if (!is_blank(line)) throw DataError(where + ":" + std::to_string(line_no) + ": unexpected trailing data");
  return m;
}

struct StoredMatrix {
  std::string file;
  std::uint32_t crc = 0;
};

StoredMatrix store_matrix(const Eigen::MatrixXd& m, const fs::path& dir, const std::string& file,
                          BankEncoding encoding) {
  const std::string bytes = encoding == BankEncoding::binary ? encode_binary(m) : encode_text(m);
  write_file(dir / file, bytes);
  return {file, crc32_of(bytes)};
}

Eigen::MatrixXd fetch_matrix(const fs::path& dir, const json& entry, BankEncoding encoding) {
  const fs::path path = dir / entry.at("file").get<std::string>();
  const std::string bytes = read_file(path);
  if (encoding == BankEncoding::text) {
    const std::uint32_t computed = crc32_of(bytes);
    const auto stored = entry.at("crc").get<std::uint32_t>();
    if (computed != stored) {
      // Locate the damage for the error message before reporting the CRC.
      decode_text(bytes, path);
      throw DataError(path.string() + ": CRC mismatch (manifest " + std::to_string(stored) + ", file " +
                      std::to_string(computed) + ")");
    }
    return decode_text(bytes, path);
  }
  Eigen::MatrixXd m = decode_binary(bytes, path);
  if (crc32_of(bytes) != entry.at("crc").get<std::uint32_t>())
    throw DataError(path.string() + ": file CRC differs from manifest");
  return m;
}

json sampler_config_json(const SamplerConfig& cfg) {
  json j = {{"n_samples", cfg.n_samples},
            {"burn_in", cfg.burn_in},
            {"thin", cfg.thin},
            {"gamma_shape", cfg.gamma_shape},
            {"gamma_rate", cfg.gamma_rate},
            {"probit_prior_precision", cfg.probit_prior_precision}};
  if (cfg.fixed_weight_precision) j["fixed_weight_precision"] = *cfg.fixed_weight_precision;
  if (cfg.fixed_noise_precision) j["fixed_noise_precision"] = *cfg.fixed_noise_precision;
  return j;
}

SamplerConfig sampler_config_from(const json& j) {
  SamplerConfig cfg;
  cfg.n_samples = j.at("n_samples").get<unsigned>();
  cfg.burn_in = j.at("burn_in").get<unsigned>();
  cfg.thin = j.at("thin").get<unsigned>();
  cfg.gamma_shape = j.at("gamma_shape").get<double>();
  cfg.gamma_rate = j.at("gamma_rate").get<double>();
  cfg.probit_prior_precision = j.at("probit_prior_precision").get<double>();
  if (j.contains("fixed_weight_precision")) cfg.fixed_weight_precision = j.at("fixed_weight_precision").get<double>();
  if (j.contains("fixed_noise_precision")) cfg.fixed_noise_precision = j.at("fixed_noise_precision").get<double>();
  return cfg;
}

// Exclusive advisory lock on <dir>/.lock for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) {
    const std::string path = (dir / ".lock").string();
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw DataError(path + ": cannot create lock file");
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw DataError(path + ": cannot acquire lock");
    }
  }
  ~DirectoryLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace

std::uint32_t crc32_of(const std::string& bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::string file_stem_for(const std::string& id) {
  std::string out;
  for (unsigned char c : id) {
    if (std::isalnum(c) || c == '_' || c == '-' || (c == '.' && !out.empty())) {
      out.push_back(static_cast<char>(c));
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    }
  }
  return out;
}

LoadedBundle load_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }

  LoadedBundle out;
  BundleManifest meta;
  try {
    meta.format_version = manifest.at("format_version").get<unsigned>();
    meta.name = manifest.value("name", dir.filename().string());
    meta.outcome_kind = parse_outcome_kind(manifest.at("outcome_kind").get<std::string>());
    meta.dim = manifest.at("d").get<unsigned>();
    for (const auto& e : manifest.at("experiments")) {
      BundleEntry entry;
      entry.id = e.at("id").get<std::string>();
      if (e.contains("label") && !e.at("label").is_null()) entry.label = e.at("label").get<std::string>();
      entry.file = e.at("file").get<std::string>();
      entry.n = e.at("n").get<std::size_t>();
      meta.experiments.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  if (meta.format_version != kBundleFormatVersion)
    throw DataError(manifest_path.string() + ": unsupported bundle format version " +
                    std::to_string(meta.format_version));
  if (meta.dim < 1) throw DataError(manifest_path.string() + ": d must be >= 1");
  out.name = meta.name;

  std::set<std::string> seen;
  for (std::size_t idx = 0; idx < meta.experiments.size(); ++idx) {
    const BundleEntry& entry = meta.experiments[idx];
    if (!seen.insert(entry.id).second)
      throw DataError(manifest_path.string() + ": experiment " + std::to_string(idx) + ": duplicate id '" + entry.id + "'");
    const fs::path file = dir / entry.file;
    if (!fs::exists(file)) throw DataError(file.string() + ": missing (experiment '" + entry.id + "')");
    std::ifstream in(file);
    if (!in) throw DataError(file.string() + ": cannot open");

    std::vector<std::vector<double>> rows;
    std::vector<double> ys;
    std::size_t line_no = 0;
    std::size_t data_rows = 0;
    std::size_t dropped = 0;
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (is_blank(line)) continue;
      ++data_rows;
      const auto fields = split_fields(line, ',');
      const std::string where = file.string() + ":" + std::to_string(line_no);
      if (fields.size() != meta.dim + 1)
        throw DataError(where + ": expected " + std::to_string(meta.dim + 1) + " fields, found " +
                        std::to_string(fields.size()));
      std::vector<double> x(meta.dim);
      for (unsigned j = 0; j < meta.dim; ++j)
        if (!parse_double(fields[j], x[j]) || !std::isfinite(x[j]))
          throw DataError(where + ": malformed covariate in field " + std::to_string(j + 1));
      if (is_blank(fields[meta.dim])) {
        ++dropped;
        continue;
      }
      double y = 0.0;
      if (!parse_double(fields[meta.dim], y) || !std::isfinite(y)) throw DataError(where + ": malformed outcome");
      rows.push_back(std::move(x));
      ys.push_back(y);
    }
    if (data_rows != entry.n)
      throw DataError(file.string() + ": manifest declares n=" + std::to_string(entry.n) + ", file has " +
                      std::to_string(data_rows) + " rows");
    if (dropped > 0)
      out.warnings.push_back(file.string() + ": dropped " + std::to_string(dropped) + " row(s) with missing outcome");

    Experiment exp;
    exp.id = entry.id;
    exp.label = entry.label;
    exp.outcome_kind = meta.outcome_kind;
    exp.covariates.resize(static_cast<Index>(rows.size()), meta.dim);
    exp.outcomes.resize(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (unsigned j = 0; j < meta.dim; ++j) exp.covariates(static_cast<Index>(i), j) = rows[i][j];
      exp.outcomes[static_cast<Index>(i)] = ys[i];
    }
    const auto report = validate_experiment(exp);
    if (!report.empty()) throw DataError(file.string() + ": experiment '" + entry.id + "': " + report.front());
    out.bank.experiments.push_back(std::move(exp));
  }
  return out;
}

void write_bundle(const ModelBank& bank, const std::string& name, const fs::path& dir) {
  if (bank.experiments.empty()) throw DataError("cannot write an empty bundle");
  fs::create_directories(dir);
  json manifest = {{"name", name},
                   {"format_version", kBundleFormatVersion},
                   {"outcome_kind", to_string(bank.experiments.front().outcome_kind)},
                   {"d", bank.dim()}};
  json entries = json::array();
  char buf[40];
  for (const auto& exp : bank.experiments) {
    const std::string file = file_stem_for(exp.id) + ".csv";
    std::string body;
    for (Index i = 0; i < exp.size(); ++i) {
      for (Index j = 0; j < exp.dim(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", exp.covariates(i, j));
        body += buf;
        body += ',';
      }
      if (std::isfinite(exp.outcomes[i])) {
        std::snprintf(buf, sizeof buf, "%.17g", exp.outcomes[i]);
        body += buf;
      }
      body += '\n';
    }
    write_file(dir / file, body);
    json e = {{"id", exp.id}, {"file", file}, {"n", exp.size()}};
    e["label"] = exp.label ? json(*exp.label) : json(nullptr);
    entries.push_back(std::move(e));
  }
  manifest["experiments"] = std::move(entries);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

void save_bank(const ModelBank& bank, const fs::path& dir, BankEncoding encoding) {
  const auto report = validate_bank(bank);
  if (!report.empty()) throw DataError("refusing to save invalid bank: " + report.front());
  fs::create_directories(dir);
  DirectoryLock lock(dir);

  json manifest = {{"format_version", kBankFormatVersion},
                   {"encoding", encoding == BankEncoding::binary ? "binary" : "text"},
                   {"d", bank.dim()}};
  json entries = json::array();
  for (const auto& exp : bank.experiments) {
    const std::string stem = file_stem_for(exp.id);
    Eigen::MatrixXd data(exp.size(), exp.dim() + 1);
    data.leftCols(exp.dim()) = exp.covariates;
    data.col(exp.dim()) = exp.outcomes;
    const StoredMatrix stored = store_matrix(data, dir, stem + ".data", encoding);
    json e = {{"id", exp.id},
              {"outcome_kind", to_string(exp.outcome_kind)},
              {"data", {{"file", stored.file}, {"crc", stored.crc}}}};
    e["label"] = exp.label ? json(*exp.label) : json(nullptr);

    if (auto it = bank.posteriors.find(exp.id); it != bank.posteriors.end()) {
      const PosteriorSampleSet& post = it->second;
      const StoredMatrix s = store_matrix(post.samples, dir, stem + ".samples", encoding);
      e["posterior"] = {{"file", s.file},
                        {"crc", s.crc},
                        {"model_kind", to_string(post.model_kind)},
                        {"seed", post.seed},
                        {"sampler_config", sampler_config_json(post.sampler_config)}};
    } else {
      e["posterior"] = nullptr;
    }
    if (auto it = bank.weights.find(exp.id); it != bank.weights.end()) {
      const StoredMatrix s = store_matrix(Eigen::MatrixXd(it->second.weights), dir, stem + ".weights", encoding);
      e["weights"] = {{"file", s.file}, {"crc", s.crc}, {"source", to_string(it->second.source)}};
    } else {
      e["weights"] = nullptr;
    }
    entries.push_back(std::move(e));
  }
  manifest["experiments"] = std::move(entries);
  write_file(dir / "bank.json", manifest.dump(2) + "\n");
}

ModelBank load_bank(const fs::path& dir) {
  const fs::path manifest_path = dir / "bank.json";
  ModelBank bank;
  try {
    const json manifest = json::parse(read_file(manifest_path));
    const auto version = manifest.at("format_version").get<unsigned>();
    if (version != kBankFormatVersion)
      throw DataError(manifest_path.string() + ": unsupported bank format version " + std::to_string(version));
    const std::string enc = manifest.at("encoding").get<std::string>();
    if (enc != "binary" && enc != "text") throw DataError(manifest_path.string() + ": unknown encoding '" + enc + "'");
    const BankEncoding encoding = enc == "binary" ? BankEncoding::binary : BankEncoding::text;
    const auto d = manifest.at("d").get<Index>();

    for (const auto& e : manifest.at("experiments")) {
      Experiment exp;
      exp.id = e.at("id").get<std::string>();
      exp.outcome_kind = parse_outcome_kind(e.at("outcome_kind").get<std::string>());
      if (!e.at("label").is_null()) exp.label = e.at("label").get<std::string>();
      const Eigen::MatrixXd data = fetch_matrix(dir, e.at("data"), encoding);
      if (data.cols() != d + 1)
        throw DataError((dir / e.at("data").at("file").get<std::string>()).string() + ": expected " +
                        std::to_string(d + 1) + " columns");
      exp.covariates = data.leftCols(d);
      exp.outcomes = data.col(d);

      if (!e.at("posterior").is_null()) {
        const json& p = e.at("posterior");
        PosteriorSampleSet post;
        post.experiment_id = exp.id;
        post.model_kind = parse_model_kind(p.at("model_kind").get<std::string>());
        post.seed = p.at("seed").get<std::uint64_t>();
        post.sampler_config = sampler_config_from(p.at("sampler_config"));
        post.samples = fetch_matrix(dir, p, encoding);
        bank.posteriors.emplace(exp.id, std::move(post));
      }
      if (!e.at("weights").is_null()) {
        const json& w = e.at("weights");
        const Eigen::MatrixXd m = fetch_matrix(dir, w, encoding);
        if (m.cols() != 1 && m.rows() > 0)
          throw DataError((dir / w.at("file").get<std::string>()).string() + ": weights must be a single column");
        WeightVector wv;
        wv.experiment_id = exp.id;
        wv.weights = m.col(0);
        wv.source = parse_weight_source(w.at("source").get<std::string>());
        bank.weights.emplace(exp.id, std::move(wv));
      }
      bank.experiments.push_back(std::move(exp));
    }
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  const auto report = validate_bank(bank);
  if (!report.empty()) throw DataError(manifest_path.string() + ": " + report.front());
  return bank;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void export_report(const std::vector<EvalReport>& reports, const fs::path& path) {
  std::ostringstream out;
  out << "query,method,K,lambda,storage_fraction,metric,value\n";
  for (const auto& r : reports) {
    const std::string ctx = csv_field(r.method) + "," + std::to_string(r.k_top) + "," + fmt_double(r.lambda) + "," +
                            fmt_double(r.storage_fraction) + ",";
    auto row = [&](const std::string& query, const char* metric, double value) {
      out << csv_field(query) << ',' << ctx << metric << ',' << fmt_double(value) << '\n';
    };
    for (const auto& [q, ap] : r.per_query_ap) row(q, "AP", ap);
    for (const auto& [q, rho] : r.per_query_spearman) row(q, "spearman", rho);
    if (r.map) row("*", "MAP", *r.map);
    if (r.spearman) row("*", "spearman", *r.spearman);
    if (r.combined) row("*", "combined", *r.combined);
  }
  write_file(path, out.str());
}

void export_rankings(const std::vector<RankingResult>& rankings, const fs::path& path) {
  std::ostringstream out;
  out << "query,method,rank,experiment,score\n";
  for (const auto& r : rankings)
    for (std::size_t i = 0; i < r.ranked.size(); ++i)
      out << csv_field(r.query_id) << ',' << to_string(r.method) << ',' << (i + 1) << ','
          << csv_field(r.ranked[i].experiment_id) << ',' << fmt_double(r.ranked[i].score) << '\n';
  write_file(path, out.str());
}

}  // namespace expret

#pragma once

// Dataset bundles, model-bank persistence and result tables.

#include "expret/core.hpp"
#include "expret/evalmetrics.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace expret {

inline constexpr unsigned kBundleFormatVersion = 1;
inline constexpr unsigned kBankFormatVersion = 1;

struct BundleEntry {
  std::string id;
  std::optional<std::string> label;
  std::string file;
  std::size_t n = 0;  // data rows in the file, missing outcomes included
};

struct BundleManifest {
  std::string name;
  OutcomeKind outcome_kind = OutcomeKind::continuous;
  unsigned dim = 0;
  std::vector<BundleEntry> experiments;
  unsigned format_version = kBundleFormatVersion;
};

struct LoadedBundle {
  std::string name;
  ModelBank bank;
  std::vector<std::string> warnings;
};

/// Reads `manifest.json` and one `x1,...,xd,y` file per experiment. Rows
/// with an empty outcome are dropped with a warning; all other defects are
/// DataErrors naming the file and line.
LoadedBundle load_bundle(const std::filesystem::path& dir);

/// Writes experiments as a bundle; NaN outcomes become empty fields.
void write_bundle(const ModelBank& bank, const std::string& name, const std::filesystem::path& dir);

enum class BankEncoding { binary, text };

/// Persists experiments, posterior samples and weights under `dir`
/// (`bank.json` plus `<id>.data`, `<id>.samples`, `<id>.weights`). Binary
/// files are little-endian float64 with a magic header, shape and CRC-32;
/// text files carry 17 significant digits. Holds an exclusive lock on the
/// directory while writing.
void save_bank(const ModelBank& bank, const std::filesystem::path& dir, BankEncoding encoding = BankEncoding::binary);
ModelBank load_bank(const std::filesystem::path& dir);

/// File name used for an experiment id (unsafe characters are %-escaped).
std::string file_stem_for(const std::string& id);

std::uint32_t crc32_of(const std::string& bytes);

/// Quotes a field for comma-separated output when needed.
std::string csv_field(const std::string& value);

/// Flat table, header `query,method,K,lambda,storage_fraction,metric,value`.
/// Per-query rows (AP, spearman) come first; aggregate rows use query `*`.
void export_report(const std::vector<EvalReport>& reports, const std::filesystem::path& path);

/// One row per (query, method, rank, experiment, score).
void export_rankings(const std::vector<RankingResult>& rankings, const std::filesystem::path& path);

}  // namespace expret

#pragma once

// Learning sparse per-sample weights that preserve marginal-likelihood
// rankings: ground-truth scores, top-K triplets, the triplet design matrix and
// an L1-regularised logistic solver.

#include "expret/core.hpp"
#include "expret/likelihood.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace expret {

/// Full-sample log marginal likelihoods: entry (q, d) scores candidate d for
/// query q. The diagonal is undefined and holds NaN.
struct ScoreTable {
  std::vector<std::string> ids;
  Eigen::MatrixXd log_ml;

  Index size() const { return static_cast<Index>(ids.size()); }
  bool defined(Index q, Index d) const { return q != d; }
  Index index_of(const std::string& id) const;
};

/// Log-likelihood vectors ll[q][d] = log p(E_q | theta_{d,k}) for every
/// ordered pair of distinct experiments in `ids`.
struct PairLogLiks {
  std::vector<std::string> ids;
  std::vector<LogLikTable> tables;  // one per query, same order as ids

  const Eigen::VectorXd& at(Index q, Index d) const;
};

PairLogLiks compute_pair_logliks(const ModelBank& bank, const std::vector<std::string>& ids);

ScoreTable ground_truth_scores(const PairLogLiks& logliks);
ScoreTable ground_truth_scores(const ModelBank& bank, const std::vector<std::string>& database_ids);

/// Rank constraint "i1 should outrank i2 for query q"; indices refer to the
/// ScoreTable ids. Labels are 0/1.
struct Triplet {
  std::uint32_t q = 0;
  std::uint32_t i1 = 0;
  std::uint32_t i2 = 0;
  int label = 0;
  bool sign_flipped = false;
};

/// Top-K candidate indices of row q, best first, ties by id.
std::vector<Index> top_k(const ScoreTable& scores, Index q, unsigned k);

/// For every query q, pairs each of its top-K candidates i1 with every other
/// candidate i2 (i2 != q, i2 != i1). Yields K * D * (D - 2) triplets.
std::vector<Triplet> build_triplets(const ScoreTable& scores, unsigned k);
/// Per-query K, indexed like scores.ids.
std::vector<Triplet> build_triplets(const ScoreTable& scores, const std::vector<unsigned>& k_per_query);

struct DesignEntry {
  Index col = 0;
  double value = 0.0;
};

struct ColumnBlock {
  std::string experiment_id;
  Index start = 0;
  Index size = 0;
};

/// The L x m triplet design. Row l = (q, i1, i2) carries +p(E_q | theta_{i1,k})
/// in i1's columns and -p(E_q | theta_{i2,k}) in i2's columns, scaled so the
/// largest magnitude in the row is 1, then sign-flipped with probability 1/2.
///
/// Storage is factored: each row keeps two scale factors and references the
/// shared normalised likelihood vector of its (query, candidate) pairs, so
/// memory grows with D^2 * m_d rather than L * (m_i1 + m_i2).
class SparseDesign {
 public:
  static SparseDesign assemble(const ModelBank& bank, const PairLogLiks& logliks, std::vector<Triplet> triplets,
                               std::uint64_t seed);

  Index rows() const { return static_cast<Index>(rows_.size()); }
  Index cols() const { return n_cols_; }
  int label(Index l) const { return triplets_[static_cast<std::size_t>(l)].label; }
  const Triplet& triplet(Index l) const { return triplets_[static_cast<std::size_t>(l)]; }
  const std::vector<Triplet>& triplets() const { return triplets_; }
  const std::vector<ColumnBlock>& column_blocks() const { return blocks_; }
  const std::vector<std::string>& experiment_ids() const { return ids_; }

  /// Structural nonzeros of row l (m_i1 + m_i2 entries), ascending column.
  std::vector<DesignEntry> row_entries(Index l) const;
  Index row_nonzeros(Index l) const;

  /// Negates row l and its label. Applying twice restores the row.
  void flip_row(Index l);

  template <class F>
  void for_each_in_column(Index j, F&& f) const {
    const auto e = col_experiment_[static_cast<std::size_t>(j)];
    const Index k = j - blocks_[e].start;
    for (const auto& ref : column_refs_[e]) {
      const RowFactor& row = rows_[ref.row];
      const double coef = ref.first ? row.sign * row.scale1 : -row.sign * row.scale2;
      f(static_cast<Index>(ref.row), coef * ref.normalized[k]);
    }
  }

 private:
  struct RowFactor {
    double sign = 1.0;
    double scale1 = 0.0;  // exp(max ll of i1 - row max)
    double scale2 = 0.0;
  };
  struct ColumnRef {
    std::uint32_t row = 0;
    bool first = true;  // i1 side of the row
    const double* normalized = nullptr;
  };

  const double* normalized(std::uint32_t q, std::uint32_t d) const;

  std::vector<std::string> ids_;
  std::vector<ColumnBlock> blocks_;
  std::vector<std::size_t> col_experiment_;
  Index n_cols_ = 0;
  std::vector<Triplet> triplets_;
  std::vector<RowFactor> rows_;
  // exp(ll - max ll) for each (query, candidate) pair, indexed q * D + d.
  std::vector<std::vector<double>> normalized_;
  std::vector<std::vector<ColumnRef>> column_refs_;
};

/// Column-compressed explicit design, for small problems and tests.
class CscDesign {
 public:
  static CscDesign from_dense(const Eigen::MatrixXd& x, const std::vector<int>& labels);

  Index rows() const { return n_rows_; }
  Index cols() const { return static_cast<Index>(col_start_.size()) - 1; }
  int label(Index l) const { return labels_[static_cast<std::size_t>(l)]; }
  const std::vector<ColumnBlock>& column_blocks() const { return blocks_; }

  template <class F>
  void for_each_in_column(Index j, F&& f) const {
    for (std::size_t p = col_start_[static_cast<std::size_t>(j)]; p < col_start_[static_cast<std::size_t>(j) + 1]; ++p)
      f(static_cast<Index>(row_index_[p]), values_[p]);
  }

 private:
  Index n_rows_ = 0;
  std::vector<std::size_t> col_start_{0};
  std::vector<std::uint32_t> row_index_;
  std::vector<double> values_;
  std::vector<int> labels_;
  std::vector<ColumnBlock> blocks_;
};

struct SolverOptions {
  double lambda = 1.0;
  unsigned max_sweeps = 10000;
  double update_tolerance = 1e-8;
  /// Stationarity tolerance used by the stopping rule; tighter than the
  /// reported invariant so the returned point satisfies it.
  double kkt_tolerance = 1e-7;
  /// Throw NumericalError (carrying the final gap) instead of returning an
  /// unconverged result.
  bool throw_on_nonconvergence = true;
};

struct SolverResult {
  Eigen::VectorXd weights;
  std::vector<double> objective_trace;
  unsigned iterations = 0;
  bool converged = false;
  double final_max_update = 0.0;
  double final_kkt_violation = 0.0;
  std::map<std::string, Index> nonzeros_per_experiment;
  Index negative_weights = 0;
  std::vector<ColumnBlock> column_blocks;
};

/// Minimises sum_l log(1 + exp(-y_l X_l w)) + lambda |w|_1 with y in {-1, +1}
/// and no intercept, by cyclic coordinate descent (Newton step on each
/// coordinate, soft-thresholded, with backtracking).
SolverResult solve_l1_logistic(const SparseDesign& design, const SolverOptions& options = {});
SolverResult solve_l1_logistic(const CscDesign& design, const SolverOptions& options = {});

/// Logistic-loss gradient at w (no penalty).
Eigen::VectorXd logistic_gradient(const SparseDesign& design, const Eigen::VectorXd& w);
Eigen::VectorXd logistic_gradient(const CscDesign& design, const Eigen::VectorXd& w);

/// Largest absolute breach of the L1 optimality conditions: |g_j + lambda
/// sign(w_j)| for nonzero w_j, max(0, |g_j| - lambda) for zero w_j.
double kkt_violation(const Eigen::VectorXd& gradient, const Eigen::VectorXd& w, double lambda);

/// The stationarity check with its stated tolerances:
///   |g_j + lambda sign(w_j)| <= 1e-6 (1 + |g_j|)   (w_j != 0)
///   |g_j| <= lambda + 1e-6                         (w_j == 0)
bool satisfies_kkt(const Eigen::VectorXd& gradient, const Eigen::VectorXd& w, double lambda);

/// Objective value of the L1 logistic program.
double l1_logistic_objective(const CscDesign& design, const Eigen::VectorXd& w, double lambda);

struct ExtractedWeights {
  std::map<std::string, WeightVector> weights;
  std::map<std::string, Index> nonzeros;
  std::vector<std::string> all_zero;
  Index negative_weights = 0;
};

/// Slices the combined solution per experiment (source = learned).
ExtractedWeights extract_weights(const SolverResult& result, const ModelBank& bank);

/// Writes `L m` then `row col value` lines, and labels one per line.
void write_design_text(const SparseDesign& design, const std::filesystem::path& matrix_path,
                       const std::filesystem::path& labels_path);

}  // namespace expret

#include "expret/ranklearn.hpp"

#include "expret/error.hpp"
#include "expret/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace expret {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(1 + exp(-z))
double logistic_loss(double z) { return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); }

// 1 / (1 + exp(z))
double sigmoid_neg(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

}  // namespace

Index ScoreTable::index_of(const std::string& id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw DataError("experiment '" + id + "' not in score table");
  return static_cast<Index>(it - ids.begin());
}

const Eigen::VectorXd& PairLogLiks::at(Index q, Index d) const {
  const auto& table = tables.at(static_cast<std::size_t>(q));
  auto it = table.logliks.find(ids.at(static_cast<std::size_t>(d)));
  if (it == table.logliks.end())
    throw DataError("missing log-likelihood table for query '" + table.query_id + "', candidate '" +
                    ids[static_cast<std::size_t>(d)] + "'");
  return it->second;
}

PairLogLiks compute_pair_logliks(const ModelBank& bank, const std::vector<std::string>& ids) {
  PairLogLiks out;
  out.ids = ids;
  out.tables.reserve(ids.size());
  for (const auto& q : ids) out.tables.push_back(build_loglik_table(bank, bank.experiment(q), ids));
  return out;
}

ScoreTable ground_truth_scores(const PairLogLiks& logliks) {
  ScoreTable table;
  table.ids = logliks.ids;
  const Index n = table.size();
  table.log_ml = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  for (Index q = 0; q < n; ++q)
    for (Index d = 0; d < n; ++d)
      if (q != d) table.log_ml(q, d) = ml_uniform_from_logliks(logliks.at(q, d));
  return table;
}

ScoreTable ground_truth_scores(const ModelBank& bank, const std::vector<std::string>& database_ids) {
  return ground_truth_scores(compute_pair_logliks(bank, database_ids));
}

std::vector<Index> top_k(const ScoreTable& scores, Index q, unsigned k) {
  std::vector<Index> candidates;
  for (Index d = 0; d < scores.size(); ++d)
    if (d != q) candidates.push_back(d);
  const std::size_t keep = std::min<std::size_t>(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                    [&](Index a, Index b) {
                      const double sa = scores.log_ml(q, a);
                      const double sb = scores.log_ml(q, b);
                      if (sa != sb) return sa > sb;
                      return scores.ids[static_cast<std::size_t>(a)] < scores.ids[static_cast<std::size_t>(b)];
                    });
  candidates.resize(keep);
  return candidates;
}

std::vector<Triplet> build_triplets(const ScoreTable& scores, const std::vector<unsigned>& k_per_query) {
  const Index n = scores.size();
  if (static_cast<Index>(k_per_query.size()) != n) throw UsageError("per-query K list must match the database size");
  if (n < 3) throw UsageError("need at least 3 experiments to form triplets");
  std::vector<Triplet> out;
  for (Index q = 0; q < n; ++q) {
    const unsigned k = k_per_query[static_cast<std::size_t>(q)];
    if (k < 1 || static_cast<Index>(k) > n - 2)
      throw UsageError("K=" + std::to_string(k) + " out of range [1, " + std::to_string(n - 2) + "]");
    for (Index i1 : top_k(scores, q, k)) {
      for (Index i2 = 0; i2 < n; ++i2) {
        if (i2 == q || i2 == i1) continue;
        Triplet t;
        t.q = static_cast<std::uint32_t>(q);
        t.i1 = static_cast<std::uint32_t>(i1);
        t.i2 = static_cast<std::uint32_t>(i2);
        t.label = scores.log_ml(q, i1) > scores.log_ml(q, i2) ? 1 : 0;
        out.push_back(t);
      }
    }
  }
  return out;
}

std::vector<Triplet> build_triplets(const ScoreTable& scores, unsigned k) {
  return build_triplets(scores, std::vector<unsigned>(static_cast<std::size_t>(scores.size()), k));
}

const double* SparseDesign::normalized(std::uint32_t q, std::uint32_t d) const {
  const auto& v = normalized_[static_cast<std::size_t>(q) * ids_.size() + d];
  if (v.empty()) throw DataError("missing normalised likelihoods for pair (" + ids_[q] + ", " + ids_[d] + ")");
  return v.data();
}

SparseDesign SparseDesign::assemble(const ModelBank& bank, const PairLogLiks& logliks, std::vector<Triplet> triplets,
                                    std::uint64_t seed) {
  SparseDesign design;
  design.ids_ = logliks.ids;
  const std::size_t n = design.ids_.size();

  for (std::size_t e = 0; e < n; ++e) {
    const Index m = bank.posterior(design.ids_[e]).size();
    design.blocks_.push_back({design.ids_[e], design.n_cols_, m});
    design.n_cols_ += m;
    design.col_experiment_.insert(design.col_experiment_.end(), static_cast<std::size_t>(m), e);
  }

  // Normalised likelihood vectors for every pair that a triplet touches.
  design.normalized_.assign(n * n, {});
  std::vector<double> pair_max(n * n, kNegInf);
  auto ensure_pair = [&](std::uint32_t q, std::uint32_t d) {
    const std::size_t key = static_cast<std::size_t>(q) * n + d;
    if (!design.normalized_[key].empty()) return;
    const Eigen::VectorXd& ll = logliks.at(q, d);
    if (ll.size() != design.blocks_[d].size)
      throw DataError("log-likelihood table for '" + design.ids_[d] + "' does not match its sample count");
    const double mx = ll.maxCoeff();
    pair_max[key] = mx;
    auto& v = design.normalized_[key];
    v.resize(static_cast<std::size_t>(ll.size()));
    for (Index k = 0; k < ll.size(); ++k) v[static_cast<std::size_t>(k)] = mx == kNegInf ? 0.0 : std::exp(ll[k] - mx);
  };

  design.rows_.resize(triplets.size());
  design.column_refs_.assign(n, {});
  for (std::size_t l = 0; l < triplets.size(); ++l) {
    Triplet& t = triplets[l];
    if (t.q >= n || t.i1 >= n || t.i2 >= n || t.q == t.i1 || t.q == t.i2 || t.i1 == t.i2)
      throw DataError("malformed triplet at row " + std::to_string(l));
    ensure_pair(t.q, t.i1);
    ensure_pair(t.q, t.i2);
    const double m1 = pair_max[static_cast<std::size_t>(t.q) * n + t.i1];
    const double m2 = pair_max[static_cast<std::size_t>(t.q) * n + t.i2];
    const double row_max = std::max(m1, m2);
    RowFactor& row = design.rows_[l];
    row.scale1 = row_max == kNegInf ? 0.0 : std::exp(m1 - row_max);
    row.scale2 = row_max == kNegInf ? 0.0 : std::exp(m2 - row_max);
    row.sign = 1.0;
    t.sign_flipped = false;
    // Independent per-row coin so rows can be assembled in any order.
    if (splitmix64(derive_seed(seed, static_cast<std::uint64_t>(l))) & 1ULL) {
      row.sign = -1.0;
      t.label = 1 - t.label;
      t.sign_flipped = true;
    }
    const auto row_id = static_cast<std::uint32_t>(l);
    design.column_refs_[t.i1].push_back({row_id, true, design.normalized(t.q, t.i1)});
    design.column_refs_[t.i2].push_back({row_id, false, design.normalized(t.q, t.i2)});
  }
  design.triplets_ = std::move(triplets);
  return design;
}

std::vector<DesignEntry> SparseDesign::row_entries(Index l) const {
  const Triplet& t = triplet(l);
  const RowFactor& row = rows_[static_cast<std::size_t>(l)];
  std::vector<DesignEntry> out;
  auto emit = [&](std::uint32_t d, double coef) {
    const double* u = normalized(t.q, d);
    const ColumnBlock& block = blocks_[d];
    for (Index k = 0; k < block.size; ++k) out.push_back({block.start + k, coef * u[k]});
  };
  emit(t.i1, row.sign * row.scale1);
  emit(t.i2, -row.sign * row.scale2);
  std::sort(out.begin(), out.end(), [](const DesignEntry& a, const DesignEntry& b) { return a.col < b.col; });
  return out;
}

Index SparseDesign::row_nonzeros(Index l) const {
  const Triplet& t = triplet(l);
  return blocks_[t.i1].size + blocks_[t.i2].size;
}

void SparseDesign::flip_row(Index l) {
  auto& row = rows_[static_cast<std::size_t>(l)];
  auto& t = triplets_[static_cast<std::size_t>(l)];
  row.sign = -row.sign;
  t.label = 1 - t.label;
  t.sign_flipped = !t.sign_flipped;
}

CscDesign CscDesign::from_dense(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != x.rows()) throw UsageError("label count must equal row count");
  CscDesign design;
  design.n_rows_ = x.rows();
  design.labels_ = labels;
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index l = 0; l < x.rows(); ++l) {
      if (x(l, j) != 0.0) {
        design.row_index_.push_back(static_cast<std::uint32_t>(l));
        design.values_.push_back(x(l, j));
      }
    }
    design.col_start_.push_back(design.values_.size());
  }
  return design;
}

namespace {

template <class Design>
Eigen::VectorXd margins(const Design& x, const Eigen::VectorXd& w) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(x.rows());
  for (Index j = 0; j < x.cols(); ++j) {
    if (w[j] == 0.0) continue;
    x.for_each_in_column(j, [&](Index l, double v) { r[l] += v * w[j]; });
  }
  return r;
}

template <class Design>
Eigen::VectorXd gradient_impl(const Design& x, const Eigen::VectorXd& w) {
  if (w.size() != x.cols()) throw UsageError("weight length differs from design columns");
  const Eigen::VectorXd r = margins(x, w);
  Eigen::VectorXd coef(x.rows());
  for (Index l = 0; l < x.rows(); ++l) {
    const double y = x.label(l) == 1 ? 1.0 : -1.0;
    coef[l] = -y * sigmoid_neg(y * r[l]);
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    double acc = 0.0;
    x.for_each_in_column(j, [&](Index l, double v) { acc += coef[l] * v; });
    g[j] = acc;
  }
  return g;
}

double violation_at(double g, double w, double lambda) {
  if (w > 0.0) return std::abs(g + lambda);
  if (w < 0.0) return std::abs(g - lambda);
  return std::max(0.0, std::abs(g) - lambda);
}

// Proximal Newton: each outer iteration minimises a quadratic model of the
// loss plus the L1 term by cyclic coordinate descent over a working set, then
// line-searches along the resulting direction.
template <class Design>
SolverResult solve_impl(const Design& x, const SolverOptions& opt) {
  if (x.rows() == 0 || x.cols() == 0) throw UsageError("design matrix is empty");
  if (!(opt.lambda > 0.0)) throw UsageError("lambda must be positive");

  const auto n_rows = static_cast<std::size_t>(x.rows());
  const Index n_cols = x.cols();
  const double lambda = opt.lambda;
  constexpr double kArmijo = 0.01;
  constexpr int kMaxHalvings = 40;
  constexpr unsigned kMaxInnerPasses = 1000;
  constexpr unsigned kMaxCgSteps = 500;
  constexpr double kCurvatureFloor = 1e-12;

  std::vector<double> sign(n_rows);
  for (std::size_t l = 0; l < n_rows; ++l) sign[l] = x.label(static_cast<Index>(l)) == 1 ? 1.0 : -1.0;
  // Visits (row, y_l * x_lj) for the structural nonzeros of column j.
  auto column = [&](Index j, auto&& f) {
    x.for_each_in_column(j, [&](Index l, double v) { f(static_cast<std::size_t>(l), sign[static_cast<std::size_t>(l)] * v); });
  };
  std::vector<char> empty(static_cast<std::size_t>(n_cols), 1);
  for (Index j = 0; j < n_cols; ++j) column(j, [&](std::size_t, double v) { empty[static_cast<std::size_t>(j)] &= v == 0.0; });

  Eigen::VectorXd w = Eigen::VectorXd::Zero(n_cols);
  std::vector<double> margin(n_rows, 0.0);  // y_l * X_l w
  std::vector<double> s(n_rows), curv(n_rows), xd(n_rows), trial(n_rows);
  Eigen::VectorXd g(n_cols), d(n_cols), h(n_cols);
  std::vector<Index> working, support;
  std::vector<double> u(n_rows), xd_cd(n_rows);
  Eigen::VectorXd d_cd(n_cols);

  auto loss_of = [&](const std::vector<double>& m) {
    double total = 0.0;
    for (double z : m) total += logistic_loss(z);
    return total;
  };
  double objective = loss_of(margin);

  SolverResult result;
  result.column_blocks = x.column_blocks();
  double violation = std::numeric_limits<double>::infinity();
  double max_update = 0.0;
  double inner_tol = std::numeric_limits<double>::infinity();

  while (true) {
    for (std::size_t l = 0; l < n_rows; ++l) {
      s[l] = sigmoid_neg(margin[l]);
      curv[l] = s[l] * (1.0 - s[l]);
    }
    double prev_violation = violation;
    violation = 0.0;
    for (Index j = 0; j < n_cols; ++j) {
      double acc = 0.0;
      column(j, [&](std::size_t l, double v) { acc -= s[l] * v; });
      g[j] = acc;
      violation = std::max(violation, violation_at(acc, w[j], lambda));
    }
    if (violation <= opt.kkt_tolerance) {
      result.converged = true;
      break;
    }
    if (result.iterations >= opt.max_sweeps) break;
    if (!std::isfinite(inner_tol)) inner_tol = 0.1 * violation;

    // Working set: nonzero weights and zero weights close to violating.
    const double slack = std::isfinite(prev_violation) ? prev_violation / static_cast<double>(n_rows) : 0.0;
    working.clear();
    for (Index j = 0; j < n_cols; ++j) {
      if (empty[static_cast<std::size_t>(j)]) continue;
      if (w[j] != 0.0 || std::abs(g[j]) > lambda - slack) working.push_back(j);
    }
    for (Index j : working) {
      double acc = kCurvatureFloor;
      column(j, [&](std::size_t l, double v) { acc += curv[l] * v * v; });
      h[j] = acc;
    }

    std::fill(xd.begin(), xd.end(), 0.0);
    d.setZero();
    unsigned pass = 0;
    for (; pass < kMaxInnerPasses; ++pass) {
      double inner_violation = 0.0;
      for (Index j : working) {
        double grad = g[j];
        column(j, [&](std::size_t l, double v) { grad += curv[l] * v * xd[l]; });
        const double wj = w[j] + d[j];
        inner_violation = std::max(inner_violation, violation_at(grad, wj, lambda));
        double step;
        if (grad + lambda <= h[j] * wj) {
          step = -(grad + lambda) / h[j];
        } else if (grad - lambda >= h[j] * wj) {
          step = -(grad - lambda) / h[j];
        } else {
          step = -wj;
        }
        if (step == 0.0) continue;
        d[j] += step;
        column(j, [&](std::size_t l, double v) { xd[l] += step * v; });
      }
      if (inner_violation <= inner_tol) break;
    }
    if (pass == 0) inner_tol *= 0.25;

    // Samples of one experiment give nearly collinear columns, which leaves
    // coordinate descent slow near the optimum. Once it stops changing the
    // sign pattern, refine with conjugate gradients on that support (signs
    // held fixed) and project coordinates that crossed zero back onto it.
    support.clear();
    bool pattern_kept = true;
    for (Index j : working) {
      const double next = w[j] + d[j];
      pattern_kept = pattern_kept && (next > 0.0) == (w[j] > 0.0) && (next < 0.0) == (w[j] < 0.0);
      if (next != 0.0) support.push_back(j);
    }
    unsigned cg_steps = 0;
    const bool refine = pattern_kept && !support.empty();
    if (refine) {
      d_cd = d;
      xd_cd = xd;
    }
    if (refine) {
      const std::size_t k = support.size();
      std::vector<double> orthant(k), r(k), dir(k), q(k);
      double rs = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const Index j = support[i];
        orthant[i] = w[j] + d[j] > 0.0 ? 1.0 : -1.0;
        double hv = kCurvatureFloor * d[j];
        column(j, [&](std::size_t l, double v) { hv += curv[l] * v * xd[l]; });
        r[i] = -(g[j] + lambda * orthant[i]) - hv;
        dir[i] = r[i];
        rs += r[i] * r[i];
      }
      const double stop = std::max(1e-4 * std::sqrt(rs), 1e-3 * opt.kkt_tolerance);
      for (; cg_steps < kMaxCgSteps && std::sqrt(rs) > stop; ++cg_steps) {
        std::fill(u.begin(), u.end(), 0.0);
        for (std::size_t i = 0; i < k; ++i)
          if (dir[i] != 0.0) column(support[i], [&](std::size_t l, double v) { u[l] += dir[i] * v; });
        double pq = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          double acc = kCurvatureFloor * dir[i];
          column(support[i], [&](std::size_t l, double v) { acc += curv[l] * v * u[l]; });
          q[i] = acc;
          pq += dir[i] * acc;
        }
        if (!(pq > 0.0)) break;
        const double alpha = rs / pq;
        double rs_next = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          d[support[i]] += alpha * dir[i];
          r[i] -= alpha * q[i];
          rs_next += r[i] * r[i];
        }
        for (std::size_t l = 0; l < n_rows; ++l) xd[l] += alpha * u[l];
        for (std::size_t i = 0; i < k; ++i) dir[i] = r[i] + (rs_next / rs) * dir[i];
        rs = rs_next;
      }
      bool projected = false;
      for (std::size_t i = 0; i < k; ++i) {
        const Index j = support[i];
        if ((w[j] + d[j]) * orthant[i] <= 0.0) {
          d[j] = -w[j];
          projected = true;
        }
      }
      if (projected) {
        std::fill(xd.begin(), xd.end(), 0.0);
        for (Index j : working)
          if (d[j] != 0.0) column(j, [&](std::size_t l, double v) { xd[l] += d[j] * v; });
      }
    }

    auto descent_of = [&] {
      double total = 0.0;
      for (Index j : working) total += g[j] * d[j] + lambda * (std::abs(w[j] + d[j]) - std::abs(w[j]));
      return total;
    };
    // Loss change per row, log(1 + s (exp(-delta) - 1)), stays accurate when
    // the step is tiny and the two objective values agree to rounding.
    double beta = 1.0;
    double loss_change = 0.0;
    auto line_search = [&](double descent, int halvings) {
      beta = 1.0;
      for (int t = 0; t < halvings; ++t, beta *= 0.5) {
        double change = 0.0;
        for (std::size_t l = 0; l < n_rows; ++l) {
          trial[l] = margin[l] + beta * xd[l];
          if (xd[l] != 0.0) change += std::log1p(s[l] * std::expm1(-beta * xd[l]));
        }
        double l1_change = 0.0;
        for (Index j : working) l1_change += std::abs(w[j] + beta * d[j]) - std::abs(w[j]);
        loss_change = change;
        change += lambda * l1_change;
        if (change <= kArmijo * beta * descent) return true;
      }
      return false;
    };

    bool accepted = false;
    double descent = descent_of();
    if (refine) {
      // The refined step must pass at full length; otherwise fall back to
      // the coordinate descent direction.
      if (descent < 0.0) accepted = line_search(descent, 1);
      if (!accepted) {
        d = d_cd;
        xd = xd_cd;
        descent = descent_of();
      }
    }
    if (!accepted && !(descent < 0.0)) {
      // The model sees no descent; tighten the inner solve and retry.
      if (inner_tol <= 1e-3 * opt.kkt_tolerance) break;
      inner_tol *= 0.1;
      ++result.iterations;
      result.objective_trace.push_back(objective + lambda * w.lpNorm<1>());
      continue;
    }

    if (!accepted) accepted = line_search(descent, kMaxHalvings);
    ++result.iterations;
    if (!accepted) {
      result.objective_trace.push_back(objective + lambda * w.lpNorm<1>());
      if (inner_tol <= 1e-3 * opt.kkt_tolerance) break;
      inner_tol *= 0.1;
      continue;
    }
    max_update = 0.0;
    for (Index j : working) {
      const double delta = beta * d[j];
      // Snap coordinates the model sent to zero exactly.
      w[j] = (beta == 1.0 && w[j] + d[j] == 0.0) ? 0.0 : w[j] + delta;
      max_update = std::max(max_update, std::abs(delta));
    }
    margin.swap(trial);
    objective += loss_change;
    result.objective_trace.push_back(objective + lambda * w.lpNorm<1>());
    inner_tol = std::min(inner_tol, 0.1 * violation);
  }

  result.final_max_update = max_update;
  result.final_kkt_violation = violation;
  result.weights = std::move(w);
  result.negative_weights = (result.weights.array() < 0.0).count();
  for (const auto& block : result.column_blocks)
    result.nonzeros_per_experiment[block.experiment_id] =
        (result.weights.segment(block.start, block.size).array() != 0.0).count();

  if (!result.converged && opt.throw_on_nonconvergence) {
    std::ostringstream msg;
    msg << "L1 logistic solver did not converge after " << result.iterations
        << " iterations; stationarity gap " << violation << ", last max update " << max_update;
    throw NumericalError(msg.str());
  }
  return result;
}

}  // namespace

SolverResult solve_l1_logistic(const SparseDesign& design, const SolverOptions& options) {
  return solve_impl(design, options);
}

SolverResult solve_l1_logistic(const CscDesign& design, const SolverOptions& options) {
  return solve_impl(design, options);
}

Eigen::VectorXd logistic_gradient(const SparseDesign& design, const Eigen::VectorXd& w) {
  return gradient_impl(design, w);
}

Eigen::VectorXd logistic_gradient(const CscDesign& design, const Eigen::VectorXd& w) {
  return gradient_impl(design, w);
}

double kkt_violation(const Eigen::VectorXd& gradient, const Eigen::VectorXd& w, double lambda) {
  double worst = 0.0;
  for (Index j = 0; j < w.size(); ++j) {
    const double v = w[j] != 0.0 ? std::abs(gradient[j] + lambda * (w[j] > 0.0 ? 1.0 : -1.0))
                                 : std::max(0.0, std::abs(gradient[j]) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

bool satisfies_kkt(const Eigen::VectorXd& gradient, const Eigen::VectorXd& w, double lambda) {
  for (Index j = 0; j < w.size(); ++j) {
    const double g = gradient[j];
    if (w[j] != 0.0) {
      if (std::abs(g + lambda * (w[j] > 0.0 ? 1.0 : -1.0)) > 1e-6 * (1.0 + std::abs(g))) return false;
    } else if (std::abs(g) > lambda + 1e-6) {
      return false;
    }
  }
  return true;
}

double l1_logistic_objective(const CscDesign& design, const Eigen::VectorXd& w, double lambda) {
  const Eigen::VectorXd r = margins(design, w);
  double total = lambda * w.lpNorm<1>();
  for (Index l = 0; l < design.rows(); ++l) total += logistic_loss((design.label(l) == 1 ? 1.0 : -1.0) * r[l]);
  return total;
}

ExtractedWeights extract_weights(const SolverResult& result, const ModelBank& bank) {
  Index total = 0;
  for (const auto& block : result.column_blocks) total += block.size;
  if (total != result.weights.size())
    throw DataError("solver output has " + std::to_string(result.weights.size()) + " weights, column blocks cover " +
                    std::to_string(total));
  ExtractedWeights out;
  for (const auto& block : result.column_blocks) {
    const Index m = bank.posterior(block.experiment_id).size();
    if (m != block.size)
      throw DataError("experiment '" + block.experiment_id + "' has " + std::to_string(m) +
                      " samples, solver block has " + std::to_string(block.size));
    WeightVector wv;
    wv.experiment_id = block.experiment_id;
    wv.weights = result.weights.segment(block.start, block.size);
    wv.source = {WeightSource::Kind::learned, 0};
    const Index nz = wv.nonzeros();
    out.nonzeros[block.experiment_id] = nz;
    if (nz == 0) out.all_zero.push_back(block.experiment_id);
    out.negative_weights += (wv.weights.array() < 0.0).count();
    out.weights.emplace(block.experiment_id, std::move(wv));
  }
  return out;
}

void write_design_text(const SparseDesign& design, const std::filesystem::path& matrix_path,
                       const std::filesystem::path& labels_path) {
  std::ofstream matrix(matrix_path);
  std::ofstream labels(labels_path);
  if (!matrix || !labels) throw DataError("cannot write design files at " + matrix_path.string());
  matrix << design.rows() << ' ' << design.cols() << '\n' << std::setprecision(17);
  for (Index l = 0; l < design.rows(); ++l) {
    for (const auto& e : design.row_entries(l)) matrix << l << ' ' << e.col << ' ' << e.value << '\n';
    labels << design.label(l) << '\n';
  }
  if (!matrix || !labels) throw DataError("failed writing design files at " + matrix_path.string());
}

}  // namespace expret

#include "expret/samplers.hpp"

#include "expret/error.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace expret {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  // Asymptotic series of the Mills ratio; erfc underflows past here.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(-x) + std::log(series);
}

namespace {

// N(0,1) conditioned on exceeding `lower`.
double sample_standard_tail(Rng& rng, double lower) {
  std::normal_distribution<double> normal(0.0, 1.0);
  if (lower <= 0.25) {
    for (;;) {
      const double z = normal(rng);
      if (z > lower) return z;
    }
  }
  // Exponential proposal with the optimal rate for this bound.
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  std::exponential_distribution<double> expo(rate);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (;;) {
    const double z = lower + expo(rng);
    const double diff = z - rate;
    if (unif(rng) <= std::exp(-0.5 * diff * diff)) return z;
  }
}

void require_sampler_config(const SamplerConfig& cfg) {
  if (cfg.n_samples < 1) throw UsageError("sampler n_samples must be >= 1");
  if (cfg.thin < 1) throw UsageError("sampler thin must be >= 1");
  if (!(cfg.gamma_shape > 0.0) || !(cfg.gamma_rate > 0.0))
    throw UsageError("gamma hyperparameters must be positive");
  if (!(cfg.probit_prior_precision > 0.0)) throw UsageError("probit prior precision must be positive");
  if (cfg.fixed_weight_precision && !(*cfg.fixed_weight_precision > 0.0))
    throw UsageError("fixed weight precision must be positive");
  if (cfg.fixed_noise_precision && !(*cfg.fixed_noise_precision > 0.0))
    throw UsageError("fixed noise precision must be positive");
}

Eigen::VectorXd standard_normal_vector(Rng& rng, Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Index i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

// Draw from N(P^{-1} b, P^{-1}) given the Cholesky factor of P.
Eigen::VectorXd draw_gaussian_canonical(const Eigen::LLT<Eigen::MatrixXd>& chol, const Eigen::VectorXd& b,
                                        Rng& rng) {
  Eigen::VectorXd mean = chol.solve(b);
  Eigen::VectorXd z = standard_normal_vector(rng, b.size());
  return mean + chol.matrixU().solve(z);
}

double gamma_draw(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> gamma(shape, 1.0 / rate);
  return gamma(rng);
}

}  // namespace

double sample_truncated_normal(Rng& rng, double mean, bool positive) {
  if (positive) return mean + sample_standard_tail(rng, -mean);
  return mean - sample_standard_tail(rng, mean);
}

Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> chol(a);
  if (chol.info() == Eigen::Success) return chol;
  const double dim = static_cast<double>(std::max<Index>(a.rows(), 1));
  const double scale = std::max(std::abs(a.trace()) / dim, 1e-300);
  for (double jitter = 1e-10; jitter <= 1e-4 * (1.0 + 1e-9); jitter *= 10.0) {
    Eigen::MatrixXd b = a;
    b.diagonal().array() += jitter * scale;
    chol.compute(b);
    if (chol.info() == Eigen::Success) return chol;
  }
  throw NumericalError("matrix is not positive definite even with jitter 1e-4 * trace/d");
}

PosteriorSampleSet fit_linear_gibbs(const Experiment& exp, const SamplerConfig& cfg, std::uint64_t seed) {
  require_sampler_config(cfg);
  if (exp.outcome_kind != OutcomeKind::continuous)
    throw DataError("experiment '" + exp.id + "': linear model needs continuous outcomes");
  if (exp.size() < 1) throw DataError("experiment '" + exp.id + "' has no observations");

  const Index n = exp.size();
  const Index d = exp.dim();
  const Eigen::MatrixXd& x = exp.covariates;
  const Eigen::VectorXd& y = exp.outcomes;
  const Eigen::MatrixXd gram = x.transpose() * x;
  const Eigen::VectorXd xty = x.transpose() * y;

  Rng rng(seed);
  const double a = cfg.gamma_shape;
  const double b = cfg.gamma_rate;

  Eigen::VectorXd alpha = Eigen::VectorXd::Constant(d, cfg.fixed_weight_precision.value_or(1.0));
  double noise_precision = 1.0;
  if (cfg.fixed_noise_precision) {
    noise_precision = *cfg.fixed_noise_precision;
  } else if (n > 1) {
    const double var = (y.array() - y.mean()).square().sum() / static_cast<double>(n - 1);
    if (var > 0.0) noise_precision = 1.0 / var;
  }

  PosteriorSampleSet out;
  out.experiment_id = exp.id;
  out.model_kind = ModelKind::linear;
  out.seed = seed;
  out.sampler_config = cfg;
  out.samples.resize(cfg.n_samples, d + 1);

  const std::uint64_t total =
      static_cast<std::uint64_t>(cfg.burn_in) + static_cast<std::uint64_t>(cfg.n_samples) * cfg.thin;
  Index stored = 0;
  Eigen::VectorXd w(d);
  for (std::uint64_t it = 0; it < total; ++it) {
    Eigen::MatrixXd precision = noise_precision * gram;
    precision.diagonal() += alpha;
    const auto chol = robust_cholesky(precision);
    w = draw_gaussian_canonical(chol, noise_precision * xty, rng);

    if (!cfg.fixed_weight_precision) {
      for (Index j = 0; j < d; ++j) alpha[j] = gamma_draw(rng, a + 0.5, b + 0.5 * w[j] * w[j]);
    }
    if (!cfg.fixed_noise_precision) {
      const double rss = (y - x * w).squaredNorm();
      noise_precision = gamma_draw(rng, a + 0.5 * static_cast<double>(n), b + 0.5 * rss);
    }

    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      out.samples.row(stored).head(d) = w.transpose();
      out.samples(stored, d) = -std::log(noise_precision);
      ++stored;
    }
  }
  if (!out.samples.allFinite())
    throw NumericalError("experiment '" + exp.id + "': linear sampler produced non-finite draws");
  return out;
}

PosteriorSampleSet fit_probit_gibbs(const Experiment& exp, const SamplerConfig& cfg, std::uint64_t seed) {
  require_sampler_config(cfg);
  if (exp.outcome_kind != OutcomeKind::binary)
    throw DataError("experiment '" + exp.id + "': probit model needs binary outcomes");

  const Index n = exp.size();
  const Index d = exp.dim();
  const Eigen::MatrixXd& x = exp.covariates;
  Eigen::MatrixXd precision = x.transpose() * x;
  precision.diagonal().array() += cfg.probit_prior_precision;
  const auto chol = robust_cholesky(precision);

  Rng rng(seed);
  PosteriorSampleSet out;
  out.experiment_id = exp.id;
  out.model_kind = ModelKind::probit;
  out.seed = seed;
  out.sampler_config = cfg;
  out.samples.resize(cfg.n_samples, d);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd latent(n);
  const std::uint64_t total =
      static_cast<std::uint64_t>(cfg.burn_in) + static_cast<std::uint64_t>(cfg.n_samples) * cfg.thin;
  Index stored = 0;
  for (std::uint64_t it = 0; it < total; ++it) {
    const Eigen::VectorXd eta = x * w;
    for (Index i = 0; i < n; ++i) latent[i] = sample_truncated_normal(rng, eta[i], exp.outcomes[i] == 1.0);
    w = draw_gaussian_canonical(chol, x.transpose() * latent, rng);
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) out.samples.row(stored++) = w.transpose();
  }
  if (!out.samples.allFinite())
    throw NumericalError("experiment '" + exp.id + "': probit sampler produced non-finite draws");
  return out;
}

PosteriorSampleSet fit_posterior(const Experiment& exp, const SamplerConfig& cfg, std::uint64_t seed) {
  return exp.outcome_kind == OutcomeKind::binary ? fit_probit_gibbs(exp, cfg, seed)
                                                 : fit_linear_gibbs(exp, cfg, seed);
}

GaussianPosterior analytic_gaussian_posterior(const Experiment& exp, double noise_var, double prior_precision) {
  if (exp.outcome_kind != OutcomeKind::continuous)
    throw DataError("analytic posterior needs continuous outcomes");
  if (!(noise_var > 0.0) || !(prior_precision > 0.0))
    throw UsageError("noise variance and prior precision must be positive");
  const Index d = exp.dim();
  Eigen::MatrixXd precision = exp.covariates.transpose() * exp.covariates / noise_var;
  precision.diagonal().array() += prior_precision;
  const auto chol = robust_cholesky(precision);
  GaussianPosterior post;
  post.covariance = chol.solve(Eigen::MatrixXd::Identity(d, d));
  post.mean = exp.size() == 0 ? Eigen::VectorXd::Zero(d)
                              : Eigen::VectorXd(chol.solve(exp.covariates.transpose() * exp.outcomes / noise_var));
  return post;
}

WeightVector thin_every_k(const PosteriorSampleSet& samples, unsigned k) {
  if (k == 0) throw UsageError("thinning interval k must be >= 1");
  const Index m = samples.size();
  if (static_cast<Index>(k) > m)
    throw UsageError("thinning interval k=" + std::to_string(k) + " exceeds sample count " + std::to_string(m));
  WeightVector out;
  out.experiment_id = samples.experiment_id;
  out.source = {WeightSource::Kind::every_k, k};
  out.weights = Eigen::VectorXd::Zero(m);
  for (Index i = 0; i < m; i += k) out.weights[i] = 1.0;
  return out;
}

}  // namespace expret

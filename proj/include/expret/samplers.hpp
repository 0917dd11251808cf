#pragma once

// Gibbs samplers for the two supported model families and the closed-form
// conjugate posterior used to check them.

#include "expret/core.hpp"
#include "expret/rng.hpp"

#include <cstdint>

namespace expret {

/// Standard normal CDF via erfc; absolute error is at the level of double rounding.
double normal_cdf(double x);

/// log Phi(x), accurate in the far lower tail.
double log_normal_cdf(double x);

/// Draws from N(mean, 1) truncated to (0, inf) when `positive`, else (-inf, 0].
double sample_truncated_normal(Rng& rng, double mean, bool positive);

/// Bayesian linear regression with a per-weight gamma precision prior (ARD)
/// and a gamma prior on the noise precision. Emits cfg.n_samples rows
/// [w, log noise variance] taken after cfg.burn_in sweeps, every cfg.thin-th.
PosteriorSampleSet fit_linear_gibbs(const Experiment& exp, const SamplerConfig& cfg, std::uint64_t seed);

/// Probit regression by latent-variable augmentation with a N(0, 1/tau I)
/// prior on the weights.
PosteriorSampleSet fit_probit_gibbs(const Experiment& exp, const SamplerConfig& cfg, std::uint64_t seed);

/// Fits the model family matching the experiment's outcome kind.
PosteriorSampleSet fit_posterior(const Experiment& exp, const SamplerConfig& cfg, std::uint64_t seed);

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Exact posterior of w for y ~ N(Xw, noise_var), w ~ N(0, I / prior_precision).
/// An experiment with zero rows yields the prior.
GaussianPosterior analytic_gaussian_posterior(const Experiment& exp, double noise_var, double prior_precision);

/// 0/1 weights with ones at indices 0, k, 2k, ...
WeightVector thin_every_k(const PosteriorSampleSet& samples, unsigned k);

/// Cholesky factor of a symmetric positive-definite matrix, retrying with
/// growing diagonal jitter (1e-10 * trace/d, x10 per retry, up to 1e-4 * trace/d).
Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& a);

}  // namespace expret

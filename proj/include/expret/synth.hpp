#pragma once

// Synthetic experiment banks: clustered and unclustered linear regression
// benchmarks, plus shape mimics of the three real datasets.

#include "expret/core.hpp"

#include <cstdint>
#include <map>

namespace expret {

struct SynthConfig {
  unsigned clusters = 20;  // 0 = unclustered
  double cluster_rate = 10.0;
  unsigned total = 200;  // experiment count when unclustered
  unsigned dim = 10;
  double n_rate = 18.0;
  double snr_ratio = 0.5;  // noise variance / signal variance
  double center_scale = 2.0;
  double within_scale = 0.2;
};

/// Generating parameters of one synthetic experiment.
struct SynthTruth {
  Eigen::VectorXd w;
  double signal_variance = 0.0;
  double noise_variance = 0.0;
};

struct SynthBank {
  ModelBank bank;  // experiments only, no posteriors
  std::map<std::string, SynthTruth> truth;
};

/// Experiments in clusters around Gaussian centres; labels are cluster
/// indices "0".."C-1".
SynthBank gen_clustered(const SynthConfig& cfg, std::uint64_t seed);

/// Independent regressors per experiment, no labels.
SynthBank gen_unclustered(const SynthConfig& cfg, std::uint64_t seed);

/// Probit bank shaped like the landmine collection: 29 experiments with 9
/// features in two well-separated classes of 16 and 13.
struct LandmineShape {
  unsigned class_a = 16;
  unsigned class_b = 13;
  unsigned dim = 9;
  double n_rate = 80.0;
  double center_scale = 1.5;
  double within_scale = 0.1;
};
SynthBank gen_landmine_like(const LandmineShape& shape, std::uint64_t seed);

/// Ratings banks shaped like the computer (200 x 13 binary features, ~20
/// ratings on 0..10, some missing) and restaurant (119 x 22 one-hot
/// features, 3..18 ratings on 1..3) collections. Missing outcomes are NaN;
/// they become empty fields when written as a bundle.
SynthBank gen_computer_like(std::uint64_t seed, unsigned experiments = 200, double missing_rate = 0.05);
SynthBank gen_restaurant_like(std::uint64_t seed, unsigned experiments = 119);

}  // namespace expret

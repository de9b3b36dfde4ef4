#pragma once

#include <vector>

#include "cptlab/policy_ops.hpp"
#include "cptlab/tasks.hpp"

namespace cptlab {

/// Rollout-based instance screening: keep a training example iff at least
/// one of N seeded rollouts earns a reward strictly above tau.
struct FilterConfig {
  int n_rollouts = 8;
  double tau = 0.0;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_rollouts < 1) throw InvalidInput("filter: n_rollouts must be >= 1");
    if (tau >= 1.0) throw InvalidInput("filter: tau must be < 1");
    if (!(temperature > 0.0))
      throw InvalidInput("filter: temperature must be positive");
  }
};

/// Partition of a task's training set into kept and dropped examples, with
/// the best observed rollout reward per example.
struct FilterOutcome {
  TaskDataset kept;                            // filtered train, test intact
  std::vector<std::pair<int, double>> dropped; // (example index, R_max)
  std::vector<double> r_max;                   // per input example
  double kept_fraction = 1.0;
};

/// Rollout j of example i draws from seed h(cfg.seed, i, j), so the rollout
/// sets for increasing N are nested and filtering is order-independent.
template <typename Policy>
FilterOutcome filter_instances(const Policy& policy, const ParamVector& theta,
                               const TaskDataset& ds, const FilterConfig& cfg,
                               const RewardSpec& reward) {
  cfg.validate();
  if (ds.train.empty()) throw InvalidInput("filter_instances: empty dataset");
  const Vocab& vocab = policy.vocab();

  FilterOutcome out;
  out.kept.spec = ds.spec;
  out.kept.test = ds.test;
  out.kept.seed = ds.seed;
  out.r_max.resize(ds.train.size());

  std::vector<char> keep(ds.train.size(), 0);
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    double r_max = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < cfg.n_rollouts; ++j) {
      Rng rng(mix_seed({cfg.seed, kSeedFilter, static_cast<std::uint64_t>(i),
                        static_cast<std::uint64_t>(j)}));
      Response a =
          sample(policy, theta, ds.train[i].prompt, cfg.temperature, rng);
      r_max = std::max(r_max,
                       overall_reward(a, ds.train[i].target, reward, vocab));
    }
    out.r_max[i] = r_max;
    keep[i] = r_max > cfg.tau ? 1 : 0;
  }

  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    if (keep[i])
      out.kept.train.push_back(ds.train[i]);
    else
      out.dropped.emplace_back(static_cast<int>(i), out.r_max[i]);
  }
  out.kept_fraction = static_cast<double>(out.kept.train.size()) /
                      static_cast<double>(ds.train.size());
  return out;
}

}  // namespace cptlab

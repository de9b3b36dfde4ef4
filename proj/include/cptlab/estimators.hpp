#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cptlab/policy_ops.hpp"
#include "cptlab/tasks.hpp"

namespace cptlab {

/// One prompt's group of sampled responses with rewards and sequence
/// log-probabilities (at the sampling-time parameters).
struct RolloutGroup {
  Prompt prompt;
  std::vector<Response> responses;
  std::vector<double> rewards;
  std::vector<double> log_probs;

  void validate() const {
    if (responses.empty() || responses.size() != rewards.size() ||
        responses.size() != log_probs.size())
      throw InvalidInput("RolloutGroup: inconsistent sizes");
  }
};

/// A gradient plus estimator metadata. `ascent` tells the optimizer which
/// way to move: RFT estimators produce objective-ascent directions, SFT
/// produces the loss gradient.
struct GradEstimate {
  ParamVector grad;
  std::string estimator_name;
  bool ascent = true;
  std::optional<double> batch_mean_reward;
  std::optional<double> batch_reward_variance;
  std::optional<double> kl_value;
  std::optional<double> loss;  // SFT: batch mean negative log-likelihood
};

struct KLConfig {
  enum class Mode { exact, mc };
  double beta = 0.01;
  Mode mode = Mode::exact;
  const ParamVector* reference = nullptr;  // not owned
  long long enum_limit = kDefaultEnumerationLimit;

  bool enabled() const { return beta > 0.0 && reference != nullptr; }
};

namespace detail {

inline std::pair<double, double> mean_and_population_variance(
    std::span<const double> xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= static_cast<double>(xs.size());
  return {m, v};
}

template <typename Policy>
std::pair<double, double> reward_stats_over_groups(
    const Policy&, std::span<const RolloutGroup> groups) {
  std::vector<double> all;
  for (const auto& g : groups)
    all.insert(all.end(), g.rewards.begin(), g.rewards.end());
  return mean_and_population_variance(all);
}

}  // namespace detail

/// Gradient of the batch negative log-likelihood:
/// grad = -(1/|batch|) sum score(x, a*). Descent direction is the
/// optimizer's job.
template <typename Policy>
GradEstimate sft_gradient(const Policy& policy, const ParamVector& theta,
                          std::span<const Example> batch) {
  if (batch.empty()) throw InvalidInput("sft_gradient: empty batch");
  GradEstimate est;
  est.estimator_name = "sft";
  est.ascent = false;
  est.grad.assign(static_cast<std::size_t>(policy.param_count()), 0.0);
  double inv = -1.0 / static_cast<double>(batch.size());
  double nll = 0.0;
  for (const Example& ex : batch) {
    accumulate_score(policy, theta, ex.prompt, ex.target, inv, est.grad);
    nll -= log_prob(policy, theta, ex.prompt, ex.target);
  }
  est.loss = nll / static_cast<double>(batch.size());
  return est;
}

/// Group-normalized advantages (r_i - mean) / std with the degenerate-group
/// rule: a group whose reward spread is below sigma_floor carries no signal
/// and gets all-zero advantages.
inline std::vector<double> grpo_advantages(std::span<const double> rewards,
                                           double sigma_floor) {
  if (rewards.size() < 2)
    throw InvalidInput("grpo_advantages: need a group of at least 2");
  auto [mean, var] = detail::mean_and_population_variance(rewards);
  double sd = std::sqrt(var);
  std::vector<double> adv(rewards.size(), 0.0);
  if (sd < sigma_floor) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i)
    adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

/// Sequence-level KL(pi_theta || pi_ref) for one prompt, with its analytic
/// gradient in theta.
///
/// Exact mode enumerates the response space. MC mode draws fresh samples
/// from pi_theta and averages log pi_theta - log pi_ref; its gradient uses
/// the score-function estimator with the same per-sample coefficient.
template <typename Policy>
std::pair<double, ParamVector> kl_divergence(
    const Policy& policy, const ParamVector& theta,
    const ParamVector& theta_ref, const Prompt& x, KLConfig::Mode mode,
    long long enum_limit = kDefaultEnumerationLimit, Rng* rng = nullptr,
    int mc_samples = 256) {
  ParamVector grad(static_cast<std::size_t>(policy.param_count()), 0.0);
  if (mode == KLConfig::Mode::exact) {
    auto dist = response_distribution(policy, theta, x, enum_limit);
    KahanSum value;
    for (const auto& [a, p] : dist) {
      if (p <= 0.0) continue;
      double delta = std::log(p) - log_prob(policy, theta_ref, x, a);
      value.add(p * delta);
      accumulate_score(policy, theta, x, a, p * delta, grad);
    }
    return {value.value(), std::move(grad)};
  }
  if (rng == nullptr)
    throw InvalidInput("kl_divergence: MC mode needs an rng");
  if (mc_samples < 1)
    throw InvalidInput("kl_divergence: MC mode needs mc_samples >= 1");
  double value = 0.0;
  double inv = 1.0 / static_cast<double>(mc_samples);
  for (int s = 0; s < mc_samples; ++s) {
    Response a = sample(policy, theta, x, 1.0, *rng);
    double delta =
        log_prob(policy, theta, x, a) - log_prob(policy, theta_ref, x, a);
    value += inv * delta;
    accumulate_score(policy, theta, x, a, inv * delta, grad);
  }
  return {value, std::move(grad)};
}

/// Ascent gradient of the group objective
///   mean_groups [ sum_i A(a_i) log pi(a_i|x) ] - beta KL(pi || pi_ref).
/// MC KL reuses the group's own samples (they are draws from pi_theta).
template <typename Policy>
GradEstimate grpo_gradient(const Policy& policy, const ParamVector& theta,
                           std::span<const RolloutGroup> groups,
                           const KLConfig& kl, double sigma_floor = 1e-8) {
  if (groups.empty()) throw InvalidInput("grpo_gradient: no groups");
  GradEstimate est;
  est.estimator_name = "grpo";
  est.grad.assign(static_cast<std::size_t>(policy.param_count()), 0.0);
  double inv_g = 1.0 / static_cast<double>(groups.size());

  for (const auto& g : groups) {
    g.validate();
    if (g.responses.size() < 2)
      throw InvalidInput("grpo_gradient: groups need n >= 2");
    auto adv = grpo_advantages(g.rewards, sigma_floor);
    for (std::size_t i = 0; i < g.responses.size(); ++i)
      if (adv[i] != 0.0)
        accumulate_score(policy, theta, g.prompt, g.responses[i],
                         inv_g * adv[i], est.grad);
  }

  if (kl.enabled()) {
    KahanSum kl_total;
    for (const auto& g : groups) {
      if (kl.mode == KLConfig::Mode::exact) {
        auto [value, kgrad] = kl_divergence(policy, theta, *kl.reference,
                                            g.prompt, KLConfig::Mode::exact,
                                            kl.enum_limit);
        kl_total.add(value);
        axpy(-kl.beta * inv_g, kgrad, est.grad);
      } else {
        // per-sample estimator on the group's own rollouts
        double inv_n = 1.0 / static_cast<double>(g.responses.size());
        double value = 0.0;
        for (std::size_t i = 0; i < g.responses.size(); ++i) {
          double delta = g.log_probs[i] - log_prob(policy, *kl.reference,
                                                   g.prompt, g.responses[i]);
          value += inv_n * delta;
          accumulate_score(policy, theta, g.prompt, g.responses[i],
                           -kl.beta * inv_g * inv_n * delta, est.grad);
        }
        kl_total.add(value);
      }
    }
    est.kl_value = kl_total.value() * inv_g;
  }

  auto [m, v] = detail::reward_stats_over_groups(policy, groups);
  est.batch_mean_reward = m;
  est.batch_reward_variance = v;
  return est;
}

struct RemaxSample {
  Prompt prompt;
  Response sampled;
  Response greedy;
  double reward_sampled = 0.0;
  double reward_greedy = 0.0;
};

/// Ascent gradient mean_i (r(a_i) - r(a_greedy,i)) score(a_i).
template <typename Policy>
GradEstimate remax_gradient(const Policy& policy, const ParamVector& theta,
                            std::span<const RemaxSample> samples) {
  if (samples.empty()) throw InvalidInput("remax_gradient: no samples");
  GradEstimate est;
  est.estimator_name = "remax";
  est.grad.assign(static_cast<std::size_t>(policy.param_count()), 0.0);
  double inv = 1.0 / static_cast<double>(samples.size());
  std::vector<double> rewards;
  rewards.reserve(samples.size());
  for (const auto& s : samples) {
    double coeff = s.reward_sampled - s.reward_greedy;
    if (coeff != 0.0)
      accumulate_score(policy, theta, s.prompt, s.sampled, inv * coeff,
                       est.grad);
    rewards.push_back(s.reward_sampled);
  }
  auto [m, v] = detail::mean_and_population_variance(rewards);
  est.batch_mean_reward = m;
  est.batch_reward_variance = v;
  return est;
}

/// Ascent gradient mean_groups (1/n) sum_i (r_i - mean_{j != i} r_j)
/// score(a_i): the leave-one-out baseline.
template <typename Policy>
GradEstimate rloo_gradient(const Policy& policy, const ParamVector& theta,
                           std::span<const RolloutGroup> groups) {
  if (groups.empty()) throw InvalidInput("rloo_gradient: no groups");
  GradEstimate est;
  est.estimator_name = "rloo";
  est.grad.assign(static_cast<std::size_t>(policy.param_count()), 0.0);
  double inv_g = 1.0 / static_cast<double>(groups.size());
  for (const auto& g : groups) {
    g.validate();
    std::size_t n = g.responses.size();
    if (n < 2) throw InvalidInput("rloo_gradient: groups need n >= 2");
    // an all-equal group cancels identically; skip before the division
    // can leave rounding residue
    if (std::equal(g.rewards.begin() + 1, g.rewards.end(), g.rewards.begin()))
      continue;
    double total = 0.0;
    for (double r : g.rewards) total += r;
    double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      double baseline = (total - g.rewards[i]) / static_cast<double>(n - 1);
      double coeff = g.rewards[i] - baseline;
      if (coeff != 0.0)
        accumulate_score(policy, theta, g.prompt, g.responses[i],
                         inv_g * inv_n * coeff, est.grad);
    }
  }
  auto [m, v] = detail::reward_stats_over_groups(policy, groups);
  est.batch_mean_reward = m;
  est.batch_reward_variance = v;
  return est;
}

struct ReinforceSample {
  Prompt prompt;
  Response response;
};

/// Ascent gradient mean_i (r_i - baseline) score(a_i). baseline = 0 is
/// plain REINFORCE; baseline = E[r] is the variance-optimal choice.
template <typename Policy>
GradEstimate reinforce_gradient(const Policy& policy,
                                const ParamVector& theta,
                                std::span<const ReinforceSample> samples,
                                std::span<const double> rewards,
                                double baseline) {
  if (samples.empty()) throw InvalidInput("reinforce_gradient: no samples");
  if (samples.size() != rewards.size())
    throw InvalidInput("reinforce_gradient: samples/rewards size mismatch");
  GradEstimate est;
  est.estimator_name = "reinforce";
  est.grad.assign(static_cast<std::size_t>(policy.param_count()), 0.0);
  double inv = 1.0 / static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double coeff = rewards[i] - baseline;
    if (coeff != 0.0)
      accumulate_score(policy, theta, samples[i].prompt, samples[i].response,
                       inv * coeff, est.grad);
  }
  auto [m, v] = detail::mean_and_population_variance(rewards);
  est.batch_mean_reward = m;
  est.batch_reward_variance = v;
  return est;
}

}  // namespace cptlab

#pragma once

// Independent oracles used by the test suites. Everything here recomputes
// expected values from first principles and must stay decoupled from the
// library code paths it checks.

#include <cmath>
#include <functional>
#include <vector>

#include "cptlab/common.hpp"
#include "cptlab/vocab.hpp"

namespace oracles {

/// Central finite differences of a scalar function of theta.
inline cptlab::ParamVector finite_difference_gradient(
    const std::function<double(const cptlab::ParamVector&)>& fn,
    cptlab::ParamVector theta, double h = 1e-5) {
  cptlab::ParamVector grad(theta.size(), 0.0);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double keep = theta[i];
    theta[i] = keep + h;
    double up = fn(theta);
    theta[i] = keep - h;
    double down = fn(theta);
    theta[i] = keep;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline double relative_l2_error(const cptlab::ParamVector& got,
                                const cptlab::ParamVector& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    double d = got[i] - want[i];
    num += d * d;
    den += want[i] * want[i];
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

/// Hand-rolled forward pass of the one-hidden-layer policy, written against
/// the documented parameter layout only. Returns log pi(a|x).
inline double mlp_log_prob_oracle(const std::vector<double>& theta,
                                  int context_dim, int hidden, int vocab_size,
                                  int max_len,
                                  const std::vector<double>& context,
                                  const std::vector<int>& tokens) {
  const int D = context_dim + (max_len > 1 ? (max_len - 1) * vocab_size : 0);
  const int H = hidden;
  const int V = vocab_size;
  const int w1 = 0, b1 = H * D, w2 = H * D + H, b2 = w2 + V * H;

  double lp = 0.0;
  for (std::size_t step = 0; step < tokens.size(); ++step) {
    std::vector<double> input(static_cast<std::size_t>(D), 0.0);
    for (int d = 0; d < context_dim; ++d)
      input[static_cast<std::size_t>(d)] = context[static_cast<std::size_t>(d)];
    for (std::size_t p = 0; p < step; ++p)
      input[static_cast<std::size_t>(context_dim) +
            p * static_cast<std::size_t>(V) +
            static_cast<std::size_t>(tokens[p])] = 1.0;
    std::vector<double> logits(static_cast<std::size_t>(V), 0.0);
    for (int t = 0; t < V; ++t) {
      double acc = theta[static_cast<std::size_t>(b2 + t)];
      for (int h = 0; h < H; ++h) {
        double pre = theta[static_cast<std::size_t>(b1 + h)];
        for (int d = 0; d < D; ++d)
          pre += theta[static_cast<std::size_t>(w1 + h * D + d)] *
                 input[static_cast<std::size_t>(d)];
        acc += theta[static_cast<std::size_t>(w2 + t * H + h)] *
               std::tanh(pre);
      }
      logits[static_cast<std::size_t>(t)] = acc;
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    lp += logits[static_cast<std::size_t>(tokens[step])] - mx - std::log(z);
  }
  return lp;
}

/// Brute-force count of complete responses: EOS-terminated sequences of any
/// length <= max_len plus EOS-free sequences of length exactly max_len.
inline long long count_responses_oracle(int vocab_size, int eos, int max_len) {
  std::function<long long(int)> rec = [&](int depth) -> long long {
    if (depth == max_len) return 1;  // cap reached, sequence complete
    long long n = 0;
    for (int t = 0; t < vocab_size; ++t)
      n += (t == eos) ? 1 : rec(depth + 1);
    return n;
  };
  return rec(0);
}

enum class GroupKind { grpo, rloo };

/// Exact expectation of a group-based gradient estimator over groups of n
/// iid draws from a finite response distribution. Enumerates count
/// compositions (multisets) instead of ordered n-tuples, so it stays cheap
/// for n = 8.
///
/// Inputs are per-response-class: probability p_j, reward r_j and score
/// vector s_j. GRPO uses (r - mean)/sd with the all-zero degenerate rule;
/// RLOO uses (1/n) (r_i - mean of the others).
inline cptlab::ParamVector expected_group_gradient_oracle(
    const std::vector<double>& probs, const std::vector<double>& rewards,
    const std::vector<cptlab::ParamVector>& scores, int n, GroupKind kind,
    double sigma_floor = 1e-8) {
  const std::size_t k = probs.size();
  const std::size_t P = scores[0].size();
  cptlab::ParamVector out(P, 0.0);
  std::vector<int> counts(k, 0);

  std::function<void(std::size_t, int, double, double)> rec =
      [&](std::size_t j, int left, double prob, double multinom) {
        if (j + 1 == k) {
          counts[j] = left;
          double w = multinom * prob * std::pow(probs[j], left);
          if (w <= 0.0) return;

          double total = 0.0;
          for (std::size_t i = 0; i < k; ++i) total += counts[i] * rewards[i];
          double mean = total / n;

          std::vector<double> coef(k, 0.0);
          if (kind == GroupKind::grpo) {
            double var = 0.0;
            for (std::size_t i = 0; i < k; ++i)
              var += counts[i] * (rewards[i] - mean) * (rewards[i] - mean);
            var /= n;
            double sd = std::sqrt(var);
            if (sd >= sigma_floor)
              for (std::size_t i = 0; i < k; ++i)
                coef[i] = (rewards[i] - mean) / sd;
          } else {
            for (std::size_t i = 0; i < k; ++i) {
              double baseline = (total - rewards[i]) / (n - 1);
              coef[i] = (rewards[i] - baseline) / n;
            }
          }
          for (std::size_t i = 0; i < k; ++i) {
            if (counts[i] == 0 || coef[i] == 0.0) continue;
            for (std::size_t d = 0; d < P; ++d)
              out[d] += w * counts[i] * coef[i] * scores[i][d];
          }
          return;
        }
        for (int c = 0; c <= left; ++c) {
          counts[j] = c;
          double w_prob = prob * std::pow(probs[j], c);
          double w_multinom = multinom;
          // running multinomial factor: choose c of the remaining slots
          for (int i = 0; i < c; ++i)
            w_multinom = w_multinom * (left - i) / (i + 1);
          rec(j + 1, left - c, w_prob, w_multinom);
        }
      };
  rec(0, n, 1.0, 1.0);
  return out;
}

/// Dense empirical-FIM risk: builds F = (1/m) sum s s^T explicitly and
/// evaluates g^T F g.
inline double dense_fim_risk(const std::vector<cptlab::ParamVector>& scores,
                             const cptlab::ParamVector& g) {
  const std::size_t P = g.size();
  std::vector<double> F(P * P, 0.0);
  for (const auto& s : scores)
    for (std::size_t i = 0; i < P; ++i)
      for (std::size_t j = 0; j < P; ++j) F[i * P + j] += s[i] * s[j];
  double inv_m = 1.0 / static_cast<double>(scores.size());
  double out = 0.0;
  for (std::size_t i = 0; i < P; ++i)
    for (std::size_t j = 0; j < P; ++j)
      out += g[i] * inv_m * F[i * P + j] * g[j];
  return out;
}

}  // namespace oracles

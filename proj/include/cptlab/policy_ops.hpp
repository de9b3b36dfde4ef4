#pragma once

#include <span>
#include <utility>
#include <vector>

#include "cptlab/reward.hpp"
#include "cptlab/rng.hpp"
#include "cptlab/vocab.hpp"

namespace cptlab {

inline constexpr long long kDefaultEnumerationLimit = 65536;

namespace detail {

inline void log_softmax_inplace(std::span<double> v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double z = 0.0;
  for (double x : v) z += std::exp(x - mx);
  double lz = mx + std::log(z);
  for (double& x : v) x -= lz;
}

inline void softmax_inplace(std::span<double> v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double z = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    z += x;
  }
  for (double& x : v) x /= z;
}

}  // namespace detail

/// Sum of per-token log-probabilities of `a` under the policy. Always <= 0.
template <typename Policy>
double log_prob(const Policy& policy, const ParamVector& theta,
                const Prompt& x, const Response& a) {
  validate_response(policy.vocab(), a, policy.max_len());
  const int v = policy.vocab().size;
  std::vector<double> logits(static_cast<std::size_t>(v));
  double lp = 0.0;
  for (std::size_t t = 0; t < a.tokens.size(); ++t) {
    std::span<const Token> prefix(a.tokens.data(), t);
    policy.next_logits(theta, x, prefix, logits);
    detail::log_softmax_inplace(logits);
    lp += logits[static_cast<std::size_t>(a.tokens[t])];
  }
  return lp;
}

/// Token-by-token draw from softmax(logits / temperature). Deterministic
/// given the rng state; stops at EOS or max_len.
template <typename Policy>
Response sample(const Policy& policy, const ParamVector& theta,
                const Prompt& x, double temperature, Rng& rng) {
  if (!(temperature > 0.0))
    throw InvalidInput("sample: temperature must be positive");
  const Vocab& vocab = policy.vocab();
  std::vector<double> logits(static_cast<std::size_t>(vocab.size));
  Response out;
  for (int t = 0; t < policy.max_len(); ++t) {
    policy.next_logits(theta, x, out.tokens, logits);
    for (double& l : logits) l /= temperature;
    detail::softmax_inplace(logits);
    Token tok = rng.categorical(logits);
    out.tokens.push_back(tok);
    if (tok == vocab.eos) break;
  }
  return out;
}

/// Per-step argmax decode; ties go to the lowest token id.
template <typename Policy>
Response greedy_decode(const Policy& policy, const ParamVector& theta,
                       const Prompt& x) {
  const Vocab& vocab = policy.vocab();
  std::vector<double> logits(static_cast<std::size_t>(vocab.size));
  Response out;
  for (int t = 0; t < policy.max_len(); ++t) {
    policy.next_logits(theta, x, out.tokens, logits);
    int best = 0;
    for (int i = 1; i < vocab.size; ++i)
      if (logits[static_cast<std::size_t>(i)] >
          logits[static_cast<std::size_t>(best)])
        best = i;
    out.tokens.push_back(best);
    if (best == vocab.eos) break;
  }
  return out;
}

/// Adds coeff * grad(log pi(a|x)) into `out`.
template <typename Policy>
void accumulate_score(const Policy& policy, const ParamVector& theta,
                      const Prompt& x, const Response& a, double coeff,
                      ParamVector& out) {
  validate_response(policy.vocab(), a, policy.max_len());
  if (static_cast<int>(out.size()) != policy.param_count())
    throw InvalidInput("accumulate_score: output dimension mismatch");
  auto add = [&out](int i, double v) {
    out[static_cast<std::size_t>(i)] += v;
  };
  for (std::size_t t = 0; t < a.tokens.size(); ++t)
    policy.accumulate_step_score(theta, x,
                                 std::span<const Token>(a.tokens.data(), t),
                                 a.tokens[t], coeff, add);
}

/// Analytic score function grad(log pi(a|x)) as a dense vector.
template <typename Policy>
ParamVector score(const Policy& policy, const ParamVector& theta,
                  const Prompt& x, const Response& a) {
  ParamVector out(static_cast<std::size_t>(policy.param_count()), 0.0);
  accumulate_score(policy, theta, x, a, 1.0, out);
  return out;
}

/// Score in sparse form (sorted indices, duplicates merged). For the tabular
/// policy this touches only the visited state blocks.
template <typename Policy>
SparseVec score_sparse(const Policy& policy, const ParamVector& theta,
                       const Prompt& x, const Response& a) {
  validate_response(policy.vocab(), a, policy.max_len());
  SparseVec s;
  s.dim = policy.param_count();
  auto add = [&s](int i, double v) {
    s.idx.push_back(i);
    s.val.push_back(v);
  };
  for (std::size_t t = 0; t < a.tokens.size(); ++t)
    policy.accumulate_step_score(theta, x,
                                 std::span<const Token>(a.tokens.data(), t),
                                 a.tokens[t], 1.0, add);
  s.canonicalize();
  return s;
}

/// Number of complete responses over `vocab` with length cap `max_len`:
/// sum_{l=0}^{max_len} (|V|-1)^l, capped at `cap` to avoid overflow.
inline long long response_space_size(const Vocab& vocab, int max_len,
                                     long long cap) {
  long long w = vocab.size - 1;
  long long total = 0, pw = 1;
  for (int l = 0; l <= max_len; ++l) {
    total += pw;
    if (total > cap) return cap + 1;
    if (l < max_len) {
      if (w != 0 && pw > cap / std::max<long long>(w, 1)) return cap + 1;
      pw *= w;
    }
  }
  return total;
}

/// Every complete response exactly once, in depth-first token order:
/// EOS-terminated sequences of any length plus EOS-free sequences of length
/// exactly max_len. A format template, when given, does not restrict the
/// set -- conformance is the reward's business.
inline std::vector<Response> enumerate_responses(
    const Vocab& vocab, int max_len, const FormatTemplate* /*format*/ = nullptr,
    long long limit = kDefaultEnumerationLimit) {
  vocab.validate();
  if (max_len < 0) throw InvalidInput("enumerate_responses: max_len < 0");
  long long n = response_space_size(vocab, max_len, limit);
  if (n > limit)
    throw EnumerationRefused(
        "enumerate_responses: response space exceeds limit " +
        std::to_string(limit));
  std::vector<Response> out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<Token> cur;
  auto rec = [&](auto&& self, int depth) -> void {
    if (depth == max_len) {
      out.push_back(Response{cur});
      return;
    }
    for (Token t = 0; t < vocab.size; ++t) {
      cur.push_back(t);
      if (t == vocab.eos)
        out.push_back(Response{cur});
      else
        self(self, depth + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

/// Materialized pi(.|x): every complete response with its exact probability.
template <typename Policy>
std::vector<std::pair<Response, double>> response_distribution(
    const Policy& policy, const ParamVector& theta, const Prompt& x,
    long long limit = kDefaultEnumerationLimit) {
  auto responses = enumerate_responses(policy.vocab(), policy.max_len(),
                                       nullptr, limit);
  std::vector<std::pair<Response, double>> out;
  out.reserve(responses.size());
  for (auto& a : responses) {
    double lp = log_prob(policy, theta, x, a);
    out.emplace_back(std::move(a), std::exp(lp));
  }
  return out;
}

}  // namespace cptlab

#pragma once

#include <optional>

#include "cptlab/vocab.hpp"

namespace cptlab {

/// Structural analog of the chain-of-thought output format: an optional
/// think block followed by the answer slot.
///
/// With the think block required, a conforming response is
///   THINK_OPEN, (up to think_len_max content tokens), THINK_CLOSE,
///   ANS, answer token, EOS
/// and without it simply ANS, answer token, EOS.
struct FormatTemplate {
  bool require_think_block = true;
  int think_len_max = 1;

  /// Response length needed to fit the longest conforming sequence.
  int required_max_len() const {
    return require_think_block ? think_len_max + 5 : 3;
  }
};

/// Answer-slot extraction: the token right after the first ANS marker.
/// Think-block content never participates.
inline std::optional<Token> extract_answer(const Response& a,
                                           const Vocab& vocab) {
  if (vocab.ans < 0) return std::nullopt;
  for (std::size_t i = 0; i + 1 < a.tokens.size(); ++i)
    if (a.tokens[i] == vocab.ans) return a.tokens[i + 1];
  return std::nullopt;
}

/// 1 iff the answer-slot token of `a` matches that of `a_star`.
inline double accuracy_reward(const Response& a, const Response& a_star,
                              const Vocab& vocab) {
  auto got = extract_answer(a, vocab);
  auto want = extract_answer(a_star, vocab);
  return (got && want && *got == *want) ? 1.0 : 0.0;
}

/// 1 iff the response matches the template exactly.
inline double format_reward(const Response& a, const FormatTemplate& tmpl,
                            const Vocab& vocab) {
  const auto& t = a.tokens;
  std::size_t pos = 0;
  auto next_is = [&](Token tok) {
    return pos < t.size() && tok >= 0 && t[pos] == tok;
  };
  if (tmpl.require_think_block) {
    if (vocab.think_open < 0) return 0.0;
    if (!next_is(vocab.think_open)) return 0.0;
    ++pos;
    int free_tokens = 0;
    while (pos < t.size() && t[pos] != vocab.think_close) {
      if (vocab.is_special(t[pos])) return 0.0;
      ++free_tokens;
      ++pos;
    }
    if (free_tokens > tmpl.think_len_max) return 0.0;
    if (!next_is(vocab.think_close)) return 0.0;
    ++pos;
  }
  if (!next_is(vocab.ans)) return 0.0;
  ++pos;
  if (pos >= t.size() || vocab.is_special(t[pos])) return 0.0;
  ++pos;
  if (!next_is(vocab.eos)) return 0.0;
  ++pos;
  return pos == t.size() ? 1.0 : 0.0;
}

/// Weighted accuracy + format reward. Weights are convex by construction,
/// which keeps every overall reward inside [0, 1].
struct RewardSpec {
  double w_acc = 0.9;
  double w_format = 0.1;
  FormatTemplate tmpl;

  void validate() const {
    if (w_acc < 0.0 || w_format < 0.0)
      throw InvalidInput("RewardSpec: weights must be non-negative");
    if (std::abs(w_acc + w_format - 1.0) > 1e-12)
      throw InvalidInput("RewardSpec: weights must sum to 1");
  }
};

inline double overall_reward(const Response& a, const Response& a_star,
                             const RewardSpec& spec, const Vocab& vocab) {
  return spec.w_acc * accuracy_reward(a, a_star, vocab) +
         spec.w_format * format_reward(a, spec.tmpl, vocab);
}

}  // namespace cptlab

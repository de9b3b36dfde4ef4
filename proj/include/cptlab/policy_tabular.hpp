#pragma once

#include <span>
#include <vector>

#include "cptlab/rng.hpp"
#include "cptlab/vocab.hpp"

namespace cptlab {

/// Exact autoregressive softmax policy: one logit row per
/// (context bucket, prefix) pair, where the prefix is keyed exactly.
///
/// Prefixes never contain EOS, so each of the W = |V|-1 non-EOS tokens is a
/// digit of a mixed-radix state index; prefixes of length l occupy the block
/// starting at sum_{j<l} W^j. Parameters are laid out as
/// theta[(bucket * n_states + state) * |V| + token].
class TabularPolicy {
 public:
  TabularPolicy(Vocab vocab, int max_len, int n_buckets)
      : vocab_(vocab), max_len_(max_len), n_buckets_(n_buckets) {
    vocab_.validate();
    if (max_len_ < 0) throw InvalidInput("TabularPolicy: max_len < 0");
    if (n_buckets_ < 1) throw InvalidInput("TabularPolicy: n_buckets < 1");
    long long w = vocab_.size - 1;
    long long states = 0, pw = 1;
    prefix_base_.assign(static_cast<std::size_t>(std::max(max_len_, 1)), 0);
    for (int l = 0; l < max_len_; ++l) {
      prefix_base_[static_cast<std::size_t>(l)] = states;
      states += pw;
      pw *= std::max<long long>(w, 1);
      if (states > (1LL << 40))
        throw InvalidInput("TabularPolicy: prefix space too large");
    }
    n_states_ = std::max<long long>(states, 1);  // max_len=0 still owns 1 row
  }

  const Vocab& vocab() const { return vocab_; }
  int max_len() const { return max_len_; }
  int n_buckets() const { return n_buckets_; }
  long long n_states() const { return n_states_; }

  int param_count() const {
    return static_cast<int>(n_buckets_ * n_states_ * vocab_.size);
  }

  /// Zero logits: uniform next-token distribution at every state.
  ParamVector init_params(Rng&) const {
    return ParamVector(static_cast<std::size_t>(param_count()), 0.0);
  }

  long long state_index(std::span<const Token> prefix) const {
    int l = static_cast<int>(prefix.size());
    if (l >= std::max(max_len_, 1))
      throw InvalidInput("TabularPolicy: prefix too long");
    long long w = vocab_.size - 1;
    long long ix = 0;
    for (Token t : prefix) {
      if (!vocab_.contains(t) || t == vocab_.eos)
        throw InvalidInput("TabularPolicy: bad prefix token");
      long long digit = t - (t > vocab_.eos ? 1 : 0);
      ix = ix * w + digit;
    }
    return prefix_base_[static_cast<std::size_t>(l)] + ix;
  }

  /// Raw logits for the next token after `prefix`.
  void next_logits(const ParamVector& theta, const Prompt& x,
                   std::span<const Token> prefix,
                   std::span<double> out) const {
    check_theta(theta);
    long long row = row_offset(x, prefix);
    for (int t = 0; t < vocab_.size; ++t)
      out[static_cast<std::size_t>(t)] =
          theta[static_cast<std::size_t>(row + t)];
  }

  /// Adds coeff * d(log softmax(logits)[tok])/d(theta) through `add(i, v)`.
  template <typename AddFn>
  void accumulate_step_score(const ParamVector& theta, const Prompt& x,
                             std::span<const Token> prefix, Token tok,
                             double coeff, AddFn&& add) const {
    check_theta(theta);
    long long row = row_offset(x, prefix);
    double mx = theta[static_cast<std::size_t>(row)];
    for (int t = 1; t < vocab_.size; ++t)
      mx = std::max(mx, theta[static_cast<std::size_t>(row + t)]);
    double z = 0.0;
    for (int t = 0; t < vocab_.size; ++t)
      z += std::exp(theta[static_cast<std::size_t>(row + t)] - mx);
    for (int t = 0; t < vocab_.size; ++t) {
      double p = std::exp(theta[static_cast<std::size_t>(row + t)] - mx) / z;
      double g = (t == tok ? 1.0 : 0.0) - p;
      add(static_cast<int>(row + t), coeff * g);
    }
  }

 private:
  long long row_offset(const Prompt& x, std::span<const Token> prefix) const {
    if (x.bucket < 0 || x.bucket >= n_buckets_)
      throw InvalidInput("TabularPolicy: prompt bucket out of range");
    return (static_cast<long long>(x.bucket) * n_states_ +
            state_index(prefix)) * vocab_.size;
  }

  void check_theta(const ParamVector& theta) const {
    if (static_cast<int>(theta.size()) != param_count())
      throw InvalidInput("TabularPolicy: theta dimension mismatch");
  }

  Vocab vocab_;
  int max_len_;
  int n_buckets_;
  long long n_states_;
  std::vector<long long> prefix_base_;
};

}  // namespace cptlab

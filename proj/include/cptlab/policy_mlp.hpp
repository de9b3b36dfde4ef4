#pragma once

#include <span>
#include <vector>

#include "cptlab/rng.hpp"
#include "cptlab/vocab.hpp"

namespace cptlab {

/// One-hidden-layer softmax policy over [context (+) position-tagged prefix
/// one-hots]. The stress-case realization: every parameter is shared across
/// buckets, so tasks interfere through the hidden and output layers.
///
/// input  = [context (context_dim), slot_0 .. slot_{max_len-2} (|V| each)]
/// hidden = tanh(W1 input + b1)
/// logits = W2 hidden + b2
///
/// theta = [W1 row-major (H x D), b1 (H), W2 row-major (|V| x H), b2 (|V|)]
class MlpPolicy {
 public:
  MlpPolicy(Vocab vocab, int max_len, int context_dim, int hidden)
      : vocab_(vocab),
        max_len_(max_len),
        context_dim_(context_dim),
        hidden_(hidden) {
    vocab_.validate();
    if (max_len_ < 0) throw InvalidInput("MlpPolicy: max_len < 0");
    if (context_dim_ < 1) throw InvalidInput("MlpPolicy: context_dim < 1");
    if (hidden_ < 1) throw InvalidInput("MlpPolicy: hidden < 1");
    input_dim_ = context_dim_ + std::max(max_len_ - 1, 0) * vocab_.size;
  }

  const Vocab& vocab() const { return vocab_; }
  int max_len() const { return max_len_; }
  int context_dim() const { return context_dim_; }
  int hidden() const { return hidden_; }
  int input_dim() const { return input_dim_; }

  int param_count() const {
    return hidden_ * input_dim_ + hidden_ + vocab_.size * hidden_ +
           vocab_.size;
  }

  /// Gaussian fan-in init for the weight matrices, zero biases.
  ParamVector init_params(Rng& rng) const {
    ParamVector theta(static_cast<std::size_t>(param_count()), 0.0);
    double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim_));
    double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (int i = 0; i < hidden_ * input_dim_; ++i)
      theta[static_cast<std::size_t>(i)] = s1 * rng.normal();
    int w2 = w2_offset();
    for (int i = 0; i < vocab_.size * hidden_; ++i)
      theta[static_cast<std::size_t>(w2 + i)] = s2 * rng.normal();
    return theta;
  }

  void next_logits(const ParamVector& theta, const Prompt& x,
                   std::span<const Token> prefix,
                   std::span<double> out) const {
    std::vector<double> input, hidden;
    forward(theta, x, prefix, input, hidden, out);
  }

  template <typename AddFn>
  void accumulate_step_score(const ParamVector& theta, const Prompt& x,
                             std::span<const Token> prefix, Token tok,
                             double coeff, AddFn&& add) const {
    std::vector<double> input, hidden, logits(static_cast<std::size_t>(
                                           vocab_.size));
    forward(theta, x, prefix, input, hidden, logits);

    // d logits = onehot(tok) - softmax(logits)
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    std::vector<double> dlogit(static_cast<std::size_t>(vocab_.size));
    for (int t = 0; t < vocab_.size; ++t)
      dlogit[static_cast<std::size_t>(t)] =
          (t == tok ? 1.0 : 0.0) -
          std::exp(logits[static_cast<std::size_t>(t)] - mx) / z;

    int w2 = w2_offset(), b2 = b2_offset(), b1 = b1_offset();
    // W2, b2
    for (int t = 0; t < vocab_.size; ++t) {
      double d = coeff * dlogit[static_cast<std::size_t>(t)];
      for (int h = 0; h < hidden_; ++h)
        add(w2 + t * hidden_ + h, d * hidden[static_cast<std::size_t>(h)]);
      add(b2 + t, d);
    }
    // back through tanh
    for (int h = 0; h < hidden_; ++h) {
      double dh = 0.0;
      for (int t = 0; t < vocab_.size; ++t)
        dh += dlogit[static_cast<std::size_t>(t)] *
              theta[static_cast<std::size_t>(w2 + t * hidden_ + h)];
      double hv = hidden[static_cast<std::size_t>(h)];
      double dpre = coeff * dh * (1.0 - hv * hv);
      for (int d = 0; d < input_dim_; ++d) {
        double xv = input[static_cast<std::size_t>(d)];
        if (xv != 0.0) add(h * input_dim_ + d, dpre * xv);
      }
      add(b1 + h, dpre);
    }
  }

 private:
  int b1_offset() const { return hidden_ * input_dim_; }
  int w2_offset() const { return hidden_ * input_dim_ + hidden_; }
  int b2_offset() const { return w2_offset() + vocab_.size * hidden_; }

  void forward(const ParamVector& theta, const Prompt& x,
               std::span<const Token> prefix, std::vector<double>& input,
               std::vector<double>& hidden, std::span<double> logits) const {
    if (static_cast<int>(theta.size()) != param_count())
      throw InvalidInput("MlpPolicy: theta dimension mismatch");
    if (static_cast<int>(x.context.size()) != context_dim_)
      throw InvalidInput("MlpPolicy: context dimension mismatch");
    if (static_cast<int>(prefix.size()) > std::max(max_len_ - 1, 0))
      throw InvalidInput("MlpPolicy: prefix too long");

    input.assign(static_cast<std::size_t>(input_dim_), 0.0);
    for (int d = 0; d < context_dim_; ++d)
      input[static_cast<std::size_t>(d)] = x.context[static_cast<std::size_t>(d)];
    for (std::size_t p = 0; p < prefix.size(); ++p) {
      Token t = prefix[p];
      if (!vocab_.contains(t) || t == vocab_.eos)
        throw InvalidInput("MlpPolicy: bad prefix token");
      input[static_cast<std::size_t>(context_dim_) + p * vocab_.size +
            static_cast<std::size_t>(t)] = 1.0;
    }

    hidden.assign(static_cast<std::size_t>(hidden_), 0.0);
    for (int h = 0; h < hidden_; ++h) {
      double acc = theta[static_cast<std::size_t>(b1_offset() + h)];
      const double* row = theta.data() + static_cast<std::size_t>(h) *
                                             static_cast<std::size_t>(input_dim_);
      for (int d = 0; d < input_dim_; ++d)
        acc += row[d] * input[static_cast<std::size_t>(d)];
      hidden[static_cast<std::size_t>(h)] = std::tanh(acc);
    }
    for (int t = 0; t < vocab_.size; ++t) {
      double acc = theta[static_cast<std::size_t>(b2_offset() + t)];
      const double* row =
          theta.data() + w2_offset() + static_cast<std::size_t>(t * hidden_);
      for (int h = 0; h < hidden_; ++h)
        acc += row[h] * hidden[static_cast<std::size_t>(h)];
      logits[static_cast<std::size_t>(t)] = acc;
    }
  }

  Vocab vocab_;
  int max_len_;
  int context_dim_;
  int hidden_;
  int input_dim_;
};

}  // namespace cptlab

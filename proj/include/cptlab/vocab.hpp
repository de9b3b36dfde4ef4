#pragma once

#include <vector>

#include "cptlab/common.hpp"

namespace cptlab {

/// Token alphabet of a policy. Ids are dense in [0, size). EOS is always
/// present; the structural-format specials (ANS, THINK_OPEN, THINK_CLOSE)
/// are -1 when the alphabet has no format machinery.
struct Vocab {
  int size = 0;
  Token eos = -1;
  Token ans = -1;
  Token think_open = -1;
  Token think_close = -1;

  bool contains(Token t) const { return t >= 0 && t < size; }

  bool is_special(Token t) const {
    return t == eos || (ans >= 0 && t == ans) ||
           (think_open >= 0 && t == think_open) ||
           (think_close >= 0 && t == think_close);
  }

  /// Non-special tokens (answer/think content). Laid out first, ids
  /// [0, content_count).
  int content_count() const {
    int specials = 1 + (ans >= 0) + (think_open >= 0) + (think_close >= 0);
    return size - specials;
  }

  void validate() const {
    if (size < 1) throw InvalidInput("Vocab: size must be >= 1");
    if (size > 16) throw InvalidInput("Vocab: size must be <= 16");
    if (!contains(eos)) throw InvalidInput("Vocab: eos out of range");
    Token specials[4] = {eos, ans, think_open, think_close};
    for (int i = 0; i < 4; ++i) {
      if (specials[i] < 0) continue;
      if (!contains(specials[i]))
        throw InvalidInput("Vocab: special id out of range");
      for (int j = i + 1; j < 4; ++j)
        if (specials[j] >= 0 && specials[i] == specials[j])
          throw InvalidInput("Vocab: special ids must be distinct");
    }
    // think tokens come as a pair
    if ((think_open >= 0) != (think_close >= 0))
      throw InvalidInput("Vocab: think_open/think_close must both be set");
  }
};

/// Content tokens [0, n_content), then ANS, THINK_OPEN, THINK_CLOSE when
/// requested, EOS last.
inline Vocab make_vocab(int n_content, bool with_think_tokens) {
  Vocab v;
  int next = n_content;
  v.ans = next++;
  if (with_think_tokens) {
    v.think_open = next++;
    v.think_close = next++;
  }
  v.eos = next++;
  v.size = next;
  v.validate();
  return v;
}

/// Minimal alphabet: n_content content tokens plus EOS. Handy for small
/// exact-enumeration studies that do not use the answer-slot format.
inline Vocab make_plain_vocab(int n_content) {
  Vocab v;
  v.eos = n_content;
  v.size = n_content + 1;
  v.validate();
  return v;
}

/// Prompt of a synthetic task: a context feature vector plus its bucket id
/// (the discrete cell of context space that determines the answer).
struct Prompt {
  int task_id = 0;
  int bucket = 0;
  std::vector<double> context;
  std::vector<Token> prompt_tokens;
};

/// Token sequence emitted by a policy. EOS, when present, is the final
/// token; sequences that hit the length cap carry no EOS.
struct Response {
  std::vector<Token> tokens;

  bool operator==(const Response& o) const { return tokens == o.tokens; }
};

/// Rejects out-of-vocabulary ids, interior EOS and over-long sequences.
inline void validate_response(const Vocab& vocab, const Response& a,
                              int max_len) {
  if (static_cast<int>(a.tokens.size()) > max_len)
    throw InvalidInput("Response: longer than max_len");
  for (std::size_t i = 0; i < a.tokens.size(); ++i) {
    if (!vocab.contains(a.tokens[i]))
      throw InvalidInput("Response: token id out of vocabulary");
    if (a.tokens[i] == vocab.eos && i + 1 != a.tokens.size())
      throw InvalidInput("Response: EOS before final position");
  }
}

}  // namespace cptlab

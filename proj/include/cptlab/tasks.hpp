#pragma once

#include <vector>

#include "cptlab/reward.hpp"
#include "cptlab/rng.hpp"
#include "cptlab/vocab.hpp"

namespace cptlab {

/// Deterministic rule of one synthetic task: which answer token each context
/// bucket demands, plus the reward wiring.
struct TaskSpec {
  int task_id = 0;
  int group_id = 0;
  std::vector<int> buckets;              // context support of this task
  std::vector<Token> answer_by_bucket;   // universe-sized, -1 off support
  RewardSpec reward;

  Token answer_for(int bucket) const {
    if (bucket < 0 || bucket >= static_cast<int>(answer_by_bucket.size()) ||
        answer_by_bucket[static_cast<std::size_t>(bucket)] < 0)
      throw InvalidInput("TaskSpec: bucket outside task support");
    return answer_by_bucket[static_cast<std::size_t>(bucket)];
  }
};

struct Example {
  Prompt prompt;
  Response target;
};

struct TaskDataset {
  TaskSpec spec;
  std::vector<Example> train;
  std::vector<Example> test;
  std::uint64_t seed = 0;
};

/// Knobs of the synthetic interfering stream. Consecutive tasks share
/// `overlap` of their bucket support with deliberately conflicting answers;
/// the rest of the support is fresh.
struct StreamConfig {
  int n_tasks = 5;
  int train_size = 256;
  int test_size = 128;
  double overlap = 0.5;
  std::uint64_t seed = 1;

  int buckets_per_task = 8;
  int n_answers = 2;         // answer alphabet used by regular tasks
  int reserved_answers = 0;  // extra content tokens no regular task maps to
  int incompetent_task = -1; // index whose mapping uses only reserved tokens

  int embed_dim = 8;   // per-bucket random dense features
  int noise_dim = 2;   // per-context jitter (also keeps contexts distinct)

  double w_acc = 0.9;
  double w_format = 0.1;
  FormatTemplate format;

  int content_tokens() const { return n_answers + reserved_answers; }

  Vocab vocab() const {
    return make_vocab(content_tokens(), format.require_think_block);
  }

  int max_len() const { return format.required_max_len(); }

  int shared_per_task() const {
    return static_cast<int>(overlap * buckets_per_task + 0.5);
  }

  int universe_buckets() const {
    int fresh = buckets_per_task - shared_per_task();
    return buckets_per_task + fresh * (n_tasks - 1);
  }

  int context_dim() const { return embed_dim + noise_dim; }

  RewardSpec reward_spec() const {
    RewardSpec r;
    r.w_acc = w_acc;
    r.w_format = w_format;
    r.tmpl = format;
    r.validate();
    return r;
  }

  void validate() const {
    if (n_tasks < 1) throw InvalidInput("stream: n_tasks must be >= 1");
    if (train_size < 1 || test_size < 1)
      throw InvalidInput("stream: split sizes must be >= 1");
    if (overlap < 0.0 || overlap > 1.0)
      throw InvalidInput("stream: overlap must be in [0,1]");
    if (buckets_per_task < 1)
      throw InvalidInput("stream: buckets_per_task must be >= 1");
    if (n_answers < 1) throw InvalidInput("stream: n_answers must be >= 1");
    if (reserved_answers < 0)
      throw InvalidInput("stream: reserved_answers must be >= 0");
    if (n_answers < 2 && n_tasks > 1 && shared_per_task() > 0)
      throw InvalidInput(
          "stream: conflicting overlap needs at least 2 answer tokens");
    if (incompetent_task >= n_tasks)
      throw InvalidInput("stream: incompetent_task out of range");
    if (incompetent_task >= 0 && reserved_answers < 1)
      throw InvalidInput(
          "stream: incompetent_task requires reserved_answers >= 1");
    if (embed_dim < 1) throw InvalidInput("stream: embed_dim must be >= 1");
    if (noise_dim < 1)
      throw InvalidInput(
          "stream: noise_dim must be >= 1 (keeps contexts distinct)");
    if (think_space_guard() > 16)
      throw InvalidInput("stream: vocabulary would exceed 16 tokens");
  }

 private:
  int think_space_guard() const {
    return content_tokens() + (format.require_think_block ? 4 : 2);
  }
};

namespace detail {

/// Conforming ground-truth response for `answer`: the think block, when
/// required, carries the answer token as its single content token.
inline Response make_target(Token answer, const StreamConfig& cfg,
                            const Vocab& vocab) {
  Response r;
  if (cfg.format.require_think_block) {
    r.tokens.push_back(vocab.think_open);
    if (cfg.format.think_len_max >= 1) r.tokens.push_back(answer);
    r.tokens.push_back(vocab.think_close);
  }
  r.tokens.push_back(vocab.ans);
  r.tokens.push_back(answer);
  r.tokens.push_back(vocab.eos);
  return r;
}

inline std::vector<double> bucket_embedding(const StreamConfig& cfg,
                                            int bucket) {
  Rng rng(mix_seed({cfg.seed, kSeedEmbed, static_cast<std::uint64_t>(bucket)}));
  std::vector<double> e(static_cast<std::size_t>(cfg.embed_dim));
  for (double& v : e) v = rng.normal();
  return e;
}

inline Example make_example(const StreamConfig& cfg, const Vocab& vocab,
                            int task, int bucket, Token answer,
                            std::uint64_t split_tag, int index) {
  Rng rng(mix_seed({cfg.seed, kSeedContext, static_cast<std::uint64_t>(task),
                    split_tag, static_cast<std::uint64_t>(index)}));
  Example ex;
  ex.prompt.task_id = task;
  ex.prompt.bucket = bucket;
  ex.prompt.context = bucket_embedding(cfg, bucket);
  for (int d = 0; d < cfg.noise_dim; ++d)
    ex.prompt.context.push_back(0.25 * rng.normal());
  int c = std::max(cfg.content_tokens(), 1);
  ex.prompt.prompt_tokens = {static_cast<Token>(bucket % c),
                             static_cast<Token>((bucket / c) % c)};
  ex.target = make_target(answer, cfg, vocab);
  return ex;
}

}  // namespace detail

/// Builds the task sequence. Deterministic given cfg.seed; train and test
/// contexts are disjoint by construction (separate noise streams).
inline std::vector<TaskDataset> generate_task_stream(const StreamConfig& cfg) {
  cfg.validate();
  const Vocab vocab = cfg.vocab();
  const int universe = cfg.universe_buckets();
  const int shared = cfg.n_tasks > 1 ? cfg.shared_per_task() : 0;
  const int fresh = cfg.buckets_per_task - shared;

  std::vector<TaskDataset> stream;
  stream.reserve(static_cast<std::size_t>(cfg.n_tasks));
  int next_fresh_bucket = cfg.buckets_per_task;

  for (int t = 0; t < cfg.n_tasks; ++t) {
    TaskDataset ds;
    ds.seed = mix_seed({cfg.seed, kSeedTask, static_cast<std::uint64_t>(t)});
    ds.spec.task_id = t;
    ds.spec.group_id = (cfg.overlap > 0.0 && cfg.n_tasks > 1) ? 0 : t;
    ds.spec.reward = cfg.reward_spec();
    ds.spec.answer_by_bucket.assign(static_cast<std::size_t>(universe), -1);

    Rng rng(mix_seed({cfg.seed, kSeedBuckets, static_cast<std::uint64_t>(t)}));
    if (t == 0) {
      for (int b = 0; b < cfg.buckets_per_task; ++b)
        ds.spec.buckets.push_back(b);
    } else {
      // seeded subset of the previous task's support, then fresh buckets
      std::vector<int> prev = stream.back().spec.buckets;
      for (int k = 0; k < shared; ++k) {
        int pick = rng.uniform_int(static_cast<int>(prev.size()));
        ds.spec.buckets.push_back(prev[static_cast<std::size_t>(pick)]);
        prev.erase(prev.begin() + pick);
      }
      for (int k = 0; k < fresh; ++k)
        ds.spec.buckets.push_back(next_fresh_bucket++);
    }

    Rng map_rng(
        mix_seed({cfg.seed, kSeedMapping, static_cast<std::uint64_t>(t)}));
    const bool incompetent = (t == cfg.incompetent_task);
    for (std::size_t k = 0; k < ds.spec.buckets.size(); ++k) {
      int b = ds.spec.buckets[k];
      Token a;
      if (incompetent) {
        a = static_cast<Token>(cfg.n_answers +
                               map_rng.uniform_int(cfg.reserved_answers));
      } else {
        a = static_cast<Token>(map_rng.uniform_int(cfg.n_answers));
        if (t > 0 && static_cast<int>(k) < shared) {
          // conflicting answer on shared support
          Token prev_a =
              stream.back().spec.answer_by_bucket[static_cast<std::size_t>(b)];
          if (prev_a >= 0 && prev_a < cfg.n_answers) {
            while (a == prev_a)
              a = static_cast<Token>(map_rng.uniform_int(cfg.n_answers));
          }
        }
      }
      ds.spec.answer_by_bucket[static_cast<std::size_t>(b)] = a;
    }

    auto fill = [&](std::vector<Example>& out, int size,
                    std::uint64_t split_tag) {
      out.reserve(static_cast<std::size_t>(size));
      for (int i = 0; i < size; ++i) {
        int b = ds.spec.buckets[static_cast<std::size_t>(
            i % static_cast<int>(ds.spec.buckets.size()))];
        out.push_back(detail::make_example(cfg, vocab, t, b,
                                           ds.spec.answer_for(b), split_tag,
                                           i));
      }
    };
    fill(ds.train, cfg.train_size, 0x545249ULL /*TRN*/);
    fill(ds.test, cfg.test_size, 0x545354ULL /*TST*/);
    stream.push_back(std::move(ds));
  }
  return stream;
}

}  // namespace cptlab

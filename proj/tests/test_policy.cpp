#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "cptlab/policy.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace cptlab;

namespace {

Prompt bucket_prompt(int bucket = 0) {
  Prompt x;
  x.bucket = bucket;
  return x;
}

}  // namespace

TEST_CASE("log_prob: uniform tabular policy") {
  // |V| = 4 tokens, zero logits -> every step is uniform 1/4.
  TabularPolicy policy(make_plain_vocab(3), 2, 1);
  ParamVector theta(static_cast<std::size_t>(policy.param_count()), 0.0);
  Prompt x = bucket_prompt();

  CHECK(log_prob(policy, theta, x, Response{{0, 1}}) ==
        Catch::Approx(std::log(1.0 / 16.0)).epsilon(1e-12));
  CHECK(log_prob(policy, theta, x, Response{{0, 3}}) ==
        Catch::Approx(std::log(1.0 / 16.0)).epsilon(1e-12));
  CHECK(log_prob(policy, theta, x, Response{{3}}) ==
        Catch::Approx(std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("log_prob: single-token vocabulary is certain") {
  TabularPolicy policy(make_plain_vocab(0), 3, 1);
  ParamVector theta(static_cast<std::size_t>(policy.param_count()), 5.0);
  CHECK(log_prob(policy, theta, bucket_prompt(), Response{{0}}) == 0.0);
}

TEST_CASE("log_prob: TinyMLP matches hand-rolled forward pass") {
  Rng rng(2024);
  MlpPolicy policy(make_plain_vocab(2), 3, 4, 5);
  ParamVector theta = policy.init_params(rng);
  Prompt x = gen::random_prompt(rng, 1, 4);
  Response a{{1, 0, 2}};

  double want = oracles::mlp_log_prob_oracle(theta, 4, 5, 3, 3, x.context,
                                             a.tokens);
  CHECK(log_prob(policy, theta, x, a) == Catch::Approx(want).epsilon(1e-12));
  CHECK(log_prob(policy, theta, x, a) <= 0.0);
}

TEST_CASE("log_prob: rejects invalid responses") {
  TabularPolicy policy(make_plain_vocab(2), 2, 1);
  ParamVector theta(static_cast<std::size_t>(policy.param_count()), 0.0);
  Prompt x = bucket_prompt();
  CHECK_THROWS_AS(log_prob(policy, theta, x, Response{{7}}), InvalidInput);
  CHECK_THROWS_AS(log_prob(policy, theta, x, Response{{0, 1, 0}}),
                  InvalidInput);
  // interior EOS violates the response invariant
  CHECK_THROWS_AS(log_prob(policy, theta, x, Response{{2, 0}}), InvalidInput);
}

TEST_CASE("sample: near-zero temperature tracks greedy decode") {
  Rng setup(7);
  TabularPolicy policy(make_plain_vocab(3), 2, 1);
  ParamVector theta = gen::random_theta(setup, policy.param_count());
  Prompt x = bucket_prompt();
  Response g = greedy_decode(policy, theta, x);

  int agree = 0;
  for (int s = 0; s < 1000; ++s) {
    Rng rng(mix_seed({11, static_cast<std::uint64_t>(s)}));
    if (sample(policy, theta, x, 1e-6, rng) == g) ++agree;
  }
  CHECK(agree >= 999);
}

TEST_CASE("sample: uniform two-token frequencies") {
  TabularPolicy policy(make_plain_vocab(1), 1, 1);  // tokens {0, eos}
  ParamVector theta(static_cast<std::size_t>(policy.param_count()), 0.0);
  Prompt x = bucket_prompt();
  int zeros = 0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    Rng rng(mix_seed({99, static_cast<std::uint64_t>(s)}));
    Response a = sample(policy, theta, x, 1.0, rng);
    if (a.tokens[0] == 0) ++zeros;
  }
  CHECK(std::abs(zeros / static_cast<double>(n) - 0.5) < 0.02);
}

TEST_CASE("sample: identical seeds give identical responses") {
  Rng setup(13);
  auto inst = gen::random_mlp(setup);
  Rng r1(4242), r2(4242);
  Response a = sample(inst.policy, inst.theta, inst.prompt, 1.0, r1);
  Response b = sample(inst.policy, inst.theta, inst.prompt, 1.0, r2);
  CHECK(a == b);
}

TEST_CASE("sample: rejects non-positive temperature") {
  TabularPolicy policy(make_plain_vocab(1), 1, 1);
  ParamVector theta(static_cast<std::size_t>(policy.param_count()), 0.0);
  Rng rng(1);
  CHECK_THROWS_AS(sample(policy, theta, bucket_prompt(), 0.0, rng),
                  InvalidInput);
  CHECK_THROWS_AS(sample(policy, theta, bucket_prompt(), -1.0, rng),
                  InvalidInput);
}

TEST_CASE("greedy_decode: ties break toward the lowest token id") {
  TabularPolicy policy(make_plain_vocab(2), 3, 1);  // tokens {0,1,eos=2}
  ParamVector theta(static_cast<std::size_t>(policy.param_count()), 0.0);
  Response g = greedy_decode(policy, theta, bucket_prompt());
  CHECK(g == Response{{0, 0, 0}});

  // when EOS itself is the lowest id, decoding stops immediately
  Vocab v;
  v.size = 3;
  v.eos = 0;
  TabularPolicy p2(v, 3, 1);
  ParamVector t2(static_cast<std::size_t>(p2.param_count()), 0.0);
  CHECK(greedy_decode(p2, t2, bucket_prompt()) == Response{{0}});
}

TEST_CASE("greedy_decode: follows the dominant logit path") {
  TabularPolicy policy(make_plain_vocab(2), 3, 1);
  ParamVector theta(static_cast<std::size_t>(policy.param_count()), 0.0);
  Prompt x = bucket_prompt();
  // force the path 1 -> 0 -> eos through one dominant logit per state
  auto boost = [&](std::vector<Token> prefix, Token tok) {
    long long row = policy.state_index(prefix) * policy.vocab().size;
    theta[static_cast<std::size_t>(row + tok)] = 9.0;
  };
  boost({}, 1);
  boost({1}, 0);
  boost({1, 0}, 2);
  CHECK(greedy_decode(policy, theta, x) == Response{{1, 0, 2}});
}

TEST_CASE("greedy_decode: MLP matches per-step argmax oracle") {
  Rng rng(31);
  auto inst = gen::random_mlp(rng);
  Response g = greedy_decode(inst.policy, inst.theta, inst.prompt);

  const Vocab& vocab = inst.policy.vocab();
  std::vector<Token> prefix;
  for (Token tok : g.tokens) {
    std::vector<double> logits(static_cast<std::size_t>(vocab.size));
    inst.policy.next_logits(inst.theta, inst.prompt, prefix, logits);
    int best = 0;
    for (int t = 1; t < vocab.size; ++t)
      if (logits[static_cast<std::size_t>(t)] >
          logits[static_cast<std::size_t>(best)])
        best = t;
    CHECK(tok == best);
    prefix.push_back(tok);
  }
}

TEST_CASE("score: canonical softmax score on a single tabular step") {
  TabularPolicy policy(make_plain_vocab(3), 1, 1);
  Rng rng(5);
  ParamVector theta = gen::random_theta(rng, policy.param_count());
  Prompt x = bucket_prompt();
  Response a{{2}};

  ParamVector s = score(policy, theta, x, a);
  double z = 0.0;
  for (int t = 0; t < 4; ++t) z += std::exp(theta[static_cast<std::size_t>(t)]);
  for (int t = 0; t < 4; ++t) {
    double p = std::exp(theta[static_cast<std::size_t>(t)]) / z;
    double want = (t == 2 ? 1.0 : 0.0) - p;
    CHECK(s[static_cast<std::size_t>(t)] == Catch::Approx(want).margin(1e-12));
  }
}

TEST_CASE("score: matches central finite differences") {
  Rng rng(77);
  for (int trial = 0; trial < 8; ++trial) {
    auto run = [&](auto inst) {
      Rng sampler(mix_seed({123, static_cast<std::uint64_t>(trial)}));
      Response a =
          gen::random_response(inst.policy, inst.theta, inst.prompt, sampler);
      ParamVector got = score(inst.policy, inst.theta, inst.prompt, a);
      ParamVector want = oracles::finite_difference_gradient(
          [&](const ParamVector& th) {
            return log_prob(inst.policy, th, inst.prompt, a);
          },
          inst.theta);
      CHECK(oracles::relative_l2_error(got, want) <= 1e-5);
    };
    if (trial % 2 == 0)
      run(gen::random_tabular(rng));
    else
      run(gen::random_mlp(rng));
  }
}

TEST_CASE("score: components sum to zero within each state block") {
  TabularPolicy policy(make_plain_vocab(1), 1, 1);
  Rng rng(3);
  ParamVector theta = gen::random_theta(rng, policy.param_count());
  ParamVector s = score(policy, theta, bucket_prompt(), Response{{0}});
  CHECK(s[0] + s[1] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("score: zero mean under the policy distribution") {
  Rng rng(2718);
  for (int trial = 0; trial < 4; ++trial) {
    auto check = [&](const auto& policy, const ParamVector& theta,
                     const Prompt& x) {
      ParamVector acc(static_cast<std::size_t>(policy.param_count()), 0.0);
      for (const auto& [a, p] : response_distribution(policy, theta, x))
        accumulate_score(policy, theta, x, a, p, acc);
      for (double v : acc) CHECK(std::abs(v) <= 1e-8);
    };
    if (trial % 2 == 0) {
      auto inst = gen::random_tabular(rng, 3, 2);
      check(inst.policy, inst.theta, inst.prompt);
    } else {
      auto inst = gen::random_mlp(rng, 3, 2);
      check(inst.policy, inst.theta, inst.prompt);
    }
  }
}

TEST_CASE("enumerate_responses: exact small space") {
  Vocab v = make_plain_vocab(2);  // {0, 1, eos=2}
  auto rs = enumerate_responses(v, 2);

  std::vector<Response> want = {Response{{0, 0}}, Response{{0, 1}},
                                Response{{0, 2}}, Response{{1, 0}},
                                Response{{1, 1}}, Response{{1, 2}},
                                Response{{2}}};
  REQUIRE(rs.size() == want.size());
  for (const auto& r : want)
    CHECK(std::find(rs.begin(), rs.end(), r) != rs.end());

  // closed form sum_{l<=L} W^l
  long long closed = 1 + 2 + 4;
  CHECK(static_cast<long long>(rs.size()) == closed);
}

TEST_CASE("enumerate_responses: degenerate and counted cases") {
  CHECK(enumerate_responses(make_plain_vocab(3), 0).size() == 1);
  CHECK(enumerate_responses(make_plain_vocab(3), 0)[0].tokens.empty());

  Vocab v = make_plain_vocab(4);  // 4 content + eos
  auto rs = enumerate_responses(v, 4, nullptr, 1 << 20);
  CHECK(static_cast<long long>(rs.size()) ==
        oracles::count_responses_oracle(v.size, v.eos, 4));

  // duplicates would break the "exactly once" contract
  auto sorted = rs;
  std::sort(sorted.begin(), sorted.end(),
            [](const Response& a, const Response& b) {
              return a.tokens < b.tokens;
            });
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("enumerate_responses: refuses oversized spaces") {
  Vocab v = make_plain_vocab(9);
  CHECK_THROWS_AS(enumerate_responses(v, 8, nullptr, 65536),
                  EnumerationRefused);
}

TEST_CASE("response_distribution: uniform single step") {
  TabularPolicy policy(make_plain_vocab(3), 1, 1);
  ParamVector theta(static_cast<std::size_t>(policy.param_count()), 0.0);
  auto dist = response_distribution(policy, theta, bucket_prompt());
  REQUIRE(dist.size() == 4);
  for (const auto& [a, p] : dist) CHECK(p == Catch::Approx(0.25).margin(1e-14));
}

TEST_CASE("response_distribution: normalizes for seeded policies") {
  Rng rng(909);
  for (int trial = 0; trial < 3; ++trial) {
    auto inst = gen::random_mlp(rng, 3, 3);
    KahanSum total;
    for (const auto& [a, p] :
         response_distribution(inst.policy, inst.theta, inst.prompt))
      total.add(p);
    CHECK(std::abs(total.value() - 1.0) <= 1e-12);
  }
}

TEST_CASE("response_distribution: matches Monte Carlo frequencies") {
  Rng setup(55);
  TabularPolicy policy(make_plain_vocab(2), 2, 1);
  ParamVector theta = gen::random_theta(setup, policy.param_count());
  Prompt x = bucket_prompt();

  auto dist = response_distribution(policy, theta, x);
  std::map<std::vector<Token>, int> counts;
  const int n = 100000;
  for (int s = 0; s < n; ++s) {
    Rng rng(mix_seed({777, static_cast<std::uint64_t>(s)}));
    ++counts[sample(policy, theta, x, 1.0, rng).tokens];
  }
  for (const auto& [a, p] : dist) {
    double freq = counts[a.tokens] / static_cast<double>(n);
    CHECK(std::abs(freq - p) < 0.01);
  }
}

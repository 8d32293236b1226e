#include <gtest/gtest.h>

#include "edgesched/baselines.hpp"
#include "test_util.hpp"

using namespace edgesched;
using edgesched::testing::chain;
using edgesched::testing::req;
using edgesched::testing::single_function;

namespace {

Money log_cost(const std::vector<EpisodeRecord>& log) {
  Money m;
  for (const auto& r : log) m += -r.reward;
  return m;
}

struct MicroInstance {
  std::shared_ptr<const Topology> topo;
  Catalog catalog;
  Trace trace;
};

// Up to 3 nodes with tight memory so that placements interact.
MicroInstance micro_instance(std::uint64_t seed) {
  Rng rng(seed);
  const auto n = 2 + uniform_index(rng, 2);
  const std::vector<NodeClass> classes{{2.4, 300}, {3.0, 250}, {3.6, 200}};
  MicroInstance m;
  m.topo = std::make_shared<const Topology>(generate_topology(n, classes, 300.0, 250.0, seed));
  m.catalog = default_catalog(m.topo->nodes(), CostParams{}, 2.0);
  m.catalog[3].duration_slots = 2;
  do {
    m.trace = generate_trace(*m.topo, m.catalog, 4, 1.5, {0.25, 0.25, 0.25, 0.25}, rng());
  } while (m.trace.empty());
  if (m.trace.size() > 6) m.trace.resize(6);
  return m;
}

}  // namespace

TEST(Greedy, PrefersWarmLocalContainer) {
  Environment env(chain(3), single_function(), CostParams{});
  const Money b = Money::parse("100");
  const auto log = greedy_episode(env, Trace{req(0, 1, 0, b), req(3, 1, 0, b)});
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0].target, 1);
  EXPECT_TRUE(log[0].spawned);
  EXPECT_EQ(log[1].target, 1);
  EXPECT_FALSE(log[1].spawned);
  EXPECT_EQ(log[1].breakdown.total, Money::parse("0.5"));
}

TEST(Greedy, RejectsWhenEverythingIsOverBudget) {
  Environment env(chain(3), single_function(100.0, Money::parse("0.8")), CostParams{});
  const auto log = greedy_episode(env, Trace{req(0, 0, 0, Money::parse("0.8"))});
  EXPECT_FALSE(log[0].accepted);
  EXPECT_EQ(log[0].reward, -CostParams{}.reject_penalty);
}

TEST(Random, SingleFeasibleActionAndReproducibility) {
  // Cold start costs 0.9 against a 0.8 budget: reject is the only choice.
  Environment env(chain(1), single_function(100.0, Money::parse("0.8")), CostParams{});
  const Trace t{req(0, 0, 0, Money::parse("0.8")), req(1, 0, 0, Money::parse("0.8"))};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& r : random_episode(env, t, seed)) EXPECT_FALSE(r.accepted);
  }
  const auto topo = chain(3);
  Environment env3(topo, default_catalog(topo->nodes(), CostParams{}, 3.0), CostParams{});
  const auto trace = generate_trace(*topo, env3.catalog(), 30, 2.0, {0.25, 0.25, 0.25, 0.25}, 4);
  auto a = random_episode(env3, trace, 8, 0, false);
  auto b2 = random_episode(env3, trace, 8, 0, false);
  EXPECT_EQ(a, b2);
}

TEST(Oracle, ZeroCostsAcceptEverything) {
  const auto topo = chain(2, 1000.0);
  const Environment env(topo, single_function(), CostParams{0.0, 0.0, 0.0, Money::parse("5")});
  const Money b = Money::parse("100");
  const Trace t{req(0, 0, 0, b), req(0, 1, 0, b), req(1, 0, 0, b)};
  const auto res = oracle_optimal(env, t);
  EXPECT_EQ(res.cost, Money::zero());
  for (int a : res.actions) EXPECT_NE(a, env.action_space().reject_index());
}

TEST(Oracle, SingleForcedColdStart) {
  const auto res = oracle_optimal(chain(1), single_function(), CostParams{}, Trace{req(0, 0, 0, Money::parse("100"))});
  // q + eps * dur = 0.4 + 0.5
  EXPECT_EQ(res.cost, Money::parse("0.9"));
  EXPECT_EQ(res.actions, (std::vector<int>{1}));
}

TEST(Oracle, PaysSwitchingCostOnceWithinKeepalive) {
  const Money b = Money::parse("100");
  const auto res = oracle_optimal(chain(1, 1000.0), single_function(), CostParams{}, Trace{req(0, 0, 0, b), req(4, 0, 0, b)});
  // By hand: spawn+spawn = 1.8, spawn+reuse = 1.4.
  EXPECT_EQ(res.cost, Money::parse("1.4"));
  EXPECT_EQ(res.actions, (std::vector<int>{1, 0}));
}

TEST(Oracle, StateLimitRaises) {
  const auto m = micro_instance(3);
  OracleOptions opts;
  opts.max_states = 5;
  EXPECT_THROW(oracle_optimal(m.topo, m.catalog, CostParams{}, m.trace, {}, opts), OracleLimitExceeded);
}

TEST(BaselinesProperty, PruningMatchesPlainEnumeration) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto m = micro_instance(seed);
    OracleOptions plain;
    plain.prune = false;
    plain.max_states = 500'000;
    const auto a = oracle_optimal(m.topo, m.catalog, CostParams{}, m.trace);
    const auto b = oracle_optimal(m.topo, m.catalog, CostParams{}, m.trace, {}, plain);
    ASSERT_EQ(a.cost, b.cost) << "seed " << seed;
    ASSERT_LE(a.states, b.states);
  }
}

TEST(BaselinesProperty, OracleBelowGreedyBelowRandomMean) {
  for (std::uint64_t seed = 100; seed < 150; ++seed) {
    const auto m = micro_instance(seed);
    Environment env(m.topo, m.catalog, CostParams{});
    const Money oracle = oracle_optimal(env, m.trace).cost;
    const Money greedy = log_cost(greedy_episode(env, m.trace, 0, false));
    double random_sum = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) random_sum += log_cost(random_episode(env, m.trace, s, 0, false)).to_double();
    ASSERT_LE(oracle, greedy) << "seed " << seed;
    ASSERT_LE(greedy.to_double(), random_sum / 100.0) << "seed " << seed;
  }
}

TEST(BaselinesProperty, ReturnedSequencesReplayToSameCost) {
  for (std::uint64_t seed = 200; seed < 230; ++seed) {
    const auto m = micro_instance(seed);
    Environment env(m.topo, m.catalog, CostParams{});
    const auto res = oracle_optimal(env, m.trace);
    const auto replayed = replay_actions(env, m.trace, res.actions);
    ASSERT_EQ(log_cost(replayed), res.cost);
    ASSERT_EQ(env.episode_cost(), res.cost);

    const auto greedy = greedy_episode(env, m.trace, 0, false);
    std::vector<int> actions;
    for (const auto& r : greedy) {
      actions.push_back(r.accepted ? env.action_space().index(Action{r.target, r.spawned})
                                   : env.action_space().reject_index());
    }
    ASSERT_EQ(log_cost(replay_actions(env, m.trace, actions)), log_cost(greedy));
  }
}

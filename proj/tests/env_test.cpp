#include <gtest/gtest.h>

#include "edgesched/env.hpp"
#include "test_util.hpp"

using namespace edgesched;
using edgesched::testing::chain;
using edgesched::testing::req;
using edgesched::testing::single_function;

namespace {

Environment make_env(int n = 3, double mem = 250.0, Money budget = Money::parse("100")) {
  return Environment(chain(n, mem), single_function(100.0, budget), CostParams{});
}

}  // namespace

TEST(Env, ResetState) {
  auto env = make_env();
  const auto obs = env.reset(Trace{req(0, 1, 0, Money::parse("100"))});
  EXPECT_EQ(obs.size(), env.observation_size());
  EXPECT_EQ(env.observation_size(), 2u * 3 + 3 * 1 + 1);
  EXPECT_TRUE(env.containers().empty());
  for (NodeId v = 0; v < 3; ++v) EXPECT_EQ(env.free_mem(v), 250.0);
  const Observation expected{1, 1, 1, 0, 0, 0, 0, 1, 0, 1};
  EXPECT_EQ(obs, expected);
  EXPECT_EQ(env.cursor(), 0u);
  EXPECT_FALSE(env.done());
}

TEST(Env, EmptyTraceRejected) {
  auto env = make_env();
  EXPECT_THROW(env.reset(Trace{}), ValidationError);
  EXPECT_TRUE(env.done());
  EXPECT_THROW(env.step(std::nullopt), StateError);
}

TEST(Env, ResetRejectsBadTrace) {
  auto env = make_env();
  EXPECT_THROW(env.reset(Trace{req(0, 7, 0, Money::parse("1"))}), ValidationError);
  EXPECT_THROW(env.reset(Trace{req(0, 0, 3, Money::parse("1"))}), ValidationError);
}

TEST(Env, FeasibilityOnColdCluster) {
  auto env = make_env();
  env.reset(Trace{req(0, 0, 0, Money::parse("100"))});
  // No warm containers yet: only spawn actions, all nodes reachable.
  const auto actions = env.feasible_actions();
  EXPECT_EQ(actions, (std::vector<Action>{{0, true}, {1, true}, {2, true}}));
  const auto mask = env.action_mask();
  EXPECT_EQ(mask, (ActionMask{0, 1, 0, 1, 0, 1, 1}));
}

TEST(Env, BudgetBetweenWarmLocalAndColdRemote) {
  // Cold local 0.9, cold at one hop 1.2, cold at two hops 1.5.
  auto env = make_env(3, 250.0, Money::parse("1.0"));
  const Money b = Money::parse("1.0");
  env.reset(Trace{req(0, 0, 0, b), req(5, 0, 0, b)});
  EXPECT_EQ(env.feasible_actions(), (std::vector<Action>{{0, true}}));
  env.step(Action{0, true});
  // Warm local (0.5) and cold local (0.9) both fit; remote ones do not.
  EXPECT_EQ(env.feasible_actions(), (std::vector<Action>{{0, false}, {0, true}}));
}

TEST(Env, NoIdleContainerWhileBusy) {
  auto env = Environment(chain(1), single_function(100.0, Money::parse("100"), 3), CostParams{});
  env.reset(Trace{req(0, 0, 0, Money::parse("100")), req(1, 0, 0, Money::parse("100")),
                  req(3, 0, 0, Money::parse("100"))});
  env.step(Action{0, true});
  EXPECT_FALSE(env.quote(Action{0, false}).has_value());  // still busy at t=1
  env.step(Action{0, true});
  EXPECT_TRUE(env.quote(Action{0, false}).has_value());  // first container idle at t=3
}

TEST(Env, TwoColdPlacementsConsumeMemory) {
  auto env = make_env(1, 250.0);
  const Money b = Money::parse("100");
  env.reset(Trace{req(0, 0, 0, b), req(0, 0, 0, b), req(0, 0, 0, b)});
  const auto s1 = env.step(Action{0, true});
  EXPECT_TRUE(s1.accepted);
  EXPECT_EQ(s1.reward, -Money::parse("0.9"));
  const auto s2 = env.step(Action{0, true});
  EXPECT_TRUE(s2.accepted);
  EXPECT_EQ(env.free_mem(0), 50.0);
  EXPECT_EQ(env.container_count(0, 0), 2);
  // Third spawn does not fit; both containers are busy. Coerced to reject.
  EXPECT_EQ(env.action_mask(), (ActionMask{0, 0, 1}));
  const auto s3 = env.step(Action{0, true});
  EXPECT_FALSE(s3.accepted);
  EXPECT_EQ(s3.action_index, 2);
  EXPECT_EQ(s3.reward, -CostParams{}.reject_penalty);
  EXPECT_TRUE(s3.done);
  EXPECT_EQ(env.episode_cost(), Money::parse("1.8") + CostParams{}.reject_penalty);
}

TEST(Env, WarmReuseCostsAndKeepalive) {
  auto env = make_env(3);
  const Money b = Money::parse("100");
  EnvParams ep;
  ep.keepalive_slots = 2;
  env = Environment(chain(3), single_function(100.0, b), CostParams{}, ep);
  env.reset(Trace{req(0, 0, 0, b), req(2, 2, 0, b), req(6, 0, 0, b)});
  env.step(Action{0, true});  // busy until 1, warm until 3
  const auto s = env.step(Action{0, false});
  ASSERT_TRUE(s.breakdown.has_value());
  EXPECT_EQ(*s.breakdown,
            (CostBreakdown{Money::zero(), Money::parse("0.5"), Money::parse("0.6"), Money::parse("1.1")}));
  // Reuse at t=2 extends warmth to 5; at t=6 it has been evicted.
  EXPECT_TRUE(env.containers().empty());
  EXPECT_EQ(env.free_mem(0), 250.0);
}

TEST(Env, ContainerStillWarmAtBoundary) {
  const Money b = Money::parse("100");
  EnvParams ep;
  ep.keepalive_slots = 2;
  Environment env(chain(1), single_function(100.0, b), CostParams{}, ep);
  env.reset(Trace{req(0, 0, 0, b), req(3, 0, 0, b)});
  env.step(Action{0, true});  // warm until 3
  EXPECT_EQ(env.containers().size(), 1u);
  EXPECT_TRUE(env.quote(Action{0, false}).has_value());
}

TEST(Env, ActionIndexBijection) {
  for (std::size_t n : {1u, 2u, 7u}) {
    ActionSpace space(n);
    EXPECT_EQ(space.size(), 2 * n + 1);
    for (int i = 0; i < static_cast<int>(space.size()); ++i) EXPECT_EQ(space.index(space.decode(i)), i);
    EXPECT_THROW(space.decode(static_cast<int>(space.size())), ValidationError);
    EXPECT_THROW(space.decode(-1), ValidationError);
  }
}

TEST(Env, StepAfterDoneThrows) {
  auto env = make_env();
  env.reset(Trace{req(0, 0, 0, Money::parse("100"))});
  const auto s = env.step(std::nullopt);
  EXPECT_TRUE(s.done);
  EXPECT_EQ(s.observation, Observation(env.observation_size(), 0.0));
  EXPECT_THROW(env.step(std::nullopt), StateError);
}

TEST(Env, ObservationSaturatesContainerCounts) {
  EnvParams ep;
  ep.f_cap = 2;
  const Money b = Money::parse("100");
  Environment env(chain(1, 1000.0), single_function(100.0, b), CostParams{}, ep);
  env.reset(Trace{req(0, 0, 0, b), req(0, 0, 0, b), req(0, 0, 0, b), req(0, 0, 0, b)});
  env.step(Action{0, true});
  EXPECT_EQ(env.encode_observation()[1], 0.5);
  env.step(Action{0, true});
  env.step(Action{0, true});
  const auto obs = env.encode_observation();
  EXPECT_DOUBLE_EQ(obs[0], 0.7);
  EXPECT_EQ(obs[1], 1.0);
}

TEST(Env, EpisodeLogMatchesSteps) {
  auto env = make_env();
  env.set_episode(4);
  const Money b = Money::parse("100");
  env.reset(Trace{req(0, 0, 0, b), req(1, 1, 0, b)});
  env.step(Action{1, true}, 12.5);
  env.step(std::nullopt);
  const auto& log = env.episode_log();
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0].episode, 4);
  EXPECT_EQ(log[0].target, 1);
  EXPECT_TRUE(log[0].spawned);
  EXPECT_EQ(log[0].decision_us, 12.5);
  EXPECT_EQ(log[0].breakdown.total, Money::parse("1.2"));
  EXPECT_EQ(log[1].target, -1);
  EXPECT_FALSE(log[1].accepted);
  EXPECT_EQ(log[1].breakdown.total, Money::zero());
}

TEST(EnvProperty, LedgerIdentitiesUnderRandomPlay) {
  Rng rng(31);
  const auto topo = generate_topology(6, {{2.4, 400}, {3.0, 600}, {3.6, 300}}, 500.0, 250.0, 4);
  auto cat = default_catalog(topo.nodes(), CostParams{}, 2.0);
  cat[2].duration_slots = 3;
  EnvParams ep;
  ep.keepalive_slots = 3;
  Environment env(std::make_shared<const Topology>(topo), cat, CostParams{}, ep);
  std::size_t steps = 0;
  for (int episode = 0; steps < 10000; ++episode) {
    env.set_episode(episode);
    env.reset(generate_trace(topo, cat, 60, 1.5, {0.25, 0.25, 0.25, 0.25}, 100 + episode));
    Money cost_sum;
    while (!env.done()) {
      const auto mask = env.action_mask();
      ASSERT_EQ(mask.back(), 1);
      const int idx = static_cast<int>(uniform_index(rng, mask.size()));
      const bool feasible = mask[static_cast<std::size_t>(idx)] == 1 && idx != static_cast<int>(mask.size()) - 1;
      const auto s = env.step(idx);
      ++steps;
      ASSERT_EQ(s.accepted, feasible);
      if (s.accepted) {
        ASSERT_EQ(s.breakdown->total, s.breakdown->c_s + s.breakdown->c_e + s.breakdown->c_t);
        ASSERT_EQ(s.reward, -s.breakdown->total);
        ASSERT_LE(s.breakdown->total, s.request.budget);
      } else {
        ASSERT_EQ(s.reward, -CostParams{}.reject_penalty);
      }
      cost_sum += -s.reward;

      // Free memory equals capacity minus memory held by live containers.
      std::vector<double> held(topo.size(), 0.0);
      for (const auto& c : env.containers()) held[static_cast<std::size_t>(c.node)] += cat[c.fn_type].mem_mb;
      for (NodeId v = 0; v < static_cast<NodeId>(topo.size()); ++v) {
        ASSERT_GE(env.free_mem(v), -1e-9);
        ASSERT_NEAR(env.free_mem(v) + held[v], topo.nodes()[v].mem_mb, 1e-9);
      }
    }
    ASSERT_EQ(cost_sum, env.episode_cost());
  }
}

TEST(EnvProperty, DeterministicReplay) {
  const auto topo = std::make_shared<const Topology>(generate_topology(4, default_node_classes(), 500, 300, 2));
  const auto cat = default_catalog();
  const auto trace = generate_trace(*topo, cat, 100, 2.0, {0.25, 0.25, 0.25, 0.25}, 3);
  auto run = [&] {
    Environment env(topo, cat, CostParams{});
    env.reset(trace);
    Rng rng(12);
    while (!env.done()) env.step(static_cast<int>(uniform_index(rng, env.action_count())));
    return env.episode_log();
  };
  EXPECT_EQ(run(), run());
}

TEST(EnvProperty, WarmReuseNeverCostsMoreThanSpawnOnSameNode) {
  Rng rng(9);
  const auto topo = generate_topology(5, {{2.4, 500}, {3.6, 800}}, 400.0, 200.0, 8);
  const auto cat = default_catalog(topo.nodes(), CostParams{}, 3.0);
  Environment env(std::make_shared<const Topology>(topo), cat, CostParams{});
  for (int episode = 0; episode < 50; ++episode) {
    env.reset(generate_trace(topo, cat, 40, 2.0, {0.25, 0.25, 0.25, 0.25}, episode));
    while (!env.done()) {
      for (NodeId v = 0; v < 5; ++v) {
        const auto warm = env.quote(Action{v, false});
        const auto cold = env.quote(Action{v, true});
        if (warm && cold) ASSERT_LT(warm->total, cold->total);
      }
      env.step(static_cast<int>(uniform_index(rng, env.action_count())));
    }
  }
}

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "edgesched/harness.hpp"
#include "test_util.hpp"

using namespace edgesched;
using edgesched::testing::read_file;
using edgesched::testing::TempDir;
using edgesched::testing::write_file;

namespace {

EpisodeRecord accepted_record(int episode, Money total, double us = 0.0) {
  EpisodeRecord r;
  r.episode = episode;
  r.accepted = true;
  r.target = 0;
  r.breakdown = CostBreakdown{Money::zero(), total, Money::zero(), total};
  r.reward = -total;
  r.decision_us = us;
  return r;
}

EpisodeRecord rejected_record(int episode, Money penalty) {
  EpisodeRecord r;
  r.episode = episode;
  r.reward = -penalty;
  return r;
}

Config small_config() {
  Config cfg = default_config();
  cfg.set("topology.n_nodes", "3");
  cfg.set("trace.max_requests", "6");
  cfg.set("compare.eval_episodes", "3");
  return cfg;
}

}  // namespace

TEST(Summary, NearestRankOnOneToHundred) {
  std::vector<EpisodeRecord> recs;
  for (int i = 1; i <= 100; ++i) recs.push_back(accepted_record(0, Money::from_micros(i * 1'000'000)));
  const auto s = summarize(recs);
  EXPECT_EQ(s.p95, Money::parse("95"));
  EXPECT_EQ(s.p50, Money::parse("50"));
  EXPECT_EQ(s.p5, Money::parse("5"));
  EXPECT_EQ(s.p25, Money::parse("25"));
  EXPECT_EQ(s.p75, Money::parse("75"));
  EXPECT_DOUBLE_EQ(s.mean, 50.5);
}

TEST(Summary, NearestRankMatchesCeilingDefinition) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 57);
    std::vector<Money> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(Money::from_micros(static_cast<std::int64_t>(uniform_index(rng, 1000))));
    std::sort(v.begin(), v.end());
    for (int pct : {5, 25, 50, 75, 95}) {
      const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(n) - 1e-12));
      ASSERT_EQ(nearest_rank(v, pct), v[std::max<std::size_t>(rank, 1) - 1]);
    }
  }
}

TEST(Summary, SingleRecord) {
  const auto s = summarize({accepted_record(0, Money::parse("7"), 3.0)});
  for (Money p : {s.p5, s.p25, s.p50, s.p75, s.p95}) EXPECT_EQ(p, Money::parse("7"));
  EXPECT_EQ(s.acceptance_rate, 1.0);
  EXPECT_DOUBLE_EQ(s.per_decision_time, 3.0);
  EXPECT_DOUBLE_EQ(s.total_decision_time, 3e-6);
}

TEST(Summary, AcceptanceRateAndEpisodeCost) {
  std::vector<EpisodeRecord> recs;
  for (int i = 0; i < 8; ++i) recs.push_back(accepted_record(i % 2, Money::parse("1")));
  recs.push_back(rejected_record(0, Money::parse("5")));
  recs.push_back(rejected_record(1, Money::parse("5")));
  const auto s = summarize(recs);
  EXPECT_EQ(s.acceptance_rate, 0.8);
  EXPECT_EQ(s.episodes, 2u);
  EXPECT_DOUBLE_EQ(s.mean_episode_cost, 9.0);
  EXPECT_THROW(summarize({}), ValidationError);
}

TEST(SummaryProperty, PermutationInvariantAndOrdered) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<EpisodeRecord> recs;
    const std::size_t n = 1 + uniform_index(rng, 40);
    for (std::size_t i = 0; i < n; ++i) {
      if (uniform_index(rng, 4) == 0) {
        recs.push_back(rejected_record(0, Money::parse("5")));
      } else {
        recs.push_back(accepted_record(0, Money::from_micros(static_cast<std::int64_t>(uniform_index(rng, 5'000'000)))));
      }
    }
    const auto a = summarize(recs);
    std::shuffle(recs.begin(), recs.end(), rng);
    const auto b = summarize(recs);
    ASSERT_EQ(a.p5, b.p5);
    ASSERT_EQ(a.p50, b.p50);
    ASSERT_EQ(a.p95, b.p95);
    ASSERT_EQ(a.mean, b.mean);
    ASSERT_EQ(a.acceptance_rate, b.acceptance_rate);
    ASSERT_LE(a.p5, a.p25);
    ASSERT_LE(a.p25, a.p50);
    ASSERT_LE(a.p50, a.p75);
    ASSERT_LE(a.p75, a.p95);
  }
}

TEST(Config, ParsesSectionsCommentsAndOverrides) {
  Config cfg = default_config();
  std::istringstream in(
      "# comment\n"
      "[topology]\n"
      "n_nodes = 4   # trailing\n"
      "[trace]\n"
      "mix = \"0.4,0.2,0.2,0.2\"\n");
  cfg.load_stream(in);
  cfg.set_override("costs.alpha_switch=0.02");
  EXPECT_EQ(cfg.integer("topology.n_nodes"), 4);
  EXPECT_EQ(cfg.real_list("trace.mix"), (std::vector<double>{0.4, 0.2, 0.2, 0.2}));
  EXPECT_EQ(cfg.real("costs.alpha_switch"), 0.02);
  EXPECT_TRUE(cfg.is_explicit("topology.n_nodes"));
  EXPECT_FALSE(cfg.is_explicit("topology.area_m"));
}

TEST(Config, Errors) {
  Config cfg = default_config();
  EXPECT_THROW(cfg.set("topology.colour", "red"), ConfigError);
  EXPECT_THROW(cfg.set_override("no_equals_sign"), ConfigError);
  std::istringstream bad("[topology]\nthis line is wrong\n");
  EXPECT_THROW(cfg.load_stream(bad), ConfigError);

  cfg.set("dqn.gamma", "1.5");
  EXPECT_THROW(hyper_from_config(cfg), ConfigError);
  cfg = default_config();
  cfg.set("topology.n_nodes", "many");
  EXPECT_THROW(scenario_from_config(cfg, 1), ConfigError);
  cfg = default_config();
  cfg.set("costs.reject_penalty", "lots");
  EXPECT_THROW(scenario_from_config(cfg, 1), ConfigError);
  cfg = default_config();
  cfg.set("trace.mix", "0.5,0.5");
  EXPECT_THROW(scenario_from_config(cfg, 1), ConfigError);
  cfg = small_config();
  cfg.set("compare.schedulers", "greedy,genius");
  EXPECT_THROW(run_compare(cfg, 1), ConfigError);
}

TEST(Scenario, TracesAreSeededAndTruncated) {
  const Scenario s = scenario_from_config(small_config(), 5);
  EXPECT_EQ(s.topology->size(), 3u);
  EXPECT_EQ(s.catalog.size(), 4u);
  const auto a = s.trace_for(5, kEvalTraceStream, 2);
  EXPECT_EQ(a, s.trace_for(5, kEvalTraceStream, 2));
  EXPECT_NE(a, s.trace_for(5, kEvalTraceStream, 3));
  EXPECT_FALSE(a.empty());
  EXPECT_LE(a.size(), 6u);
}

TEST(Scenario, FilesOverrideGeneration) {
  TempDir dir;
  write_file(dir / "nodes.csv", "node_id,x_m,y_m,cpu_ghz,mem_mb\n0,0,0,2.5,1000\n1,100,0,2.5,1000\n");
  write_file(dir / "trace.csv", "t,origin_node,function_id\n0,0,0\n1,1,1\n");
  Config cfg = default_config();
  cfg.set("topology.nodes_file", (dir / "nodes.csv").string());
  cfg.set("topology.radius_m", "150");
  cfg.set("trace.file", (dir / "trace.csv").string());
  const Scenario s = scenario_from_config(cfg, 1);
  EXPECT_EQ(s.topology->hops(0, 1), 1);
  EXPECT_EQ(s.trace_for(1, kEvalTraceStream, 0).size(), 2u);
  EXPECT_EQ(s.trace_for(1, kEvalTraceStream, 0), s.trace_for(9, kEvalTraceStream, 4));
}

TEST(Compare, SingleSchedulerGivesOneRow) {
  Config cfg = small_config();
  cfg.set("compare.schedulers", "greedy");
  TempDir dir;
  const auto res = run_compare(cfg, 3, dir.path());
  ASSERT_EQ(res.rows.size(), 1u);
  EXPECT_EQ(res.rows[0].scheduler, "greedy");
  EXPECT_EQ(res.rows[0].factor_vs_best, 1.0);
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "timing.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "episodes" / "greedy.csv"));
  const auto summary = read_file(dir / "summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 2);
}

TEST(Compare, AllSchedulersShareTracesAndOracleIsBest) {
  Config cfg = small_config();
  cfg.set("compare.schedulers", "greedy,random,oracle,dqn,ppo");
  cfg.set("dqn.episodes", "3");
  cfg.set("ppo.episodes", "3");
  cfg.set("dqn.hidden", "16");
  cfg.set("ppo.hidden", "16");
  cfg.set("ppo.rollout", "32");
  cfg.set("ppo.minibatch", "16");
  cfg.set("compare.timing", "false");
  TempDir d1, d2;
  const auto a = run_compare(cfg, 11, d1.path());
  const auto b = run_compare(cfg, 11, d2.path());
  ASSERT_EQ(a.rows.size(), 5u);
  std::map<std::string, double> cost;
  for (const auto& r : a.rows) cost[r.scheduler] = r.stats.mean_episode_cost;
  for (const auto& [name, c] : cost) EXPECT_LE(cost["oracle"], c + 1e-9) << name;
  // Same requests in the same order for every scheduler.
  for (const auto& [name, log] : a.logs) {
    ASSERT_EQ(log.size(), a.logs.at("greedy").size()) << name;
    for (std::size_t i = 0; i < log.size(); ++i) ASSERT_EQ(log[i].request, a.logs.at("greedy")[i].request);
  }
  EXPECT_EQ(read_file(d1 / "summary.csv"), read_file(d2 / "summary.csv"));
  EXPECT_EQ(read_file(d1.path() / "episodes" / "ppo.csv"), read_file(d2.path() / "episodes" / "ppo.csv"));
  EXPECT_TRUE(std::filesystem::exists(d1.path() / "models" / "dqn_q.model"));
  EXPECT_TRUE(std::filesystem::exists(d1.path() / "models" / "ppo_value.model"));
  EXPECT_TRUE(std::filesystem::exists(d1.path() / "curves" / "dqn.csv"));
}

TEST(Compare, OversizedOracleReportsContext) {
  Config cfg = small_config();
  cfg.set("compare.schedulers", "oracle");
  cfg.set("compare.oracle_max_states", "10");
  try {
    run_compare(cfg, 2);
    FAIL();
  } catch (const OracleLimitExceeded& e) {
    EXPECT_NE(std::string(e.what()).find("scheduler oracle"), std::string::npos);
  }
}

#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "edgesched/csv.hpp"
#include "test_util.hpp"

using edgesched::testing::read_file;
using edgesched::testing::TempDir;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(EDGESCHED_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmall = "--set topology.n_nodes=3 --set trace.max_requests=6";

}  // namespace

TEST(Cli, InvalidGammaIsConfigError) {
  TempDir dir;
  EXPECT_EQ(run("train --algo dqn --seed 1 --set dqn.gamma=1.5 --out " + dir.path().string()), 2);
}

TEST(Cli, UnknownKeyIsConfigError) {
  TempDir dir;
  EXPECT_EQ(run("compare --seed 1 --set compare.colour=blue --out " + dir.path().string()), 2);
}

TEST(Cli, MissingSeedIsUsageError) {
  TempDir dir;
  EXPECT_EQ(run("gen-trace --out " + dir.path().string()), 2);
  EXPECT_EQ(run("no-such-command"), 2);
}

TEST(Cli, GenerateTopologyAndTrace) {
  TempDir dir;
  ASSERT_EQ(run("gen-topology --seed 4 --set topology.n_nodes=5 --out " + dir.path().string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "nodes.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "edges.csv"));
  ASSERT_EQ(run("gen-trace --seed 4 --out " + dir.path().string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "trace.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "catalog.csv"));
}

TEST(Cli, OracleOnMicroInstance) {
  TempDir dir;
  ASSERT_EQ(run(std::string("oracle --seed 3 ") + kSmall + " --out " + dir.path().string()), 0);
  const auto table = edgesched::csv::read(dir / "oracle.csv");
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "episodes" / "oracle.csv"));
}

TEST(Cli, OracleOnOversizedInstanceFails) {
  TempDir dir;
  EXPECT_EQ(run(std::string("oracle --seed 3 ") + kSmall + " --set compare.oracle_max_states=5 --out " +
                dir.path().string()),
            1);
}

TEST(Cli, TrainThenEvaluate) {
  TempDir dir;
  const std::string common = std::string(kSmall) + " --set ppo.episodes=3 --set ppo.hidden=16 --set ppo.rollout=32" +
                             " --set ppo.minibatch=16";
  ASSERT_EQ(run("train --algo ppo --seed 2 " + common + " --out " + dir.path().string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "models" / "ppo_policy.model"));
  TempDir ev;
  ASSERT_EQ(run("eval --algo ppo --seed 2 " + common + " --models " + (dir.path() / "models").string() + " --out " +
                ev.path().string()),
            0);
  EXPECT_EQ(run("eval --algo dqn --seed 2 " + common + " --models " + (dir.path() / "models").string() + " --out " +
                ev.path().string()),
            1);
}

TEST(Cli, CompareIsReproducible) {
  TempDir a, b;
  const std::string args = std::string("compare --seed 9 ") + kSmall + " --set compare.schedulers=greedy,random,oracle";
  ASSERT_EQ(run(args + " --out " + a.path().string()), 0);
  ASSERT_EQ(run(args + " --out " + b.path().string()), 0);
  EXPECT_FALSE(read_file(a / "summary.csv").empty());
  EXPECT_EQ(read_file(a / "summary.csv"), read_file(b / "summary.csv"));

  // Episode logs carry wall-clock decision times unless timing is off.
  TempDir c, d;
  ASSERT_EQ(run(args + " --set compare.timing=false --out " + c.path().string()), 0);
  ASSERT_EQ(run(args + " --set compare.timing=false --out " + d.path().string()), 0);
  for (const char* name : {"greedy.csv", "random.csv", "oracle.csv"}) {
    EXPECT_EQ(read_file(c.path() / "episodes" / name), read_file(d.path() / "episodes" / name)) << name;
  }
  EXPECT_EQ(read_file(a / "summary.csv"), read_file(c / "summary.csv"));
}

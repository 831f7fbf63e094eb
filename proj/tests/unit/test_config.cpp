#include "ltk/checkpoint.hpp"
#include "ltk/config.hpp"
#include "ltk/csv.hpp"
#include "ltk/error.hpp"

#include <gtest/gtest.h>

#include <string>

using namespace ltk;

namespace {

const std::filesystem::path kData = LTK_TEST_DATA;

std::string error_of(std::string_view text) {
  try {
    config::parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST(Config, MissingFieldIsNamedByPath) {
  try {
    config::load(kData / "missing_dimension.json");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_TRUE(contains(e.what(), "tasks[1].problems.dimension")) << e.what();
  }
}

TEST(Config, UnknownKeyIsRejected) {
  auto text = checkpoint::read_file(kData / "tiny.json");
  text.insert(text.find('{') + 1, "\"max_generations\": 3,");
  const auto msg = error_of(text);
  EXPECT_TRUE(contains(msg, "max_generations")) << msg;
  text = checkpoint::read_file(kData / "tiny.json");
  text.insert(text.find("\"budget\""), "\"budjet\": 5, ");
  const auto nested = error_of(text);
  EXPECT_TRUE(contains(nested, "tasks[0].budjet")) << nested;
}

TEST(Config, SyntaxErrorReportsLineAndColumn) {
  const auto msg = error_of("{\n  \"seed\": 1,\n  \"tasks\": [,]\n}");
  EXPECT_TRUE(contains(msg, "line 3")) << msg;
  EXPECT_TRUE(contains(msg, "column")) << msg;
}

TEST(Config, WrongTypeIsNamed) {
  const auto msg = error_of(R"({"seed": "seven", "tasks": []})");
  EXPECT_TRUE(contains(msg, "seed")) << msg;
}

TEST(Config, ResolvedRoundTripIsStable) {
  const auto cfg = config::load(kData / "tiny.json");
  const auto once = config::resolved(cfg);
  EXPECT_EQ(config::resolved(config::parse(once)), once);
  // defaults are filled in
  EXPECT_TRUE(contains(once, "\"policy_seed\"")) << once;
  EXPECT_TRUE(contains(once, "\"feature_mode\"")) << once;
}

TEST(Config, BuildsValidatedTasks) {
  const auto cfg = config::load(kData / "tiny.json");
  ASSERT_EQ(cfg.tasks.size(), 1u);
  const auto task = config::build_task(cfg.tasks[0], cfg.analyzer);
  EXPECT_EQ(task.train.size(), 2u);
  EXPECT_EQ(task.test.size(), 2u);
  EXPECT_EQ(task.feature_width, 4);
  EXPECT_EQ(task.train[0].dimension, 2);
  // offsets are a function of the declaration alone
  const auto again = config::build_task(cfg.tasks[0], cfg.analyzer);
  EXPECT_EQ(task.test[1].offset, again.test[1].offset);
  const auto run = config::build_run(cfg, "somewhere");
  EXPECT_EQ(run.Q, 2);
  EXPECT_EQ(run.seed, 7u);
}

TEST(Config, InvalidTaskIsRejectedBeforeCompute) {
  const auto msg = error_of(R"({"seed": 1, "tasks": [{"id": "p", "optimizer": "pso", "feature_mode": "per_individual",
      "problems": {"dimension": 2, "train": [1], "test": [2]}}]})");
  EXPECT_TRUE(contains(msg, "PSO")) << msg;
}

TEST(ObservationCsv, GroupsRowsByObservationId) {
  const auto f = csv::read_observations(kData / "observations.csv");
  EXPECT_EQ(f.d, 2);
  ASSERT_EQ(f.observations.size(), 2u);
  EXPECT_EQ(f.observations[0].X.rows(), 5);
  EXPECT_EQ(f.observations[1].y[2], 2.5);
  EXPECT_EQ(f.observations[0].lb[1], -5.0);
}

TEST(ObservationCsv, HeaderOnlyIsEmpty) {
  const auto f = csv::read_observations(kData / "header_only.csv");
  EXPECT_EQ(f.d, 3);
  EXPECT_TRUE(f.observations.empty());
}

TEST(ObservationCsv, ErrorsCarryLineNumbers) {
  const auto expect_line = [](std::string_view text, const std::string& line) {
    try {
      csv::parse_observations(text);
      ADD_FAILURE() << "expected ConfigError for " << text;
    } catch (const ConfigError& e) {
      EXPECT_TRUE(contains(e.what(), line)) << e.what();
    }
  };
  expect_line("# d=2 lb=-5 ub=5\nx_1,x_2,y\n1,2,3\n1,2\n", "line 4");
  expect_line("# d=2 lb=-5 ub=5\nx_1,x_2,y\n1,9,3\n", "line 3");
  expect_line("# d=1 lb=-5 ub=5\nobs,x_1,y\n0,1,1\n0,1,2\n1,1,1\n0,2,2\n", "line 6");
  expect_line("# d=2 lb=-5 ub=5\nx_1,x_2,y\n1,abc,3\n", "line 3");
  expect_line("x_1,y\n", "line 1");
}

TEST(ObservationCsv, PerDimensionBounds) {
  const auto f = csv::parse_observations("# d=2 lb=-1,-2 ub=1,2\nx_1,x_2,y\n0.5,1.5,0\n");
  EXPECT_EQ(f.ub[1], 2.0);
  EXPECT_EQ(f.observations.at(0).X(0, 1), 1.5);
}

TEST(ObservationCsv, WriteTableUsesNaForMissing) {
  const auto t = csv::write_table({"a", "b"}, {{1.5, std::nullopt}});
  EXPECT_EQ(t, "a,b\n1.5,NA\n");
}

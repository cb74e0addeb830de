#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "cfmaps/bench.hpp"
#include "cfmaps/error.hpp"

namespace cfmaps {
namespace {

BenchConfig small_config() {
  BenchConfig cfg;
  cfg.n_trees = {3};
  cfg.max_depth = {3};
  cfg.n_queries = 100;
  cfg.data_dir = CFMAPS_DATA_DIR;
  return cfg;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// Drops the timing columns (t0_s, mean_q_ms, p50_q_ms, p95_q_ms).
std::string without_timing(const std::string& row) {
  std::vector<std::string> cells;
  std::istringstream in(row);
  std::string cell;
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i >= 6 && i <= 9) continue;
    out += cells[i] + ",";
  }
  return out;
}

TEST(RunBenchmark, StructuralRecord) {
  BenchConfig cfg = small_config();
  cfg.norms = {Norm::kL2};
  const auto records = run_benchmark(cfg);
  ASSERT_EQ(records.size(), 1u);
  const BenchRecord& r = records[0];
  EXPECT_GT(r.t0_s, 0.0);
  EXPECT_EQ(r.latencies_s.size(), 100u);
  EXPECT_EQ(r.failures, 0u);
  EXPECT_EQ(r.error_ratio, 1.0);
  EXPECT_GT(r.n_rects, 1u);
  EXPECT_TRUE(r.comparable);
  EXPECT_LE(r.latency_quantile_s(0.5), r.latency_quantile_s(0.95));
}

TEST(RunBenchmark, GridSizeAndHeader) {
  BenchConfig cfg = small_config();
  cfg.datasets = {"blobs", "iris_binary"};
  cfg.n_trees = {2, 3};
  cfg.seeds = {0, 1};
  cfg.n_queries = 20;
  cfg.warmup = 0;
  const auto records = run_benchmark(cfg);
  EXPECT_EQ(records.size(), 2u * 2 * 1 * 2 * 3);
  const auto rows = lines(emit_report_csv(records));
  ASSERT_EQ(rows.size(), records.size() + 1);
  EXPECT_EQ(rows[0], "dataset,n_trees,depth,seed,norm,n_rects,t0_s,mean_q_ms,p50_q_ms,p95_q_ms,"
                     "mean_rects_eval,error_ratio");
  for (const BenchRecord& r : records) EXPECT_EQ(r.error_ratio, 1.0);
  const std::string summary = emit_summary(records);
  EXPECT_NE(summary.find("failures: 0"), std::string::npos) << summary;
}

TEST(RunBenchmark, DeterministicNonTimingColumns) {
  BenchConfig cfg = small_config();
  cfg.n_queries = 50;
  const auto a = lines(emit_report_csv(run_benchmark(cfg)));
  const auto b = lines(emit_report_csv(run_benchmark(cfg)));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_EQ(without_timing(a[i]), without_timing(b[i]));
}

TEST(RunBenchmark, ThreadedRunIsMarked) {
  BenchConfig cfg = small_config();
  cfg.threads = 2;
  cfg.norms = {Norm::kL1};
  const auto records = run_benchmark(cfg);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_FALSE(records[0].comparable);
  EXPECT_EQ(records[0].failures, 0u);
}

TEST(RunBenchmark, MissingDataset) {
  BenchConfig cfg = small_config();
  cfg.datasets = {"does_not_exist"};
  EXPECT_THROW(run_benchmark(cfg), NotFoundError);
}

TEST(BenchConfig, ParseAndValidate) {
  const BenchConfig cfg = parse_bench_config(
      R"({"datasets":["blobs"],"n_trees":[3,5],"max_depth":[3],"n_queries":10,"seeds":[0,1],"norms":["l1","linf"]})");
  EXPECT_EQ(cfg.n_trees, (std::vector<int>{3, 5}));
  EXPECT_EQ(cfg.norms, (std::vector<Norm>{Norm::kL1, Norm::kLinf}));
  EXPECT_THROW(parse_bench_config(R"({"seeds":[1,1]})"), ConfigError);
  EXPECT_THROW(parse_bench_config(R"({"n_trees":[]})"), ConfigError);
  EXPECT_THROW(parse_bench_config(R"({"n_queries":0})"), ConfigError);
  EXPECT_THROW(parse_bench_config(R"({"n_trees":"many"})"), SchemaError);
  EXPECT_THROW(parse_bench_config("{"), FormatError);
}

TEST(SyntheticPartition, ExactCountAndCover) {
  const Partition p = make_synthetic_partition(1000, 3, 2, 9);
  ASSERT_EQ(p.size(), 1000u);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    const std::vector<double> x{u(rng), u(rng), u(rng)};
    int hits = 0;
    for (const Hyperrectangle& r : p.rects) hits += r.contains(x);
    ASSERT_EQ(hits, 1);
  }
}

TEST(Amortization, CumulativeCurveIsMonotone) {
  const Partition p = make_synthetic_partition(2000, 3, 2, 1);
  const AmortizationRun run = measure_amortization(p, 0, 200, NormSpec{Norm::kL2, {}}, 3);
  ASSERT_EQ(run.cumulative_s.size(), 200u);
  ASSERT_EQ(run.scan_latency_s.size(), 200u);
  EXPECT_GE(run.cumulative_s.front(), run.t0_s);
  for (std::size_t i = 1; i < run.cumulative_s.size(); ++i) {
    ASSERT_GE(run.cumulative_s[i], run.cumulative_s[i - 1]);
  }
}

TEST(FitSlope, ExactLine) {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{3, 5, 7, 9};
  EXPECT_DOUBLE_EQ(fit_slope(x, y), 2.0);
}

}  // namespace
}  // namespace cfmaps

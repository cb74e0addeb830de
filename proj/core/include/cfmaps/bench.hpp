#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfmaps/geometry.hpp"
#include "cfmaps/partition.hpp"

namespace cfmaps {

struct BenchConfig {
  std::vector<std::string> datasets{"blobs"};
  std::vector<int> n_trees{3};
  std::vector<int> max_depth{3};
  int n_queries = 1000;
  std::vector<std::uint64_t> seeds{0};
  std::vector<Norm> norms{Norm::kL1, Norm::kL2, Norm::kLinf};
  bool verify = true;
  int warmup = 10;
  int threads = 1;  // > 1 runs queries in parallel; timings are then not comparable
  std::string data_dir;

  void validate() const;
};

// JSON keys mirror the field names; norms as "l1" / "l2" / "linf".
BenchConfig parse_bench_config(std::string_view json_text);

struct BenchRecord {
  std::string dataset;
  int n_trees = 0;
  int depth = 0;
  std::uint64_t seed = 0;
  Norm norm = Norm::kL2;
  std::size_t n_rects = 0;
  double t0_s = 0.0;  // extraction + index build
  std::vector<double> latencies_s;
  double mean_rects_eval = 0.0;
  double error_ratio = 0.0;  // mean d / d_oracle; NaN when not verified
  std::size_t failures = 0;
  bool comparable = true;

  double mean_latency_s() const;
  double latency_quantile_s(double q) const;
};

std::vector<BenchRecord> run_benchmark(const BenchConfig& cfg);

inline constexpr std::string_view kBenchCsvHeader =
    "dataset,n_trees,depth,seed,norm,n_rects,t0_s,mean_q_ms,p50_q_ms,p95_q_ms,mean_rects_eval,"
    "error_ratio";

std::string emit_report_csv(const std::vector<BenchRecord>& records);
std::string emit_summary(const std::vector<BenchRecord>& records);

// Random recursive bisection of [0,1]^dims into exactly n labelled boxes; labels
// drawn uniformly from n_classes. Used to study index behaviour at sizes no
// desk-scale forest reaches.
Partition make_synthetic_partition(std::size_t n, std::size_t dims, int n_classes,
                                   std::uint64_t seed);

// Cumulative-cost measurement for one class of a partition.
struct AmortizationRun {
  std::size_t n_rects = 0;
  double t0_s = 0.0;                     // index build
  std::vector<double> query_latency_s;   // per query, index search
  std::vector<double> scan_latency_s;    // per query, exhaustive scan
  std::vector<double> cumulative_s;      // T0 + wall time after q queries, q = 1..n
  std::vector<std::size_t> rects_evaluated;
};

AmortizationRun measure_amortization(const Partition& p, ClassIndex target, std::size_t n_queries,
                                     const NormSpec& norm, std::uint64_t seed);

// Least-squares slope of y against x.
double fit_slope(std::span<const double> x, std::span<const double> y);

}  // namespace cfmaps

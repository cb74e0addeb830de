#include "cfmaps/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "cfmaps/dataset.hpp"
#include "cfmaps/error.hpp"
#include "cfmaps/query.hpp"
#include "cfmaps/training.hpp"
#include "json.hpp"

namespace cfmaps {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::vector<double>> make_queries(const Dataset& test, const FeatureSchema& schema,
                                              int n_queries, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::vector<std::vector<double>> queries;
  std::vector<std::size_t> order(test.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i : order) {
    if (static_cast<int>(queries.size()) == n_queries) break;
    queries.push_back(test.rows[i]);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(queries.size()) < n_queries) {
    std::vector<double> x;
    for (const Feature& f : schema.features) x.push_back(f.lo + unit(rng) * (f.hi - f.lo));
    queries.push_back(std::move(x));
  }
  return queries;
}

// Next class after the prediction that owns at least one region.
ClassIndex pick_target(const CounterfactualMaps& maps, ClassIndex y) {
  const int c = maps.ensemble.n_classes();
  for (int step = 1; step < c; ++step) {
    const ClassIndex t = (y + step) % c;
    if (maps.tree_for(t) != nullptr) return t;
  }
  return -1;
}

struct QueryOutcome {
  double latency_s = 0.0;
  std::size_t rects_evaluated = 0;
  double ratio = 1.0;
  bool failed = false;
};

QueryOutcome run_one(const CounterfactualMaps& maps, const std::vector<double>& x, const NormSpec& norm,
                     bool verify) {
  QueryOutcome out;
  const ClassIndex y = maps.ensemble.predict_unchecked(x);
  const ClassIndex target = pick_target(maps, y);
  if (target < 0) {
    out.failed = true;
    return out;
  }
  QueryRequest req{x, target, norm, {}, 1e-9};
  const auto start = Clock::now();
  CounterfactualResult r;
  try {
    r = counterfactual(maps, req);
  } catch (const Error&) {
    out.failed = true;
    return out;
  }
  out.latency_s = seconds_since(start);
  out.rects_evaluated = r.certificate.rects_evaluated;
  if (verify) {
    const OracleResult o = linear_scan_oracle(maps.partition, target, x, norm);
    out.ratio = o.distance == 0.0 ? (r.distance == 0.0 ? 1.0 : std::numeric_limits<double>::infinity())
                                  : r.distance / o.distance;
  }
  return out;
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

void BenchConfig::validate() const {
  if (datasets.empty() || n_trees.empty() || max_depth.empty() || seeds.empty() || norms.empty()) {
    throw ConfigError("benchmark grid is empty");
  }
  for (int t : n_trees) {
    if (t < 1) throw ConfigError("n_trees entries must be positive");
  }
  for (int d : max_depth) {
    if (d < 1) throw ConfigError("max_depth entries must be positive");
  }
  if (n_queries < 1) throw ConfigError("n_queries must be positive");
  if (warmup < 0 || threads < 1) throw ConfigError("warmup must be >= 0 and threads >= 1");
  std::vector<std::uint64_t> s = seeds;
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw ConfigError("seeds must be distinct");
}

BenchConfig parse_bench_config(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& err) {
    throw FormatError(std::string("malformed benchmark config: ") + err.what());
  }
  BenchConfig cfg;
  try {
    if (doc.contains("datasets")) cfg.datasets = doc["datasets"].get<std::vector<std::string>>();
    if (doc.contains("n_trees")) cfg.n_trees = doc["n_trees"].get<std::vector<int>>();
    if (doc.contains("max_depth")) cfg.max_depth = doc["max_depth"].get<std::vector<int>>();
    if (doc.contains("n_queries")) cfg.n_queries = doc["n_queries"].get<int>();
    if (doc.contains("seeds")) cfg.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
    if (doc.contains("norms")) {
      cfg.norms.clear();
      for (const auto& n : doc["norms"]) cfg.norms.push_back(parse_norm(n.get<std::string>()));
    }
    if (doc.contains("verify")) cfg.verify = doc["verify"].get<bool>();
    if (doc.contains("warmup")) cfg.warmup = doc["warmup"].get<int>();
    if (doc.contains("threads")) cfg.threads = doc["threads"].get<int>();
    if (doc.contains("data_dir")) cfg.data_dir = doc["data_dir"].get<std::string>();
  } catch (const nlohmann::json::exception& err) {
    throw SchemaError(std::string("benchmark config: ") + err.what());
  }
  cfg.validate();
  return cfg;
}

double BenchRecord::mean_latency_s() const {
  if (latencies_s.empty()) return 0.0;
  return std::accumulate(latencies_s.begin(), latencies_s.end(), 0.0) /
         static_cast<double>(latencies_s.size());
}

double BenchRecord::latency_quantile_s(double q) const {
  if (latencies_s.empty()) return 0.0;
  std::vector<double> sorted = latencies_s;
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<BenchRecord> run_benchmark(const BenchConfig& cfg) {
  cfg.validate();
  std::vector<BenchRecord> records;
  for (const std::string& ref : cfg.datasets) {
    const Dataset data = resolve_dataset(ref, cfg.data_dir);
    for (int n_trees : cfg.n_trees) {
      for (int depth : cfg.max_depth) {
        for (std::uint64_t seed : cfg.seeds) {
          auto [train, test] = train_test_split(data, 0.2, seed);
          const Ensemble forest = train_forest(train, ForestConfig{n_trees, depth, seed, true, 0});
          const auto build_start = Clock::now();
          const CounterfactualMaps maps = build_maps(forest);
          const double t0 = seconds_since(build_start);
          const auto queries = make_queries(test, forest.schema(), cfg.n_queries, seed);
          for (Norm p : cfg.norms) {
            const NormSpec norm{p, {}};
            for (int w = 0; w < cfg.warmup; ++w) {
              run_one(maps, queries[static_cast<std::size_t>(w) % queries.size()], norm, false);
            }
            std::vector<QueryOutcome> outcomes(queries.size());
            if (cfg.threads > 1) {
              std::vector<std::thread> pool;
              for (int t = 0; t < cfg.threads; ++t) {
                pool.emplace_back([&, t] {
                  for (std::size_t i = t; i < queries.size(); i += cfg.threads) {
                    outcomes[i] = run_one(maps, queries[i], norm, cfg.verify);
                  }
                });
              }
              for (auto& th : pool) th.join();
            } else {
              for (std::size_t i = 0; i < queries.size(); ++i) {
                outcomes[i] = run_one(maps, queries[i], norm, cfg.verify);
              }
            }
            BenchRecord rec;
            rec.dataset = data.name;
            rec.n_trees = n_trees;
            rec.depth = depth;
            rec.seed = seed;
            rec.norm = p;
            rec.n_rects = maps.partition.size();
            rec.t0_s = t0;
            rec.comparable = cfg.threads == 1;
            double rects = 0.0;
            double ratio = 0.0;
            std::size_t ok = 0;
            for (const QueryOutcome& o : outcomes) {
              if (o.failed) {
                ++rec.failures;
                continue;
              }
              ++ok;
              rec.latencies_s.push_back(o.latency_s);
              rects += static_cast<double>(o.rects_evaluated);
              ratio += o.ratio;
            }
            rec.mean_rects_eval = ok ? rects / static_cast<double>(ok) : 0.0;
            rec.error_ratio = !cfg.verify ? std::nan("") : ok ? ratio / static_cast<double>(ok) : 0.0;
            records.push_back(std::move(rec));
          }
        }
      }
    }
  }
  return records;
}

std::string emit_report_csv(const std::vector<BenchRecord>& records) {
  std::ostringstream out;
  out << kBenchCsvHeader << '\n';
  for (const BenchRecord& r : records) {
    out << r.dataset << ',' << r.n_trees << ',' << r.depth << ',' << r.seed << ',' << to_string(r.norm)
        << ',' << r.n_rects << ',' << fmt(r.t0_s) << ',' << fmt(r.mean_latency_s() * 1e3) << ','
        << fmt(r.latency_quantile_s(0.5) * 1e3) << ',' << fmt(r.latency_quantile_s(0.95) * 1e3) << ','
        << fmt(r.mean_rects_eval, "%.4f") << ',' << fmt(r.error_ratio, "%.6f") << '\n';
  }
  return out.str();
}

std::string emit_summary(const std::vector<BenchRecord>& records) {
  std::ostringstream out;
  struct Acc {
    double latency = 0.0;
    double rects = 0.0;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> per_norm;
  std::size_t failures = 0;
  double worst_ratio = 1.0;
  bool comparable = true;
  for (const BenchRecord& r : records) {
    Acc& a = per_norm[to_string(r.norm)];
    a.latency += r.mean_latency_s();
    a.rects += r.mean_rects_eval;
    ++a.n;
    failures += r.failures;
    if (!std::isnan(r.error_ratio)) worst_ratio = std::max(worst_ratio, r.error_ratio);
    comparable = comparable && r.comparable;
  }
  out << "records: " << records.size() << "\n";
  for (const auto& [norm, a] : per_norm) {
    out << "norm " << norm << ": mean latency " << fmt(a.latency / a.n * 1e3) << " ms, mean rects evaluated "
        << fmt(a.rects / a.n) << "\n";
  }
  out << "failures: " << failures << "\n";
  out << "worst error ratio: " << fmt(worst_ratio, "%.6f") << "\n";
  if (!comparable) out << "note: parallel run, latencies are not comparable\n";
  return out.str();
}

Partition make_synthetic_partition(std::size_t n, std::size_t dims, int n_classes, std::uint64_t seed) {
  if (n == 0 || dims == 0 || n_classes < 1) throw ConfigError("synthetic partition needs n, dims, classes > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cut(0.3, 0.7);
  std::uniform_int_distribution<int> label(0, n_classes - 1);
  struct Work {
    std::vector<Interval> box;
    std::size_t count;
    std::size_t depth;
  };
  Partition p;
  std::vector<Interval> root(dims, Interval{0.0, 1.0, true, true});
  std::vector<Work> stack{Work{root, n, 0}};
  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    if (w.count == 1) {
      p.rects.push_back(Hyperrectangle{0, std::move(w.box), label(rng)});
      continue;
    }
    const std::size_t k = w.depth % dims;
    const std::size_t left = w.count / 2;
    const double frac = cut(rng);
    const double t = w.box[k].lo + frac * (w.box[k].hi - w.box[k].lo);
    Work upper{w.box, w.count - left, w.depth + 1};
    w.box[k].hi = t;
    w.box[k].hi_closed = true;
    upper.box[k].lo = t;
    upper.box[k].lo_closed = false;
    stack.push_back(std::move(upper));
    stack.push_back(Work{std::move(w.box), left, w.depth + 1});
  }
  p.reindex(n_classes);
  return p;
}

AmortizationRun measure_amortization(const Partition& p, ClassIndex target, std::size_t n_queries,
                                     const NormSpec& norm, std::uint64_t seed) {
  AmortizationRun run;
  run.n_rects = p.per_class.at(static_cast<std::size_t>(target)).size();
  const std::size_t m = p.dims();
  Box domain;
  for (const Hyperrectangle& r : p.rects) domain.expand(r.closure());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> queries(n_queries, std::vector<double>(m));
  for (auto& x : queries) {
    for (std::size_t k = 0; k < m; ++k) x[k] = domain.lo[k] + unit(rng) * (domain.hi[k] - domain.lo[k]);
  }
  const auto build_start = Clock::now();
  const KdTree tree = build_index(p, target);
  run.t0_s = seconds_since(build_start);

  const auto loop_start = Clock::now();
  for (const auto& x : queries) {
    const auto start = Clock::now();
    const NearestResult hit = nearest_region(tree, x, norm);
    run.query_latency_s.push_back(seconds_since(start));
    run.rects_evaluated.push_back(hit.certificate.rects_evaluated);
    run.cumulative_s.push_back(run.t0_s + seconds_since(loop_start));
  }
  for (const auto& x : queries) {
    const auto start = Clock::now();
    const OracleResult o = linear_scan_oracle(p, target, x, norm);
    run.scan_latency_s.push_back(seconds_since(start));
    if (o.rect_id < 0) throw InvariantError("scan found nothing");
  }
  return run;
}

double fit_slope(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace cfmaps

// cfmaps command-line front end.
//
// Exit codes: 0 ok, 1 usage, 2 schema/format/domain/config error, 3 infeasible
// target, 4 missing file, 5 not built, 6 precondition, 7 internal invariant.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cfmaps/bench.hpp"
#include "cfmaps/dataset.hpp"
#include "cfmaps/raster.hpp"
#include "cfmaps/training.hpp"
#include "json.hpp"
#include "service.hpp"

namespace {

using namespace cfmaps;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_output(const std::string& path, const std::string& bytes) {
  if (path.empty() || path == "-") {
    std::cout << bytes;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NotFoundError("cannot write " + path);
  out << bytes;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'");
    }
  }
  return out;
}

int exit_code(const std::exception& err) {
  if (dynamic_cast<const service::NotBuiltError*>(&err)) return 5;
  if (dynamic_cast<const InfeasibleError*>(&err)) return 3;
  if (dynamic_cast<const NotFoundError*>(&err)) return 4;
  if (dynamic_cast<const PreconditionError*>(&err)) return 6;
  if (dynamic_cast<const InvariantError*>(&err)) return 7;
  if (dynamic_cast<const Error*>(&err)) return 2;
  return 7;
}

std::string default_data_dir() {
  if (const char* env = std::getenv("CFMAPS_DATA_DIR")) return env;
  return CFMAPS_DEFAULT_DATA_DIR;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact counterfactual explanations for tree ensembles"};
  app.require_subcommand(1);

  std::string data_dir = default_data_dir();
  app.add_option("--data-dir", data_dir, "Directory holding bundled datasets");

  // train
  auto* train = app.add_subcommand("train", "Train a random forest on a dataset");
  std::string train_data, train_out = "model.json";
  ForestConfig forest;
  bool no_bootstrap = false;
  train->add_option("--data", train_data, "Dataset name (blobs, iris_binary, ...) or CSV path")->required();
  train->add_option("--trees", forest.n_trees, "Number of trees");
  train->add_option("--depth", forest.max_depth, "Maximum depth");
  train->add_option("--seed", forest.seed, "Random seed");
  train->add_option("--max-features", forest.max_features, "Features tried per split (0: sqrt)");
  train->add_flag("--no-bootstrap", no_bootstrap, "Fit every tree on the full dataset");
  train->add_option("--out", train_out, "Model document to write");

  // import-model
  auto* import = app.add_subcommand("import-model", "Validate an external model document");
  std::string import_in, import_out;
  import->add_option("model", import_in, "Model document")->required();
  import->add_option("--out", import_out, "Write the canonical document here");

  // build
  auto* build = app.add_subcommand("build", "Extract the partition and index every class");
  std::string build_model, build_dir = "cfmaps_build";
  build->add_option("--model", build_model, "Model document")->required();
  build->add_option("--out", build_dir, "Build directory");

  // query
  auto* query = app.add_subcommand("query", "Compute one counterfactual");
  std::string query_dir = "cfmaps_build", query_x, query_norm = "l2", query_weights, query_frozen;
  std::optional<int> query_target;
  double query_eps = 1e-9;
  query->add_option("--dir", query_dir, "Build directory");
  query->add_option("--x", query_x, "Comma-separated input point")->required();
  query->add_option("--target", query_target, "Target class index (default: any other class)");
  query->add_option("--norm", query_norm, "l1, l2 or linf");
  query->add_option("--weights", query_weights, "Comma-separated positive weights");
  query->add_option("--frozen", query_frozen, "Comma-separated frozen feature indices");
  query->add_option("--eps", query_eps, "Strict projection step, relative to domain width");

  // raster
  auto* raster = app.add_subcommand("raster", "Rasterize a 2-D slice of a counterfactual map");
  std::string raster_dir = "cfmaps_build", raster_features = "0,1", raster_res = "100x100",
              raster_norm = "l2", raster_fixed, raster_format = "csv", raster_out;
  int raster_target = 0;
  raster->add_option("--dir", raster_dir, "Build directory");
  raster->add_option("--features", raster_features, "Displayed feature pair, e.g. 0,1");
  raster->add_option("--res", raster_res, "Resolution NXxNY");
  raster->add_option("--target", raster_target, "Target class index");
  raster->add_option("--norm", raster_norm, "l1, l2 or linf");
  raster->add_option("--fixed", raster_fixed, "Values for all features (displayed ones ignored)");
  raster->add_option("--format", raster_format, "csv, json or ppm");
  raster->add_option("--out", raster_out, "Output file (default stdout)");

  // bench run
  auto* bench = app.add_subcommand("bench", "Benchmark harness");
  bench->require_subcommand(1);
  auto* bench_run = bench->add_subcommand("run", "Run a benchmark grid");
  std::string bench_config, bench_out = "bench_out";
  bench_run->add_option("--config", bench_config, "JSON benchmark config")->required();
  bench_run->add_option("--out", bench_out, "Output directory");

  // serve
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  std::string serve_dir;
  std::string host = std::getenv("CFMAPS_HOST") ? std::getenv("CFMAPS_HOST") : "127.0.0.1";
  int port = std::getenv("CFMAPS_PORT") ? std::atoi(std::getenv("CFMAPS_PORT")) : 8080;
  serve->add_option("--dir", serve_dir, "Build directory to load at start-up");
  serve->add_option("--host", host, "Bind address (env CFMAPS_HOST)");
  serve->add_option("--port", port, "Port (env CFMAPS_PORT)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : 1;
  }

  try {
    if (*train) {
      forest.bootstrap = !no_bootstrap;
      const Dataset d = resolve_dataset(train_data, data_dir);
      const Ensemble e = train_forest(d, forest);
      write_output(train_out, save_model(e));
      std::fprintf(stderr, "trained %d trees on %zu rows of %s -> %s\n", forest.n_trees, d.size(),
                   d.name.c_str(), train_out.c_str());
    } else if (*import) {
      const Ensemble e = load_model(read_file(import_in));
      std::fprintf(stderr, "model ok: %zu features, %d classes, %zu trees, hash %s\n", e.n_features(),
                   e.n_classes(), e.trees().size(), model_hash(e).c_str());
      if (!import_out.empty()) write_output(import_out, save_model(e));
    } else if (*build) {
      const auto s = service::build_session(load_model(read_file(build_model)));
      service::save_session(*s, build_dir);
      std::fprintf(stderr, "built %zu regions in %.3f s (extract) + %.3f s (index) -> %s\n",
                   s->maps.partition.size(), s->extract_s, s->index_s, build_dir.c_str());
    } else if (*query) {
      const auto s = service::load_session(query_dir);
      json req{{"x", parse_list(query_x)}, {"p", query_norm}, {"eps", query_eps}};
      if (query_target) req["target"] = *query_target;
      if (!query_weights.empty()) req["weights"] = parse_list(query_weights);
      if (!query_frozen.empty()) {
        std::vector<int> frozen;
        for (double v : parse_list(query_frozen)) frozen.push_back(static_cast<int>(v));
        req["frozen"] = frozen;
      }
      std::cout << service::query_json(*s, req.dump()) << "\n";
    } else if (*raster) {
      const auto s = service::load_session(raster_dir);
      const std::vector<double> pair = parse_list(raster_features);
      if (pair.size() != 2) throw ConfigError("--features needs exactly two indices");
      RasterSpec spec;
      spec.feature_x = static_cast<int>(pair[0]);
      spec.feature_y = static_cast<int>(pair[1]);
      if (std::sscanf(raster_res.c_str(), "%dx%d", &spec.nx, &spec.ny) != 2) {
        throw ConfigError("--res must look like 100x100");
      }
      spec.target = raster_target;
      spec.norm = NormSpec{parse_norm(raster_norm), {}};
      if (!raster_fixed.empty()) spec.fixed_values = parse_list(raster_fixed);
      write_output(raster_out, export_raster(rasterize(s->maps, spec), parse_raster_format(raster_format)));
    } else if (*bench_run) {
      BenchConfig cfg = parse_bench_config(read_file(bench_config));
      if (cfg.data_dir.empty()) cfg.data_dir = data_dir;
      const auto records = run_benchmark(cfg);
      std::filesystem::create_directories(bench_out);
      write_output(bench_out + "/report.csv", emit_report_csv(records));
      const std::string summary = emit_summary(records);
      write_output(bench_out + "/summary.txt", summary);
      std::cout << summary;
    } else if (*serve) {
      service::Service svc;
      svc.set_data_dir(data_dir);
      if (!serve_dir.empty()) svc.install(service::load_session(serve_dir));
      std::fprintf(stderr, "listening on %s:%d\n", host.c_str(), port);
      if (!service::serve(svc, host, port)) {
        std::fprintf(stderr, "error: cannot bind %s:%d\n", host.c_str(), port);
        return 1;
      }
    }
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return exit_code(err);
  }
  return 0;
}

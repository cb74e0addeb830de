#include "service.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cfmaps/dataset.hpp"
#include "cfmaps/partition.hpp"
#include "cfmaps/raster.hpp"
#include "cfmaps/training.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cfmaps::service {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NotFoundError("cannot write " + path.string());
  out << bytes;
}

json parse_request(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& err) {
    throw FormatError(std::string("malformed request: ") + err.what());
  }
  if (!doc.is_object()) throw FormatError("malformed request: expected a JSON object");
  return doc;
}

// Wraps nlohmann type errors so they surface as schema errors.
template <typename T>
T field(const json& doc, const char* key) {
  if (!doc.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const json& doc, const char* key, T fallback) {
  return doc.contains(key) && !doc.at(key).is_null() ? field<T>(doc, key) : fallback;
}

NormSpec norm_from(const json& doc) {
  NormSpec norm;
  if (doc.contains("p")) {
    const json& p = doc.at("p");
    if (p.is_string()) {
      norm.p = parse_norm(p.get<std::string>());
    } else if (p.is_number()) {
      norm.p = parse_norm(p.dump());
    } else {
      throw SchemaError("field 'p' must be a string or number");
    }
  }
  norm.weights = field_or<std::vector<double>>(doc, "weights", {});
  return norm;
}

json certificate_json(const Certificate& c) {
  json out{{"nodes_popped", c.nodes_popped},
           {"nodes_pruned", c.nodes_pruned},
           {"rects_evaluated", c.rects_evaluated},
           {"final_popped_bound", nullptr}};
  if (c.final_popped_bound) out["final_popped_bound"] = *c.final_popped_bound;
  return out;
}

json features_json(const FeatureSchema& schema) {
  json features = json::array();
  for (const Feature& f : schema.features) {
    features.push_back({{"name", f.name}, {"kind", to_string(f.kind)}, {"lo", f.lo}, {"hi", f.hi}});
  }
  return features;
}

}  // namespace

std::shared_ptr<const Session> build_session(Ensemble e) {
  auto s = std::make_shared<Session>();
  s->model_hash = model_hash(e);
  const auto t0 = Clock::now();
  Partition p = extract_partition(e);
  const auto t1 = Clock::now();
  s->maps = assemble_maps(std::move(e), std::move(p));
  const auto t2 = Clock::now();
  s->extract_s = std::chrono::duration<double>(t1 - t0).count();
  s->index_s = std::chrono::duration<double>(t2 - t1).count();
  return s;
}

void save_session(const Session& s, const std::string& dir) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw NotFoundError("cannot create " + dir + ": " + ec.message());
  write_file(root / "model.json", save_model(s.maps.ensemble));
  write_file(root / "partition.json", save_partition(s.maps.partition));
  json indices = json::array();
  for (std::size_t c = 0; c < s.maps.trees.size(); ++c) {
    if (!s.maps.trees[c]) continue;
    const std::string name = "index_" + std::to_string(c) + ".json";
    write_file(root / name, save_index(*s.maps.trees[c]));
    indices.push_back({{"class", c}, {"file", name}});
  }
  const json manifest{{"version", 1},
                      {"model_hash", s.model_hash},
                      {"n_rects", s.maps.partition.size()},
                      {"extract_s", s.extract_s},
                      {"index_s", s.index_s},
                      {"indices", indices}};
  // Manifest last: its presence marks a complete build.
  write_file(root / "manifest.json", manifest.dump(2) + "\n");
}

std::shared_ptr<const Session> load_session(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root / "manifest.json")) {
    throw NotBuiltError("no build found in '" + dir + "'; run `cfmaps build` first");
  }
  const json manifest = parse_request(read_file(root / "manifest.json"));
  if (field<int>(manifest, "version") != 1) throw VersionError("unsupported manifest version");
  auto s = std::make_shared<Session>();
  Ensemble e = load_model(read_file(root / "model.json"));
  s->model_hash = model_hash(e);
  if (s->model_hash != field<std::string>(manifest, "model_hash")) {
    throw InvariantError("model.json does not match the manifest hash");
  }
  Partition p = load_partition(read_file(root / "partition.json"), e.n_classes());
  if (p.model_hash != s->model_hash) throw InvariantError("partition was extracted from another model");
  std::vector<std::optional<KdTree>> trees(static_cast<std::size_t>(e.n_classes()));
  for (const json& entry : field<json>(manifest, "indices")) {
    const int c = field<int>(entry, "class");
    if (c < 0 || c >= e.n_classes()) throw InvariantError("manifest lists an unknown class");
    KdTree t = load_index(read_file(root / field<std::string>(entry, "file")), p);
    if (t.class_label() != c) throw InvariantError("index file holds a different class");
    trees[static_cast<std::size_t>(c)] = std::move(t);
  }
  for (std::size_t c = 0; c < trees.size(); ++c) {
    if (!trees[c] && !p.per_class[c].empty()) {
      throw NotFoundError("manifest has no index for class " + std::to_string(c));
    }
  }
  s->extract_s = field_or<double>(manifest, "extract_s", 0.0);
  s->index_s = field_or<double>(manifest, "index_s", 0.0);
  s->maps = CounterfactualMaps{std::move(e), std::move(p), std::move(trees)};
  return s;
}

std::string query_json(const Session& s, std::string_view request) {
  const json doc = parse_request(request);
  QueryRequest req;
  req.x = field<std::vector<double>>(doc, "x");
  if (doc.contains("target") && !doc.at("target").is_null()) req.target = field<int>(doc, "target");
  req.norm = norm_from(doc);
  req.frozen = field_or<std::vector<int>>(doc, "frozen", {});
  req.eps = field_or<double>(doc, "eps", req.eps);
  const CounterfactualResult r = counterfactual(s.maps, req);
  const FeatureSchema& schema = s.maps.ensemble.schema();
  json deltas = json::array();
  for (std::size_t k = 0; k < r.x_cf.size(); ++k) {
    deltas.push_back({{"feature", k},
                      {"name", schema.features[k].name},
                      {"from", req.x[k]},
                      {"to", r.x_cf[k]},
                      {"delta", r.x_cf[k] - req.x[k]},
                      {"changed", r.x_cf[k] != req.x[k]}});
  }
  const auto& classes = s.maps.ensemble.classes();
  const json out{{"original", r.original},
                 {"original_label", classes[static_cast<std::size_t>(r.original)]},
                 {"target", r.target},
                 {"target_label", classes[static_cast<std::size_t>(r.target)]},
                 {"p", to_string(req.norm.p)},
                 {"rect_id", r.rect_id},
                 {"x_cf", r.x_cf},
                 {"distance", r.distance},
                 {"certificate", certificate_json(r.certificate)},
                 {"deltas", deltas}};
  return out.dump();
}

std::string raster_json(const Session& s, std::string_view request) {
  const json doc = parse_request(request);
  RasterSpec spec;
  spec.feature_x = field_or<int>(doc, "feature_x", 0);
  spec.feature_y = field_or<int>(doc, "feature_y", 1);
  spec.nx = field_or<int>(doc, "nx", 50);
  spec.ny = field_or<int>(doc, "ny", 50);
  spec.target = field<int>(doc, "target");
  spec.fixed_values = field_or<std::vector<double>>(doc, "fixed", {});
  spec.norm = norm_from(doc);
  if (spec.nx * static_cast<long long>(spec.ny) > 1'000'000) throw ConfigError("raster larger than 10^6 cells");
  return export_raster(rasterize(s.maps, spec), RasterFormat::kJson);
}

std::string schema_json(const Session& s) {
  return json{{"features", features_json(s.maps.ensemble.schema())}}.dump();
}

std::string classes_json(const Session& s) {
  json per_class = json::array();
  for (const auto& ids : s.maps.partition.per_class) per_class.push_back(ids.size());
  return json{{"classes", s.maps.ensemble.classes()}, {"regions", per_class}}.dump();
}

std::string stats_json(const Session& s) {
  json indices = json::array();
  for (std::size_t c = 0; c < s.maps.trees.size(); ++c) {
    if (!s.maps.trees[c]) {
      indices.push_back({{"class", c}, {"n_rects", 0}});
      continue;
    }
    const IndexStats st = index_stats(*s.maps.trees[c]);
    indices.push_back({{"class", c},
                       {"n_rects", s.maps.trees[c]->n_rects()},
                       {"n_nodes", st.n_nodes},
                       {"depth", st.depth},
                       {"mean_leaf_fill", st.mean_leaf_fill}});
  }
  return json{{"n", s.maps.partition.size()},
              {"n_features", s.maps.ensemble.n_features()},
              {"n_trees", s.maps.ensemble.trees().size()},
              {"model_hash", s.model_hash},
              {"indices", indices},
              {"timing", {{"extract_s", s.extract_s}, {"index_s", s.index_s}}}}
      .dump();
}

int status_for(const std::exception& err) {
  if (dynamic_cast<const NotBuiltError*>(&err)) return 409;
  if (dynamic_cast<const InfeasibleError*>(&err) || dynamic_cast<const PreconditionError*>(&err) ||
      dynamic_cast<const CapacityError*>(&err)) {
    return 422;
  }
  if (dynamic_cast<const NotFoundError*>(&err)) return 404;
  if (dynamic_cast<const FormatError*>(&err) || dynamic_cast<const SchemaError*>(&err) ||
      dynamic_cast<const DomainError*>(&err) || dynamic_cast<const ConfigError*>(&err) ||
      dynamic_cast<const VersionError*>(&err)) {
    return 400;
  }
  return 500;
}

void Service::install(std::shared_ptr<const Session> session) {
  std::lock_guard lock(mu_);
  session_ = std::move(session);
}

std::shared_ptr<const Session> Service::session() const {
  std::lock_guard lock(mu_);
  return session_;
}

namespace {

const char* error_kind(int status) {
  switch (status) {
    case 400:
      return "bad_request";
    case 404:
      return "not_found";
    case 405:
      return "method_not_allowed";
    case 409:
      return "not_built";
    case 422:
      return "unprocessable";
  }
  return "internal";
}

Response error_response(int status, const std::string& message) {
  return Response{status, json{{"error", error_kind(status)}, {"message", message}}.dump()};
}

}  // namespace

Response Service::handle(std::string_view method, std::string_view path, std::string_view body) {
  const bool get = method == "GET";
  const bool post = method == "POST";
  try {
    if (path == "/build") {
      if (!post) return error_response(405, "use POST /build");
      const json doc = parse_request(body);
      Ensemble e;
      if (doc.contains("model")) {
        e = load_model(doc.at("model").dump());
      } else {
        const Dataset d = resolve_dataset(field<std::string>(doc, "dataset"), data_dir_);
        ForestConfig cfg;
        cfg.n_trees = field_or<int>(doc, "n_trees", cfg.n_trees);
        cfg.max_depth = field_or<int>(doc, "max_depth", cfg.max_depth);
        cfg.seed = field_or<std::uint64_t>(doc, "seed", cfg.seed);
        e = train_forest(d, cfg);
      }
      auto fresh = build_session(std::move(e));
      install(fresh);
      return Response{200, stats_json(*fresh)};
    }
    const bool known = path == "/schema" || path == "/classes" || path == "/stats" || path == "/query" ||
                       path == "/raster";
    if (!known) return error_response(404, "unknown endpoint " + std::string(path));
    const bool wants_post = path == "/query" || path == "/raster";
    if (wants_post ? !post : !get) {
      return error_response(405, std::string("use ") + (wants_post ? "POST " : "GET ") + std::string(path));
    }
    const std::shared_ptr<const Session> s = session();
    if (!s) return error_response(409, "no model built; POST /build or start with --dir");
    if (path == "/schema") return Response{200, schema_json(*s)};
    if (path == "/classes") return Response{200, classes_json(*s)};
    if (path == "/stats") return Response{200, stats_json(*s)};
    if (path == "/query") return Response{200, query_json(*s, body)};
    return Response{200, raster_json(*s, body)};
  } catch (const std::exception& err) {
    return error_response(status_for(err), err.what());
  }
}

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>()) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    const Response r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->server.Get(".*", forward);
  impl_->server.Post(".*", forward);
  impl_->server.Put(".*", forward);
  impl_->server.Delete(".*", forward);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

bool serve(Service& service, const std::string& host, int port) {
  HttpServer server(service);
  if (server.bind(host, port) < 0) return false;
  server.run();
  return true;
}

}  // namespace cfmaps::service

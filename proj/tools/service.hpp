#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "cfmaps/error.hpp"
#include "cfmaps/query.hpp"

namespace cfmaps::service {

// Query issued before any model has been built or loaded.
class NotBuiltError : public Error {
 public:
  using Error::Error;
};

struct Session {
  CounterfactualMaps maps;
  std::string model_hash;
  double extract_s = 0.0;
  double index_s = 0.0;
};

// Extracts the partition and indexes every class.
std::shared_ptr<const Session> build_session(Ensemble e);

// Build directory layout: model.json, partition.json, index_<c>.json and
// manifest.json. save_session writes all of them; load_session throws
// NotBuiltError when the manifest is absent.
void save_session(const Session& s, const std::string& dir);
std::shared_ptr<const Session> load_session(const std::string& dir);

// Request handlers shared by the HTTP server and the CLI. Input and output are
// JSON documents; errors propagate as cfmaps::Error subclasses.
std::string query_json(const Session& s, std::string_view request);
std::string raster_json(const Session& s, std::string_view request);
std::string schema_json(const Session& s);
std::string classes_json(const Session& s);
std::string stats_json(const Session& s);

struct Response {
  int status = 200;
  std::string body;
};

// Maps an exception to its HTTP status: 400 malformed input, 404 missing
// resource, 409 not built, 422 infeasible or precondition, 500 otherwise.
int status_for(const std::exception& err);

class Service {
 public:
  Service() = default;
  explicit Service(std::shared_ptr<const Session> session) : session_(std::move(session)) {}

  // Replaces the session atomically; in-flight requests keep the old one.
  void install(std::shared_ptr<const Session> session);
  std::shared_ptr<const Session> session() const;

  // Transport-independent dispatch. POST /build takes {"model": <document>}
  // or {"dataset", "n_trees", "max_depth", "seed"} and swaps in a new session.
  Response handle(std::string_view method, std::string_view path, std::string_view body);

  void set_data_dir(std::string dir) { data_dir_ = std::move(dir); }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const Session> session_;
  std::string data_dir_;
};

// HTTP/1.1 transport over Service::handle.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port, or -1 on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called from another thread.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Blocking server on host:port. Returns false if the bind fails.
bool serve(Service& service, const std::string& host, int port);

}  // namespace cfmaps::service

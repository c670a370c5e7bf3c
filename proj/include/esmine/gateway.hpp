#pragma once

// JSON-over-HTTP service around the pipeline. Every request goes through
// Gateway::handle, so the routing and session logic can be exercised
// in-process; listen() binds the same handler to an HTTP server.

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace esm {

struct GatewayConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = ".";
  std::size_t max_sessions = 64;
  std::size_t max_batch = 5000;
  std::size_t threads = 8;

  static GatewayConfig from_json(const std::string& text);
  /// Config file (when given), then ESMINE_HOST / ESMINE_PORT / ESMINE_DATA_DIR.
  static GatewayConfig load(const std::optional<std::filesystem::path>& file);
  void apply_env();
  std::string to_json() const;
};

struct HttpReply {
  int status = 200;
  std::string body;  // JSON text
};

using QueryParams = std::map<std::string, std::string>;

class Gateway {
public:
  explicit Gateway(GatewayConfig cfg = {});
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  HttpReply handle(const std::string& method, const std::string& path, const std::string& body = "",
                   const QueryParams& query = {});

  /// Binds host:port (port 0 picks a free one) and returns the bound port,
  /// or -1 on failure. serve() then blocks until stop().
  int bind();
  bool serve();
  /// bind() + serve().
  bool listen();
  void stop();

  /// Blocks until every background job has finished.
  void wait_for_jobs();

  const GatewayConfig& config() const;
  std::size_t session_count() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace esm

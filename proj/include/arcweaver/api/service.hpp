#pragma once
// JSON-over-HTTP interface for the refinement UI and for scripts.
//
// Error bodies are {"error": <code>, "message": ..., "violations"?: [...]}
// with 404 NotFound, 409 Conflict (including a held season lock, which also
// sets Retry-After), 422 validation failures and 503 gateway failures.

#include <memory>
#include <string>

#include "arcweaver/config/config.hpp"
#include "arcweaver/core/error.hpp"

namespace arcweaver::api {

// Machine-readable description of every endpoint and response body:
// {"$defs": {...}, "endpoints": [{"method", "path", "response"}]}.
Json published_schema();

// Validates `body` against the named definition of published_schema().
std::vector<std::string> validate_response(const std::string& definition, const Json& body);

// HTTP status for a domain error.
int status_for(ErrorCode code);

class ApiService {
 public:
  explicit ApiService(Engine& engine);
  ~ApiService();
  ApiService(const ApiService&) = delete;
  ApiService& operator=(const ApiService&) = delete;

  // Blocks until stop(). Returns false when the address cannot be bound.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace arcweaver::api

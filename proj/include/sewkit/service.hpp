#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "sewkit/decoder.hpp"
#include "sewkit/groups.hpp"

namespace sewkit {

/// Immutable model snapshot behind the service.
struct ServiceState {
  BasisRegistry bases;
  DecoderParams params;
  std::uint64_t snapshot = 0;  // checkpoint_hash(params)
  int points_per_edge = kDefaultEdgePoints;
};

ServiceState load_service_state(const std::filesystem::path& registry, const std::filesystem::path& checkpoint);

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

std::string hex64(std::uint64_t v);

/// Request handlers. All are pure in (request, snapshot) apart from the
/// append-only mesh cache filled by `decode`; safe to call concurrently.
class Service {
 public:
  explicit Service(ServiceState state);

  Response encode(std::string_view body) const;
  /// Embedding document (bare or under "embedding") -> mesh and map ids.
  Response decode(std::string_view body);
  /// {"embedding": doc, "edits": [{"op": "set", "group", "component", "value"}
  ///                              | {"op": "swap", "group", "donor": doc}]}
  Response edit(std::string_view body) const;
  /// {"source": doc, "target": doc, "alpha": a}
  Response interp(std::string_view body) const;
  Response mesh(std::string_view id) const;
  Response maps(std::string_view id) const;
  Response health() const;

  const ServiceState& state() const noexcept { return state_; }

 private:
  struct Cached {
    std::string obj;
    std::string maps;
    std::size_t vertices = 0;
    std::size_t faces = 0;
  };
  ServiceState state_;
  mutable std::mutex mutex_;
  std::map<std::string, Cached, std::less<>> cache_;
};

/// HTTP/1.1 front end for a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sewkit

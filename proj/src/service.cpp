#include "sewkit/service.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "sewkit/solver.hpp"

namespace sewkit {

using nlohmann::json;

ServiceState load_service_state(const std::filesystem::path& registry, const std::filesystem::path& checkpoint) {
  ServiceState s;
  std::ifstream r(registry, std::ios::binary);
  if (!r) throw Error("missing-file", "cannot open registry " + registry.string());
  s.bases = read_basis_registry(r);
  std::ifstream c(checkpoint, std::ios::binary);
  if (!c) throw Error("missing-file", "cannot open checkpoint " + checkpoint.string());
  s.params = read_checkpoint(c);
  s.snapshot = checkpoint_hash(s.params);
  if (s.params.shape.input != s.bases.embedding_dim()) {
    throw Error("dimension-mismatch", "checkpoint input size does not match the registry");
  }
  return s;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

Response json_response(int status, const json& doc) { return {status, doc.dump(), "application/json"}; }

Response error_response(int status, const std::string& code, const std::string& detail) {
  return json_response(status, {{"error", code}, {"violations", json::array({{{"code", code}, {"detail", detail}}})}});
}

// Maps library failures onto HTTP statuses.
template <typename F>
Response guarded(F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    json v = json::array();
    for (const Violation& x : e.violations()) v.push_back({{"code", x.code}, {"detail", x.detail}});
    return json_response(400, {{"error", "validation"}, {"violations", v}});
  } catch (const Error& e) {
    const std::string& c = e.code();
    if (c == "dimension-mismatch" || c == "presence-mismatch" || c == "unfitted-basis" || c == "group-absent" ||
        c == "index-out-of-range" || c == "unknown-panel") {
      return error_response(422, c, e.what());
    }
    if (c == "schema" || c == "unknown-group") return error_response(400, c, e.what());
    return error_response(500, c, e.what());
  } catch (const json::exception& e) {
    return error_response(400, "schema", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

json parse_body(std::string_view body) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    throw Error("schema", std::string("request body is not JSON: ") + e.what());
  }
}

int group_of(const json& j, const GroupRegistry& reg) {
  if (j.is_number_integer()) return j.get<int>();
  if (j.is_string()) {
    const auto g = reg.group_index(j.get<std::string>());
    if (!g) throw Error("index-out-of-range", "unknown group " + j.get<std::string>());
    return *g;
  }
  throw Error("schema", "group must be a name or an index");
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

Service::Service(ServiceState state) : state_(std::move(state)) {}

Response Service::encode(std::string_view body) const {
  return guarded([&] {
    const SewingPattern p = pattern_from_json(parse_body(body), state_.bases.groups);
    return json_response(200, embedding_to_json(sewkit::encode(p, state_.bases, state_.points_per_edge), state_.bases.groups));
  });
}

Response Service::decode(std::string_view body) {
  return guarded([&] {
    json doc = parse_body(body);
    if (doc.contains("embedding")) doc = doc.at("embedding");
    const Embedding e = embedding_from_json(doc, state_.bases.groups);
    const std::string key = hex64(fnv1a(hex64(state_.snapshot) + embedding_to_json(e, state_.bases.groups).dump()));
    Cached entry;
    bool hit = false;
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) {
        entry = it->second;
        hit = true;
      }
    }
    if (!hit) {
      const Reconstruction r = reconstruct(e, state_.bases, state_.params, state_.points_per_edge);
      entry.obj = export_mesh(r.mesh);
      std::ostringstream maps;
      write_map_container(maps, MapContainer{r.masks, r.maps});
      entry.maps = maps.str();
      entry.vertices = r.mesh.vertices.size();
      entry.faces = r.mesh.faces.size();
      std::lock_guard lock(mutex_);
      cache_[key] = entry;  // same key, same content
    }
    return json_response(200, {{"mesh_id", key},
                               {"maps_id", key},
                               {"vertices", entry.vertices},
                               {"faces", entry.faces},
                               {"snapshot", hex64(state_.snapshot)}});
  });
}

Response Service::edit(std::string_view body) const {
  return guarded([&] {
    const json doc = parse_body(body);
    const GroupRegistry& reg = state_.bases.groups;
    const Embedding e = embedding_from_json(doc.at("embedding"), reg);
    std::vector<EmbeddingEdit> edits;
    for (const json& x : doc.value("edits", json::array())) {
      const std::string op = x.at("op").get<std::string>();
      if (op == "set") {
        edits.push_back(CoefficientEdit{group_of(x.at("group"), reg), x.at("component").get<int>(),
                                        x.at("value").get<double>()});
      } else if (op == "swap") {
        const int g = group_of(x.at("group"), reg);
        if (g < 0 || g >= reg.size()) throw Error("index-out-of-range", "swap group out of range");
        edits.push_back(GroupSwap::from(embedding_from_json(x.at("donor"), reg), g));
      } else {
        throw Error("schema", "unknown edit op '" + op + "'");
      }
    }
    return json_response(200, embedding_to_json(edit_embedding(e, edits), reg));
  });
}

Response Service::interp(std::string_view body) const {
  return guarded([&] {
    const json doc = parse_body(body);
    const GroupRegistry& reg = state_.bases.groups;
    const Embedding a = embedding_from_json(doc.at("source"), reg);
    const Embedding b = embedding_from_json(doc.at("target"), reg);
    return json_response(200, embedding_to_json(interpolate(a, b, doc.at("alpha").get<double>()), reg));
  });
}

Response Service::mesh(std::string_view id) const {
  std::lock_guard lock(mutex_);
  const auto it = cache_.find(id);
  if (it == cache_.end()) return error_response(404, "unknown-mesh", "no mesh with id " + std::string(id));
  return {200, it->second.obj, "text/plain"};
}

Response Service::maps(std::string_view id) const {
  std::lock_guard lock(mutex_);
  const auto it = cache_.find(id);
  if (it == cache_.end()) return error_response(404, "unknown-maps", "no maps with id " + std::string(id));
  return {200, it->second.maps, "application/octet-stream"};
}

Response Service::health() const {
  return json_response(200, {{"status", "ok"},
                             {"snapshot", hex64(state_.snapshot)},
                             {"groups", state_.bases.size()},
                             {"h", state_.bases.h}});
}

// --- HTTP -------------------------------------------------------------------------------

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;
  explicit Impl(Service& s) : service(s) {}
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  Service& s = impl_->service;
  auto& srv = impl_->server;
  srv.Post("/encode", [&s, send](const httplib::Request& q, httplib::Response& r) { send(r, s.encode(q.body)); });
  srv.Post("/decode", [&s, send](const httplib::Request& q, httplib::Response& r) { send(r, s.decode(q.body)); });
  srv.Post("/edit", [&s, send](const httplib::Request& q, httplib::Response& r) { send(r, s.edit(q.body)); });
  srv.Post("/interp", [&s, send](const httplib::Request& q, httplib::Response& r) { send(r, s.interp(q.body)); });
  srv.Get(R"(/mesh/([0-9a-zA-Z]+))",
          [&s, send](const httplib::Request& q, httplib::Response& r) { send(r, s.mesh(q.matches[1].str())); });
  srv.Get(R"(/maps/([0-9a-zA-Z]+))",
          [&s, send](const httplib::Request& q, httplib::Response& r) { send(r, s.maps(q.matches[1].str())); });
  srv.Get("/health", [&s, send](const httplib::Request&, httplib::Response& r) { send(r, s.health()); });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port)) throw Error("bind-failed", "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace sewkit

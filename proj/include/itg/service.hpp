#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "itg/engine.hpp"
#include "itg/persona.hpp"

namespace httplib {
class Server;
}

namespace itg::service {

struct ApiError {
  int status = 500;
  std::string code;
  std::string message;

  nlohmann::json to_json() const;
};

// Maps domain error codes onto HTTP statuses: 400 malformed requests, 404 unknown
// story/character/topic/session, 409 finished session or no input, 503 generation failure.
ApiError to_api_error(const std::exception& e);

// One JSON object per line in `<dir>/<id>.log`.
class SessionLog {
 public:
  explicit SessionLog(std::filesystem::path dir);

  void append(const std::string& id, std::span<const nlohmann::json> events) const;
  std::vector<nlohmann::json> read(const std::string& id) const;
  std::vector<std::string> session_ids() const;

 private:
  std::filesystem::path dir_;
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

// Transport-independent request handlers plus the HTTP binding. Requests on one session are
// serialized by that session's lock; different sessions proceed in parallel.
class Service {
 public:
  Service(engine::Engine& engine, persona::ClassifierBackends classifier,
          std::optional<std::filesystem::path> sessions_dir = std::nullopt);

  // Replays every persisted session; returns how many were restored. Unreadable records are
  // skipped and reported in `failures`.
  std::size_t restore(std::vector<std::string>* failures = nullptr);

  Response create_session(const std::string& body);
  Response list_stories() const;
  Response post_turn(const std::string& id, const std::string& body);
  Response report(const std::string& id);
  Response get_session(const std::string& id) const;

  // Routes: POST /sessions, GET /stories, POST /sessions/{id}/turns,
  // POST /sessions/{id}/report, GET /sessions/{id}.
  void mount(httplib::Server& server);

 private:
  struct Entry {
    std::mutex mutex;
    engine::GameSession session;
    std::size_t persisted = 0;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  void persist(Entry& entry) const;

  engine::Engine& engine_;
  persona::ClassifierBackends classifier_;
  std::optional<SessionLog> log_;
  mutable std::mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

// Blocks serving on host:port until the server stops.
void serve(Service& service, const std::string& host, int port);

}  // namespace itg::service

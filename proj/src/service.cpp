#include "itg/service.hpp"

#include <fstream>

#include <httplib.h>

#include "itg/decoder.hpp"

namespace itg::service {

namespace {

int status_for(const std::string& code) {
  static const std::map<std::string, int, std::less<>> table = {
      {"bad_request", 400},       {"invalid_mode", 400},      {"unknown_story", 404},
      {"unknown_character", 404}, {"unknown_topic", 404},     {"unknown_session", 404},
      {"not_found", 404},         {"session_finished", 409},  {"no_player_input", 409},
      {"generation_failed", 503}, {"backend_failed", 503}};
  auto it = table.find(code);
  return it == table.end() ? 500 : it->second;
}

Response error_response(const std::exception& e) {
  auto err = to_api_error(e);
  return {err.status, err.to_json()};
}

nlohmann::json parse_body(const std::string& body) {
  try {
    auto j = nlohmann::json::parse(body);
    if (!j.is_object()) throw Error("bad_request", "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("bad_request", std::string("malformed JSON: ") + e.what());
  }
}

std::string required_string(const nlohmann::json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw Error("bad_request", std::string("missing field '") + field + "'");
  if (!it->is_string()) throw Error("bad_request", std::string("field '") + field + "' must be a string");
  return it->get<std::string>();
}

nlohmann::json utterances_json(std::span<const corpus::Utterance> utterances) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& u : utterances) out.push_back(engine::to_json(u));
  return out;
}

}  // namespace

nlohmann::json ApiError::to_json() const {
  return {{"status", status}, {"code", code}, {"message", message}};
}

ApiError to_api_error(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return {status_for(err->code()), err->code(), err->what()};
  }
  return {500, "internal_error", e.what()};
}

SessionLog::SessionLog(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

void SessionLog::append(const std::string& id, std::span<const nlohmann::json> events) const {
  if (events.empty()) return;
  std::ofstream out(dir_ / (id + ".log"), std::ios::app | std::ios::binary);
  if (!out) throw Error("io_error", "cannot append to session log " + id);
  for (const auto& e : events) out << e.dump() << '\n';
  out.flush();
  if (!out) throw Error("io_error", "failed writing session log " + id);
}

std::vector<nlohmann::json> SessionLog::read(const std::string& id) const {
  std::vector<nlohmann::json> events;
  for (const auto& line : split_lines(read_file(dir_ / (id + ".log")))) {
    if (trim(line).empty()) continue;
    try {
      events.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error&) {
      // A torn final line from a crash mid-write; everything before it is intact.
      break;
    }
  }
  return events;
}

std::vector<std::string> SessionLog::session_ids() const {
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".log") {
      ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

Service::Service(engine::Engine& engine, persona::ClassifierBackends classifier,
                 std::optional<std::filesystem::path> sessions_dir)
    : engine_(engine), classifier_(classifier) {
  if (sessions_dir) log_.emplace(*sessions_dir);
}

std::size_t Service::restore(std::vector<std::string>* failures) {
  if (!log_) return 0;
  std::size_t restored = 0;
  for (const auto& id : log_->session_ids()) {
    try {
      auto events = log_->read(id);
      auto entry = std::make_shared<Entry>();
      entry->session = engine_.replay(events);
      entry->persisted = entry->session.events.size();
      std::lock_guard lock(registry_mutex_);
      sessions_[entry->session.id] = entry;
      ++restored;
    } catch (const std::exception& e) {
      if (failures) failures->push_back(id + ": " + e.what());
    }
  }
  return restored;
}

std::shared_ptr<Service::Entry> Service::find(const std::string& id) const {
  std::lock_guard lock(registry_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error("unknown_session", "no session '" + id + "'");
  return it->second;
}

void Service::persist(Entry& entry) const {
  const auto& events = entry.session.events;
  if (log_ && entry.persisted < events.size()) {
    log_->append(entry.session.id, std::span(events).subspan(entry.persisted));
  }
  entry.persisted = events.size();
}

Response Service::create_session(const std::string& body) {
  try {
    auto j = parse_body(body);
    auto story = required_string(j, "story");
    auto character = required_string(j, "character");
    auto topic = required_string(j, "topic");
    auto mode_text = required_string(j, "mode");
    engine::Mode mode;
    try {
      mode = engine::parse_mode(mode_text);
    } catch (const Error& e) {
      throw Error("bad_request", e.what());
    }
    auto entry = std::make_shared<Entry>();
    entry->session = engine_.new_session(story, character, topic, mode);
    std::lock_guard entry_lock(entry->mutex);
    persist(*entry);
    {
      std::lock_guard lock(registry_mutex_);
      sessions_[entry->session.id] = entry;
    }
    auto view = engine::to_json(entry->session);
    view["starting_transcript"] = view["transcript"];
    return {201, view};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

Response Service::list_stories() const {
  try {
    const auto& catalog = engine_.catalog();
    nlohmann::json stories = nlohmann::json::array();
    for (const auto& name : catalog.story_names()) {
      auto story = catalog.story(name);
      nlohmann::json characters = nlohmann::json::array();
      for (const auto& [who, lines] : corpus::list_characters(*story)) {
        characters.push_back({{"name", who}, {"lines", lines}});
      }
      stories.push_back(
          {{"name", name}, {"seasons", story->season_count()}, {"characters", characters}});
    }
    return {200, {{"stories", stories}, {"topics", catalog.topic_names()}}};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

Response Service::post_turn(const std::string& id, const std::string& body) {
  std::shared_ptr<Entry> entry;
  try {
    entry = find(id);
  } catch (const std::exception& e) {
    return error_response(e);
  }
  std::lock_guard lock(entry->mutex);
  try {
    auto j = parse_body(body);
    auto text = required_string(j, "text");
    auto added = engine_.submit_turn(entry->session, text);
    persist(*entry);
    const auto& s = entry->session;
    return {200,
            {{"new_utterances", utterances_json(added)},
             {"season_index", s.season_index},
             {"status", engine::status_name(s.status)},
             {"player_input_count", s.player_input_count()}}};
  } catch (const std::exception& e) {
    try {
      persist(*entry);
    } catch (const std::exception&) {
    }
    return error_response(e);
  }
}

Response Service::report(const std::string& id) {
  std::shared_ptr<Entry> entry;
  try {
    entry = find(id);
  } catch (const std::exception& e) {
    return error_response(e);
  }
  std::lock_guard lock(entry->mutex);
  try {
    auto report = engine_.finish_session(entry->session, classifier_);
    persist(*entry);
    return {200, persona::to_json(report)};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

Response Service::get_session(const std::string& id) const {
  try {
    auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    return {200, engine::to_json(entry->session)};
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

void Service::mount(httplib::Server& server) {
  auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, create_session(req.body));
  });
  server.Get("/stories", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, list_stories());
  });
  server.Post(R"(/sessions/([^/]+)/turns)",
              [this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, post_turn(req.matches[1], req.body));
              });
  server.Post(R"(/sessions/([^/]+)/report)",
              [this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, report(req.matches[1]));
              });
  server.Get(R"(/sessions/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_session(req.matches[1]));
  });
  server.set_error_handler([send](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    ApiError err{res.status, res.status == 404 ? "not_found" : "bad_request",
                 "no route for " + req.method + " " + req.path};
    if (res.status >= 500) err.code = "internal_error";
    send(res, {err.status, err.to_json()});
  });
  server.set_exception_handler(
      [send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          send(res, error_response(e));
        } catch (...) {
          send(res, {500, ApiError{500, "internal_error", "unknown failure"}.to_json()});
        }
      });
}

void serve(Service& service, const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  if (!server.listen(host, port)) {
    throw Error("io_error", "cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace itg::service

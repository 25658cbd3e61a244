#include "itg/engine.hpp"

#include <algorithm>
#include <random>

#include "itg/keywords.hpp"

namespace itg::engine {

namespace {

bool safe_name(std::string_view name) {
  return !name.empty() && name != "." && name != ".." &&
         name.find_first_of("/\\") == std::string_view::npos;
}

constexpr std::string_view kCreated = "session-created";
constexpr std::string_view kInput = "player-input";
constexpr std::string_view kGenerated = "generated-utterance";
constexpr std::string_view kSeason = "season-advanced";
constexpr std::string_view kFinished = "finished";

}  // namespace

std::string_view mode_name(Mode mode) { return mode == Mode::standard ? "standard" : "immersive"; }

Mode parse_mode(std::string_view name) {
  if (name == "standard") return Mode::standard;
  if (name == "immersive") return Mode::immersive;
  throw Error("invalid_mode", "mode must be 'standard' or 'immersive'");
}

std::string_view status_name(Status status) {
  return status == Status::active ? "active" : "finished";
}

StoryCatalog::StoryCatalog(std::filesystem::path stories_dir, std::filesystem::path topics_dir)
    : stories_dir_(std::move(stories_dir)),
      topics_dir_(topics_dir.empty() ? stories_dir_ / "topics" : std::move(topics_dir)) {}

std::vector<std::string> StoryCatalog::story_names() const {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(stories_dir_, ec)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "story.json")) {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<std::string> StoryCatalog::topic_names() const {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(topics_dir_, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      names.push_back(entry.path().stem().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::shared_ptr<const corpus::Story> StoryCatalog::story(std::string_view name) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = stories_.find(name); it != stories_.end()) return it->second;
  }
  auto dir = stories_dir_ / std::string(name);
  if (!safe_name(name) || !std::filesystem::exists(dir / "story.json")) {
    throw Error("unknown_story", "no story named '" + std::string(name) + "'");
  }
  auto loaded = std::make_shared<const corpus::Story>(corpus::load_story(dir));
  std::lock_guard lock(mutex_);
  return stories_.emplace(std::string(name), std::move(loaded)).first->second;
}

attributes::BagOfWords StoryCatalog::topic(std::string_view name) const {
  auto path = topics_dir_ / (std::string(name) + ".txt");
  if (!safe_name(name) || !std::filesystem::exists(path)) {
    throw Error("unknown_topic", "no topic named '" + std::string(name) + "'");
  }
  return attributes::load_bag(path, "topic:" + std::string(name));
}

attributes::BagOfWords StoryCatalog::storyline(const corpus::Story& story, std::size_t season,
                                               std::size_t cap) const {
  auto key = std::make_pair(story.name, season);
  {
    std::lock_guard lock(mutex_);
    if (auto it = storylines_.find(key); it != storylines_.end()) return it->second;
  }
  std::vector<std::string> phrases;
  auto path = keywords::keyword_file_path(story.root, season);
  if (std::filesystem::exists(path)) {
    phrases = keywords::read_keyword_file(path);
    if (phrases.size() > cap) phrases.resize(cap);
  } else {
    phrases = keywords::rank_and_cap(keywords::extract_phrase_counts(story.season_script(season)), cap);
  }
  auto bag = attributes::make_bag("storyline:season" + std::to_string(season + 1), phrases);
  std::lock_guard lock(mutex_);
  return storylines_.emplace(key, std::move(bag)).first->second;
}

nlohmann::json to_json(const corpus::Utterance& u) {
  return {{"speaker", u.speaker},
          {"text", u.text},
          {"kind", u.is_line() ? "line" : "direction"}};
}

corpus::Utterance utterance_from_json(const nlohmann::json& j) {
  if (j.at("kind") == "direction") return corpus::Utterance::direction(j.at("text"));
  return corpus::Utterance::line(j.at("speaker"), j.at("text"));
}

nlohmann::json to_json(const GameSession& session) {
  nlohmann::json transcript = nlohmann::json::array();
  for (const auto& u : session.transcript) transcript.push_back(to_json(u));
  nlohmann::json j = {{"session_id", session.id},
                      {"story", session.story},
                      {"character", session.player_character},
                      {"topic", session.topic},
                      {"mode", mode_name(session.mode)},
                      {"status", status_name(session.status)},
                      {"season_index", session.season_index},
                      {"player_input_count", session.player_input_count()},
                      {"transcript", transcript}};
  if (session.report) j["report"] = persona::to_json(*session.report);
  return j;
}

decoder::TurnResult PlugAndPlayGenerator::generate(const decoder::TurnRequest& request,
                                                   std::uint64_t seed) {
  auto config = config_;
  config.seed = seed;
  return decoder::generate_turn(request, config, backend_);
}

std::size_t season_for(std::size_t input_count, std::size_t inputs_per_season, std::size_t seasons) {
  if (seasons == 0) return 0;
  return std::min(input_count / std::max<std::size_t>(inputs_per_season, 1), seasons - 1);
}

std::string new_session_id() {
  static std::mutex mutex;
  static std::mt19937_64 engine{std::random_device{}()};
  std::lock_guard lock(mutex);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id;
  for (auto bits = engine(); id.size() < 16; bits >>= 4) id.push_back(kHex[bits & 0xF]);
  return id;
}

Engine::Engine(const StoryCatalog& catalog, const commonsense::CommonsenseBackend* commonsense,
               TurnGenerator& generator, EngineConfig config)
    : catalog_(catalog), commonsense_(commonsense), generator_(generator), config_(config) {
  config_.decode.validate();
  if (config_.standard_appearances < 1) {
    throw Error("invalid_config", "standard_appearances must be >= 1");
  }
}

void Engine::record(GameSession& session, std::string type, nlohmann::json data) const {
  data["type"] = std::move(type);
  session.events.push_back(std::move(data));
}

attributes::BagOfWords Engine::relation_bag(std::string_view text, std::string_view actor) const {
  if (!commonsense_ || trim(text).empty()) return attributes::make_bag("relations", {});
  try {
    auto expansion = commonsense::expand_event(text, commonsense::kAllRelations, *commonsense_,
                                               actor, config_.objects_per_relation);
    return commonsense::tuples_to_bag(expansion);
  } catch (const Error&) {
    return attributes::make_bag("relations", {});
  }
}

attributes::AttributeSet Engine::assemble(const GameSession& session,
                                          const corpus::Story& story) const {
  return attributes::merge_bags(catalog_.topic(session.topic),
                                catalog_.storyline(story, session.season_index, config_.bag_cap),
                                relation_bag(session.relation_source, session.player_character),
                                config_.weights);
}

GameSession Engine::new_session(std::string_view story_name, std::string_view character,
                                std::string_view topic, Mode mode, std::string id) {
  auto story = catalog_.story(story_name);
  if (!story->characters.contains(std::string(character))) {
    throw Error("unknown_character", "'" + std::string(character) + "' does not appear in " +
                                         std::string(story_name));
  }
  if (story->season_count() == 0) throw Error("unknown_story", "story has no seasons");
  catalog_.topic(topic);

  GameSession s;
  s.id = id.empty() ? new_session_id() : std::move(id);
  s.story = story_name;
  s.player_character = character;
  s.topic = topic;
  s.mode = mode;
  s.transcript = story->starting_excerpt();
  s.attributes = assemble(s, *story);

  nlohmann::json transcript = nlohmann::json::array();
  for (const auto& u : s.transcript) transcript.push_back(to_json(u));
  record(s, std::string(kCreated),
         {{"session_id", s.id},
          {"story", s.story},
          {"character", s.player_character},
          {"topic", s.topic},
          {"mode", mode_name(mode)},
          {"transcript", transcript}});
  return s;
}

void Engine::apply_season(GameSession& session, const corpus::Story& story, bool log) const {
  auto next = season_for(session.player_input_count(), config_.inputs_per_season,
                         story.season_count());
  if (next <= session.season_index) return;
  session.season_index = next;
  session.attributes.storyline = catalog_.storyline(story, next, config_.bag_cap);
  session.attributes = attributes::merge_bags(session.attributes.topic,
                                              session.attributes.storyline,
                                              session.attributes.relations, config_.weights);
  if (log) record(session, std::string(kSeason), {{"season_index", next}});
}

std::size_t Engine::advance_season(GameSession& session) {
  if (session.status == Status::finished) {
    throw Error("session_finished", "session " + session.id + " is finished");
  }
  apply_season(session, *catalog_.story(session.story), true);
  return session.season_index;
}

std::vector<corpus::Utterance> Engine::submit_turn(GameSession& session, std::string_view player_text) {
  if (session.status == Status::finished) {
    throw Error("session_finished", "session " + session.id + " is finished");
  }
  auto story = catalog_.story(session.story);
  const std::string text(trim(player_text));

  session.player_inputs.push_back(text);
  if (!text.empty()) {
    session.transcript.push_back(corpus::Utterance::line(session.player_character, text));
    session.relation_source = text;
    session.attributes = attributes::merge_bags(
        session.attributes.topic, session.attributes.storyline,
        relation_bag(text, session.player_character), config_.weights);
  }
  record(session, std::string(kInput), {{"text", text}});
  apply_season(session, *story, true);

  std::vector<corpus::Utterance> added;
  std::size_t appearances = 1;
  std::optional<std::string> forced;
  const std::uint64_t turn_seed =
      config_.decode.seed + (static_cast<std::uint64_t>(session.player_input_count()) << 8);
  for (std::uint64_t call = 0;; ++call) {
    auto window = decoder::context_window(session.transcript, config_.context_size);
    decoder::TurnRequest request{window, session.player_character, &session.attributes, forced};
    auto result = generator_.generate(request, turn_seed + call);
    for (auto& u : result.utterances) {
      record(session, std::string(kGenerated), {{"utterance", to_json(u)}});
      session.transcript.push_back(u);
      added.push_back(std::move(u));
    }
    if (session.mode == Mode::standard && result.stop == decoder::StopReason::character_turn &&
        appearances < config_.standard_appearances) {
      forced = session.player_character;
      ++appearances;
      continue;
    }
    break;
  }
  return added;
}

persona::PersonalityReport Engine::finish_session(GameSession& session,
                                                  const persona::ClassifierBackends& classifier) {
  if (session.status == Status::finished) {
    throw Error("session_finished", "session " + session.id + " is finished");
  }
  bool any = std::any_of(session.player_inputs.begin(), session.player_inputs.end(),
                         [](const std::string& t) { return !trim(t).empty(); });
  if (!any) throw Error("no_player_input", "the player has not said anything yet");
  auto report = persona::classify(session.player_inputs, classifier);
  session.status = Status::finished;
  session.report = report;
  record(session, std::string(kFinished), {{"report", persona::to_json(report)}});
  return report;
}

GameSession Engine::replay(std::span<const nlohmann::json> events) const {
  if (events.empty() || events.front().value("type", "") != kCreated) {
    throw Error("invalid_record", "session record must start with session-created");
  }
  try {
    const auto& created = events.front();
    GameSession s;
    s.id = created.at("session_id");
    s.story = created.at("story");
    s.player_character = created.at("character");
    s.topic = created.at("topic");
    s.mode = parse_mode(created.at("mode").get<std::string>());
    for (const auto& u : created.at("transcript")) s.transcript.push_back(utterance_from_json(u));
    s.events.push_back(created);

    for (const auto& e : events.subspan(1)) {
      const auto type = e.at("type").get<std::string>();
      if (type == kInput) {
        std::string text = e.at("text");
        s.player_inputs.push_back(text);
        if (!text.empty()) {
          s.transcript.push_back(corpus::Utterance::line(s.player_character, text));
          s.relation_source = text;
        }
      } else if (type == kGenerated) {
        s.transcript.push_back(utterance_from_json(e.at("utterance")));
      } else if (type == kSeason) {
        s.season_index = e.at("season_index");
      } else if (type == kFinished) {
        s.status = Status::finished;
        s.report = persona::report_from_json(e.at("report"));
      } else {
        throw Error("invalid_record", "unknown event type '" + type + "'");
      }
      s.events.push_back(e);
    }
    s.attributes = assemble(s, *catalog_.story(s.story));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_record", e.what());
  }
}

}  // namespace itg::engine

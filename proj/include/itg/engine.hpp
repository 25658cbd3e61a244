#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "itg/attributes.hpp"
#include "itg/commonsense.hpp"
#include "itg/corpus.hpp"
#include "itg/decoder.hpp"
#include "itg/language_model.hpp"
#include "itg/persona.hpp"

namespace itg::engine {

enum class Mode { standard, immersive };
enum class Status { active, finished };

std::string_view mode_name(Mode mode);
// Throws Error("invalid_mode").
Mode parse_mode(std::string_view name);
std::string_view status_name(Status status);

struct EngineConfig {
  std::size_t context_size = 10;
  std::size_t inputs_per_season = 5;
  // Standard mode: the player's character appears this many times per turn, the first
  // typed by the player and the rest generated.
  std::size_t standard_appearances = 3;
  std::size_t objects_per_relation = commonsense::kDefaultObjectsPerRelation;
  std::size_t bag_cap = 200;
  attributes::BagWeights weights;
  decoder::DecodeConfig decode;
};

// Story cassettes live in subdirectories of `stories_dir` holding a story.json; topic bags are
// `<topics_dir>/<name>.txt`. Listings rescan the directories on every call. Loaded stories and
// storyline bags are cached and shared read-only.
class StoryCatalog {
 public:
  explicit StoryCatalog(std::filesystem::path stories_dir, std::filesystem::path topics_dir = {});

  std::vector<std::string> story_names() const;
  std::vector<std::string> topic_names() const;

  // Throws Error("unknown_story").
  std::shared_ptr<const corpus::Story> story(std::string_view name) const;
  // Throws Error("unknown_topic").
  attributes::BagOfWords topic(std::string_view name) const;
  // `<story>/keywords/season<k+1>.txt` when present, else extracted from the season script.
  attributes::BagOfWords storyline(const corpus::Story& story, std::size_t season,
                                   std::size_t cap) const;

  const std::filesystem::path& stories_dir() const { return stories_dir_; }

 private:
  std::filesystem::path stories_dir_;
  std::filesystem::path topics_dir_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, std::shared_ptr<const corpus::Story>, std::less<>> stories_;
  mutable std::map<std::pair<std::string, std::size_t>, attributes::BagOfWords> storylines_;
};

struct GameSession {
  std::string id;
  std::string story;
  std::string player_character;
  std::string topic;
  Mode mode = Mode::standard;
  std::vector<corpus::Utterance> transcript;
  std::vector<std::string> player_inputs;
  std::size_t season_index = 0;
  Status status = Status::active;
  std::optional<persona::PersonalityReport> report;

  // Current steering bags; derived state, rebuilt on replay.
  attributes::AttributeSet attributes;
  std::string relation_source;  // latest non-empty player input

  // Append-only record: session-created, player-input, generated-utterance, season-advanced,
  // finished. Replaying it reconstructs the session.
  std::vector<nlohmann::json> events;

  std::size_t player_input_count() const { return player_inputs.size(); }
};

nlohmann::json to_json(const corpus::Utterance& u);
corpus::Utterance utterance_from_json(const nlohmann::json& j);
// Public view of a session (no event log).
nlohmann::json to_json(const GameSession& session);

// Produces one generation segment. The engine passes a per-call seed.
class TurnGenerator {
 public:
  virtual ~TurnGenerator() = default;
  virtual decoder::TurnResult generate(const decoder::TurnRequest& request, std::uint64_t seed) = 0;
};

class PlugAndPlayGenerator final : public TurnGenerator {
 public:
  PlugAndPlayGenerator(const lm::LanguageModel& backend, decoder::DecodeConfig config)
      : backend_(backend), config_(config) {}
  decoder::TurnResult generate(const decoder::TurnRequest& request, std::uint64_t seed) override;

 private:
  const lm::LanguageModel& backend_;
  decoder::DecodeConfig config_;
};

// Season index for a given number of inputs: min(floor(count / per_season), seasons - 1).
std::size_t season_for(std::size_t input_count, std::size_t inputs_per_season, std::size_t seasons);

class Engine {
 public:
  // `commonsense` may be null (relation bags stay empty).
  Engine(const StoryCatalog& catalog, const commonsense::CommonsenseBackend* commonsense,
         TurnGenerator& generator, EngineConfig config = {});

  // Throws Error("unknown_story"), Error("unknown_character") or Error("unknown_topic").
  GameSession new_session(std::string_view story, std::string_view character,
                          std::string_view topic, Mode mode, std::string id = {});

  // Returns the utterances this turn appended after the player's own line. Throws
  // Error("session_finished"); generation failures propagate as decoder::GenerationError with
  // the player's input already recorded.
  std::vector<corpus::Utterance> submit_turn(GameSession& session, std::string_view player_text);

  std::size_t advance_season(GameSession& session);

  // Throws Error("session_finished") or Error("no_player_input").
  persona::PersonalityReport finish_session(GameSession& session,
                                            const persona::ClassifierBackends& classifier);

  // Rebuilds a session from its event record without calling the generator.
  GameSession replay(std::span<const nlohmann::json> events) const;

  const EngineConfig& config() const { return config_; }
  const StoryCatalog& catalog() const { return catalog_; }

 private:
  attributes::AttributeSet assemble(const GameSession& session, const corpus::Story& story) const;
  attributes::BagOfWords relation_bag(std::string_view text, std::string_view actor) const;
  void record(GameSession& session, std::string type, nlohmann::json data) const;
  void apply_season(GameSession& session, const corpus::Story& story, bool log) const;

  const StoryCatalog& catalog_;
  const commonsense::CommonsenseBackend* commonsense_;
  TurnGenerator& generator_;
  EngineConfig config_;
};

std::string new_session_id();

}  // namespace itg::engine

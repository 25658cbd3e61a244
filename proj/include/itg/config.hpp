#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "itg/commonsense.hpp"
#include "itg/engine.hpp"
#include "itg/language_model.hpp"
#include "itg/persona.hpp"

namespace itg::config {

struct AppConfig {
  std::filesystem::path data_dir;
  std::filesystem::path stories_dir;       // default: <data_dir>/stories
  std::filesystem::path topics_dir;        // default: <stories_dir>/topics
  std::filesystem::path commonsense_file;  // default: <data_dir>/commonsense/atomic_fixture.tsv
  std::filesystem::path nb_model;          // default: <data_dir>/models/nb_fixture.json
  std::filesystem::path sessions_dir = "sessions";

  std::string backend = "toy";  // "toy" or "scripted"
  lm::ToyModelOptions toy;
  std::vector<std::string> scripted_responses;
  std::string neural_scorer_url;  // empty: NB only

  std::string host = "127.0.0.1";
  int port = 8080;

  engine::EngineConfig engine;
};

// The data directory used when none is configured: ./data if present, else the one the
// build was configured with.
std::filesystem::path default_data_dir();

// Fills unset paths from data_dir.
void resolve_paths(AppConfig& config);

// Unknown keys are rejected with Error("invalid_config"). Relative paths resolve against
// `base_dir`.
AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const AppConfig& config);

// `path` if given, else $ITG_CONFIG if set, else defaults.
AppConfig load(const std::optional<std::filesystem::path>& path);

// Toy backend: trained at load time on the scripts of `stories` (every story when empty),
// in the given order.
std::unique_ptr<lm::LanguageModel> make_backend(const AppConfig& config,
                                                const engine::StoryCatalog& catalog,
                                                std::vector<std::string> stories = {});

std::unique_ptr<commonsense::TupleStore> load_commonsense(const AppConfig& config);

}  // namespace itg::config

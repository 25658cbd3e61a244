#include "itg/config.hpp"

#include <cstdlib>
#include <functional>
#include <map>

namespace itg::config {

namespace {

using Handlers = std::map<std::string, std::function<void(const nlohmann::json&)>, std::less<>>;

void apply(const nlohmann::json& j, const Handlers& handlers, std::string_view where) {
  if (!j.is_object()) throw Error("invalid_config", std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    auto it = handlers.find(key);
    if (it == handlers.end()) {
      throw Error("invalid_config", "unknown key '" + key + "' in " + std::string(where));
    }
    it->second(value);
  }
}

template <typename T>
std::function<void(const nlohmann::json&)> into(T& target) {
  return [&target](const nlohmann::json& v) { v.get_to(target); };
}

std::function<void(const nlohmann::json&)> path_into(std::filesystem::path& target,
                                                     const std::filesystem::path& base) {
  return [&target, base](const nlohmann::json& v) {
    std::filesystem::path p = v.get<std::string>();
    target = p.is_relative() && !base.empty() ? base / p : p;
  };
}

void decode_from_json(const nlohmann::json& j, decoder::DecodeConfig& d) {
  apply(j, {{"steps_per_token", into(d.steps_per_token)},
            {"step_size", into(d.step_size)},
            {"fluency_coef", into(d.fluency_coef)},
            {"fusion", into(d.fusion)},
            {"max_tokens", into(d.max_tokens)},
            {"temperature", into(d.temperature)},
            {"top_k", into(d.top_k)},
            {"seed", into(d.seed)},
            {"loss_ceiling", into(d.loss_ceiling)}},
        "decode");
  d.validate();
}

void engine_from_json(const nlohmann::json& j, engine::EngineConfig& e) {
  apply(j, {{"context_size", into(e.context_size)},
            {"inputs_per_season", into(e.inputs_per_season)},
            {"standard_appearances", into(e.standard_appearances)},
            {"objects_per_relation", into(e.objects_per_relation)},
            {"bag_cap", into(e.bag_cap)},
            {"weights",
             [&e](const nlohmann::json& w) {
               apply(w, {{"topic", into(e.weights.topic)},
                         {"storyline", into(e.weights.storyline)},
                         {"relations", into(e.weights.relations)}},
                     "engine.weights");
             }},
            {"decode", [&e](const nlohmann::json& d) { decode_from_json(d, e.decode); }}},
        "engine");
}

}  // namespace

std::filesystem::path default_data_dir() {
  if (std::filesystem::exists("data/stories")) return "data";
  return ITG_DEFAULT_DATA_DIR;
}

void resolve_paths(AppConfig& c) {
  if (c.data_dir.empty()) c.data_dir = default_data_dir();
  if (c.stories_dir.empty()) c.stories_dir = c.data_dir / "stories";
  if (c.topics_dir.empty()) c.topics_dir = c.stories_dir / "topics";
  if (c.commonsense_file.empty()) c.commonsense_file = c.data_dir / "commonsense" / "atomic_fixture.tsv";
  if (c.nb_model.empty()) c.nb_model = c.data_dir / "models" / "nb_fixture.json";
}

AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  AppConfig c;
  try {
    apply(j,
          {{"data_dir", path_into(c.data_dir, base_dir)},
           {"stories_dir", path_into(c.stories_dir, base_dir)},
           {"topics_dir", path_into(c.topics_dir, base_dir)},
           {"commonsense_file", path_into(c.commonsense_file, base_dir)},
           {"nb_model", path_into(c.nb_model, base_dir)},
           {"sessions_dir", path_into(c.sessions_dir, base_dir)},
           {"backend", into(c.backend)},
           {"toy",
            [&c](const nlohmann::json& t) {
              apply(t, {{"vocab_size", into(c.toy.vocab_size)},
                        {"latent_dim", into(c.toy.latent_dim)},
                        {"seed", into(c.toy.seed)},
                        {"max_context", into(c.toy.max_context)}},
                    "toy");
            }},
           {"scripted_responses", into(c.scripted_responses)},
           {"neural_scorer_url", into(c.neural_scorer_url)},
           {"host", into(c.host)},
           {"port", into(c.port)},
           {"engine", [&c](const nlohmann::json& e) { engine_from_json(e, c.engine); }}},
          "config");
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_config", e.what());
  }
  if (c.backend != "toy" && c.backend != "scripted") {
    throw Error("invalid_config", "backend must be 'toy' or 'scripted'");
  }
  resolve_paths(c);
  return c;
}

nlohmann::json to_json(const AppConfig& c) {
  const auto& e = c.engine;
  const auto& d = e.decode;
  return {{"data_dir", c.data_dir.string()},
          {"stories_dir", c.stories_dir.string()},
          {"topics_dir", c.topics_dir.string()},
          {"commonsense_file", c.commonsense_file.string()},
          {"nb_model", c.nb_model.string()},
          {"sessions_dir", c.sessions_dir.string()},
          {"backend", c.backend},
          {"toy",
           {{"vocab_size", c.toy.vocab_size},
            {"latent_dim", c.toy.latent_dim},
            {"seed", c.toy.seed},
            {"max_context", c.toy.max_context}}},
          {"scripted_responses", c.scripted_responses},
          {"neural_scorer_url", c.neural_scorer_url},
          {"host", c.host},
          {"port", c.port},
          {"engine",
           {{"context_size", e.context_size},
            {"inputs_per_season", e.inputs_per_season},
            {"standard_appearances", e.standard_appearances},
            {"objects_per_relation", e.objects_per_relation},
            {"bag_cap", e.bag_cap},
            {"weights",
             {{"topic", e.weights.topic},
              {"storyline", e.weights.storyline},
              {"relations", e.weights.relations}}},
            {"decode",
             {{"steps_per_token", d.steps_per_token},
              {"step_size", d.step_size},
              {"fluency_coef", d.fluency_coef},
              {"fusion", d.fusion},
              {"max_tokens", d.max_tokens},
              {"temperature", d.temperature},
              {"top_k", d.top_k},
              {"seed", d.seed},
              {"loss_ceiling", d.loss_ceiling}}}}}};
}

AppConfig load(const std::optional<std::filesystem::path>& path) {
  std::optional<std::filesystem::path> chosen = path;
  if (!chosen) {
    if (const char* env = std::getenv("ITG_CONFIG"); env && *env) chosen = env;
  }
  if (!chosen) {
    AppConfig c;
    resolve_paths(c);
    return c;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(*chosen));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("invalid_config", chosen->string() + ": " + e.what());
  }
  return from_json(j, chosen->parent_path());
}

std::unique_ptr<lm::LanguageModel> make_backend(const AppConfig& config,
                                                const engine::StoryCatalog& catalog,
                                                std::vector<std::string> stories) {
  if (config.backend == "scripted") {
    if (config.scripted_responses.empty()) {
      throw Error("invalid_config", "scripted backend needs scripted_responses");
    }
    return std::make_unique<lm::ScriptedLanguageModel>(config.scripted_responses);
  }
  std::string text;
  if (stories.empty()) stories = catalog.story_names();
  for (const auto& name : stories) {
    auto story = catalog.story(name);
    for (std::size_t s = 0; s < story->season_count(); ++s) text += story->season_script(s);
  }
  if (text.empty()) throw Error("invalid_config", "no story scripts to train the toy backend on");
  return std::make_unique<lm::ToyLanguageModel>(lm::ToyLanguageModel::train(text, config.toy));
}

std::unique_ptr<commonsense::TupleStore> load_commonsense(const AppConfig& config) {
  if (config.commonsense_file.empty() || !std::filesystem::exists(config.commonsense_file)) {
    return nullptr;
  }
  return std::make_unique<commonsense::TupleStore>(commonsense::TupleStore::load(config.commonsense_file));
}

}  // namespace itg::config

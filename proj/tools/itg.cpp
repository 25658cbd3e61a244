// Command-line entry point: ingestion, keyword building, classifier training, offline play
// and the HTTP service.

#include <cstdio>
#include <unistd.h>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "itg/config.hpp"
#include "itg/corpus.hpp"
#include "itg/engine.hpp"
#include "itg/keywords.hpp"
#include "itg/persona.hpp"
#include "itg/service.hpp"

namespace {

using namespace itg;

struct GlobalOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
};

config::AppConfig load_config(const GlobalOptions& g) {
  std::optional<std::filesystem::path> path;
  if (g.config_path) path = *g.config_path;
  auto c = config::load(path);
  if (g.seed) c.engine.decode.seed = *g.seed;
  return c;
}

// A story argument is either a directory holding story.json or a name in the stories dir.
std::filesystem::path story_dir(const config::AppConfig& c, const std::string& story) {
  if (std::filesystem::exists(std::filesystem::path(story) / "story.json")) return story;
  return c.stories_dir / story;
}

int run_ingest(const std::string& dir) {
  auto story = corpus::load_story(dir);
  std::size_t episodes = 0;
  std::size_t utterances = 0;
  for (const auto& season : story.seasons) {
    episodes += season.size();
    for (const auto& e : season) utterances += e.utterances.size();
  }
  std::cout << "story: " << story.name << "\n"
            << "seasons: " << story.season_count() << "\n"
            << "episodes: " << episodes << "\n"
            << "utterances: " << utterances << "\n"
            << "unmatched lines: " << story.diagnostics.unmatched_lines << " of "
            << story.diagnostics.nonblank_lines << "\n"
            << "characters:\n";
  for (const auto& [name, lines] : corpus::list_characters(story)) {
    std::cout << "  " << name << "\t" << lines << "\n";
  }
  return 0;
}

int run_extract(const config::AppConfig& c, const std::string& story_arg, const std::string& from,
                std::size_t cap, bool online) {
  auto story = corpus::load_story(story_dir(c, story_arg));
  auto choice = from == "script" ? keywords::SourceChoice::script : keywords::SourceChoice::summaries;
  corpus::FixtureSummarySource fixtures;
  corpus::HttpSummarySource web;
  corpus::SummarySource& source = online ? static_cast<corpus::SummarySource&>(web) : fixtures;
  auto bags = keywords::build_season_bags(story, choice, source, cap);
  keywords::write_keyword_files(story.root, bags);
  for (const auto& bag : bags) {
    std::cout << keywords::keyword_file_path(story.root, bag.season).string() << "\t"
              << bag.phrases.size() << " phrases from "
              << (bag.source == keywords::SourceChoice::summaries ? "summaries" : "script") << "\n";
  }
  return 0;
}

int run_train(const std::string& dataset, std::size_t folds, std::uint64_t seed,
              const std::optional<std::string>& output) {
  auto bundles = persona::load_dataset(dataset);
  auto docs = persona::to_documents(bundles);
  auto result = persona::evaluate(persona::nb_factory(persona::type_codes()), docs,
                                  persona::kTypeCount, folds, seed);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "documents: " << docs.size() << "\n"
            << "folds: " << folds << "\n"
            << std::fixed << std::setprecision(4) << "accuracy: " << result.accuracy << "\n"
            << "fold accuracy:";
  for (double a : result.fold_accuracy) std::cout << " " << a;
  std::cout << "\nconfusion (rows: true, columns: predicted)\n      ";
  for (auto code : persona::kTypeCodes) std::cout << std::setw(5) << code;
  std::cout << "\n";
  for (std::size_t i = 0; i < persona::kTypeCount; ++i) {
    std::cout << std::setw(6) << std::left << persona::kTypeCodes[i] << std::right;
    for (auto n : result.confusion[i]) std::cout << std::setw(5) << n;
    std::cout << "\n";
  }
  if (output) {
    persona::train_nb(bundles).save(*output);
    std::cout << "model written to " << *output << "\n";
  }
  return 0;
}

void print_report(const persona::PersonalityReport& r) {
  std::cout << "[Personality report: " << r.type_code << " (p=" << std::fixed
            << std::setprecision(4) << r.posteriors[*persona::type_index(r.type_code)]
            << (r.low_confidence ? ", low confidence" : "") << ")]\n"
            << "[" << r.description << "]\n";
}

struct Backends {
  std::optional<persona::NBModel> nb;
  std::unique_ptr<persona::HttpPersonalityScorer> neural;

  persona::ClassifierBackends view() const { return {nb ? &*nb : nullptr, neural.get()}; }
};

Backends load_classifier(const config::AppConfig& c, const std::optional<std::string>& model) {
  Backends b;
  std::filesystem::path path = model ? std::filesystem::path(*model) : c.nb_model;
  if (std::filesystem::exists(path)) b.nb = persona::NBModel::load(path);
  if (!c.neural_scorer_url.empty()) {
    b.neural = std::make_unique<persona::HttpPersonalityScorer>(c.neural_scorer_url);
  }
  if (!b.nb && !b.neural) throw Error("backend_failed", "no classifier model at " + path.string());
  return b;
}

int run_classify(const config::AppConfig& c, const std::string& file,
                 const std::optional<std::string>& model, bool json) {
  auto backends = load_classifier(c, model);
  auto texts = split_lines(read_file(file));
  auto report = persona::classify(texts, backends.view());
  if (json) {
    std::cout << persona::to_json(report).dump(2) << "\n";
  } else {
    print_report(report);
  }
  return 0;
}

// Prompts only make sense on a terminal; piped input is read silently.
std::optional<std::string> prompt(const std::string& question) {
  if (isatty(STDIN_FILENO)) std::cerr << question << std::flush;
  std::string line;
  if (!std::getline(std::cin, line)) return std::nullopt;
  return std::string(trim(line));
}

std::string choose(const std::string& what, const std::vector<std::string>& options,
                   const std::optional<std::string>& preset) {
  if (preset) return *preset;
  if (isatty(STDIN_FILENO)) {
    std::cerr << "Available " << what << "s:";
    for (const auto& o : options) std::cerr << " " << o;
    std::cerr << "\n";
  }
  auto answer = prompt("Choose a " + what + ": ");
  if (!answer || answer->empty()) throw Error("bad_request", "no " + what + " chosen");
  return *answer;
}

int run_play(config::AppConfig c, const std::string& story_name, const std::string& mode_name,
             const std::string& backend, std::optional<std::string> character,
             std::optional<std::string> topic) {
  c.backend = backend;
  engine::StoryCatalog catalog(c.stories_dir, c.topics_dir);
  auto story = catalog.story(story_name);
  auto model = config::make_backend(c, catalog, {story_name});
  auto commonsense = config::load_commonsense(c);
  engine::PlugAndPlayGenerator generator(*model, c.engine.decode);
  engine::Engine game(catalog, commonsense.get(), generator, c.engine);
  auto classifier = load_classifier(c, std::nullopt);

  std::vector<std::string> characters;
  for (const auto& [name, _] : corpus::list_characters(*story)) characters.push_back(name);
  auto who = choose("character", characters, character);
  auto what = choose("topic", catalog.topic_names(), topic);
  auto session = game.new_session(story_name, who, what, engine::parse_mode(mode_name));

  for (const auto& u : session.transcript) std::cout << corpus::format_utterance(u) << "\n";
  std::cout << std::flush;
  while (true) {
    auto line = prompt(session.player_character + ": ");
    if (!line || *line == "/quit" || *line == "/report") break;
    if (!line->empty()) std::cout << corpus::format_utterance(
                            corpus::Utterance::line(session.player_character, *line))
                                  << "\n";
    for (const auto& u : game.submit_turn(session, *line)) {
      std::cout << corpus::format_utterance(u) << "\n";
    }
    std::cout << std::flush;
  }
  std::cerr << "\n" << session.player_input_count() << " turns played\n";
  print_report(game.finish_session(session, classifier.view()));
  return 0;
}

int run_serve(config::AppConfig c, std::optional<int> port, std::optional<std::string> host) {
  if (port) c.port = *port;
  if (host) c.host = *host;
  engine::StoryCatalog catalog(c.stories_dir, c.topics_dir);
  auto model = config::make_backend(c, catalog);
  auto commonsense = config::load_commonsense(c);
  engine::PlugAndPlayGenerator generator(*model, c.engine.decode);
  engine::Engine game(catalog, commonsense.get(), generator, c.engine);
  auto classifier = load_classifier(c, std::nullopt);
  service::Service svc(game, classifier.view(), c.sessions_dir);
  std::vector<std::string> failures;
  auto restored = svc.restore(&failures);
  for (const auto& f : failures) std::cerr << "warning: could not restore " << f << "\n";
  std::cerr << "restored " << restored << " sessions; listening on " << c.host << ":" << c.port
            << "\n";
  service::serve(svc, c.host, c.port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Immersive text game engine"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--config", global.config_path, "JSON config file (default: $ITG_CONFIG)");
  app.add_option("--seed", global.seed, "Seed for every randomized step");

  std::string ingest_dir;
  auto* ingest = app.add_subcommand("ingest", "Parse a story directory and print a summary");
  ingest->add_option("story-dir", ingest_dir)->required();

  std::string extract_story;
  std::string extract_from = "summaries";
  std::size_t extract_cap = keywords::kDefaultBagCap;
  bool extract_online = false;
  auto* extract = app.add_subcommand("extract-keywords", "Write per-season storyline keyword files");
  extract->add_option("story", extract_story, "Story name or directory")->required();
  extract->add_option("--from", extract_from, "Source document")
      ->check(CLI::IsMember({"summaries", "script"}));
  extract->add_option("--cap", extract_cap, "Phrases kept per season");
  extract->add_flag("--online", extract_online, "Fetch summaries over HTTP");

  std::string dataset;
  std::size_t folds = 5;
  std::optional<std::string> model_out;
  auto* train = app.add_subcommand("train-classifier", "Cross-validate and train the NB classifier");
  train->add_option("dataset", dataset, "CSV with type,posts columns")->required();
  train->add_option("--folds", folds, "Stratified folds");
  train->add_option("--output", model_out, "Write the model trained on the full dataset");

  std::string classify_file;
  std::optional<std::string> classify_model;
  bool classify_json = false;
  auto* classify = app.add_subcommand("classify", "Personality report for a file of player inputs");
  classify->add_option("file", classify_file, "One input per line")->required();
  classify->add_option("--model", classify_model, "NB model file");
  classify->add_flag("--json", classify_json, "Print the report as JSON");

  std::string play_story;
  std::string play_mode = "standard";
  std::string play_backend = "toy";
  std::optional<std::string> play_character;
  std::optional<std::string> play_topic;
  auto* play = app.add_subcommand("play", "Play a story in the terminal");
  play->add_option("story", play_story)->required();
  play->add_option("--mode", play_mode)->check(CLI::IsMember({"standard", "immersive"}));
  play->add_option("--backend", play_backend)->check(CLI::IsMember({"toy", "scripted"}));
  play->add_option("--character", play_character);
  play->add_option("--topic", play_topic);

  std::optional<int> serve_port;
  std::optional<std::string> serve_host;
  auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
  serve->add_option("--port", serve_port);
  serve->add_option("--host", serve_host);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*ingest) return run_ingest(ingest_dir);
    auto cfg = load_config(global);
    if (*extract) return run_extract(cfg, extract_story, extract_from, extract_cap, extract_online);
    if (*train) return run_train(dataset, folds, cfg.engine.decode.seed, model_out);
    if (*classify) return run_classify(cfg, classify_file, classify_model, classify_json);
    if (*play) return run_play(cfg, play_story, play_mode, play_backend, play_character, play_topic);
    if (*serve) return run_serve(cfg, serve_port, serve_host);
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

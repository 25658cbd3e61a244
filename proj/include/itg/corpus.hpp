#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "itg/text.hpp"

namespace itg::corpus {

enum class UtteranceKind { line, direction };

struct Utterance {
  std::string speaker;  // empty for directions
  std::string text;
  UtteranceKind kind = UtteranceKind::line;

  static Utterance line(std::string speaker, std::string text) {
    return {std::move(speaker), std::move(text), UtteranceKind::line};
  }
  static Utterance direction(std::string text) {
    return {"", std::move(text), UtteranceKind::direction};
  }

  bool is_line() const { return kind == UtteranceKind::line; }
  bool operator==(const Utterance&) const = default;
};

struct ParseDiagnostics {
  std::size_t nonblank_lines = 0;
  // Lines that were neither "Name: text" nor bracketed and got attached to a neighbour.
  std::size_t unmatched_lines = 0;
};

struct SpeakerSplit {
  std::string speaker;
  std::string_view rest;
};

// Recognizes the "Name: rest" form. The name is at most five words, starts with a
// letter or digit, and carries no sentence punctuation (short abbreviations such as
// "Mr." are allowed). The colon must be followed by whitespace or end the line.
std::optional<SpeakerSplit> split_speaker(std::string_view line);

// Total: never throws. Blank lines are skipped, bracketed lines become directions,
// anything else continues the previous utterance (or becomes a direction when first).
std::vector<Utterance> parse_script(std::string_view raw, ParseDiagnostics* diagnostics = nullptr);

std::string format_utterance(const Utterance& u);
// One utterance per line, newline terminated. Output re-parses to the same list.
std::string format_script(std::span<const Utterance> utterances);

struct Episode {
  std::size_t id = 0;  // 1-based ordinal within its season
  std::string title;
  std::vector<Utterance> utterances;
};

struct ExcerptRef {
  std::size_t season = 0;
  std::size_t episode = 0;
  std::size_t first = 0;
  std::size_t count = 0;
};

struct SeasonSource {
  std::filesystem::path script;
  std::vector<std::filesystem::path> summaries;  // relative to the story root
  std::vector<std::string> summary_urls;
};

struct Story {
  std::string name;
  std::filesystem::path root;
  std::vector<std::vector<Episode>> seasons;
  std::set<std::string> characters;
  ExcerptRef start;
  std::vector<SeasonSource> sources;
  ParseDiagnostics diagnostics;

  std::size_t season_count() const { return seasons.size(); }
  std::vector<Utterance> starting_excerpt() const;
  // The season's script rendered back to script format, episode by episode.
  std::string season_script(std::size_t season) const;
};

// Splits a season file on "## Title" episode headers and parses each episode.
std::vector<Episode> split_episodes(std::string_view season_text,
                                    ParseDiagnostics* diagnostics = nullptr);

// Builds a story from already parsed seasons; characters are derived from the speakers.
Story make_story(std::string name, std::vector<std::vector<Episode>> seasons, ExcerptRef start);

// Loads `<dir>/story.json` and the season scripts it lists.
Story load_story(const std::filesystem::path& dir);

std::vector<std::pair<std::string, std::size_t>> list_characters(const Story& story);

class SummaryUnavailable : public Error {
 public:
  SummaryUnavailable(std::size_t season, const std::string& why)
      : Error("summary_unavailable",
              "summaries for season " + std::to_string(season) + " unavailable: " + why),
        season_(season) {}
  std::size_t season() const { return season_; }

 private:
  std::size_t season_;
};

class SummarySource {
 public:
  virtual ~SummarySource() = default;
  // Throws SummaryUnavailable when the episode summary cannot be produced.
  virtual std::string episode_summary(const Story& story, std::size_t season,
                                      std::size_t episode) = 0;
  virtual std::size_t episode_count(const Story& story, std::size_t season) const = 0;
};

// Offline mode: summary files listed in the story manifest.
class FixtureSummarySource final : public SummarySource {
 public:
  std::string episode_summary(const Story& story, std::size_t season,
                              std::size_t episode) override;
  std::size_t episode_count(const Story& story, std::size_t season) const override;
};

// Fetches one page per episode from the manifest's `summary_urls`. A JSON body with an
// "extract" field (the Wikipedia page-summary shape) yields that field; otherwise the raw
// body is used.
class HttpSummarySource final : public SummarySource {
 public:
  explicit HttpSummarySource(int timeout_seconds = 10) : timeout_seconds_(timeout_seconds) {}
  std::string episode_summary(const Story& story, std::size_t season,
                              std::size_t episode) override;
  std::size_t episode_count(const Story& story, std::size_t season) const override;

 private:
  int timeout_seconds_;
};

// Concatenates the season's episode summaries in episode order.
std::string fetch_summaries(const Story& story, std::size_t season, SummarySource& source);

}  // namespace itg::corpus

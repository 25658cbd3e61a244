#include "itg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include <json.hpp>

namespace itg::corpus {

namespace {

bool bracketed(std::string_view t) {
  if (t.size() < 2) return false;
  return (t.front() == '(' && t.back() == ')') || (t.front() == '[' && t.back() == ']');
}

bool name_start(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || u >= 0x80;
}

bool name_word_ok(std::string_view w) {
  static constexpr std::string_view kForbidden = "!?;,\"()[]{}<>:";
  for (std::size_t i = 0; i < w.size(); ++i) {
    char c = w[i];
    if (kForbidden.find(c) != std::string_view::npos) return false;
    if (c == '.' && (i + 1 != w.size() || w.size() > 4)) return false;
  }
  return true;
}

void continue_utterance(Utterance& u, const std::string& more) {
  if (more.empty()) return;
  if (u.kind == UtteranceKind::direction) {
    // Keep the direction fully bracketed so it re-parses as a direction.
    char close = u.text.back();
    u.text.pop_back();
    u.text = collapse_whitespace(u.text + ' ' + more);
    u.text.push_back(close);
    return;
  }
  u.text = u.text.empty() ? more : u.text + ' ' + more;
}

}  // namespace

std::optional<SpeakerSplit> split_speaker(std::string_view line) {
  line = trim(line);
  auto colon = line.find(':');
  if (colon == std::string_view::npos || colon == 0) return std::nullopt;
  if (colon + 1 < line.size() &&
      std::isspace(static_cast<unsigned char>(line[colon + 1])) == 0) {
    return std::nullopt;
  }
  auto words = split_whitespace(line.substr(0, colon));
  if (words.empty() || words.size() > 5) return std::nullopt;
  if (!name_start(words.front().front())) return std::nullopt;
  std::string name;
  for (auto w : words) {
    if (!name_word_ok(w)) return std::nullopt;
    if (!name.empty()) name.push_back(' ');
    name.append(w);
  }
  return SpeakerSplit{std::move(name), trim(line.substr(colon + 1))};
}

std::vector<Utterance> parse_script(std::string_view raw, ParseDiagnostics* diagnostics) {
  std::vector<Utterance> out;
  ParseDiagnostics local;
  for (const auto& line : split_lines(raw)) {
    auto t = trim(line);
    if (t.empty()) continue;
    ++local.nonblank_lines;
    if (bracketed(t)) {
      out.push_back(Utterance::direction(collapse_whitespace(t)));
    } else if (auto split = split_speaker(t)) {
      out.push_back(Utterance::line(std::move(split->speaker), collapse_whitespace(split->rest)));
    } else {
      ++local.unmatched_lines;
      auto text = collapse_whitespace(t);
      if (out.empty()) {
        out.push_back(Utterance::direction("(" + text + ")"));
      } else {
        continue_utterance(out.back(), text);
      }
    }
  }
  if (diagnostics) {
    diagnostics->nonblank_lines += local.nonblank_lines;
    diagnostics->unmatched_lines += local.unmatched_lines;
  }
  return out;
}

std::string format_utterance(const Utterance& u) {
  if (u.kind == UtteranceKind::direction) return u.text;
  return u.text.empty() ? u.speaker + ":" : u.speaker + ": " + u.text;
}

std::string format_script(std::span<const Utterance> utterances) {
  std::string out;
  for (const auto& u : utterances) {
    out += format_utterance(u);
    out += '\n';
  }
  return out;
}

std::vector<Utterance> Story::starting_excerpt() const {
  const auto& ep = seasons.at(start.season).at(start.episode);
  auto first = std::min(start.first, ep.utterances.size());
  auto last = std::min(first + start.count, ep.utterances.size());
  return {ep.utterances.begin() + static_cast<std::ptrdiff_t>(first),
          ep.utterances.begin() + static_cast<std::ptrdiff_t>(last)};
}

std::string Story::season_script(std::size_t season) const {
  std::string out;
  for (const auto& ep : seasons.at(season)) out += format_script(ep.utterances);
  return out;
}

std::vector<Episode> split_episodes(std::string_view season_text, ParseDiagnostics* diagnostics) {
  std::vector<Episode> episodes;
  std::string title;
  std::string body;
  bool have_header = false;
  auto flush = [&] {
    auto utterances = parse_script(body, diagnostics);
    if (have_header || !utterances.empty()) {
      episodes.push_back({episodes.size() + 1, title, std::move(utterances)});
    }
    body.clear();
  };
  for (const auto& line : split_lines(season_text)) {
    auto t = trim(line);
    if (t.starts_with("##")) {
      flush();
      title = std::string(trim(t.substr(2)));
      have_header = true;
      continue;
    }
    body += line;
    body += '\n';
  }
  flush();
  return episodes;
}

Story make_story(std::string name, std::vector<std::vector<Episode>> seasons, ExcerptRef start) {
  Story story;
  story.name = std::move(name);
  story.seasons = std::move(seasons);
  story.start = start;
  for (const auto& season : story.seasons) {
    for (const auto& ep : season) {
      for (const auto& u : ep.utterances) {
        if (u.is_line()) story.characters.insert(u.speaker);
      }
    }
  }
  return story;
}

Story load_story(const std::filesystem::path& dir) {
  auto manifest_path = dir / "story.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_manifest", manifest_path.string() + ": " + e.what());
  }
  try {
    std::vector<SeasonSource> sources;
    std::vector<std::vector<Episode>> seasons;
    ParseDiagnostics diag;
    for (const auto& s : manifest.at("seasons")) {
      SeasonSource src;
      src.script = s.at("script").get<std::string>();
      for (const auto& p : s.value("summaries", nlohmann::json::array())) {
        src.summaries.emplace_back(p.get<std::string>());
      }
      for (const auto& u : s.value("summary_urls", nlohmann::json::array())) {
        src.summary_urls.push_back(u.get<std::string>());
      }
      seasons.push_back(split_episodes(read_file(dir / src.script), &diag));
      sources.push_back(std::move(src));
    }
    ExcerptRef start;
    if (manifest.contains("start")) {
      const auto& st = manifest["start"];
      start.season = st.value("season", std::size_t{0});
      start.episode = st.value("episode", std::size_t{0});
      start.first = st.value("first", std::size_t{0});
      start.count = st.value("count", std::size_t{10});
    }
    auto name = manifest.value("name", dir.filename().string());
    Story story = make_story(std::move(name), std::move(seasons), start);
    story.root = dir;
    story.sources = std::move(sources);
    story.diagnostics = diag;
    if (story.seasons.empty()) throw Error("invalid_manifest", "story has no seasons");
    if (start.season >= story.seasons.size() ||
        start.episode >= story.seasons[start.season].size() ||
        start.first + start.count > story.seasons[start.season][start.episode].utterances.size() ||
        start.count == 0) {
      throw Error("invalid_manifest", "starting excerpt out of range in " + manifest_path.string());
    }
    return story;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_manifest", manifest_path.string() + ": " + e.what());
  }
}

std::vector<std::pair<std::string, std::size_t>> list_characters(const Story& story) {
  std::map<std::string, std::size_t> counts;
  for (const auto& season : story.seasons) {
    for (const auto& ep : season) {
      for (const auto& u : ep.utterances) {
        if (u.is_line()) ++counts[u.speaker];
      }
    }
  }
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

std::size_t FixtureSummarySource::episode_count(const Story& story, std::size_t season) const {
  if (season >= story.sources.size()) return 0;
  return story.sources[season].summaries.size();
}

std::string FixtureSummarySource::episode_summary(const Story& story, std::size_t season,
                                                  std::size_t episode) {
  if (season >= story.sources.size() || episode >= story.sources[season].summaries.size()) {
    throw SummaryUnavailable(season, "no fixture for episode " + std::to_string(episode + 1));
  }
  auto path = story.root / story.sources[season].summaries[episode];
  try {
    return read_file(path);
  } catch (const Error&) {
    throw SummaryUnavailable(season, "missing fixture " + path.string());
  }
}

std::string fetch_summaries(const Story& story, std::size_t season, SummarySource& source) {
  if (season >= story.season_count()) {
    throw Error("invalid_season", "season " + std::to_string(season) + " out of range for " +
                                      story.name);
  }
  auto n = source.episode_count(story, season);
  if (n == 0) throw SummaryUnavailable(season, "no summaries configured");
  std::string out;
  for (std::size_t e = 0; e < n; ++e) {
    auto text = std::string(trim(source.episode_summary(story, season, e)));
    if (text.empty()) continue;
    if (!out.empty()) out += '\n';
    out += text;
  }
  return out;
}

}  // namespace itg::corpus

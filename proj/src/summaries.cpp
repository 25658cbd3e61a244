#include <httplib.h>

#include <json.hpp>

#include "itg/corpus.hpp"

namespace itg::corpus {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

std::optional<SplitUrl> split_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) return std::nullopt;
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return SplitUrl{std::string(url), "/"};
  return SplitUrl{std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

}  // namespace

std::size_t HttpSummarySource::episode_count(const Story& story, std::size_t season) const {
  if (season >= story.sources.size()) return 0;
  return story.sources[season].summary_urls.size();
}

std::string HttpSummarySource::episode_summary(const Story& story, std::size_t season,
                                               std::size_t episode) {
  if (season >= story.sources.size() || episode >= story.sources[season].summary_urls.size()) {
    throw SummaryUnavailable(season, "no url for episode " + std::to_string(episode + 1));
  }
  const auto& url = story.sources[season].summary_urls[episode];
  auto parts = split_url(url);
  if (!parts) throw SummaryUnavailable(season, "malformed url " + url);

  httplib::Client client(parts->origin);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);
  client.set_follow_location(true);
  auto res = client.Get(parts->path);
  if (!res) {
    throw SummaryUnavailable(season, url + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw SummaryUnavailable(season, url + ": HTTP " + std::to_string(res->status));
  }
  auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (!body.is_discarded() && body.is_object() && body.contains("extract") &&
      body["extract"].is_string()) {
    return body["extract"].get<std::string>();
  }
  return res->body;
}

}  // namespace itg::corpus

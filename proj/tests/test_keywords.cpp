#include <doctest.h>

#include <algorithm>

#include "itg/keywords.hpp"
#include "test_support.hpp"

using namespace itg;

namespace {

bool contains(const std::vector<std::string>& v, std::string_view s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

// A story whose two seasons each have one summary file with the given contents.
std::filesystem::path write_two_season_story(const testing::TempDir& dir, const std::string& s1,
                                             const std::string& s2) {
  write_file(dir / "story.json", R"({"name": "mini",
    "seasons": [{"script": "a.txt", "summaries": ["a.sum"]},
                {"script": "b.txt", "summaries": ["b.sum"]}],
    "start": {"season": 0, "episode": 0, "first": 0, "count": 1}})");
  write_file(dir / "a.txt", "Ross: The museum has a new dinosaur.\n");
  write_file(dir / "b.txt", "Rachel: The coffee house is busy.\n");
  write_file(dir / "a.sum", s1);
  write_file(dir / "b.sum", s2);
  return dir.path();
}

}  // namespace

TEST_CASE("extract_keywords: empty and stopword-only input") {
  CHECK(keywords::extract_keywords("").empty());
  CHECK(keywords::extract_keywords("the of and a").empty());
}

TEST_CASE("extract_keywords finds the nouns of the fixture sentence") {
  auto phrases = keywords::extract_keywords("Ross teaches paleontology. Rachel pours coffee.");
  CHECK(contains(phrases, "paleontology"));
  CHECK(contains(phrases, "coffee"));
}

TEST_CASE("extract_keywords chunks adjectives with nouns and keeps verbs") {
  auto phrases = keywords::extract_keywords("The old museum bought a huge dinosaur skeleton.");
  CHECK(contains(phrases, "old museum"));
  CHECK(contains(phrases, "bought"));
  for (const auto& p : phrases) {
    auto words = split_whitespace(p);
    CHECK(words.size() >= 1);
    CHECK(words.size() <= 4);
  }
}

TEST_CASE("extract_phrase_counts counts repeats and preserves first-occurrence order") {
  auto counts = keywords::extract_phrase_counts("Coffee. More coffee. Coffee again, and a bagel.");
  REQUIRE_FALSE(counts.empty());
  CHECK(counts[0].phrase == "coffee");
  CHECK(counts[0].count == 3);
}

TEST_CASE("rank_and_cap keeps the most frequent and breaks ties by order") {
  std::vector<keywords::PhraseCount> counts{{"a", 1}, {"b", 3}, {"c", 1}, {"d", 3}};
  CHECK(keywords::rank_and_cap(counts, 3) == std::vector<std::string>{"b", "d", "a"});
  CHECK(keywords::rank_and_cap(counts, 0).empty());
}

TEST_CASE("tagger tags the closed classes it was trained on") {
  auto tokens = keywords::tokenize("She will eat the cake.");
  auto tags = keywords::BigramTagger::builtin().tag(tokens);
  REQUIRE(tags.size() == tokens.size());
  CHECK(tags[0] == keywords::Tag::pron);
  CHECK(tags[3] == keywords::Tag::det);
  CHECK(tags.back() == keywords::Tag::punct);
}

TEST_CASE("build_season_bags: per-season provenance from summaries") {
  testing::TempDir dir;
  auto story = corpus::load_story(write_two_season_story(
      dir, "Ross buys a fossil for the museum.", "Monica cooks a turkey for the family."));
  corpus::FixtureSummarySource source;
  auto bags = keywords::build_season_bags(story, keywords::SourceChoice::summaries, source);
  REQUIRE(bags.size() == 2);
  for (const auto& bag : bags) {
    CHECK(bag.source == keywords::SourceChoice::summaries);
    auto doc = to_lower(corpus::fetch_summaries(story, bag.season, source));
    for (const auto& p : bag.phrases) CHECK(doc.find(p) != std::string::npos);
  }
  CHECK(contains(bags[0].phrases, "fossil"));
  CHECK_FALSE(contains(bags[0].phrases, "turkey"));
  CHECK(contains(bags[1].phrases, "turkey"));
}

TEST_CASE("build_season_bags: an empty summary gives an empty bag") {
  testing::TempDir dir;
  auto story = corpus::load_story(write_two_season_story(dir, "", "Monica cooks a turkey."));
  corpus::FixtureSummarySource source;
  auto bags = keywords::build_season_bags(story, keywords::SourceChoice::summaries, source);
  CHECK(bags[0].phrases.empty());
  CHECK_FALSE(bags[1].phrases.empty());
}

TEST_CASE("build_season_bags: missing summaries fall back to the script") {
  testing::TempDir dir;
  auto root = write_two_season_story(dir, "x", "y");
  std::filesystem::remove(root / "b.sum");
  auto story = corpus::load_story(root);
  corpus::FixtureSummarySource source;
  auto bags = keywords::build_season_bags(story, keywords::SourceChoice::summaries, source);
  CHECK(bags[1].source == keywords::SourceChoice::script);
  CHECK(contains(bags[1].phrases, "coffee house"));
}

TEST_CASE("build_season_bags is deterministic and capped on the friends cassette") {
  auto story = corpus::load_story(testing::stories_dir() / "friends");
  corpus::FixtureSummarySource source;
  auto a = keywords::build_season_bags(story, keywords::SourceChoice::script, source, 10);
  auto b = keywords::build_season_bags(story, keywords::SourceChoice::script, source, 10);
  REQUIRE(a.size() == story.season_count());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].phrases == b[k].phrases);
    CHECK(a[k].phrases.size() <= 10);
    auto doc = to_lower(story.season_script(k));
    for (const auto& p : a[k].phrases) CHECK(doc.find(p) != std::string::npos);
    for (const auto& p : a[k].phrases) {
      bool content = false;
      for (auto w : split_whitespace(p)) content = content || !StopwordList::builtin().contains(w);
      CHECK(content);
    }
  }
}

TEST_CASE("keyword files round-trip with one-based names") {
  testing::TempDir dir;
  std::vector<keywords::KeywordBag> bags{{0, {"coffee house", "museum"}, keywords::SourceChoice::script},
                                         {1, {"turkey"}, keywords::SourceChoice::summaries}};
  keywords::write_keyword_files(dir.path(), bags);
  CHECK(keywords::keyword_file_path(dir.path(), 0).filename() == "season1.txt");
  CHECK(keywords::read_keyword_file(dir / "keywords/season1.txt") == bags[0].phrases);
  CHECK(keywords::read_keyword_file(dir / "keywords/season2.txt") == bags[1].phrases);
}

TEST_CASE("committed keyword files match their sources") {
  for (const auto* name : {"friends", "sherlock"}) {
    auto story = corpus::load_story(testing::stories_dir() / name);
    corpus::FixtureSummarySource source;
    for (std::size_t k = 0; k < story.season_count(); ++k) {
      auto path = keywords::keyword_file_path(story.root, k);
      REQUIRE(std::filesystem::exists(path));
      auto doc = to_lower(corpus::fetch_summaries(story, k, source));
      for (const auto& p : keywords::read_keyword_file(path)) {
        CHECK_MESSAGE(doc.find(p) != std::string::npos, p);
      }
    }
  }
}

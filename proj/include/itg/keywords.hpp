#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "itg/corpus.hpp"
#include "itg/text.hpp"

namespace itg::keywords {

enum class Tag { noun, propn, verb, aux, adj, adv, det, pron, adp, conj, num, prt, punct };

std::string_view tag_name(Tag tag);
Tag parse_tag(std::string_view name);

struct Token {
  std::string_view text;  // view into the source document
  std::size_t begin = 0;
  std::size_t end = 0;
  bool sentence_start = false;
};

// Words (letters/digits with inner apostrophes or hyphens) and single punctuation marks.
std::vector<Token> tokenize(std::string_view text);

// Greedy left-to-right tagger with a backoff chain: (previous tag, word) bigram counts,
// then word unigram counts, then closed-class and suffix rules.
class BigramTagger {
 public:
  // Training text: one sentence per line, tokens written as word/TAG; '#' lines are comments.
  static BigramTagger train(std::string_view tagged_corpus);
  static const BigramTagger& builtin();

  std::vector<Tag> tag(std::span<const Token> tokens) const;

 private:
  Tag fallback(std::string_view word, bool sentence_start, int previous) const;

  std::unordered_map<std::string, Tag> bigram_;   // key: "<prev>|word"
  std::unordered_map<std::string, Tag> unigram_;
};

struct PhraseCount {
  std::string phrase;
  std::size_t count = 0;
};

// Noun chunks (Adjective* Noun+, at most four tokens) and standalone main verbs, lowercased,
// in first-occurrence order with occurrence counts. Single pass over the tokens.
std::vector<PhraseCount> extract_phrase_counts(std::string_view text,
                                               const BigramTagger& tagger = BigramTagger::builtin(),
                                               const StopwordList& stopwords = StopwordList::builtin());

// Deduplicated phrases in source order.
std::vector<std::string> extract_keywords(std::string_view text,
                                          const BigramTagger& tagger = BigramTagger::builtin(),
                                          const StopwordList& stopwords = StopwordList::builtin());

enum class SourceChoice { summaries, script };

struct KeywordBag {
  std::size_t season = 0;
  std::vector<std::string> phrases;  // most frequent first
  SourceChoice source = SourceChoice::script;
};

inline constexpr std::size_t kDefaultBagCap = 200;

// Keeps the `cap` most frequent phrases; ties keep first-occurrence order.
std::vector<std::string> rank_and_cap(std::vector<PhraseCount> counts, std::size_t cap);

// One bag per season, each derived only from that season's document. With
// `SourceChoice::summaries` a season whose summaries are unavailable falls back to its script;
// the summary error propagates only when the script is empty as well.
std::vector<KeywordBag> build_season_bags(const corpus::Story& story, SourceChoice choice,
                                          corpus::SummarySource& summaries,
                                          std::size_t cap = kDefaultBagCap);

std::filesystem::path keyword_file_path(const std::filesystem::path& story_root, std::size_t season);
void write_keyword_files(const std::filesystem::path& story_root, std::span<const KeywordBag> bags);
std::vector<std::string> read_keyword_file(const std::filesystem::path& path);

}  // namespace itg::keywords

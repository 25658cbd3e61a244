#include "itg/keywords.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <unordered_set>

namespace itg::keywords {

namespace {

constexpr std::array<std::string_view, 13> kTagNames = {
    "NOUN", "PROPN", "VERB", "AUX", "ADJ", "ADV", "DET", "PRON", "ADP", "CONJ", "NUM", "PRT", "PUNCT"};

constexpr int kStart = -1;

bool word_byte(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || u >= 0x80;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string bigram_key(int previous, std::string_view lower_word) {
  return std::to_string(previous) + "|" + std::string(lower_word);
}

const std::unordered_map<std::string_view, Tag>& closed_class() {
  static const std::unordered_map<std::string_view, Tag> table = [] {
    std::unordered_map<std::string_view, Tag> t;
    for (auto w : {"a", "an", "the", "this", "that", "these", "those", "every", "each", "some",
                   "any", "no", "all", "another"}) {
      t[w] = Tag::det;
    }
    for (auto w : {"i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them",
                   "my", "your", "his", "its", "our", "their", "mine", "yours", "hers", "ours",
                   "theirs", "myself", "yourself", "himself", "herself", "itself", "ourselves",
                   "themselves", "who", "whom", "what", "which", "somebody", "someone", "nobody",
                   "everybody", "everyone", "anyone", "something", "nothing", "everything"}) {
      t[w] = Tag::pron;
    }
    for (auto w : {"is", "am", "are", "was", "were", "be", "been", "being", "have", "has", "had",
                   "do", "does", "did", "will", "would", "shall", "should", "can", "could", "may",
                   "might", "must", "gonna", "wanna", "gotta"}) {
      t[w] = Tag::aux;
    }
    for (auto w : {"in", "on", "at", "by", "for", "with", "about", "against", "between", "into",
                   "through", "during", "before", "after", "above", "below", "from", "of", "over",
                   "under", "near", "like", "without", "until", "since", "across", "behind"}) {
      t[w] = Tag::adp;
    }
    for (auto w : {"and", "but", "or", "nor", "because", "so", "if", "while", "although",
                   "though", "than", "when", "where", "why", "how"}) {
      t[w] = Tag::conj;
    }
    for (auto w : {"not", "to", "up", "out", "off", "down"}) t[w] = Tag::prt;
    for (auto w : {"very", "just", "too", "really", "also", "now", "then", "here", "there",
                   "again", "always", "never", "only", "even", "still", "already", "maybe",
                   "yes", "oh", "okay", "hi", "hey", "well", "whoa", "ooh"}) {
      t[w] = Tag::adv;
    }
    return t;
  }();
  return table;
}

bool is_noun(Tag t) { return t == Tag::noun || t == Tag::propn; }

}  // namespace

std::string_view tag_name(Tag tag) { return kTagNames[static_cast<std::size_t>(tag)]; }

Tag parse_tag(std::string_view name) {
  for (std::size_t i = 0; i < kTagNames.size(); ++i) {
    if (kTagNames[i] == name) return static_cast<Tag>(i);
  }
  throw Error("invalid_tag", "unknown tag " + std::string(name));
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  bool sentence_start = true;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (c == '\n') {
      sentence_start = true;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    if (word_byte(c)) {
      while (j < n) {
        if (word_byte(text[j])) {
          ++j;
        } else if ((text[j] == '\'' || text[j] == '-') && j + 1 < n && word_byte(text[j + 1])) {
          j += 2;
        } else {
          break;
        }
      }
    } else {
      j = i + 1;
    }
    Token tok{text.substr(i, j - i), i, j, sentence_start};
    out.push_back(tok);
    sentence_start = tok.text == "." || tok.text == "!" || tok.text == "?";
    i = j;
  }
  return out;
}

BigramTagger BigramTagger::train(std::string_view tagged_corpus) {
  std::map<std::string, std::map<Tag, std::size_t>> bigram_counts;
  std::map<std::string, std::map<Tag, std::size_t>> unigram_counts;
  for (const auto& line : split_lines(tagged_corpus)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    int previous = kStart;
    for (auto item : split_whitespace(t)) {
      auto slash = item.rfind('/');
      if (slash == std::string_view::npos || slash == 0) {
        throw Error("invalid_tagged_corpus", "malformed token " + std::string(item));
      }
      auto word = to_lower(item.substr(0, slash));
      Tag tag = parse_tag(item.substr(slash + 1));
      ++bigram_counts[bigram_key(previous, word)][tag];
      ++unigram_counts[word][tag];
      previous = static_cast<int>(tag);
    }
  }
  // Most frequent tag wins; ties go to the lower tag index for determinism.
  auto best = [](const std::map<Tag, std::size_t>& counts) {
    return std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
             return a.second < b.second;
           })->first;
  };
  BigramTagger tagger;
  for (const auto& [key, counts] : bigram_counts) tagger.bigram_[key] = best(counts);
  for (const auto& [word, counts] : unigram_counts) tagger.unigram_[word] = best(counts);
  return tagger;
}

const BigramTagger& BigramTagger::builtin() {
  static const BigramTagger tagger = train(resources::tagged_corpus_text());
  return tagger;
}

Tag BigramTagger::fallback(std::string_view word, bool sentence_start, int previous) const {
  auto lower = to_lower(word);
  if (!word_byte(word.front())) return Tag::punct;
  if (auto it = closed_class().find(lower); it != closed_class().end()) return it->second;
  if (std::all_of(lower.begin(), lower.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) != 0;
      })) {
    return Tag::num;
  }
  bool capitalized = std::isupper(static_cast<unsigned char>(word.front())) != 0;
  if (capitalized && !sentence_start) return Tag::propn;
  if (lower.size() > 4 && (ends_with(lower, "ing") || ends_with(lower, "ed"))) return Tag::verb;
  if (lower.size() > 4 && ends_with(lower, "ly")) return Tag::adv;
  for (auto suffix : {"ous", "ful", "able", "ible", "ive", "less", "ic", "al"}) {
    if (lower.size() > 4 && ends_with(lower, suffix)) return Tag::adj;
  }
  // Third-person present after a name or pronoun: "Ross teaches", "she pours".
  bool after_subject = previous == static_cast<int>(Tag::propn) ||
                       previous == static_cast<int>(Tag::pron);
  if (after_subject && ends_with(lower, "s") && !ends_with(lower, "ss") &&
      !ends_with(lower, "us") && !ends_with(lower, "'s")) {
    return Tag::verb;
  }
  if (capitalized) return Tag::propn;
  return Tag::noun;
}

std::vector<Tag> BigramTagger::tag(std::span<const Token> tokens) const {
  std::vector<Tag> tags;
  tags.reserve(tokens.size());
  int previous = kStart;
  for (const auto& tok : tokens) {
    if (tok.sentence_start) previous = kStart;
    auto lower = to_lower(tok.text);
    Tag t;
    if (auto it = bigram_.find(bigram_key(previous, lower)); it != bigram_.end()) {
      t = it->second;
    } else if (auto u = unigram_.find(lower); u != unigram_.end()) {
      t = u->second;
    } else {
      t = fallback(tok.text, tok.sentence_start, previous);
    }
    tags.push_back(t);
    previous = static_cast<int>(t);
  }
  return tags;
}

std::vector<PhraseCount> extract_phrase_counts(std::string_view text, const BigramTagger& tagger,
                                               const StopwordList& stopwords) {
  auto tokens = tokenize(text);
  auto tags = tagger.tag(tokens);

  std::vector<PhraseCount> out;
  std::unordered_map<std::string, std::size_t> index;
  auto emit = [&](std::size_t first, std::size_t last) {  // inclusive token range
    bool content = false;
    for (std::size_t k = first; k <= last; ++k) {
      if (!stopwords.contains(to_lower(tokens[k].text))) content = true;
    }
    if (!content) return;
    auto phrase = to_lower(text.substr(tokens[first].begin, tokens[last].end - tokens[first].begin));
    auto [it, inserted] = index.try_emplace(phrase, out.size());
    if (inserted) out.push_back({phrase, 0});
    ++out[it->second].count;
  };
  // A chunk never spans anything but a single space, so the phrase occurs verbatim.
  auto adjacent = [&](std::size_t k) {
    return tokens[k].begin == tokens[k - 1].end + 1 && text[tokens[k - 1].end] == ' ';
  };

  std::size_t i = 0;
  while (i < tokens.size()) {
    if (tags[i] == Tag::verb) {
      emit(i, i);
      ++i;
      continue;
    }
    if (tags[i] != Tag::adj && !is_noun(tags[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < tokens.size() && tags[j + 1] == Tag::adj && tags[j] == Tag::adj && adjacent(j + 1)) {
      ++j;
    }
    std::size_t noun_begin = tags[j] == Tag::adj ? j + 1 : j;
    if (tags[j] == Tag::adj &&
        (noun_begin >= tokens.size() || !is_noun(tags[noun_begin]) || !adjacent(noun_begin))) {
      i = j + 1;
      continue;
    }
    std::size_t end = noun_begin;
    while (end + 1 < tokens.size() && is_noun(tags[end + 1]) && adjacent(end + 1)) ++end;
    std::size_t first = i;
    if (end - first + 1 > 4) first = end - 3;
    emit(first, end);
    i = end + 1;
  }
  return out;
}

std::vector<std::string> extract_keywords(std::string_view text, const BigramTagger& tagger,
                                          const StopwordList& stopwords) {
  std::vector<std::string> out;
  for (auto& pc : extract_phrase_counts(text, tagger, stopwords)) out.push_back(std::move(pc.phrase));
  return out;
}

std::vector<std::string> rank_and_cap(std::vector<PhraseCount> counts, std::size_t cap) {
  std::stable_sort(counts.begin(), counts.end(),
                   [](const PhraseCount& a, const PhraseCount& b) { return a.count > b.count; });
  if (counts.size() > cap) counts.resize(cap);
  std::vector<std::string> out;
  out.reserve(counts.size());
  for (auto& pc : counts) out.push_back(std::move(pc.phrase));
  return out;
}

std::vector<KeywordBag> build_season_bags(const corpus::Story& story, SourceChoice choice,
                                          corpus::SummarySource& summaries, std::size_t cap) {
  std::vector<KeywordBag> bags;
  for (std::size_t k = 0; k < story.season_count(); ++k) {
    KeywordBag bag;
    bag.season = k;
    std::string document;
    if (choice == SourceChoice::summaries) {
      try {
        document = corpus::fetch_summaries(story, k, summaries);
        bag.source = SourceChoice::summaries;
      } catch (const corpus::SummaryUnavailable&) {
        document = story.season_script(k);
        if (document.empty()) throw;
        bag.source = SourceChoice::script;
      }
    } else {
      document = story.season_script(k);
      bag.source = SourceChoice::script;
    }
    bag.phrases = rank_and_cap(extract_phrase_counts(document), cap);
    bags.push_back(std::move(bag));
  }
  return bags;
}

std::filesystem::path keyword_file_path(const std::filesystem::path& story_root, std::size_t season) {
  return story_root / "keywords" / ("season" + std::to_string(season + 1) + ".txt");
}

void write_keyword_files(const std::filesystem::path& story_root, std::span<const KeywordBag> bags) {
  for (const auto& bag : bags) {
    std::string body;
    for (const auto& p : bag.phrases) body += p + "\n";
    write_file(keyword_file_path(story_root, bag.season), body);
  }
}

std::vector<std::string> read_keyword_file(const std::filesystem::path& path) {
  std::vector<std::string> out;
  for (const auto& line : split_lines(read_file(path))) {
    auto t = trim(line);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

}  // namespace itg::keywords

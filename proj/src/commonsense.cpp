#include "itg/commonsense.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace itg::commonsense {

namespace {

constexpr std::array<std::string_view, 9> kRelationNames = {
    "xIntent", "xNeed", "xAttr", "xWant", "xReact", "xEffect", "oWant", "oReact", "oEffect"};

std::set<std::string> token_set(std::string_view normalized) {
  std::set<std::string> out;
  for (auto t : split_whitespace(normalized)) out.emplace(t);
  return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

}  // namespace

std::string_view relation_name(Relation r) { return kRelationNames[static_cast<std::size_t>(r)]; }

std::optional<Relation> parse_relation(std::string_view name) {
  for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
    if (kRelationNames[i] == name) return static_cast<Relation>(i);
  }
  return std::nullopt;
}

std::string normalize_subject(std::string_view text, std::string_view actor) {
  auto actor_tokens = word_tokens(actor);
  std::vector<std::string> out;
  auto tokens = word_tokens(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!actor_tokens.empty() && i + actor_tokens.size() <= tokens.size() &&
        std::equal(actor_tokens.begin(), actor_tokens.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
      out.emplace_back("x");
      i += actor_tokens.size() - 1;
      continue;
    }
    if (tokens[i].starts_with("personx") || tokens[i].starts_with("persony")) {
      auto rest = std::string_view(tokens[i]).substr(7);
      if (rest.empty() || rest == "'s") {
        out.push_back(tokens[i].substr(6));
        continue;
      }
    }
    out.push_back(tokens[i]);
  }
  return join(out, " ");
}

TupleStore::TupleStore(std::span<const CommonsenseTuple> tuples) {
  for (const auto& t : tuples) add(t);
}

void TupleStore::add(CommonsenseTuple tuple) {
  auto subject = normalize_subject(tuple.subject);
  auto object = collapse_whitespace(tuple.object);
  if (subject.empty() || object.empty()) {
    throw Error("invalid_tuple", "tuple subject and object must be non-empty");
  }
  auto& objects = by_subject_[subject][tuple.relation];
  if (std::find(objects.begin(), objects.end(), object) != objects.end()) return;
  objects.push_back(std::move(object));
  ++size_;
}

TupleStore TupleStore::parse(std::string_view tsv) {
  TupleStore store;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(tsv)) {
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto tab1 = line.find('\t');
    auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw Error("invalid_tuple", "line " + std::to_string(line_no) + ": expected three fields");
    }
    auto rel_name = trim(std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1));
    auto rel = parse_relation(rel_name);
    if (!rel) {
      throw Error("invalid_tuple",
                  "line " + std::to_string(line_no) + ": unknown relation " + std::string(rel_name));
    }
    store.add({line.substr(0, tab1), *rel, line.substr(tab2 + 1)});
  }
  return store;
}

TupleStore TupleStore::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::optional<std::string> TupleStore::resolve_subject(std::string_view event) const {
  std::string key(event);
  if (by_subject_.count(key)) return key;
  auto query = token_set(event);
  double best = -1.0;
  const std::string* best_subject = nullptr;
  // by_subject_ is ordered, so strict improvement keeps the lexicographically smallest on ties.
  for (const auto& [subject, _] : by_subject_) {
    double score = jaccard(query, token_set(subject));
    if (score > best) {
      best = score;
      best_subject = &subject;
    }
  }
  if (best_subject && best >= match_threshold) return *best_subject;
  return std::nullopt;
}

Expansion TupleStore::expand(std::string_view event, std::span<const Relation> relations,
                             std::size_t limit) const {
  Expansion out;
  for (auto r : relations) out[r];
  auto subject = resolve_subject(event);
  if (!subject) return out;
  const auto& known = by_subject_.at(*subject);
  for (auto r : relations) {
    auto it = known.find(r);
    if (it == known.end()) continue;
    auto n = std::min(limit, it->second.size());
    out[r].assign(it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return out;
}

Expansion expand_event(std::string_view event, std::span<const Relation> relations,
                       const CommonsenseBackend& backend, std::string_view actor,
                       std::size_t limit) {
  auto normalized = normalize_subject(event, actor);
  if (normalized.empty()) throw Error("empty_event", "event is empty after normalization");
  auto result = backend.expand(normalized, relations, limit);
  // Relation closure: exactly the requested keys, whatever the backend returned.
  Expansion out;
  for (auto r : relations) {
    auto it = result.find(r);
    out[r] = it == result.end() ? std::vector<std::string>{} : std::move(it->second);
  }
  return out;
}

double object_nll(std::span<const double> token_probabilities, SegmentLengths lengths) {
  const std::size_t begin = lengths.subject + lengths.relation;
  const std::size_t end = begin + lengths.object;
  if (token_probabilities.size() < end) {
    throw Error("length_mismatch", "sequence has " + std::to_string(token_probabilities.size()) +
                                       " tokens, segments need " + std::to_string(end));
  }
  double nll = 0.0;
  for (std::size_t t = begin; t < end; ++t) {
    double p = token_probabilities[t];
    if (!(p > 0.0)) throw Error("zero_probability", "token " + std::to_string(t) + " has probability 0");
    if (p > 1.0) throw Error("invalid_probability", "token " + std::to_string(t) + " has probability > 1");
    nll -= std::log(p);
  }
  return nll;
}

attributes::BagOfWords tuples_to_bag(const Expansion& expansion, const StopwordList& stopwords) {
  std::vector<std::string> words;
  std::string name = "relations";
  std::unordered_set<std::string> seen;
  bool first = true;
  for (const auto& [relation, objects] : expansion) {
    if (objects.empty()) continue;
    name += first ? ":" : "+";
    name += relation_name(relation);
    first = false;
    for (const auto& object : objects) {
      for (auto& w : word_tokens(object)) {
        if (w == "x" || w == "y" || stopwords.contains(w)) continue;
        if (seen.insert(w).second) words.push_back(std::move(w));
      }
    }
  }
  return attributes::make_bag(std::move(name), words);
}

}  // namespace itg::commonsense

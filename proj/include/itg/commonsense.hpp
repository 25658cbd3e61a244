#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "itg/attributes.hpp"
#include "itg/text.hpp"

namespace itg::commonsense {

// The nine if-then dimensions, in their conventional order.
enum class Relation { xIntent, xNeed, xAttr, xWant, xReact, xEffect, oWant, oReact, oEffect };

inline constexpr std::array<Relation, 9> kAllRelations = {
    Relation::xIntent, Relation::xNeed,  Relation::xAttr,  Relation::xWant,  Relation::xReact,
    Relation::xEffect, Relation::oWant,  Relation::oReact, Relation::oEffect};

std::string_view relation_name(Relation r);
std::optional<Relation> parse_relation(std::string_view name);

struct CommonsenseTuple {
  std::string subject;  // normalized, "x" stands for the acting person
  Relation relation;
  std::string object;
};

using Expansion = std::map<Relation, std::vector<std::string>>;

// Lowercase, strip punctuation (apostrophes inside words survive), collapse spaces and map
// the acting character's name (and "personx") to "x".
std::string normalize_subject(std::string_view text, std::string_view actor = {});

class CommonsenseBackend {
 public:
  virtual ~CommonsenseBackend() = default;
  // `event` is already normalized. Implementations return at most `limit` objects per relation
  // and must include every requested relation as a key. Throws Error("backend_unavailable").
  virtual Expansion expand(std::string_view event, std::span<const Relation> relations,
                           std::size_t limit) const = 0;
};

class TupleStore final : public CommonsenseBackend {
 public:
  TupleStore() = default;
  explicit TupleStore(std::span<const CommonsenseTuple> tuples);

  // Tab-separated subject, relation, object; one tuple per line.
  static TupleStore parse(std::string_view tsv);
  static TupleStore load(const std::filesystem::path& path);

  void add(CommonsenseTuple tuple);
  std::size_t size() const { return size_; }

  // Exact subject match, else the subject with the best token Jaccard overlap at or above
  // `match_threshold` (ties: lexicographically smallest subject), else empty lists.
  Expansion expand(std::string_view event, std::span<const Relation> relations,
                   std::size_t limit) const override;

  std::optional<std::string> resolve_subject(std::string_view event) const;

  double match_threshold = 0.5;

 private:
  std::map<std::string, Expansion> by_subject_;
  std::size_t size_ = 0;
};

inline constexpr std::size_t kDefaultObjectsPerRelation = 3;

// Normalizes `event` against `actor`, then delegates. The result has exactly the requested
// relations as keys. Throws Error("empty_event") when nothing is left after normalization.
Expansion expand_event(std::string_view event, std::span<const Relation> relations,
                       const CommonsenseBackend& backend, std::string_view actor = {},
                       std::size_t limit = kDefaultObjectsPerRelation);

struct SegmentLengths {
  std::size_t subject = 0;
  std::size_t relation = 0;
  std::size_t object = 0;
};

// Negative log-likelihood of the object segment of a subject/relation/object token sequence:
// -sum log P(x_t | x_<t) over t in [|s|+|r|, |s|+|r|+|o|).
double object_nll(std::span<const double> token_probabilities, SegmentLengths lengths);

// Union of the lowercased content words of every object phrase. Empty input gives an
// inactive (empty) bag.
attributes::BagOfWords tuples_to_bag(const Expansion& expansion,
                                     const StopwordList& stopwords = StopwordList::builtin());

}  // namespace itg::commonsense

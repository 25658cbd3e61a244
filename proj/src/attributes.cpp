#include "itg/attributes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "itg/text.hpp"

namespace itg::attributes {

namespace {

void check_distribution(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw Error("distribution_not_normalized", "negative or NaN probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kNormalizationTolerance) {
    throw Error("distribution_not_normalized",
                "distribution sums to " + std::to_string(sum) + ", expected 1");
  }
}

// Returns (term, capped) for one bag.
std::pair<double, bool> bag_term(double mass, double ceiling) {
  if (mass <= 0.0) return {ceiling, true};
  double nll = std::max(0.0, -std::log(mass));
  if (nll >= ceiling) return {ceiling, true};
  return {nll, false};
}

}  // namespace

BagOfWords make_bag(std::string name, const std::vector<std::string>& words, double weight) {
  BagOfWords bag;
  bag.name = std::move(name);
  bag.weight = weight;
  std::unordered_set<std::string> seen;
  for (const auto& w : words) {
    auto norm = collapse_whitespace(to_lower(w));
    if (norm.empty() || !seen.insert(norm).second) continue;
    bag.words.push_back(std::move(norm));
  }
  return bag;
}

BagOfWords load_bag(const std::filesystem::path& path, std::string name) {
  return make_bag(std::move(name), split_lines(read_file(path)));
}

bool AttributeSet::any_active() const {
  return topic.active() || storyline.active() || relations.active();
}

AttributeSet merge_bags(BagOfWords topic, BagOfWords storyline, BagOfWords relations,
                        const BagWeights& weights) {
  if (weights.topic < 0 || weights.storyline < 0 || weights.relations < 0) {
    throw Error("invalid_weights", "bag weights must be non-negative");
  }
  double total = weights.topic + weights.storyline + weights.relations;
  if (!(total > 0.0)) throw Error("invalid_weights", "bag weights are all zero");
  AttributeSet set;
  set.topic = make_bag(std::move(topic.name), topic.words, weights.topic / total);
  set.storyline = make_bag(std::move(storyline.name), storyline.words, weights.storyline / total);
  set.relations = make_bag(std::move(relations.name), relations.words, weights.relations / total);
  return set;
}

CompiledAttributes compile(const AttributeSet& attrs, const WordLookup& lookup) {
  CompiledAttributes out;
  for (const BagOfWords* bag : attrs.bags()) {
    if (!bag->active()) continue;
    CompiledBag cb;
    cb.weight = bag->weight;
    std::unordered_set<std::size_t> seen;
    for (const auto& phrase : bag->words) {
      auto words = split_whitespace(phrase);
      if (words.empty()) continue;
      if (auto id = lookup(words.front()); id && seen.insert(*id).second) cb.ids.push_back(*id);
    }
    if (!cb.ids.empty()) out.bags.push_back(std::move(cb));
  }
  return out;
}

double bag_mass(std::span<const double> distribution, const CompiledBag& bag) {
  double m = 0.0;
  for (auto id : bag.ids) {
    if (id < distribution.size()) m += distribution[id];
  }
  return m;
}

double attribute_loss(std::span<const double> distribution, const CompiledAttributes& attrs,
                      double ceiling) {
  check_distribution(distribution);
  double loss = 0.0;
  for (const auto& bag : attrs.bags) {
    loss += bag.weight * bag_term(bag_mass(distribution, bag), ceiling).first;
  }
  return loss;
}

LossGradient attribute_loss_gradient(std::span<const double> distribution,
                                     const CompiledAttributes& attrs, double ceiling) {
  check_distribution(distribution);
  LossGradient out;
  out.d_logits.assign(distribution.size(), 0.0);
  for (const auto& bag : attrs.bags) {
    double mass = bag_mass(distribution, bag);
    auto [term, capped] = bag_term(mass, ceiling);
    out.loss += bag.weight * term;
    if (capped) continue;
    for (std::size_t j = 0; j < distribution.size(); ++j) {
      out.d_logits[j] += bag.weight * distribution[j];
    }
    for (auto id : bag.ids) {
      if (id < distribution.size()) out.d_logits[id] -= bag.weight * distribution[id] / mass;
    }
  }
  return out;
}

}  // namespace itg::attributes

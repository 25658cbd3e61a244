#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace itg::attributes {

struct BagOfWords {
  std::string name;
  std::vector<std::string> words;  // lowercase, unique, insertion order
  double weight = 1.0;

  bool active() const { return !words.empty() && weight > 0.0; }
};

// Lowercases, trims and deduplicates; blank entries are dropped.
BagOfWords make_bag(std::string name, const std::vector<std::string>& words, double weight = 1.0);
// One word or phrase per line.
BagOfWords load_bag(const std::filesystem::path& path, std::string name);

struct BagWeights {
  double topic = 0.3;
  double storyline = 0.5;
  double relations = 0.2;
};

struct AttributeSet {
  BagOfWords topic;
  BagOfWords storyline;
  BagOfWords relations;

  std::array<const BagOfWords*, 3> bags() const { return {&topic, &storyline, &relations}; }
  bool any_active() const;
};

// Deduplicates each bag and normalizes the weights to sum to one.
AttributeSet merge_bags(BagOfWords topic, BagOfWords storyline, BagOfWords relations,
                        const BagWeights& weights = {});

// A bag resolved to vocabulary ids. Multi-word phrases contribute their first word.
struct CompiledBag {
  std::vector<std::size_t> ids;
  double weight = 0.0;
};

struct CompiledAttributes {
  std::vector<CompiledBag> bags;  // only bags with positive weight and at least one known id

  bool empty() const { return bags.empty(); }
};

using WordLookup = std::function<std::optional<std::size_t>(std::string_view)>;

CompiledAttributes compile(const AttributeSet& attrs, const WordLookup& lookup);

inline constexpr double kLossCeiling = 30.0;
inline constexpr double kNormalizationTolerance = 1e-6;

double bag_mass(std::span<const double> distribution, const CompiledBag& bag);

// sum_b weight_b * -log(sum_{w in b} p(w)), each term capped at `ceiling`.
// Throws Error("distribution_not_normalized") when p is negative or does not sum to one.
double attribute_loss(std::span<const double> distribution, const CompiledAttributes& attrs,
                      double ceiling = kLossCeiling);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> d_logits;  // gradient with respect to the logits behind `distribution`
};

// Loss and its gradient with respect to the logits z, where distribution = softmax(z).
// For one bag with mass m: dL/dz_j = p_j - [j in bag] p_j / m. Capped terms contribute zero.
LossGradient attribute_loss_gradient(std::span<const double> distribution,
                                     const CompiledAttributes& attrs,
                                     double ceiling = kLossCeiling);

}  // namespace itg::attributes

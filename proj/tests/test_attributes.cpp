#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>

#include "itg/attributes.hpp"
#include "itg/numeric.hpp"
#include "test_support.hpp"

using namespace itg;
using attributes::CompiledAttributes;
using attributes::CompiledBag;

namespace {

CompiledAttributes single(std::vector<std::size_t> ids, double weight = 1.0) {
  return {{CompiledBag{std::move(ids), weight}}};
}

// Independent oracle: the weighted sum written out directly.
double loss_oracle(const std::vector<double>& p, const CompiledAttributes& attrs) {
  double total = 0.0;
  for (const auto& bag : attrs.bags) {
    double mass = 0.0;
    for (auto id : bag.ids) mass += p[id];
    total += bag.weight * std::min(-std::log(mass), attributes::kLossCeiling);
  }
  return total;
}

}  // namespace

TEST_CASE("attribute_loss: bag covering the whole vocabulary is zero") {
  std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  CHECK(attributes::attribute_loss(p, single({0, 1, 2, 3})) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("attribute_loss: single word with half the mass is ln 2") {
  std::vector<double> p{0.5, 0.25, 0.25};
  CHECK(attributes::attribute_loss(p, single({0})) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("attribute_loss: two half-weight bags with masses 0.5 and 0.25") {
  std::vector<double> p{0.5, 0.25, 0.25};
  CompiledAttributes attrs{{CompiledBag{{0}, 0.5}, CompiledBag{{1}, 0.5}}};
  double expected = 0.5 * std::log(2.0) + 0.5 * std::log(4.0);
  CHECK(expected == doctest::Approx(1.0397).epsilon(1e-4));
  CHECK(attributes::attribute_loss(p, attrs) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("attribute_loss: zero mass hits the ceiling, bad distributions are rejected") {
  std::vector<double> p{1.0, 0.0};
  CHECK(attributes::attribute_loss(p, single({1})) == doctest::Approx(attributes::kLossCeiling));
  std::vector<double> bad{0.6, 0.6};
  try {
    attributes::attribute_loss(bad, single({0}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "distribution_not_normalized");
  }
  std::vector<double> negative{1.5, -0.5};
  CHECK_THROWS_AS(attributes::attribute_loss(negative, single({0})), Error);
}

TEST_CASE("merge_bags normalizes weights and deduplicates") {
  auto a = attributes::make_bag("a", {"Coffee", "coffee", " museum ", ""});
  CHECK(a.words == std::vector<std::string>{"coffee", "museum"});
  auto set = attributes::merge_bags(a, a, attributes::make_bag("r", {}), {1, 1, 0});
  CHECK(set.topic.weight == doctest::Approx(0.5));
  CHECK(set.storyline.weight == doctest::Approx(0.5));
  CHECK(set.relations.weight == 0.0);
  CHECK_FALSE(set.relations.active());
  try {
    attributes::merge_bags(a, a, a, {0, 0, 0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "invalid_weights");
  }
}

TEST_CASE("identical bags with equal weights give the single-bag loss") {
  std::vector<std::string> vocab{"coffee", "museum", "duck", "cake", "park"};
  auto lookup = [&](std::string_view w) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      if (vocab[i] == w) return i;
    }
    return std::nullopt;
  };
  auto bag = attributes::make_bag("b", {"coffee", "duck", "unknown word"});
  auto merged = attributes::compile(attributes::merge_bags(bag, bag, bag, {1, 1, 1}), lookup);
  auto alone = attributes::compile(attributes::merge_bags(bag, attributes::make_bag("e", {}),
                                                          attributes::make_bag("e", {}), {1, 0, 0}),
                                   lookup);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    auto p = testing::random_distribution(rng, vocab.size());
    CHECK(attributes::attribute_loss(p, merged) == doctest::Approx(attributes::attribute_loss(p, alone)));
  }
}

TEST_CASE("compile maps phrases by their first word and drops unknown-only bags") {
  auto lookup = [](std::string_view w) -> std::optional<std::size_t> {
    if (w == "coffee") return 4;
    return std::nullopt;
  };
  auto set = attributes::merge_bags(attributes::make_bag("t", {"coffee house", "zzz"}),
                                    attributes::make_bag("s", {"zzz"}),
                                    attributes::make_bag("r", {}));
  auto compiled = attributes::compile(set, lookup);
  REQUIRE(compiled.bags.size() == 1);
  CHECK(compiled.bags[0].ids == std::vector<std::size_t>{4});
}

TEST_CASE("loss properties: non-negative, monotone, permutation invariant") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 12;
    auto p = testing::random_distribution(rng, n);
    CompiledAttributes attrs{{CompiledBag{{0, 3, 5}, 0.6}, CompiledBag{{7}, 0.4}}};
    double loss = attributes::attribute_loss(p, attrs);
    CHECK(loss >= 0.0);
    CHECK(loss == doctest::Approx(loss_oracle(p, attrs)).epsilon(1e-12));

    // Move mass from a non-bag token onto a bag token.
    auto q = p;
    double moved = q[10] * 0.5;
    q[10] -= moved;
    q[3] += moved;
    CHECK(attributes::attribute_loss(q, attrs) <= loss + 1e-15);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pp(n);
    for (std::size_t i = 0; i < n; ++i) pp[perm[i]] = p[i];
    CompiledAttributes permuted;
    for (const auto& b : attrs.bags) {
      CompiledBag nb{{}, b.weight};
      for (auto id : b.ids) nb.ids.push_back(perm[id]);
      permuted.bags.push_back(nb);
    }
    CHECK(attributes::attribute_loss(pp, permuted) == doctest::Approx(loss).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central finite differences on random 20-token instances") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal(0.0, 1.5);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(20);
    for (auto& v : z) v = normal(rng);
    std::vector<std::size_t> ids(20);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    CompiledAttributes attrs{{CompiledBag{{ids[0], ids[1], ids[2]}, 0.7}, CompiledBag{{ids[3]}, 0.3}}};
    auto grad = attributes::attribute_loss_gradient(softmax(z), attrs).d_logits;
    for (std::size_t j = 0; j < z.size(); ++j) {
      auto up = z;
      auto down = z;
      up[j] += h;
      down[j] -= h;
      double fd = (attributes::attribute_loss(softmax(up), attrs) -
                   attributes::attribute_loss(softmax(down), attrs)) /
                  (2 * h);
      double scale = std::max(std::abs(fd), 1e-3);
      CHECK(std::abs(grad[j] - fd) / scale <= 1e-4);
    }
  }
}

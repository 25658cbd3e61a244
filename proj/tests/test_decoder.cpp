#include <doctest.h>

#include <cstdlib>
#include <nlohmann/json.hpp>

#include "itg/decoder.hpp"
#include "itg/numeric.hpp"
#include "test_support.hpp"

using namespace itg;
using corpus::Utterance;
using decoder::DecodeConfig;

namespace {

const corpus::Story& friends() {
  static const auto story = corpus::load_story(testing::stories_dir() / "friends");
  return story;
}

const lm::ToyLanguageModel& toy() {
  static const auto model = [] {
    std::string text;
    for (std::size_t k = 0; k < friends().season_count(); ++k) text += friends().season_script(k);
    return lm::ToyLanguageModel::train(text, {.seed = 7});
  }();
  return model;
}

attributes::AttributeSet coffee_attrs() {
  return attributes::merge_bags(attributes::make_bag("topic", {"coffee", "apartment", "date"}),
                                attributes::make_bag("storyline", {"coffee", "wedding"}),
                                attributes::make_bag("relations", {}));
}

attributes::CompiledAttributes compile_for(const lm::LanguageModel& model,
                                           const attributes::AttributeSet& set) {
  return attributes::compile(set, [&](std::string_view w) { return model.lookup(w); });
}

double bag_mass(const std::vector<double>& p, const attributes::CompiledAttributes& attrs) {
  std::set<std::size_t> ids;
  for (const auto& b : attrs.bags) ids.insert(b.ids.begin(), b.ids.end());
  double m = 0.0;
  for (auto id : ids) m += p[id];
  return m;
}

}  // namespace

TEST_CASE("DecodeConfig validation") {
  CHECK_NOTHROW(DecodeConfig{}.validate());
  DecodeConfig c;
  c.temperature = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.top_k = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.fusion = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("perturb_step: m = 0 and alpha = 0 are the unperturbed distribution bit for bit") {
  auto attrs = compile_for(toy(), coffee_attrs());
  REQUIRE_FALSE(attrs.empty());
  for (int variant = 0; variant < 2; ++variant) {
    DecodeConfig config;
    if (variant == 0) config.steps_per_token = 0;
    else config.step_size = 0.0;
    decoder::DecoderState state;
    state.context = toy().encode("Monica: There's nothing to tell!\nRoss:");
    auto r = decoder::perturb_step(state, attrs, config, toy());
    auto base = softmax(toy().logits(state.context, std::vector<double>(toy().latent_dim(), 0.0)));
    CHECK(r.distribution == base);
    CHECK(r.unperturbed == base);
  }
}

TEST_CASE("perturb_step: fusion bounds") {
  auto attrs = compile_for(toy(), coffee_attrs());
  decoder::DecoderState state;
  state.context = toy().encode("Rachel:");
  DecodeConfig config;
  config.fusion = 0.0;
  auto r0 = decoder::perturb_step(state, attrs, config, toy());
  CHECK(r0.distribution == r0.unperturbed);

  config.fusion = 1.0;
  auto r1 = decoder::perturb_step(state, attrs, config, toy());
  CHECK(r1.distribution == softmax(toy().logits(state.context, state.latent)));
  CHECK(bag_mass(r1.distribution, attrs) > bag_mass(r1.unperturbed, attrs));
}

TEST_CASE("perturb_step: seed 7, m = 3 defaults raise the bag mass") {
  auto attrs = compile_for(toy(), coffee_attrs());
  decoder::DecoderState state;
  state.context = toy().encode(corpus::format_script(friends().starting_excerpt()));
  state.rng = lm::Rng(7);
  DecodeConfig config;
  config.seed = 7;
  auto r = decoder::perturb_step(state, attrs, config, toy());
  double total = 0.0;
  for (double x : r.distribution) total += x;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bag_mass(r.distribution, attrs) > bag_mass(r.unperturbed, attrs));
  CHECK_FALSE(r.finite_differences);
}

namespace {

// Toy backend without an analytic gradient.
class NoGradient final : public lm::LanguageModel {
 public:
  explicit NoGradient(const lm::ToyLanguageModel& inner) : inner_(inner) {}
  std::size_t vocab_size() const override { return inner_.vocab_size(); }
  std::size_t latent_dim() const override { return inner_.latent_dim(); }
  std::size_t max_context() const override { return inner_.max_context(); }
  std::vector<lm::TokenId> encode(std::string_view t) const override { return inner_.encode(t); }
  std::string decode(std::span<const lm::TokenId> t) const override { return inner_.decode(t); }
  std::optional<lm::TokenId> lookup(std::string_view w) const override { return inner_.lookup(w); }
  std::vector<double> logits(std::span<const lm::TokenId> c, std::span<const double> l) const override {
    return inner_.logits(c, l);
  }

 private:
  const lm::ToyLanguageModel& inner_;
};

}  // namespace

TEST_CASE("perturb_step falls back to finite differences without an analytic gradient") {
  NoGradient backend(toy());
  auto attrs = compile_for(backend, coffee_attrs());
  decoder::DecoderState analytic_state, fd_state;
  analytic_state.context = fd_state.context = toy().encode("Joey:");
  DecodeConfig config;
  auto fd = decoder::perturb_step(fd_state, attrs, config, backend);
  auto exact = decoder::perturb_step(analytic_state, attrs, config, toy());
  CHECK(fd.finite_differences);
  CHECK_FALSE(fd.warning);
  for (std::size_t i = 0; i < fd.distribution.size(); ++i) {
    CHECK(fd.distribution[i] == doctest::Approx(exact.distribution[i]).epsilon(1e-4));
  }
}

TEST_CASE("sample_token: top_k = 1, one-hot, ties and support") {
  std::vector<double> p{0.1, 0.5, 0.4};
  DecodeConfig config;
  config.top_k = 1;
  lm::Rng rng(3);
  for (int i = 0; i < 20; ++i) CHECK(decoder::sample_token(p, config, rng) == 1);

  std::vector<double> tie{0.25, 0.5, 0.25};
  config.top_k = 2;
  for (int i = 0; i < 50; ++i) {
    auto id = decoder::sample_token(tie, config, rng);
    CHECK((id == 0 || id == 1));
  }

  std::vector<double> onehot{0.0, 0.0, 1.0, 0.0};
  config.top_k = 4;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    lm::Rng r(seed);
    CHECK(decoder::sample_token(onehot, config, r) == 2);
  }
}

TEST_CASE("generate_turn: scripted mock stops at the player's line") {
  lm::ScriptedLanguageModel mock({"Joey: Hi.\nRoss:"});
  std::vector<Utterance> context{Utterance::line("Monica", "Hello.")};
  decoder::TurnRequest request{context, "Ross", nullptr, std::nullopt};
  auto result = decoder::generate_turn(request, {}, mock);
  REQUIRE(result.utterances.size() == 1);
  CHECK(result.utterances[0] == Utterance::line("Joey", "Hi."));
  CHECK(result.stop == decoder::StopReason::character_turn);
}

TEST_CASE("generate_turn: no player line until the budget") {
  lm::ScriptedLanguageModel mock({"(Rain.)\nJoey: Hi there friend."});
  std::vector<Utterance> context{Utterance::line("Monica", "Hello.")};
  decoder::TurnRequest request{context, "Ross", nullptr, std::nullopt};
  DecodeConfig config;
  config.max_tokens = 9;
  auto result = decoder::generate_turn(request, config, mock);
  CHECK(result.stop == decoder::StopReason::budget);
  CHECK(result.tokens == 9);
  REQUIRE(result.utterances.size() == 2);
  CHECK(result.utterances[0] == Utterance::direction("(Rain.)"));
  CHECK(result.utterances[1].speaker == "Joey");
}

TEST_CASE("generate_turn: a forced speaker opens the continuation") {
  lm::ScriptedLanguageModel mock({" Fine.\nJoey: Ok.\nRoss: More."});
  std::vector<Utterance> context{Utterance::line("Monica", "Hello.")};
  decoder::TurnRequest request{context, "Ross", nullptr, std::string("Ross")};
  auto result = decoder::generate_turn(request, {}, mock);
  REQUIRE(result.utterances.size() == 2);
  CHECK(result.utterances[0] == Utterance::line("Ross", "Fine."));
  CHECK(result.utterances[1] == Utterance::line("Joey", "Ok."));
  CHECK(result.stop == decoder::StopReason::character_turn);
}

TEST_CASE("generate_turn: empty context is rejected") {
  lm::ScriptedLanguageModel mock({"x"});
  decoder::TurnRequest request{{}, "Ross", nullptr, std::nullopt};
  CHECK_THROWS_AS(decoder::generate_turn(request, {}, mock), Error);
}

TEST_CASE("generate_turn: inactive attributes give the pure sampling output") {
  auto empty = attributes::merge_bags(attributes::make_bag("t", {"zzzz"}), attributes::make_bag("s", {}),
                                      attributes::make_bag("r", {}));
  auto excerpt = friends().starting_excerpt();
  DecodeConfig config;
  config.max_tokens = 40;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    config.seed = seed;
    auto with = decoder::generate_turn({excerpt, "Ross", &empty, std::nullopt}, config, toy());
    auto without = decoder::generate_turn({excerpt, "Ross", nullptr, std::nullopt}, config, toy());
    CHECK(with.text == without.text);
    CHECK(with.tokens == without.tokens);
  }
}

TEST_CASE("generate_turn is deterministic and never returns a player line") {
  auto attrs = coffee_attrs();
  auto excerpt = friends().starting_excerpt();
  DecodeConfig config;
  config.max_tokens = 60;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    config.seed = seed;
    auto a = decoder::generate_turn({excerpt, "Ross", &attrs, std::nullopt}, config, toy());
    auto b = decoder::generate_turn({excerpt, "Ross", &attrs, std::nullopt}, config, toy());
    CHECK(a.text == b.text);
    CHECK(a.utterances == b.utterances);
    CHECK(a.tokens <= config.max_tokens);
    for (const auto& u : a.utterances) CHECK(u.speaker != "Ross");
  }
}

TEST_CASE("generate_turn reproduces the recorded toy-backend run") {
  auto attrs = coffee_attrs();
  auto excerpt = friends().starting_excerpt();
  DecodeConfig config;
  config.seed = 7;
  config.max_tokens = 40;
  auto result = decoder::generate_turn({excerpt, "Ross", &attrs, std::nullopt}, config, toy());
  auto path = testing::test_dir() / "fixtures/golden_decode.json";
  if (std::getenv("ITG_RECORD_GOLDEN")) {
    write_file(path, nlohmann::json{{"seed", 7}, {"max_tokens", 40}, {"text", result.text},
                                    {"tokens", result.tokens}}.dump(2) + "\n");
  }
  auto golden = nlohmann::json::parse(read_file(path));
  CHECK(result.text == golden.at("text").get<std::string>());
  CHECK(result.tokens == golden.at("tokens").get<std::size_t>());
}

TEST_CASE("context_window examples") {
  std::vector<Utterance> twelve;
  for (int i = 0; i < 12; ++i) twelve.push_back(Utterance::line("A", std::to_string(i)));
  auto last = decoder::context_window(twelve);
  REQUIRE(last.size() == 10);
  CHECK(last.front().text == "2");
  CHECK(last.back().text == "11");
  std::vector<Utterance> three(twelve.begin(), twelve.begin() + 3);
  CHECK(decoder::context_window(three, 10) == three);
  CHECK(decoder::context_window(twelve, 0).empty());
}

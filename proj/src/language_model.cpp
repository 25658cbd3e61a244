#include "itg/language_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>

#include "itg/text.hpp"

namespace itg::lm {

namespace {

constexpr double kTrigramWeight = 0.6;
constexpr double kBigramWeight = 0.3;
constexpr double kUnknownPenalty = 20.0;

bool word_byte(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || u >= 0x80;
}

bool no_space_before(std::string_view tok) {
  return tok == "." || tok == "," || tok == "!" || tok == "?" || tok == ":" || tok == ";" ||
         tok == ")" || tok == "]" || tok == "\n";
}

bool no_space_after(std::string_view tok) { return tok == "(" || tok == "[" || tok == "\n"; }

std::uint64_t pair_key(TokenId a, TokenId b) {
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

}  // namespace

double Rng::normal() {
  if (spare_) {
    double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

std::optional<std::vector<double>> LanguageModel::latent_gradient(std::span<const TokenId>,
                                                                  std::span<const double>,
                                                                  std::span<const double>) const {
  return std::nullopt;
}

ScriptVocabulary::ScriptVocabulary(std::vector<std::string> tokens) {
  tokens_.emplace_back(kUnknown);
  index_.emplace(std::string(kUnknown), 0);
  for (auto& t : tokens) {
    if (t == kUnknown) continue;
    if (!index_.emplace(t, tokens_.size()).second) {
      throw Error("invalid_vocabulary", "duplicate token " + t);
    }
    tokens_.push_back(std::move(t));
  }
}

std::vector<std::string> ScriptVocabulary::split(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (c == '\n') {
      out.emplace_back("\n");
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
    out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<TokenId> ScriptVocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<TokenId> ScriptVocabulary::lookup_word(std::string_view word) const {
  if (auto id = find(word)) return id;
  auto lower = to_lower(word);
  if (auto id = find(lower)) return id;
  if (!lower.empty()) {
    lower[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(lower[0])));
    if (auto id = find(lower)) return id;
  }
  return std::nullopt;
}

std::vector<TokenId> ScriptVocabulary::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& t : split(text)) ids.push_back(find(t).value_or(unknown()));
  return ids;
}

std::string ScriptVocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  std::string_view previous = "\n";
  for (auto id : ids) {
    std::string_view tok = token(id);
    if (!out.empty() && !no_space_before(tok) && !no_space_after(previous)) out.push_back(' ');
    out.append(tok);
    previous = tok;
  }
  return out;
}

ToyLanguageModel ToyLanguageModel::train(std::string_view text, const ToyModelOptions& options) {
  if (options.vocab_size < 2) throw Error("invalid_options", "vocabulary needs at least two tokens");
  auto words = ScriptVocabulary::split(text);

  std::map<std::string, std::size_t> freq;
  for (const auto& w : words) ++freq[w];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > options.vocab_size - 1) ranked.resize(options.vocab_size - 1);
  std::vector<std::string> kept;
  for (auto& [w, _] : ranked) kept.push_back(w);

  ToyLanguageModel model;
  model.options_ = options;
  model.vocab_ = ScriptVocabulary(std::move(kept));
  const std::size_t v = model.vocab_.size();

  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(model.vocab_.find(w).value_or(0));

  std::vector<double> uni(v, 1.0);  // add-one
  std::map<std::uint64_t, std::map<TokenId, double>> bi;
  std::map<std::uint64_t, std::map<TokenId, double>> tri;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    uni[ids[i]] += 1.0;
    if (i >= 1) bi[ids[i - 1]][ids[i]] += 1.0;
    if (i >= 2) tri[pair_key(ids[i - 2], ids[i - 1])][ids[i]] += 1.0;
  }
  double total = 0.0;
  for (double c : uni) total += c;
  model.unigram_.resize(v);
  for (std::size_t w = 0; w < v; ++w) model.unigram_[w] = uni[w] / total;
  auto pack = [](const std::map<TokenId, double>& counts) {
    Continuations c;
    for (auto [w, n] : counts) {
      c.next.emplace_back(w, n);
      c.total += n;
    }
    return c;
  };
  for (const auto& [key, counts] : bi) model.bigram_.emplace(key, pack(counts));
  for (const auto& [key, counts] : tri) model.trigram_.emplace(key, pack(counts));

  Rng rng(options.seed);
  model.embedding_.resize(v * options.latent_dim);
  for (double& e : model.embedding_) e = rng.normal();
  return model;
}

std::optional<TokenId> ToyLanguageModel::lookup(std::string_view word) const {
  auto id = vocab_.lookup_word(word);
  if (id && *id == vocab_.unknown()) return std::nullopt;
  return id;
}

std::vector<double> ToyLanguageModel::base_log_probs(std::span<const TokenId> context) const {
  const std::size_t v = vocab_.size();
  std::vector<double> p(v, 0.0);
  const Continuations* tri = nullptr;
  const Continuations* bi = nullptr;
  if (context.size() >= 2) {
    auto it = trigram_.find(pair_key(context[context.size() - 2], context.back()));
    if (it != trigram_.end()) tri = &it->second;
  }
  if (!context.empty()) {
    auto it = bigram_.find(context.back());
    if (it != bigram_.end()) bi = &it->second;
  }
  // Missing contexts hand their weight to the lower orders (the unigram keeps at least 0.1).
  const double w3 = tri ? kTrigramWeight : 0.0;
  const double w2 = bi ? kBigramWeight + (tri ? 0.0 : 0.5 * kTrigramWeight) : 0.0;
  const double w1 = 1.0 - w3 - w2;
  for (std::size_t w = 0; w < v; ++w) p[w] = w1 * unigram_[w];
  if (tri) {
    for (auto [w, n] : tri->next) p[w] += w3 * n / tri->total;
  }
  if (bi) {
    for (auto [w, n] : bi->next) p[w] += w2 * n / bi->total;
  }
  for (double& x : p) x = std::log(x);
  p[vocab_.unknown()] -= kUnknownPenalty;
  return p;
}

std::vector<double> ToyLanguageModel::logits(std::span<const TokenId> context,
                                             std::span<const double> latent) const {
  auto z = base_log_probs(context);
  const std::size_t d = options_.latent_dim;
  if (latent.size() != d) throw Error("invalid_latent", "latent has the wrong dimension");
  bool zero = std::all_of(latent.begin(), latent.end(), [](double x) { return x == 0.0; });
  if (zero) return z;
  for (std::size_t w = 0; w < z.size(); ++w) {
    const double* row = embedding_.data() + w * d;
    double dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) dot += row[k] * latent[k];
    z[w] += dot;
  }
  return z;
}

std::optional<std::vector<double>> ToyLanguageModel::latent_gradient(
    std::span<const TokenId>, std::span<const double>, std::span<const double> d_logits) const {
  const std::size_t d = options_.latent_dim;
  std::vector<double> g(d, 0.0);
  for (std::size_t w = 0; w < d_logits.size() && w < vocab_.size(); ++w) {
    const double* row = embedding_.data() + w * d;
    for (std::size_t k = 0; k < d; ++k) g[k] += row[k] * d_logits[w];
  }
  return g;
}

ScriptedLanguageModel::ScriptedLanguageModel(std::vector<std::string> responses,
                                             std::size_t max_context)
    : max_context_(max_context) {
  if (responses.empty()) throw Error("invalid_script", "scripted model needs at least one response");
  std::vector<std::string> tokens{"\n"};
  std::map<std::string, bool> seen{{"\n", true}};
  std::vector<std::vector<std::string>> split;
  for (const auto& r : responses) {
    split.push_back(ScriptVocabulary::split(r));
    for (const auto& t : split.back()) {
      if (seen.emplace(t, true).second) tokens.push_back(t);
    }
  }
  vocab_ = ScriptVocabulary(std::move(tokens));
  newline_ = *vocab_.find("\n");
  for (const auto& s : split) {
    std::vector<TokenId> ids;
    for (const auto& t : s) ids.push_back(*vocab_.find(t));
    responses_.push_back(std::move(ids));
  }
}

void ScriptedLanguageModel::on_sequence_start() const {
  std::lock_guard lock(mutex_);
  if (started_) ++sequence_;
  started_ = true;
  prompt_length_.reset();
}

std::size_t ScriptedLanguageModel::sequences_started() const {
  std::lock_guard lock(mutex_);
  return started_ ? sequence_ + 1 : 0;
}

std::vector<double> ScriptedLanguageModel::logits(std::span<const TokenId> context,
                                                  std::span<const double>) const {
  std::lock_guard lock(mutex_);
  if (!prompt_length_) prompt_length_ = context.size();
  std::size_t offset = context.size() >= *prompt_length_ ? context.size() - *prompt_length_ : 0;
  const auto& script = responses_[sequence_ % responses_.size()];
  TokenId target = offset < script.size() ? script[offset] : newline_;
  std::vector<double> z(vocab_.size(), -1e4);
  z[target] = 0.0;
  return z;
}

}  // namespace itg::lm

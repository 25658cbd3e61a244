#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace itg::lm {

using TokenId = std::size_t;

// Portable generator: mt19937_64 is fully specified, and the conversions below avoid the
// implementation-defined standard distributions so golden runs hold across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }  // [0, 1)
  double normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// Backend contract for controlled decoding. Implementations must be reentrant: logits and
// latent_gradient are const and may be called concurrently by independent sessions.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::size_t vocab_size() const = 0;
  // Size of the additive latent the decoder perturbs; 0 disables perturbation.
  virtual std::size_t latent_dim() const = 0;
  virtual std::size_t max_context() const = 0;

  virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  virtual std::string decode(std::span<const TokenId> tokens) const = 0;
  virtual std::optional<TokenId> lookup(std::string_view word) const = 0;

  // Next-token logits for `context` with latent perturbation `latent` (size latent_dim()).
  virtual std::vector<double> logits(std::span<const TokenId> context,
                                     std::span<const double> latent) const = 0;

  // J^T * d_logits where J = d logits / d latent. nullopt means "no analytic gradient";
  // the decoder then falls back to finite differences.
  virtual std::optional<std::vector<double>> latent_gradient(std::span<const TokenId> context,
                                                             std::span<const double> latent,
                                                             std::span<const double> d_logits) const;

  // Called once before each decoded sequence. Stateless backends ignore it.
  virtual void on_sequence_start() const {}
};

// Word-level codec for screenplay text: words, single punctuation marks and "\n".
class ScriptVocabulary {
 public:
  static constexpr std::string_view kUnknown = "<unk>";

  ScriptVocabulary() = default;
  // `tokens` must not repeat; id 0 is always the unknown token.
  explicit ScriptVocabulary(std::vector<std::string> tokens);

  static std::vector<std::string> split(std::string_view text);

  std::size_t size() const { return tokens_.size(); }
  TokenId unknown() const { return 0; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::optional<TokenId> find(std::string_view token) const;
  // Exact, then lowercase, then capitalized spelling.
  std::optional<TokenId> lookup_word(std::string_view word) const;

  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct ToyModelOptions {
  std::size_t vocab_size = 200;  // including <unk>
  std::size_t latent_dim = 16;
  std::uint64_t seed = 7;
  std::size_t max_context = 1024;
};

// Interpolated trigram model over a small vocabulary plus a fixed random token embedding E:
// logits(w) = log P(w | u, v) + E_w . latent. The latent gradient is exactly E^T d_logits.
class ToyLanguageModel final : public LanguageModel {
 public:
  static ToyLanguageModel train(std::string_view text, const ToyModelOptions& options = {});

  std::size_t vocab_size() const override { return vocab_.size(); }
  std::size_t latent_dim() const override { return options_.latent_dim; }
  std::size_t max_context() const override { return options_.max_context; }
  std::vector<TokenId> encode(std::string_view text) const override { return vocab_.encode(text); }
  std::string decode(std::span<const TokenId> tokens) const override { return vocab_.decode(tokens); }
  std::optional<TokenId> lookup(std::string_view word) const override;

  std::vector<double> logits(std::span<const TokenId> context,
                             std::span<const double> latent) const override;
  std::optional<std::vector<double>> latent_gradient(std::span<const TokenId> context,
                                                     std::span<const double> latent,
                                                     std::span<const double> d_logits) const override;

  const ScriptVocabulary& vocabulary() const { return vocab_; }
  // log P(w | context) without any perturbation.
  std::vector<double> base_log_probs(std::span<const TokenId> context) const;

 private:
  struct Continuations {
    std::vector<std::pair<TokenId, double>> next;
    double total = 0.0;
  };

  ToyModelOptions options_;
  ScriptVocabulary vocab_;
  std::vector<double> unigram_;  // smoothed probabilities
  std::unordered_map<std::uint64_t, Continuations> bigram_;
  std::unordered_map<std::uint64_t, Continuations> trigram_;
  std::vector<double> embedding_;  // vocab x latent, row-major
};

// Test double: emits fixed responses token by token, one response per decoded sequence
// (cycling), then newlines until the budget runs out. Output ignores the context.
class ScriptedLanguageModel final : public LanguageModel {
 public:
  explicit ScriptedLanguageModel(std::vector<std::string> responses, std::size_t max_context = 4096);

  std::size_t vocab_size() const override { return vocab_.size(); }
  std::size_t latent_dim() const override { return 0; }
  std::size_t max_context() const override { return max_context_; }
  std::vector<TokenId> encode(std::string_view text) const override { return vocab_.encode(text); }
  std::string decode(std::span<const TokenId> tokens) const override { return vocab_.decode(tokens); }
  std::optional<TokenId> lookup(std::string_view word) const override { return vocab_.lookup_word(word); }

  std::vector<double> logits(std::span<const TokenId> context,
                             std::span<const double> latent) const override;
  void on_sequence_start() const override;

  std::size_t sequences_started() const;

 private:
  ScriptVocabulary vocab_;
  std::vector<std::vector<TokenId>> responses_;
  TokenId newline_ = 0;
  std::size_t max_context_;

  mutable std::mutex mutex_;
  mutable std::size_t sequence_ = 0;
  mutable std::optional<std::size_t> prompt_length_;
  mutable bool started_ = false;
};

}  // namespace itg::lm

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "itg/attributes.hpp"
#include "itg/corpus.hpp"
#include "itg/language_model.hpp"

namespace itg::decoder {

using lm::TokenId;

struct DecodeConfig {
  std::size_t steps_per_token = 3;   // gradient steps on the latent per emitted token
  double step_size = 0.02;
  double fluency_coef = 0.01;        // weight of KL(perturbed || unperturbed)
  double fusion = 0.95;              // 0: unperturbed only, 1: perturbed only
  std::size_t max_tokens = 80;
  double temperature = 1.0;
  std::size_t top_k = 10;
  std::uint64_t seed = 0;
  double loss_ceiling = attributes::kLossCeiling;

  // Throws Error("invalid_config") when a field is out of range.
  void validate() const;
};

struct DecoderState {
  std::vector<TokenId> context;
  std::vector<double> latent;  // perturbation from the last perturb_step
  lm::Rng rng;
};

struct PerturbResult {
  std::vector<double> distribution;  // fused, normalized
  std::vector<double> unperturbed;
  bool finite_differences = false;   // backend gave no analytic gradient
  bool warning = false;              // gradient unusable; distribution is the unperturbed one
};

// Runs `steps_per_token` normalized gradient steps on the additive latent, minimizing
// attribute loss + fluency_coef * KL(p || p_unperturbed), then fuses the perturbed and
// unperturbed distributions geometrically by `fusion`. Without steps, step size, active bags
// or a latent, the unperturbed distribution is returned bit for bit.
PerturbResult perturb_step(DecoderState& state, const attributes::CompiledAttributes& attrs,
                           const DecodeConfig& config, const lm::LanguageModel& backend);

// Temperature and top-k sampling; ties in probability rank the lower token id first.
TokenId sample_token(std::span<const double> distribution, const DecodeConfig& config, lm::Rng& rng);

enum class StopReason { character_turn, budget };
std::string_view stop_reason_name(StopReason reason);

struct TurnResult {
  std::vector<corpus::Utterance> utterances;
  StopReason stop = StopReason::budget;
  std::string text;  // the kept generated text, script format
  std::size_t tokens = 0;
  bool warnings = false;
};

class GenerationError : public Error {
 public:
  GenerationError(const std::string& message, TurnResult partial)
      : Error("generation_failed", message), partial_(std::move(partial)) {}
  const TurnResult& partial() const { return partial_; }

 private:
  TurnResult partial_;
};

struct TurnRequest {
  std::span<const corpus::Utterance> context;
  std::string player_character;
  const attributes::AttributeSet* attributes = nullptr;
  // When set, the continuation starts as a line spoken by this character.
  std::optional<std::string> forced_speaker;
};

// Decodes until a new line spoken by the player character begins (that partial line is
// dropped) or `max_tokens` is reached. Backend failures become GenerationError carrying the
// utterances decoded so far.
TurnResult generate_turn(const TurnRequest& request, const DecodeConfig& config,
                         const lm::LanguageModel& backend);

// The last min(n, size) utterances, in order.
std::vector<corpus::Utterance> context_window(std::span<const corpus::Utterance> transcript,
                                              std::size_t n = 10);

}  // namespace itg::decoder

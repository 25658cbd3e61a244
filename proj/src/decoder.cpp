#include "itg/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "itg/numeric.hpp"

namespace itg::decoder {

namespace {

constexpr double kFiniteDifferenceStep = 1e-4;

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0 && q[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

struct Objective {
  const attributes::CompiledAttributes& attrs;
  const DecodeConfig& config;
  std::span<const double> reference;

  double value(std::span<const double> p) const {
    return attributes::attribute_loss(p, attrs, config.loss_ceiling) +
           config.fluency_coef * kl_divergence(p, reference);
  }

  // d/dz of value(softmax(z)).
  std::vector<double> gradient(std::span<const double> p) const {
    auto g = attributes::attribute_loss_gradient(p, attrs, config.loss_ceiling).d_logits;
    if (config.fluency_coef > 0.0) {
      double kl = kl_divergence(p, reference);
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[j] > 0.0 && reference[j] > 0.0) {
          g[j] += config.fluency_coef * p[j] * (std::log(p[j] / reference[j]) - kl);
        }
      }
    }
    return g;
  }
};

std::vector<double> finite_difference_gradient(const Objective& objective,
                                               const lm::LanguageModel& backend,
                                               std::span<const TokenId> context,
                                               std::vector<double> latent) {
  std::vector<double> g(latent.size());
  for (std::size_t k = 0; k < latent.size(); ++k) {
    const double saved = latent[k];
    latent[k] = saved + kFiniteDifferenceStep;
    double up = objective.value(softmax(backend.logits(context, latent)));
    latent[k] = saved - kFiniteDifferenceStep;
    double down = objective.value(softmax(backend.logits(context, latent)));
    latent[k] = saved;
    g[k] = (up - down) / (2.0 * kFiniteDifferenceStep);
  }
  return g;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> fuse(std::span<const double> perturbed, std::span<const double> unperturbed,
                         double fusion) {
  std::vector<double> log_q(perturbed.size(), -INFINITY);
  for (std::size_t i = 0; i < perturbed.size(); ++i) {
    if (perturbed[i] > 0.0 && unperturbed[i] > 0.0) {
      log_q[i] = fusion * std::log(perturbed[i]) + (1.0 - fusion) * std::log(unperturbed[i]);
    }
  }
  double norm = log_sum_exp(log_q);
  if (!std::isfinite(norm)) return {unperturbed.begin(), unperturbed.end()};
  std::vector<double> q(perturbed.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = std::exp(log_q[i] - norm);
  return q;
}

}  // namespace

void DecodeConfig::validate() const {
  if (!(step_size >= 0.0)) throw Error("invalid_config", "step_size must be >= 0");
  if (!(fluency_coef >= 0.0)) throw Error("invalid_config", "fluency_coef must be >= 0");
  if (!(fusion >= 0.0 && fusion <= 1.0)) throw Error("invalid_config", "fusion must be in [0, 1]");
  if (!(temperature > 0.0)) throw Error("invalid_config", "temperature must be > 0");
  if (top_k < 1) throw Error("invalid_config", "top_k must be >= 1");
  if (max_tokens < 1) throw Error("invalid_config", "max_tokens must be >= 1");
}

PerturbResult perturb_step(DecoderState& state, const attributes::CompiledAttributes& attrs,
                           const DecodeConfig& config, const lm::LanguageModel& backend) {
  const std::size_t dim = backend.latent_dim();
  state.latent.assign(dim, 0.0);

  PerturbResult result;
  result.unperturbed = softmax(backend.logits(state.context, state.latent));
  if (config.steps_per_token == 0 || config.step_size == 0.0 || config.fusion == 0.0 ||
      attrs.empty() || dim == 0) {
    result.distribution = result.unperturbed;
    return result;
  }

  Objective objective{attrs, config, result.unperturbed};
  std::vector<double> latent(dim, 0.0);
  bool moved = false;
  for (std::size_t step = 0; step < config.steps_per_token; ++step) {
    auto p = softmax(backend.logits(state.context, latent));
    auto d_logits = objective.gradient(p);

    std::optional<std::vector<double>> grad;
    try {
      grad = backend.latent_gradient(state.context, latent, d_logits);
    } catch (const std::exception&) {
      grad.reset();
    }
    if (!grad || grad->size() != dim || !all_finite(*grad)) {
      result.finite_differences = true;
      try {
        grad = finite_difference_gradient(objective, backend, state.context, latent);
      } catch (const std::exception&) {
        grad.reset();
      }
    }
    if (!grad || !all_finite(*grad)) {
      result.warning = true;
      result.distribution = result.unperturbed;
      return result;
    }
    double norm = l2_norm(*grad);
    if (norm == 0.0) break;
    for (std::size_t k = 0; k < dim; ++k) latent[k] -= config.step_size * (*grad)[k] / norm;
    moved = true;
  }
  if (!moved) {
    result.distribution = result.unperturbed;
    return result;
  }

  state.latent = latent;
  auto perturbed = softmax(backend.logits(state.context, latent));
  if (!all_finite(perturbed)) {
    result.warning = true;
    result.distribution = result.unperturbed;
    return result;
  }
  result.distribution =
      config.fusion == 1.0 ? perturbed : fuse(perturbed, result.unperturbed, config.fusion);
  return result;
}

TokenId sample_token(std::span<const double> distribution, const DecodeConfig& config, lm::Rng& rng) {
  if (distribution.empty()) throw Error("invalid_distribution", "empty distribution");
  std::vector<TokenId> order(distribution.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  const std::size_t k = std::min(config.top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](TokenId a, TokenId b) {
                      if (distribution[a] != distribution[b]) return distribution[a] > distribution[b];
                      return a < b;
                    });
  order.resize(k);

  const double top = distribution[order.front()];
  if (!(top > 0.0)) return order.front();
  std::vector<double> weights(k, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double p = distribution[order[i]];
    weights[i] = p > 0.0 ? std::exp((std::log(p) - std::log(top)) / config.temperature) : 0.0;
    total += weights[i];
  }
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < k; ++i) {
    if (u < weights[i]) return order[i];
    u -= weights[i];
  }
  return order.front();
}

std::string_view stop_reason_name(StopReason reason) {
  return reason == StopReason::character_turn ? "character_turn" : "budget";
}

TurnResult generate_turn(const TurnRequest& request, const DecodeConfig& config,
                         const lm::LanguageModel& backend) {
  config.validate();
  if (request.context.empty()) throw Error("empty_context", "generation needs a non-empty context");

  std::string prefix;
  if (request.forced_speaker) prefix = *request.forced_speaker + ": ";
  std::string prompt = corpus::format_script(request.context);
  if (request.forced_speaker) prompt += *request.forced_speaker + ":";

  DecoderState state;
  state.context = backend.encode(prompt);
  const std::size_t limit = backend.max_context();
  if (limit > 0 && state.context.size() >= limit) {
    state.context.erase(state.context.begin(),
                        state.context.end() - static_cast<std::ptrdiff_t>(limit - 1));
  }
  state.rng = lm::Rng(config.seed);

  attributes::CompiledAttributes compiled;
  if (request.attributes) {
    compiled = attributes::compile(*request.attributes,
                                   [&](std::string_view w) { return backend.lookup(w); });
  }

  TurnResult result;
  std::vector<TokenId> generated;
  std::string text = prefix;
  auto finish = [&](std::string kept, StopReason stop) {
    result.text = std::move(kept);
    result.stop = stop;
    result.utterances = corpus::parse_script(result.text);
    // A player line can only come from the forced prefix.
    for (std::size_t i = 0; i < result.utterances.size(); ++i) {
      const auto& u = result.utterances[i];
      if (!u.is_line() || u.speaker != request.player_character) continue;
      if (i == 0 && request.forced_speaker) continue;
      result.utterances.resize(i);
      result.stop = StopReason::character_turn;
      break;
    }
    return result;
  };

  try {
    backend.on_sequence_start();
    for (std::size_t t = 0; t < config.max_tokens; ++t) {
      auto step = perturb_step(state, compiled, config, backend);
      result.warnings = result.warnings || step.warning;
      TokenId id = sample_token(step.distribution, config, state.rng);
      state.context.push_back(id);
      generated.push_back(id);
      ++result.tokens;
      if (limit > 0 && state.context.size() >= limit) state.context.erase(state.context.begin());

      text = prefix + backend.decode(generated);
      auto line_start = text.rfind('\n');
      bool first_line = line_start == std::string::npos;
      std::string_view partial =
          first_line ? std::string_view(text) : std::string_view(text).substr(line_start + 1);
      if (first_line && request.forced_speaker) continue;
      if (auto split = corpus::split_speaker(partial);
          split && split->speaker == request.player_character) {
        return finish(first_line ? std::string() : text.substr(0, line_start + 1),
                      StopReason::character_turn);
      }
    }
  } catch (const std::exception& e) {
    finish(text, StopReason::budget);
    throw GenerationError(e.what(), result);
  }
  return finish(text, StopReason::budget);
}

std::vector<corpus::Utterance> context_window(std::span<const corpus::Utterance> transcript,
                                              std::size_t n) {
  auto keep = std::min(n, transcript.size());
  return {transcript.end() - static_cast<std::ptrdiff_t>(keep), transcript.end()};
}

}  // namespace itg::decoder

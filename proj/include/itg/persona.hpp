#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "itg/text.hpp"

namespace itg::persona {

inline constexpr std::size_t kTypeCount = 16;

// Canonical (lexicographic) order; argmax ties therefore resolve to the first code.
inline constexpr std::array<std::string_view, kTypeCount> kTypeCodes = {
    "ENFJ", "ENFP", "ENTJ", "ENTP", "ESFJ", "ESFP", "ESTJ", "ESTP",
    "INFJ", "INFP", "INTJ", "INTP", "ISFJ", "ISFP", "ISTJ", "ISTP"};

std::optional<std::size_t> type_index(std::string_view code);
std::vector<std::string> type_codes();

// Noun-plural lemmatizer; idempotent.
std::string lemmatize(std::string_view word);

// '|||' to space, URL tokens to "link", lowercase, word tokens, lemmatize, drop stopwords.
std::vector<std::string> preprocess(std::string_view raw,
                                    const StopwordList& stopwords = StopwordList::builtin());

struct PostBundle {
  std::vector<std::string> posts;
  std::optional<std::array<std::uint8_t, kTypeCount>> label;  // one-hot
};

std::array<std::uint8_t, kTypeCount> one_hot(std::string_view code);
// Index of the single 1; throws Error("unlabeled_bundle") / Error("invalid_label").
std::size_t label_index(const PostBundle& bundle);

// Reads the public dataset layout: CSV with header `type,posts`, posts joined by '|||'.
std::vector<PostBundle> load_dataset(const std::filesystem::path& path);
std::vector<PostBundle> parse_dataset(std::string_view csv);

struct LabeledDocument {
  std::vector<std::string> tokens;
  std::size_t label = 0;
};

std::vector<LabeledDocument> to_documents(std::span<const PostBundle> bundles,
                                          const StopwordList& stopwords = StopwordList::builtin());

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::size_t class_count() const = 0;
  // Normalized posterior over classes.
  virtual std::vector<double> posteriors(std::span<const std::string> tokens) const = 0;
};

// Multinomial Naive Bayes with an IDF factor per occurring vocabulary word:
// score_j = log pi_j + sum_w f_w log Pr(w|j) + sum_{w in query, w in V} log t_w,
// Pr(w|j) = (count(w, j) + alpha) / (total_j + alpha |V|), t_w = N / doc_w.
// A query word outside V gets the smoothed mass alpha / (total_j + alpha |V|) and t_w = 1.
class NBModel final : public Classifier {
 public:
  static constexpr int kFormatVersion = 1;

  std::vector<std::string> classes;
  std::vector<double> priors;
  std::vector<std::string> vocabulary;
  std::vector<std::vector<double>> log_likelihoods;  // [class][word]
  std::vector<double> idf;                           // t_w
  std::vector<double> token_totals;                  // total_j
  double smoothing = 1.0;
  std::size_t document_count = 0;

  std::size_t class_count() const override { return classes.size(); }
  std::optional<std::size_t> word_index(std::string_view word) const;
  double unseen_log_likelihood(std::size_t cls) const;
  // Unnormalized log scores.
  std::vector<double> log_scores(std::span<const std::string> tokens) const;
  std::vector<double> posteriors(std::span<const std::string> tokens) const override;

  nlohmann::json to_json() const;
  static NBModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static NBModel load(const std::filesystem::path& path);

  void rebuild_index();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Throws Error("empty_corpus") or Error("invalid_label").
NBModel train_nb(std::span<const LabeledDocument> documents, std::vector<std::string> classes,
                 double smoothing = 1.0);
// Sixteen-type model from labeled bundles; throws Error("unlabeled_bundle").
NBModel train_nb(std::span<const PostBundle> corpus,
                 const StopwordList& stopwords = StopwordList::builtin());

using ModelFactory =
    std::function<std::unique_ptr<Classifier>(std::span<const LabeledDocument> training)>;

struct EvaluationResult {
  double accuracy = 0.0;  // mean of fold accuracies
  std::vector<double> fold_accuracy;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::string> warnings;
};

// Per-class round-robin over a seeded shuffle; each class lands floor or ceil of n_c / k
// members in every fold.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const std::size_t> labels,
                                                       std::size_t k, std::uint64_t seed,
                                                       std::vector<std::string>* warnings = nullptr);

// Throws Error("invalid_folds") for k < 2 and Error("dataset_too_small") when fewer
// documents than folds.
EvaluationResult evaluate(const ModelFactory& factory, std::span<const LabeledDocument> dataset,
                          std::size_t class_count, std::size_t k, std::uint64_t seed = 0);

ModelFactory nb_factory(std::vector<std::string> classes, double smoothing = 1.0);

inline constexpr double kLowConfidenceThreshold = 0.15;

struct PersonalityReport {
  std::string type_code;
  std::vector<double> posteriors;  // kTypeCount entries, kTypeCodes order
  std::string description;
  bool low_confidence = false;
  std::string backend;  // "naive_bayes" or "neural"
};

nlohmann::json to_json(const PersonalityReport& report);
PersonalityReport report_from_json(const nlohmann::json& j);

// Neural plug-in contract: sixteen independent per-type scores in [0, 1] (sigmoid outputs),
// in kTypeCodes order.
class PersonalityScorer {
 public:
  virtual ~PersonalityScorer() = default;
  virtual std::vector<double> scores(std::span<const std::string> tokens) const = 0;
};

// Posts {"tokens": [...], "text": "..."} and expects {"scores": [16 numbers]}.
class HttpPersonalityScorer final : public PersonalityScorer {
 public:
  explicit HttpPersonalityScorer(std::string url, int timeout_seconds = 30);
  std::vector<double> scores(std::span<const std::string> tokens) const override;

 private:
  std::string origin_;
  std::string path_;
  int timeout_seconds_;
};

// Validates plug-in scores and renormalizes them into a posterior. All-zero scores give a
// uniform posterior. Throws Error("invalid_scores").
std::vector<double> normalize_scores(std::span<const double> scores);

// Builds the report from a sixteen-entry posterior.
PersonalityReport make_report(std::vector<double> posteriors, std::string backend);

struct ClassifierBackends {
  const NBModel* naive_bayes = nullptr;
  const PersonalityScorer* neural = nullptr;
};

// Preprocesses the concatenated inputs and scores them with the neural plug-in when given,
// falling back to the NB model if the plug-in fails. Throws Error("no_input") when every
// text is empty and Error("backend_failed") when no backend can answer.
PersonalityReport classify(std::span<const std::string> texts, const ClassifierBackends& backends,
                           const StopwordList& stopwords = StopwordList::builtin());

// The shipped type description; throws Error("unknown_type").
std::string describe_type(std::string_view code);

}  // namespace itg::persona

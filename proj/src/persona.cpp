#include "itg/persona.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_set>

#include <httplib.h>

#include "itg/language_model.hpp"
#include "itg/numeric.hpp"

namespace itg::persona {

namespace {

constexpr std::size_t kMaxLemmaPasses = 4;

const std::unordered_map<std::string_view, std::string_view>& irregular_plurals() {
  static const std::unordered_map<std::string_view, std::string_view> table = {
      {"men", "man"},     {"women", "woman"}, {"children", "child"},
      {"feet", "foot"},   {"teeth", "tooth"}, {"mice", "mouse"},     {"geese", "goose"},
      {"wives", "wife"},  {"lives", "life"},  {"knives", "knife"},   {"leaves", "leaf"},
      {"wolves", "wolf"}, {"halves", "half"}, {"selves", "self"},    {"thieves", "thief"}};
  return table;
}

// Words ending in "s" that are not plurals.
const std::unordered_set<std::string_view>& invariant_words() {
  static const std::unordered_set<std::string_view> words = {
      "always", "perhaps", "series",  "species", "news",     "physics", "mathematics",
      "politics", "ethics", "economics", "thanks", "sometimes", "towards", "afterwards",
      "besides", "unless", "whereas", "across", "christmas", "lens",   "chaos", "kudos"};
  return words;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string lemmatize_once(std::string_view w) {
  if (auto it = irregular_plurals().find(w); it != irregular_plurals().end()) {
    return std::string(it->second);
  }
  if (invariant_words().contains(w) || w.size() < 4) return std::string(w);
  if (w.size() > 4) {
    if (ends_with(w, "sses")) return std::string(w.substr(0, w.size() - 2));
    if (ends_with(w, "ies")) return std::string(w.substr(0, w.size() - 3)) + "y";
    if (ends_with(w, "xes") || ends_with(w, "ches") || ends_with(w, "shes") || ends_with(w, "zes")) {
      return std::string(w.substr(0, w.size() - 2));
    }
  }
  if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is") &&
      !ends_with(w, "'s")) {
    return std::string(w.substr(0, w.size() - 1));
  }
  return std::string(w);
}

bool is_url(std::string_view token) {
  auto lower = to_lower(token);
  return lower.find("://") != std::string::npos || lower.starts_with("www.");
}

void check_posterior_size(std::span<const double> posterior) {
  if (posterior.size() != kTypeCount) {
    throw Error("invalid_scores", "expected " + std::to_string(kTypeCount) + " scores, got " +
                                      std::to_string(posterior.size()));
  }
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// RFC 4180: quoted fields may hold commas, doubled quotes and line breaks.
std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw Error("invalid_dataset", "unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

std::vector<std::string> split_posts(std::string_view joined) {
  std::vector<std::string> posts;
  std::size_t start = 0;
  while (true) {
    auto pos = joined.find("|||", start);
    posts.emplace_back(joined.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 3;
  }
  return posts;
}

}  // namespace

std::optional<std::size_t> type_index(std::string_view code) {
  for (std::size_t i = 0; i < kTypeCodes.size(); ++i) {
    if (kTypeCodes[i] == code) return i;
  }
  return std::nullopt;
}

std::vector<std::string> type_codes() { return {kTypeCodes.begin(), kTypeCodes.end()}; }

std::string lemmatize(std::string_view word) {
  std::string current(word);
  for (std::size_t pass = 0; pass < kMaxLemmaPasses; ++pass) {
    auto next = lemmatize_once(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

std::vector<std::string> preprocess(std::string_view raw, const StopwordList& stopwords) {
  std::string text(raw);
  for (auto pos = text.find("|||"); pos != std::string::npos; pos = text.find("|||", pos)) {
    text.replace(pos, 3, " ");
  }
  std::vector<std::string> out;
  for (auto piece : split_whitespace(text)) {
    if (is_url(piece)) {
      out.emplace_back("link");
      continue;
    }
    for (auto& word : word_tokens(piece)) {
      if (stopwords.contains(word)) continue;
      auto lemma = lemmatize(word);
      if (lemma.empty() || stopwords.contains(lemma)) continue;
      out.push_back(std::move(lemma));
    }
  }
  return out;
}

std::array<std::uint8_t, kTypeCount> one_hot(std::string_view code) {
  auto upper = std::string(trim(code));
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  auto index = type_index(upper);
  if (!index) throw Error("invalid_label", "unknown type code '" + std::string(code) + "'");
  std::array<std::uint8_t, kTypeCount> v{};
  v[*index] = 1;
  return v;
}

std::size_t label_index(const PostBundle& bundle) {
  if (!bundle.label) throw Error("unlabeled_bundle", "training bundle has no label");
  const auto& v = *bundle.label;
  if (std::count(v.begin(), v.end(), 1) != 1 ||
      std::count(v.begin(), v.end(), 0) != static_cast<std::ptrdiff_t>(kTypeCount - 1)) {
    throw Error("invalid_label", "label is not one-hot");
  }
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), 1) - v.begin());
}

std::vector<PostBundle> parse_dataset(std::string_view csv) {
  auto rows = parse_csv(csv);
  if (rows.empty()) return {};
  std::size_t type_col = 0;
  std::size_t posts_col = 1;
  std::size_t first = 0;
  auto header = rows[0];
  for (auto& h : header) h = to_lower(trim(h));
  auto type_it = std::find(header.begin(), header.end(), "type");
  auto posts_it = std::find(header.begin(), header.end(), "posts");
  if (type_it != header.end() && posts_it != header.end()) {
    type_col = static_cast<std::size_t>(type_it - header.begin());
    posts_col = static_cast<std::size_t>(posts_it - header.begin());
    first = 1;
  }
  std::vector<PostBundle> bundles;
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() <= std::max(type_col, posts_col)) {
      throw Error("invalid_dataset", "row " + std::to_string(r + 1) + " has too few fields");
    }
    PostBundle b;
    b.posts = split_posts(row[posts_col]);
    b.label = one_hot(row[type_col]);
    bundles.push_back(std::move(b));
  }
  return bundles;
}

std::vector<PostBundle> load_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file(path));
}

std::vector<LabeledDocument> to_documents(std::span<const PostBundle> bundles,
                                          const StopwordList& stopwords) {
  std::vector<LabeledDocument> docs;
  docs.reserve(bundles.size());
  for (const auto& b : bundles) {
    docs.push_back({preprocess(join(b.posts, "|||"), stopwords), label_index(b)});
  }
  return docs;
}

std::optional<std::size_t> NBModel::word_index(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double NBModel::unseen_log_likelihood(std::size_t cls) const {
  return std::log(smoothing) -
         std::log(token_totals[cls] + smoothing * static_cast<double>(vocabulary.size()));
}

void NBModel::rebuild_index() {
  index_.clear();
  index_.reserve(vocabulary.size());
  for (std::size_t i = 0; i < vocabulary.size(); ++i) index_.emplace(vocabulary[i], i);
}

std::vector<double> NBModel::log_scores(std::span<const std::string> tokens) const {
  std::unordered_map<std::size_t, std::size_t> known;
  std::size_t unseen = 0;
  for (const auto& t : tokens) {
    if (auto id = word_index(t)) {
      ++known[*id];
    } else {
      ++unseen;
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> counts(known.begin(), known.end());
  std::sort(counts.begin(), counts.end());

  double idf_term = 0.0;
  for (auto [w, _] : counts) idf_term += std::log(idf[w]);

  std::vector<double> scores(classes.size());
  for (std::size_t j = 0; j < classes.size(); ++j) {
    if (priors[j] <= 0.0) {
      scores[j] = -INFINITY;
      continue;
    }
    double s = std::log(priors[j]) + idf_term;
    const auto& ll = log_likelihoods[j];
    for (auto [w, f] : counts) s += static_cast<double>(f) * ll[w];
    if (unseen > 0) s += static_cast<double>(unseen) * unseen_log_likelihood(j);
    scores[j] = s;
  }
  return scores;
}

std::vector<double> NBModel::posteriors(std::span<const std::string> tokens) const {
  auto scores = log_scores(tokens);
  double norm = log_sum_exp(scores);
  std::vector<double> p(scores.size());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::exp(scores[j] - norm);
  return p;
}

nlohmann::json NBModel::to_json() const {
  return {{"format", "itg-nb"},
          {"version", kFormatVersion},
          {"classes", classes},
          {"priors", priors},
          {"smoothing", smoothing},
          {"document_count", document_count},
          {"vocabulary", vocabulary},
          {"token_totals", token_totals},
          {"idf", idf},
          {"log_likelihoods", log_likelihoods}};
}

NBModel NBModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "itg-nb") throw Error("invalid_model", "not an NB model file");
    if (j.at("version").get<int>() != kFormatVersion) {
      throw Error("invalid_model", "unsupported model version " + j.at("version").dump());
    }
    NBModel m;
    j.at("classes").get_to(m.classes);
    j.at("priors").get_to(m.priors);
    j.at("smoothing").get_to(m.smoothing);
    j.at("document_count").get_to(m.document_count);
    j.at("vocabulary").get_to(m.vocabulary);
    j.at("token_totals").get_to(m.token_totals);
    j.at("idf").get_to(m.idf);
    j.at("log_likelihoods").get_to(m.log_likelihoods);
    const auto c = m.classes.size();
    const auto v = m.vocabulary.size();
    bool shapes = m.priors.size() == c && m.token_totals.size() == c &&
                  m.log_likelihoods.size() == c && m.idf.size() == v &&
                  std::all_of(m.log_likelihoods.begin(), m.log_likelihoods.end(),
                              [&](const auto& row) { return row.size() == v; });
    if (!shapes || c == 0) throw Error("invalid_model", "inconsistent model dimensions");
    m.rebuild_index();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_model", e.what());
  }
}

void NBModel::save(const std::filesystem::path& path) const { write_file(path, to_json().dump()); }

NBModel NBModel::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("invalid_model", e.what());
  }
}

NBModel train_nb(std::span<const LabeledDocument> documents, std::vector<std::string> classes,
                 double smoothing) {
  if (documents.empty()) throw Error("empty_corpus", "training corpus is empty");
  if (classes.empty()) throw Error("invalid_label", "no classes given");
  if (!(smoothing > 0.0)) throw Error("invalid_smoothing", "smoothing must be positive");
  const std::size_t c = classes.size();

  NBModel m;
  m.classes = std::move(classes);
  m.smoothing = smoothing;
  m.document_count = documents.size();

  std::map<std::string, std::size_t> doc_freq;  // sorted vocabulary
  for (const auto& d : documents) {
    if (d.label >= c) throw Error("invalid_label", "label index out of range");
    std::vector<std::string_view> distinct(d.tokens.begin(), d.tokens.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (auto w : distinct) ++doc_freq[std::string(w)];
  }
  m.vocabulary.reserve(doc_freq.size());
  m.idf.reserve(doc_freq.size());
  const double n = static_cast<double>(documents.size());
  for (const auto& [w, df] : doc_freq) {
    m.vocabulary.push_back(w);
    m.idf.push_back(n / static_cast<double>(df));
  }
  m.rebuild_index();

  const std::size_t v = m.vocabulary.size();
  std::vector<std::vector<double>> counts(c, std::vector<double>(v, 0.0));
  std::vector<double> class_docs(c, 0.0);
  m.token_totals.assign(c, 0.0);
  for (const auto& d : documents) {
    class_docs[d.label] += 1.0;
    for (const auto& t : d.tokens) counts[d.label][*m.word_index(t)] += 1.0;
    m.token_totals[d.label] += static_cast<double>(d.tokens.size());
  }
  m.priors.resize(c);
  m.log_likelihoods.assign(c, std::vector<double>(v));
  for (std::size_t j = 0; j < c; ++j) {
    m.priors[j] = class_docs[j] / n;
    const double denom = std::log(m.token_totals[j] + smoothing * static_cast<double>(v));
    for (std::size_t w = 0; w < v; ++w) {
      m.log_likelihoods[j][w] = std::log(counts[j][w] + smoothing) - denom;
    }
  }
  return m;
}

NBModel train_nb(std::span<const PostBundle> corpus, const StopwordList& stopwords) {
  if (corpus.empty()) throw Error("empty_corpus", "training corpus is empty");
  auto docs = to_documents(corpus, stopwords);
  return train_nb(docs, type_codes());
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const std::size_t> labels,
                                                       std::size_t k, std::uint64_t seed,
                                                       std::vector<std::string>* warnings) {
  if (k < 2) throw Error("invalid_folds", "k must be at least 2");
  if (labels.size() < k) {
    throw Error("dataset_too_small", "need at least " + std::to_string(k) + " samples for " +
                                         std::to_string(k) + " folds");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  lm::Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t offset = 0;
  for (auto& [label, members] : by_class) {
    if (members.size() < k && warnings) {
      warnings->push_back("class " + std::to_string(label) + " has " +
                          std::to_string(members.size()) + " samples, fewer than " +
                          std::to_string(k) + " folds");
    }
    for (std::size_t i = members.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
      std::swap(members[i - 1], members[j]);
    }
    for (std::size_t i = 0; i < members.size(); ++i) folds[(offset + i) % k].push_back(members[i]);
    offset = (offset + members.size()) % k;
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

EvaluationResult evaluate(const ModelFactory& factory, std::span<const LabeledDocument> dataset,
                          std::size_t class_count, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> labels;
  labels.reserve(dataset.size());
  for (const auto& d : dataset) {
    if (d.label >= class_count) throw Error("invalid_label", "label index out of range");
    labels.push_back(d.label);
  }
  EvaluationResult result;
  auto folds = stratified_folds(labels, k, seed, &result.warnings);
  result.confusion.assign(class_count, std::vector<std::size_t>(class_count, 0));

  std::vector<char> in_fold(dataset.size());
  for (const auto& fold : folds) {
    std::fill(in_fold.begin(), in_fold.end(), 0);
    for (auto i : fold) in_fold[i] = 1;
    std::vector<LabeledDocument> training;
    training.reserve(dataset.size() - fold.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (!in_fold[i]) training.push_back(dataset[i]);
    }
    auto model = factory(training);
    std::size_t correct = 0;
    for (auto i : fold) {
      auto predicted = argmax(model->posteriors(dataset[i].tokens));
      ++result.confusion[dataset[i].label][predicted];
      if (predicted == dataset[i].label) ++correct;
    }
    result.fold_accuracy.push_back(fold.empty() ? 0.0
                                                : static_cast<double>(correct) /
                                                      static_cast<double>(fold.size()));
  }
  result.accuracy = std::accumulate(result.fold_accuracy.begin(), result.fold_accuracy.end(), 0.0) /
                    static_cast<double>(result.fold_accuracy.size());
  return result;
}

ModelFactory nb_factory(std::vector<std::string> classes, double smoothing) {
  return [classes = std::move(classes), smoothing](std::span<const LabeledDocument> training) {
    return std::make_unique<NBModel>(train_nb(training, classes, smoothing));
  };
}

nlohmann::json to_json(const PersonalityReport& report) {
  nlohmann::json posteriors = nlohmann::json::object();
  for (std::size_t i = 0; i < report.posteriors.size() && i < kTypeCount; ++i) {
    posteriors[std::string(kTypeCodes[i])] = report.posteriors[i];
  }
  return {{"type_code", report.type_code},
          {"posteriors", posteriors},
          {"description", report.description},
          {"low_confidence", report.low_confidence},
          {"backend", report.backend}};
}

PersonalityReport report_from_json(const nlohmann::json& j) {
  PersonalityReport r;
  j.at("type_code").get_to(r.type_code);
  j.at("description").get_to(r.description);
  j.at("low_confidence").get_to(r.low_confidence);
  j.at("backend").get_to(r.backend);
  r.posteriors.assign(kTypeCount, 0.0);
  for (std::size_t i = 0; i < kTypeCount; ++i) {
    r.posteriors[i] = j.at("posteriors").at(std::string(kTypeCodes[i])).get<double>();
  }
  return r;
}

HttpPersonalityScorer::HttpPersonalityScorer(std::string url, int timeout_seconds)
    : timeout_seconds_(timeout_seconds) {
  auto scheme_end = url.find("://");
  auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  origin_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::vector<double> HttpPersonalityScorer::scores(std::span<const std::string> tokens) const {
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);
  nlohmann::json body = {{"tokens", std::vector<std::string>(tokens.begin(), tokens.end())},
                         {"text", join({tokens.begin(), tokens.end()}, " ")}};
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) throw Error("backend_failed", "scorer request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw Error("backend_failed", "scorer returned HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body).at("scores").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("backend_failed", std::string("malformed scorer response: ") + e.what());
  }
}

std::vector<double> normalize_scores(std::span<const double> scores) {
  check_posterior_size(scores);
  double total = 0.0;
  for (double s : scores) {
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
      throw Error("invalid_scores", "plug-in scores must lie in [0, 1]");
    }
    total += s;
  }
  if (total == 0.0) return std::vector<double>(scores.size(), 1.0 / static_cast<double>(scores.size()));
  std::vector<double> p(scores.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = scores[i] / total;
  return p;
}

PersonalityReport make_report(std::vector<double> posteriors, std::string backend) {
  check_posterior_size(posteriors);
  PersonalityReport r;
  const auto best = argmax(posteriors);
  r.type_code = std::string(kTypeCodes[best]);
  r.low_confidence = posteriors[best] < kLowConfidenceThreshold;
  r.posteriors = std::move(posteriors);
  r.description = describe_type(r.type_code);
  r.backend = std::move(backend);
  return r;
}

PersonalityReport classify(std::span<const std::string> texts, const ClassifierBackends& backends,
                           const StopwordList& stopwords) {
  std::vector<std::string> nonempty;
  for (const auto& t : texts) {
    if (!trim(t).empty()) nonempty.push_back(t);
  }
  if (nonempty.empty()) throw Error("no_input", "no non-empty player input to classify");
  auto tokens = preprocess(join(nonempty, " "), stopwords);

  std::string neural_failure;
  if (backends.neural) {
    try {
      return make_report(normalize_scores(backends.neural->scores(tokens)), "neural");
    } catch (const std::exception& e) {
      neural_failure = e.what();
    }
  }
  if (!backends.naive_bayes) {
    throw Error("backend_failed", neural_failure.empty() ? "no classifier backend configured"
                                                         : neural_failure);
  }
  const auto& nb = *backends.naive_bayes;
  auto p = nb.posteriors(tokens);
  // Map the model's classes onto the canonical order; absent types get zero mass.
  std::vector<double> full(kTypeCount, 0.0);
  for (std::size_t j = 0; j < nb.classes.size(); ++j) {
    auto index = type_index(nb.classes[j]);
    if (!index) throw Error("invalid_model", "model class '" + nb.classes[j] + "' is not a type code");
    full[*index] = p[j];
  }
  return make_report(std::move(full), "naive_bayes");
}

std::string describe_type(std::string_view code) {
  static const auto table = [] {
    std::map<std::string, std::string, std::less<>> t;
    for (const auto& line : split_lines(resources::mbti_types_text())) {
      auto tab = line.find('\t');
      if (tab == std::string::npos) continue;
      t.emplace(std::string(trim(std::string_view(line).substr(0, tab))),
                std::string(trim(std::string_view(line).substr(tab + 1))));
    }
    return t;
  }();
  auto it = table.find(code);
  if (it == table.end()) throw Error("unknown_type", "unknown type code '" + std::string(code) + "'");
  return it->second;
}

}  // namespace itg::persona

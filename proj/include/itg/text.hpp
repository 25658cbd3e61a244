#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace itg {

// Base for every domain error. `code()` is a stable machine-readable identifier.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);
std::vector<std::string_view> split_whitespace(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Lowercased word tokens: runs of [a-z0-9] joined by inner apostrophes ("don't").
std::vector<std::string> word_tokens(std::string_view text);

class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(std::string_view text);

  static StopwordList load(const std::filesystem::path& path);
  // The list compiled into the library (data/stopwords_en.txt).
  static const StopwordList& builtin();

  bool contains(std::string_view word) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

namespace resources {
std::string_view stopwords_text();
std::string_view mbti_types_text();
std::string_view tagged_corpus_text();
}  // namespace resources

}  // namespace itg

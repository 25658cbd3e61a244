#include <doctest.h>

#include "itg/text.hpp"
#include "test_support.hpp"

using namespace itg;

TEST_CASE("trim and whitespace helpers") {
  CHECK(trim("  a b \t\n") == "a b");
  CHECK(trim("") == "");
  CHECK(collapse_whitespace("  a \t b\n\nc ") == "a b c");
  CHECK(to_lower("MiXeD 42") == "mixed 42");
  CHECK(join({"a", "b", "c"}, ", ") == "a, b, c");
}

TEST_CASE("split_lines handles CRLF and a missing final newline") {
  auto lines = split_lines("one\r\ntwo\nthree");
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "one");
  CHECK(lines[2] == "three");
  CHECK(split_lines("").empty());
}

TEST_CASE("word_tokens keeps inner apostrophes and lowercases") {
  auto t = word_tokens("Don't STOP-me now, 2nd 'quoted'");
  std::vector<std::string> expected{"don't", "stop", "me", "now", "2nd", "quoted"};
  CHECK(t == expected);
}

TEST_CASE("builtin stopword list") {
  const auto& s = StopwordList::builtin();
  CHECK(s.contains("i"));
  CHECK(s.contains("now"));
  CHECK(s.contains("the"));
  CHECK_FALSE(s.contains("love"));
  CHECK_FALSE(s.contains("#"));
  CHECK(s.size() >= 170);
}

TEST_CASE("files round-trip and missing files raise io errors") {
  testing::TempDir dir;
  write_file(dir / "nested/file.txt", "hello\n");
  CHECK(read_file(dir / "nested/file.txt") == "hello\n");
  try {
    read_file(dir / "missing.txt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "io_error");
  }
}

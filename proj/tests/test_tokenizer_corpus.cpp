#include "parade/corpus.hpp"
#include "parade/tokenizer.hpp"

#include "test_util.hpp"

#include <doctest.h>

namespace parade {
namespace {

// Reference FNV-1a 64 written independently of the production hash; the
// frozen ids below were computed with it before the tokenizer was built.
std::uint64_t reference_fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

TEST_CASE("tokenize: empty text gives empty sequence") {
  CHECK(tokenize("", Vocabulary{}).empty());
  CHECK(tokenize("  \t ..!!", Vocabulary{}).empty());
}

TEST_CASE("tokenize: case folding maps to one id") {
  const auto ids = tokenize("Dog dog", Vocabulary{});
  REQUIRE(ids.size() == 2);
  CHECK(ids[0] == ids[1]);
  CHECK(ids[0] == 4 + static_cast<TokenId>(reference_fnv1a("dog") % 4092));
  CHECK(ids[0] == 937);  // frozen from the reference hash
}

TEST_CASE("tokenize: distinct words get distinct frozen ids") {
  const auto ids = tokenize("a b a", Vocabulary{});
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == ids[2]);
  CHECK(ids[0] != ids[1]);
  CHECK(ids[0] == 1628);  // fnv1a64("a") % 4092 + 4
  CHECK(ids[1] == 1913);  // fnv1a64("b") % 4092 + 4
}

TEST_CASE("tokenize: punctuation splits, ids stay in word range") {
  const auto ids = tokenize("x1,y2;z3 pad cls sep unk", Vocabulary{});
  CHECK(ids.size() == 7);
  for (TokenId id : ids) {
    CHECK(id >= kFirstWordId);
    CHECK(id < 4096);
  }
}

TEST_CASE("tokenize: deterministic across calls") {
  const std::string text = "The Quick brown-fox jumps_over 42 lazy dogs!";
  CHECK(tokenize(text, Vocabulary{}) == tokenize(text, Vocabulary{}));
}

TEST_CASE("tokenize: vocab_size below 4 rejected") {
  CHECK_THROWS_AS(tokenize("hi", Vocabulary{3}), ConfigError);
}

TEST_CASE("corpus: load counts and round trip") {
  test::TempDir dir("corpus");
  const std::string path = dir.file("c.jsonl");
  test::write_file(path,
                   R"({"doc_id":"d1","text":"alpha beta"})"
                   "\n"
                   R"({"doc_id":"d2","text":"gamma"})"
                   "\n");
  const auto docs = load_corpus(path, Vocabulary{});
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].doc_id == "d1");
  CHECK(docs[0].tokens.size() == 2);
  CHECK(docs[1].text == "gamma");

  const std::string copy = dir.file("copy.jsonl");
  write_corpus(copy, docs);
  const auto again = load_corpus(copy, Vocabulary{});
  REQUIRE(again.size() == docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    CHECK(again[i].doc_id == docs[i].doc_id);
    CHECK(again[i].text == docs[i].text);
  }
}

TEST_CASE("corpus: empty file gives empty collection") {
  test::TempDir dir("corpus_empty");
  test::write_file(dir.file("c.jsonl"), "");
  CHECK(load_corpus(dir.file("c.jsonl"), Vocabulary{}).empty());
}

TEST_CASE("corpus: duplicate doc_id names the id") {
  test::TempDir dir("corpus_dup");
  test::write_file(dir.file("c.jsonl"),
                   R"({"doc_id":"d1","text":"a"})"
                   "\n"
                   R"({"doc_id":"d1","text":"b"})"
                   "\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir.file("c.jsonl"), Vocabulary{}),
                       doctest::Contains("d1"), DataError);
}

TEST_CASE("corpus: malformed line reports line number") {
  test::TempDir dir("corpus_bad");
  test::write_file(dir.file("c.jsonl"),
                   R"({"doc_id":"d1","text":"a"})"
                   "\nnot json\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir.file("c.jsonl"), Vocabulary{}), doctest::Contains(":2"),
                       DataError);
}

TEST_CASE("topics: parse, blank lines skipped, duplicates rejected") {
  test::TempDir dir("topics");
  test::write_file(dir.file("t.tsv"), "q1\tblue whale\n\nq2\tred fox\n");
  const auto topics = load_topics(dir.file("t.tsv"), Vocabulary{});
  REQUIRE(topics.size() == 2);
  CHECK(topics[0].query_id == "q1");
  CHECK(topics[0].text == "blue whale");
  CHECK(topics[0].tokens.size() == 2);

  test::write_file(dir.file("missing_tab.tsv"), "q1 blue whale\n");
  CHECK_THROWS_AS(load_topics(dir.file("missing_tab.tsv"), Vocabulary{}), DataError);

  test::write_file(dir.file("dup.tsv"), "q1\ta\nq1\tb\n");
  CHECK_THROWS_AS(load_topics(dir.file("dup.tsv"), Vocabulary{}), DataError);
}

TEST_CASE("qrels: single record and defaults") {
  test::TempDir dir("qrels");
  test::write_file(dir.file("q.txt"), "q1 0 d1 2\n");
  const Qrels qrels = load_qrels(dir.file("q.txt"));
  CHECK(qrels.grade("q1", "d1") == 2);
  CHECK(qrels.grade("q1", "other") == 0);
  CHECK(qrels.grade("qx", "d1") == 0);
  CHECK(qrels.has_relevant("q1"));
  CHECK_FALSE(qrels.has_relevant("qx"));
  CHECK(qrels.max_grade() == 2);
}

TEST_CASE("qrels: duplicate pair rejected") {
  test::TempDir dir("qrels_dup");
  test::write_file(dir.file("q.txt"), "q1 0 d1 2\nq1 0 d1 2\n");
  CHECK_THROWS_AS(load_qrels(dir.file("q.txt")), DataError);
}

TEST_CASE("qrels: negative or non-integer grade rejected") {
  test::TempDir dir("qrels_bad");
  test::write_file(dir.file("a.txt"), "q1 0 d1 -1\n");
  CHECK_THROWS_AS(load_qrels(dir.file("a.txt")), DataError);
  test::write_file(dir.file("b.txt"), "q1 0 d1 two\n");
  CHECK_THROWS_AS(load_qrels(dir.file("b.txt")), DataError);
}

}  // namespace
}  // namespace parade

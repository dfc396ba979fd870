#pragma once

#include "parade/tokenizer.hpp"
#include "parade/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace parade {

struct Document {
  std::string doc_id;
  std::string text;
  TokenSequence tokens;
};

struct Query {
  std::string query_id;
  std::string text;
  TokenSequence tokens;
};

// Graded relevance judgments keyed by (query_id, doc_id); absent pairs are
// grade 0.
struct Qrels {
  std::map<std::string, std::map<std::string, int>> entries;

  int grade(const std::string& query_id, const std::string& doc_id) const;
  bool has_relevant(const std::string& query_id) const;
  int max_grade() const;
};

// Corpus file: one JSON object per line with fields `doc_id` and `text`.
std::vector<Document> load_corpus(const std::string& path, const Vocabulary& vocab);
void write_corpus(const std::string& path, const std::vector<Document>& docs);

// Topics file: `qid<TAB>text`, blank lines skipped.
std::vector<Query> load_topics(const std::string& path, const Vocabulary& vocab);

// TREC qrels: whitespace-separated `qid 0 docid grade`.
Qrels load_qrels(const std::string& path);
void write_qrels(const std::string& path, const Qrels& qrels);

}  // namespace parade

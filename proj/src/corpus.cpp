#include "parade/corpus.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace parade {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  return out;
}

}  // namespace

int Qrels::grade(const std::string& query_id, const std::string& doc_id) const {
  auto q = entries.find(query_id);
  if (q == entries.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

bool Qrels::has_relevant(const std::string& query_id) const {
  auto q = entries.find(query_id);
  if (q == entries.end()) return false;
  for (const auto& [doc, g] : q->second)
    if (g > 0) return true;
  return false;
}

int Qrels::max_grade() const {
  int m = 0;
  for (const auto& [qid, docs] : entries)
    for (const auto& [doc, g] : docs) m = std::max(m, g);
  return m;
}

std::vector<Document> load_corpus(const std::string& path, const Vocabulary& vocab) {
  auto in = open_input(path);
  std::vector<Document> docs;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!record.is_object() || !record.contains("doc_id") || !record.contains("text") ||
        !record["doc_id"].is_string() || !record["text"].is_string()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected object with string fields doc_id, text");
    }
    Document doc;
    doc.doc_id = record["doc_id"].get<std::string>();
    doc.text = record["text"].get<std::string>();
    if (doc.doc_id.empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": empty doc_id");
    if (!seen.insert(doc.doc_id).second)
      throw DataError(path + ":" + std::to_string(line_no) + ": duplicate doc_id \"" +
                      doc.doc_id + "\"");
    doc.tokens = tokenize(doc.text, vocab);
    docs.push_back(std::move(doc));
  }
  return docs;
}

void write_corpus(const std::string& path, const std::vector<Document>& docs) {
  auto out = open_output(path);
  for (const auto& doc : docs) {
    nlohmann::json record{{"doc_id", doc.doc_id}, {"text", doc.text}};
    out << record.dump() << '\n';
  }
}

std::vector<Query> load_topics(const std::string& path, const Vocabulary& vocab) {
  auto in = open_input(path);
  std::vector<Query> queries;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(line_no) + ": missing tab separator");
    Query q;
    q.query_id = line.substr(0, tab);
    q.text = line.substr(tab + 1);
    if (q.query_id.empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": empty query id");
    if (!seen.insert(q.query_id).second)
      throw DataError(path + ":" + std::to_string(line_no) + ": duplicate query id \"" +
                      q.query_id + "\"");
    q.tokens = tokenize(q.text, vocab);
    queries.push_back(std::move(q));
  }
  return queries;
}

Qrels load_qrels(const std::string& path) {
  auto in = open_input(path);
  Qrels qrels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string qid, iter, did, grade_text;
    if (!(fields >> qid >> iter >> did >> grade_text))
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 4 columns");
    std::size_t consumed = 0;
    int grade = 0;
    try {
      grade = std::stoi(grade_text, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != grade_text.size() || grade < 0)
      throw DataError(path + ":" + std::to_string(line_no) + ": bad grade \"" + grade_text +
                      "\"");
    auto& docs = qrels.entries[qid];
    if (!docs.emplace(did, grade).second)
      throw DataError(path + ":" + std::to_string(line_no) + ": duplicate judgment for (" + qid +
                      ", " + did + ")");
  }
  return qrels;
}

void write_qrels(const std::string& path, const Qrels& qrels) {
  auto out = open_output(path);
  for (const auto& [qid, docs] : qrels.entries)
    for (const auto& [did, grade] : docs) out << qid << " 0 " << did << ' ' << grade << '\n';
}

}  // namespace parade

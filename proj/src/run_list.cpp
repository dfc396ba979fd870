#include "parade/run_list.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace parade {

bool run_order_less(const RunEntry& a, const RunEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

void RunList::sort_entries() {
  for (auto& [qid, entries] : queries) std::stable_sort(entries.begin(), entries.end(), run_order_less);
}

void write_run(const std::string& path, const RunList& run) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  char score_text[64];
  for (const auto& [qid, entries] : run.queries) {
    int rank = 1;
    for (const auto& entry : entries) {
      std::snprintf(score_text, sizeof score_text, "%.6f", entry.score);
      out << qid << " Q0 " << entry.doc_id << ' ' << rank << ' ' << score_text << ' ' << run.tag
          << '\n';
      ++rank;
    }
  }
}

RunList read_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  RunList run;
  bool tag_seen = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string qid, q0, did, rank_text, score_text, tag;
    if (!(fields >> qid >> q0 >> did >> rank_text >> score_text >> tag))
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 6 columns");
    std::size_t consumed = 0;
    try {
      (void)std::stoi(rank_text, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != rank_text.size())
      throw DataError(path + ":" + std::to_string(line_no) + ": bad rank \"" + rank_text + "\"");
    double score = 0.0;
    try {
      score = std::stod(score_text, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != score_text.size())
      throw DataError(path + ":" + std::to_string(line_no) + ": bad score \"" + score_text +
                      "\"");
    if (!tag_seen) {
      run.tag = tag;
      tag_seen = true;
    }
    run.queries[qid].push_back(RunEntry{did, score});
  }
  return run;
}

}  // namespace parade

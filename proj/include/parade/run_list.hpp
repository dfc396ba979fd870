#pragma once

#include "parade/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace parade {

struct RunEntry {
  std::string doc_id;
  double score = 0.0;
};

// Per-query ranked lists plus a run tag, writable as TREC 6-column output.
struct RunList {
  std::string tag = "parade";
  std::map<std::string, std::vector<RunEntry>> queries;

  // Ordering convention used everywhere: score descending, doc_id ascending.
  void sort_entries();
};

bool run_order_less(const RunEntry& a, const RunEntry& b);

// TREC format: `qid Q0 docid rank score tag`, rank from 1, score at 6
// decimals.
void write_run(const std::string& path, const RunList& run);
RunList read_run(const std::string& path);

}  // namespace parade

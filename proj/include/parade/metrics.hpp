#pragma once

#include "parade/corpus.hpp"
#include "parade/run_list.hpp"
#include "parade/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace parade {

// Per-query metric values plus their mean. Queries without any relevant
// document in the qrels are excluded from both (trec_eval convention).
struct MetricResult {
  std::map<std::string, double> per_query;
  double mean = 0.0;
};

// Gain 2^grade - 1, discount log2(rank + 1), normalized by the ideal DCG over
// all judged documents. `threads` parallelizes the per-query evaluation; the
// mean reduces in canonical query order either way.
MetricResult ndcg_at_k(const RunList& run, const Qrels& qrels, int k, int threads = 1);

// Binary relevance (grade > 0), averaged over the full ranked list.
MetricResult map_metric(const RunList& run, const Qrels& qrels, int threads = 1);

MetricResult precision_at_k(const RunList& run, const Qrels& qrels, int k, int threads = 1);

// Cascade model with stop probability (2^grade - 1) / 2^max_grade, where
// max_grade is the largest grade in the qrels.
MetricResult err_at_k(const RunList& run, const Qrels& qrels, int k, int threads = 1);

// Parses "ndcg@10", "map", "p@20", "err@20".
MetricResult compute_metric(const std::string& name, const RunList& run, const Qrels& qrels,
                            int threads = 1);

// Metric report lines: `metric<TAB>qid-or-all<TAB>value`.
std::string format_metric_report(const std::string& name, const MetricResult& result,
                                 bool per_query);

// --- cross-validation folds ----------------------------------------------------

struct FoldSpec {
  std::vector<std::vector<std::string>> folds;
};

// Seeded shuffle then round-robin assignment; fold sizes differ by at most 1.
FoldSpec make_folds(std::vector<std::string> query_ids, int k, std::uint64_t seed);

// --- passage-level relevance analysis --------------------------------------------

// (query_id, doc_id) -> ordered passage grades.
struct PassageJudgmentMap {
  std::map<std::string, std::map<std::string, std::vector<int>>> entries;
};

void write_passage_judgments(const std::string& path, const PassageJudgmentMap& pmap);
PassageJudgmentMap read_passage_judgments(const std::string& path);

// Percentage of qualifying documents (qrels grade >= doc_filter) with exactly
// one, at most two, and three or more passages at grade >= passage_threshold.
struct PassageHistogram {
  double pct_exactly_one = 0.0;
  double pct_at_most_two = 0.0;
  double pct_three_plus = 0.0;
  int qualifying_docs = 0;
};

PassageHistogram relevant_passage_histogram(const PassageJudgmentMap& pmap, const Qrels& qrels,
                                            int passage_threshold, int doc_filter);

// --- sentence collapsing (passage judgments from sentence judgments) -----------

struct SentenceJudgment {
  int offset = 0;  // token offset in the document
  int length = 0;  // token count
  int grade = 0;
};

// Greedy left-to-right: a relevant sentence opens a passage; following
// sentences are absorbed while the passage span stays within max_len tokens.
// Returns the grade (max member grade) of each collapsed passage.
std::vector<int> collapse_sentences(const std::vector<SentenceJudgment>& sentences, int max_len,
                                    int relevant_threshold = 1);

}  // namespace parade

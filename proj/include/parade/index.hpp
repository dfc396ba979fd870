#pragma once

#include "parade/corpus.hpp"
#include "parade/run_list.hpp"
#include "parade/types.hpp"

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace parade {

struct Posting {
  int doc = 0;  // ordinal into doc_ids
  int tf = 0;
};

// In-memory inverted index over tokenized documents. Postings are sorted by
// doc ordinal with no duplicates.
struct InvertedIndex {
  std::unordered_map<TokenId, std::vector<Posting>> postings;
  std::vector<std::string> doc_ids;
  std::vector<int> doc_lengths;
  double avg_doc_length = 0.0;
  int doc_count = 0;

  int df(TokenId term) const;
};

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;

  void validate() const;
};

struct Rm3Params {
  int fb_docs = 10;
  int fb_terms = 20;
  double original_weight = 0.5;

  void validate() const;
};

// Term weight -> probability mass; the expanded-query representation.
using WeightedQuery = std::map<TokenId, double>;

InvertedIndex build_index(const std::vector<Document>& docs);

void save_index(const std::string& path, const InvertedIndex& index);
InvertedIndex load_index(const std::string& path);

// Robertson BM25 with the non-negative idf variant
// idf = ln((N - df + 0.5) / (df + 0.5) + 1). Repeated query terms contribute
// once per occurrence. Documents sharing no term with the query are excluded.
std::vector<RunEntry> bm25_search(const InvertedIndex& index, const TokenSequence& query,
                                  const Bm25Params& params, int k);

// RM3 pseudo-relevance feedback: relevance-model term distribution from the
// top fb_docs of the first pass, truncated to fb_terms terms and interpolated
// with the original-query distribution at original_weight.
WeightedQuery rm3_expand(const InvertedIndex& index, const TokenSequence& query,
                         const std::vector<RunEntry>& first_pass, const Rm3Params& params);

// BM25 with per-term contributions scaled by the query term weights.
std::vector<RunEntry> weighted_search(const InvertedIndex& index, const WeightedQuery& wquery,
                                      const Bm25Params& params, int k);

}  // namespace parade

#pragma once

#include "parade/corpus.hpp"
#include "parade/metrics.hpp"
#include "parade/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace parade {

// Seeded generator for corpora that contrast single-passage evidence against
// evidence spread across a document. Every query is a short phrase of signal
// words unique to that query, so first-stage pools stay disjoint across
// queries. Relevant documents embed the phrase contiguously, prefixed by a
// word from a small shared marker vocabulary, in one region (single_passage)
// or in spread_k disjoint regions. Distractor documents carry the query words
// at matched frequency but scattered one per region and without markers.
// Bag-of-words retrieval cannot tell the two apart (markers are not query
// terms), while a passage encoder can, including on held-out queries.
struct SynthConfig {
  enum class Mode { kSinglePassage, kSpread };

  int n_docs = 200;
  int n_queries = 30;
  int doc_len_lo = 90;
  int doc_len_hi = 150;
  Mode mode = Mode::kSinglePassage;
  int spread_k = 3;
  double noise_vocab_frac = 0.2;  // noise pool size as a fraction of vocab_size
  int region_len = 32;            // passage-sized placement/judgment unit
  int rel_per_query = 3;
  int distractors_per_query = 3;
  int phrase_len = 3;             // signal words per query
  int marker_pool = 8;            // shared marker vocabulary size
  int markers_per_plant = 2;      // marker words prefixed to each planted phrase
  std::uint64_t seed = 1;

  void validate() const;
};

SynthConfig::Mode synth_mode_from_string(const std::string& name, int* spread_k_out = nullptr);
std::string to_string(SynthConfig::Mode mode);

struct SynthData {
  std::vector<Document> corpus;
  std::vector<Query> topics;
  Qrels qrels;
  PassageJudgmentMap pjudg;  // per relevant (query, doc): one grade per region
};

SynthData generate(const SynthConfig& cfg, const Vocabulary& vocab);

// Writes corpus.jsonl, topics.tsv, qrels.txt, passage_judgments.jsonl.
void write_synth(const std::string& outdir, const SynthData& data);

}  // namespace parade

#pragma once

#include "parade/aggregate.hpp"
#include "parade/chunk.hpp"
#include "parade/corpus.hpp"
#include "parade/encoder.hpp"
#include "parade/run_list.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace parade {

struct ModelConfig {
  EncoderConfig encoder;
  AggConfig agg;
  ChunkConfig chunk;

  void validate() const;
};

// Full reranker: chunk -> encode -> aggregate -> head, one parameter store.
struct RerankModel {
  ModelConfig cfg;
  ParamStore params;
};

RerankModel make_model(const ModelConfig& cfg);

// Activations for one (query, document) scoring pass.
struct DocTape {
  PassageSet pset;
  std::vector<PassageTape> passages;
  RepMatrix reps;
  AggTape agg;
  double score = 0.0;
};

// Passage sampling is seeded per document so that scoring is independent of
// candidate order and of other documents.
std::uint64_t doc_cap_seed(const std::string& doc_id, std::uint64_t base_seed);

double score_document(const RerankModel& model, const TokenSequence& query,
                      const TokenSequence& doc_tokens, std::uint64_t cap_seed,
                      DocTape* tape = nullptr);

void score_document_backward(RerankModel& model, const DocTape& tape, double d_score);

// Rerank the top pool_size first-stage candidates of each query. Candidates
// absent from `docs` raise a data error; ordering is score desc, doc_id asc.
RunList rerank(const RerankModel& model, const std::vector<Query>& queries,
               const std::map<std::string, const Document*>& docs, const RunList& first_stage,
               int pool_size, int threads, const std::string& tag);

std::map<std::string, const Document*> doc_lookup(const std::vector<Document>& docs);

// Checkpoint container: JSON header (config + seed) plus name -> shape ->
// row-major values. Loading rebuilds the model and rejects name or shape
// mismatches.
void save_checkpoint(const std::string& path, const RerankModel& model);
RerankModel load_checkpoint(const std::string& path);

}  // namespace parade

#pragma once

#include "parade/config.hpp"
#include "parade/index.hpp"
#include "parade/manifest.hpp"
#include "parade/model.hpp"
#include "parade/synth.hpp"
#include "parade/train.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace parade {

// One self-contained experiment: synth -> index -> retrieve -> train ->
// rerank -> evaluate. The first n_train_queries topics train the model, the
// rest are held out for evaluation.
struct PipelineConfig {
  SynthConfig synth;
  Vocabulary vocab;
  ModelConfig model;
  TrainConfig train;
  Bm25Params bm25;
  int first_stage_k = 100;
  int rerank_pool = 50;
  int n_train_queries = 20;
  std::string metric = "ndcg@10";
  int threads = 1;

  void validate() const;
};

PipelineConfig pipeline_from_config(const ConfigMap& cfg);

struct PipelineResult {
  double first_stage_metric = 0.0;
  double reranked_metric = 0.0;
  std::vector<std::string> artifact_paths;
};

// Runs every stage, writing all artifacts plus manifest.json under outdir.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::string& outdir,
                            std::ostream& log);

// --- building blocks shared with the experiment harnesses -----------------------

RunList first_stage_run(const InvertedIndex& index, const std::vector<Query>& topics,
                        const Bm25Params& params, int k, const std::string& tag);

std::vector<Query> topic_subset(const std::vector<Query>& topics, std::size_t begin,
                                std::size_t end);

RunList filter_run(const RunList& run, const std::vector<Query>& topics);

// Mean metric over the given topics only.
double eval_metric(const std::string& metric, const RunList& run, const Qrels& qrels,
                   const std::vector<Query>& topics);

}  // namespace parade

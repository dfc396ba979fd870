#include "parade/pipeline.hpp"

#include "parade/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace parade {

void PipelineConfig::validate() const {
  synth.validate();
  vocab.validate();
  model.validate();
  train.validate();
  bm25.validate();
  if (first_stage_k < 1 || rerank_pool < 1) throw ConfigError("pipeline: retrieval depths must be >= 1");
  if (n_train_queries < 1 || n_train_queries >= synth.n_queries)
    throw ConfigError("pipeline: n_train_queries must leave at least one held-out query");
}

PipelineConfig pipeline_from_config(const ConfigMap& cfg) {
  PipelineConfig p;
  const std::uint64_t master = cfg.get_u64("pipeline.seed", 1);

  p.synth.n_docs = cfg.get_int("synth.n_docs", p.synth.n_docs);
  p.synth.n_queries = cfg.get_int("synth.n_queries", p.synth.n_queries);
  p.synth.doc_len_lo = cfg.get_int("synth.doc_len_lo", p.synth.doc_len_lo);
  p.synth.doc_len_hi = cfg.get_int("synth.doc_len_hi", p.synth.doc_len_hi);
  int spread_k = p.synth.spread_k;
  p.synth.mode = synth_mode_from_string(
      cfg.get("synth.signal_mode", to_string(p.synth.mode)), &spread_k);
  p.synth.spread_k = cfg.get_int("synth.spread_k", spread_k);
  p.synth.noise_vocab_frac = cfg.get_double("synth.noise_vocab_frac", p.synth.noise_vocab_frac);
  p.synth.region_len = cfg.get_int("synth.region_len", p.synth.region_len);
  p.synth.rel_per_query = cfg.get_int("synth.rel_per_query", p.synth.rel_per_query);
  p.synth.distractors_per_query =
      cfg.get_int("synth.distractors_per_query", p.synth.distractors_per_query);
  p.synth.phrase_len = cfg.get_int("synth.phrase_len", p.synth.phrase_len);
  p.synth.marker_pool = cfg.get_int("synth.marker_pool", p.synth.marker_pool);
  p.synth.markers_per_plant = cfg.get_int("synth.markers_per_plant", p.synth.markers_per_plant);
  p.synth.seed = cfg.get_u64("synth.seed", master);

  p.vocab.vocab_size = cfg.get_int("corpus.vocab_size", p.vocab.vocab_size);

  ChunkConfig& chunk = p.model.chunk;
  chunk.window = cfg.get_int("chunk.window", chunk.window);
  chunk.stride = cfg.get_int("chunk.stride", chunk.stride);
  chunk.max_passages = cfg.get_int("chunk.max_passages", chunk.max_passages);
  chunk.max_seq_len = cfg.get_int("chunk.max_seq_len", chunk.max_seq_len);

  EncoderConfig& enc = p.model.encoder;
  enc.d = cfg.get_int("encoder.d", enc.d);
  enc.n_layers = cfg.get_int("encoder.n_layers", enc.n_layers);
  enc.n_heads = cfg.get_int("encoder.n_heads", enc.n_heads);
  enc.ffn_mult = cfg.get_int("encoder.ffn_mult", enc.ffn_mult);
  enc.max_seq_len = cfg.get_int("encoder.max_seq_len", chunk.max_seq_len);
  enc.vocab_size = p.vocab.vocab_size;
  enc.seed = cfg.get_u64("encoder.seed", master + 1);

  AggConfig& agg = p.model.agg;
  agg.kind = aggregator_from_string(cfg.get("aggregate.kind", to_string(agg.kind)));
  agg.kmax_k = cfg.get_int("aggregate.kmax_k", agg.kmax_k);
  agg.head_bias = cfg.get_bool("aggregate.head_bias", agg.head_bias);
  agg.positions = cfg.get_bool("aggregate.positions", agg.positions);
  agg.cnn_score_inputs = cfg.get_bool("aggregate.cnn_score_inputs", agg.cnn_score_inputs);
  agg.cnn_hidden = cfg.get_int("aggregate.cnn_hidden", agg.cnn_hidden);
  agg.agg_layers = cfg.get_int("aggregate.agg_layers", agg.agg_layers);

  TrainConfig& train = p.train;
  train.loss = loss_from_string(cfg.get("train.loss", to_string(train.loss)));
  train.margin = cfg.get_double("train.margin", train.margin);
  train.alpha = cfg.get_double("train.alpha", train.alpha);
  train.lr = cfg.get_double("train.lr", train.lr);
  train.epochs = cfg.get_int("train.epochs", train.epochs);
  train.pairs_per_epoch = cfg.get_int("train.pairs_per_epoch", train.pairs_per_epoch);
  train.warmup_epochs = cfg.get_int("train.warmup_epochs", train.warmup_epochs);
  train.decay_rate = cfg.get_double("train.decay_rate", train.decay_rate);
  train.batch_size = cfg.get_int("train.batch_size", train.batch_size);
  train.seed = cfg.get_u64("train.seed", master + 2);

  p.bm25.k1 = cfg.get_double("retrieval.k1", p.bm25.k1);
  p.bm25.b = cfg.get_double("retrieval.b", p.bm25.b);
  p.first_stage_k = cfg.get_int("retrieval.first_stage_k", p.first_stage_k);
  p.rerank_pool = cfg.get_int("retrieval.rerank_pool", p.rerank_pool);

  p.n_train_queries = cfg.get_int("pipeline.n_train_queries", p.n_train_queries);
  p.metric = cfg.get("pipeline.metric", p.metric);
  p.threads = cfg.get_int("pipeline.threads", p.threads);
  return p;
}

RunList first_stage_run(const InvertedIndex& index, const std::vector<Query>& topics,
                        const Bm25Params& params, int k, const std::string& tag) {
  RunList run;
  run.tag = tag;
  for (const auto& query : topics) {
    auto entries = bm25_search(index, query.tokens, params, k);
    if (!entries.empty()) run.queries[query.query_id] = std::move(entries);
  }
  return run;
}

std::vector<Query> topic_subset(const std::vector<Query>& topics, std::size_t begin,
                                std::size_t end) {
  if (begin > end || end > topics.size()) throw ConfigError("topic_subset: bad range");
  return {topics.begin() + static_cast<std::ptrdiff_t>(begin),
          topics.begin() + static_cast<std::ptrdiff_t>(end)};
}

RunList filter_run(const RunList& run, const std::vector<Query>& topics) {
  RunList out;
  out.tag = run.tag;
  for (const auto& query : topics) {
    auto it = run.queries.find(query.query_id);
    if (it != run.queries.end()) out.queries[query.query_id] = it->second;
  }
  return out;
}

double eval_metric(const std::string& metric, const RunList& run, const Qrels& qrels,
                   const std::vector<Query>& topics) {
  return compute_metric(metric, filter_run(run, topics), qrels).mean;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::string& outdir,
                            std::ostream& log) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  PipelineResult result;
  RunManifest manifest;
  manifest.command = "pipeline";
  for (const auto& [key, value] : std::map<std::string, std::string>{
           {"synth.signal_mode", to_string(cfg.synth.mode)},
           {"aggregate.kind", to_string(cfg.model.agg.kind)},
           {"train.loss", to_string(cfg.train.loss)},
           {"pipeline.metric", cfg.metric}})
    manifest.config[key] = value;
  manifest.seeds = {{"synth", cfg.synth.seed},
                    {"encoder", cfg.model.encoder.seed},
                    {"train", cfg.train.seed}};

  auto artifact = [&](const std::string& name) {
    const std::string path = outdir + "/" + name;
    result.artifact_paths.push_back(path);
    return path;
  };

  log << "[pipeline] synth: generating corpus\n";
  const SynthData data = generate(cfg.synth, cfg.vocab);
  write_synth(outdir, data);
  artifact("corpus.jsonl");
  artifact("topics.tsv");
  artifact("qrels.txt");
  artifact("passage_judgments.jsonl");

  log << "[pipeline] index: " << data.corpus.size() << " docs\n";
  const InvertedIndex index = build_index(data.corpus);

  log << "[pipeline] retrieve: BM25 top-" << cfg.first_stage_k << "\n";
  RunList bm25 = first_stage_run(index, data.topics, cfg.bm25, cfg.first_stage_k, "bm25");
  write_run(artifact("run.bm25.txt"), bm25);

  const auto train_topics = topic_subset(data.topics, 0, static_cast<std::size_t>(cfg.n_train_queries));
  const auto test_topics =
      topic_subset(data.topics, static_cast<std::size_t>(cfg.n_train_queries), data.topics.size());

  log << "[pipeline] train: " << to_string(cfg.model.agg.kind) << " aggregator, "
      << cfg.train.epochs << " epochs\n";
  RerankModel model = make_model(cfg.model);
  const auto docs = doc_lookup(data.corpus);
  TrainData tdata;
  const RunList train_pool = filter_run(bm25, train_topics);
  tdata.queries = &train_topics;
  tdata.docs = &docs;
  tdata.qrels = &data.qrels;
  tdata.pool = &train_pool;
  const TrainResult trained = train_epochs(model, tdata, cfg.train);
  write_trace(artifact("loss.csv"), trained.trace);
  save_checkpoint(artifact("checkpoint.json"), model);
  manifest.checkpoint_path = "checkpoint.json";  // relative to the manifest

  log << "[pipeline] rerank: pool " << cfg.rerank_pool << "\n";
  const RunList reranked =
      rerank(model, test_topics, docs, bm25, cfg.rerank_pool, cfg.threads, "parade");
  write_run(artifact("run.reranked.txt"), reranked);

  result.first_stage_metric = eval_metric(cfg.metric, bm25, data.qrels, test_topics);
  result.reranked_metric = eval_metric(cfg.metric, reranked, data.qrels, test_topics);

  {
    std::ofstream metrics(outdir + "/metrics.tsv");
    if (!metrics) throw DataError("cannot open metrics file for writing");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", result.first_stage_metric);
    metrics << "first_stage." << cfg.metric << "\tall\t" << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.6f", result.reranked_metric);
    metrics << "reranked." << cfg.metric << "\tall\t" << buf << '\n';
    artifact("metrics.tsv");
  }

  for (const auto& path : result.artifact_paths)
    manifest.artifact_digests[fs::path(path).filename().string()] = file_digest(path);
  write_manifest(outdir + "/manifest.json", manifest);

  log << "[pipeline] done: " << cfg.metric << " first-stage "
      << result.first_stage_metric << " -> reranked " << result.reranked_metric << "\n";
  return result;
}

}  // namespace parade

#include "parade/model.hpp"

#include "parade/rng.hpp"
#include "parade/threading.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace parade {

void ModelConfig::validate() const {
  encoder.validate();
  agg.validate();
  chunk.validate();
  if (chunk.max_seq_len > encoder.max_seq_len)
    throw ConfigError("chunk max_seq_len exceeds encoder max_seq_len");
}

RerankModel make_model(const ModelConfig& cfg) {
  cfg.validate();
  RerankModel model;
  model.cfg = cfg;
  add_encoder_tensors(model.params, cfg.encoder);
  add_aggregator_tensors(model.params, cfg.agg, cfg.encoder, cfg.chunk.max_passages);
  init_params(model.params, cfg.encoder.seed);
  return model;
}

std::uint64_t doc_cap_seed(const std::string& doc_id, std::uint64_t base_seed) {
  return fnv1a64(doc_id) ^ base_seed;
}

double score_document(const RerankModel& model, const TokenSequence& query,
                      const TokenSequence& doc_tokens, std::uint64_t cap_seed, DocTape* tape) {
  auto passages = split_passages(doc_tokens, model.cfg.chunk);
  if (passages.empty()) throw DataError("cannot score a document with no tokens");
  PassageSet pset = cap_passages(std::move(passages), model.cfg.chunk, cap_seed);

  DocTape local;
  DocTape& t = tape ? *tape : local;
  t.reps = encode_document(query, pset, model.cfg.chunk, model.cfg.encoder, model.params,
                           tape ? &t.passages : nullptr);
  t.score = aggregate_and_score(t.reps, model.cfg.agg, model.cfg.encoder, model.params,
                                tape ? &t.agg : nullptr);
  if (tape) t.pset = std::move(pset);
  return t.score;
}

void score_document_backward(RerankModel& model, const DocTape& tape, double d_score) {
  Matrix d_reps;
  aggregate_and_score_backward(tape.agg, d_score, tape.reps, model.cfg.agg, model.cfg.encoder,
                               model.params, d_reps);
  encode_document_backward(tape.passages, d_reps, model.cfg.encoder, model.params);
}

std::map<std::string, const Document*> doc_lookup(const std::vector<Document>& docs) {
  std::map<std::string, const Document*> lookup;
  for (const auto& doc : docs) lookup[doc.doc_id] = &doc;
  return lookup;
}

RunList rerank(const RerankModel& model, const std::vector<Query>& queries,
               const std::map<std::string, const Document*>& docs, const RunList& first_stage,
               int pool_size, int threads, const std::string& tag) {
  if (pool_size < 1) throw ConfigError("rerank pool_size must be >= 1");
  RunList out;
  out.tag = tag;
  for (const auto& query : queries) {
    auto pool = first_stage.queries.find(query.query_id);
    if (pool == first_stage.queries.end()) continue;
    std::vector<RunEntry> candidates = pool->second;
    std::stable_sort(candidates.begin(), candidates.end(), run_order_less);
    if (static_cast<int>(candidates.size()) > pool_size)
      candidates.resize(static_cast<std::size_t>(pool_size));

    std::vector<RunEntry> scored(candidates.size());
    parallel_for(candidates.size(), threads, [&](std::size_t i) {
      const auto& entry = candidates[i];
      auto doc = docs.find(entry.doc_id);
      if (doc == docs.end()) throw DataError("candidate doc missing from corpus: " + entry.doc_id);
      const double score =
          score_document(model, query.tokens, doc->second->tokens,
                         doc_cap_seed(entry.doc_id, model.cfg.encoder.seed), nullptr);
      scored[i] = RunEntry{entry.doc_id, score};
    });
    std::sort(scored.begin(), scored.end(), run_order_less);
    out.queries[query.query_id] = std::move(scored);
  }
  return out;
}

namespace {

nlohmann::json encoder_to_json(const EncoderConfig& cfg) {
  return {{"d", cfg.d},
          {"n_layers", cfg.n_layers},
          {"n_heads", cfg.n_heads},
          {"ffn_mult", cfg.ffn_mult},
          {"max_seq_len", cfg.max_seq_len},
          {"vocab_size", cfg.vocab_size},
          {"seed", cfg.seed}};
}

EncoderConfig encoder_from_json(const nlohmann::json& j) {
  EncoderConfig cfg;
  cfg.d = j.at("d").get<int>();
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.ffn_mult = j.at("ffn_mult").get<int>();
  cfg.max_seq_len = j.at("max_seq_len").get<int>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

nlohmann::json agg_to_json(const AggConfig& cfg) {
  return {{"kind", to_string(cfg.kind)},
          {"kmax_k", cfg.kmax_k},
          {"head_bias", cfg.head_bias},
          {"positions", cfg.positions},
          {"cnn_score_inputs", cfg.cnn_score_inputs},
          {"cnn_levels", cfg.cnn_levels},
          {"cnn_hidden", cfg.cnn_hidden},
          {"agg_layers", cfg.agg_layers},
          {"max_positions", cfg.max_positions}};
}

AggConfig agg_from_json(const nlohmann::json& j) {
  AggConfig cfg;
  cfg.kind = aggregator_from_string(j.at("kind").get<std::string>());
  cfg.kmax_k = j.at("kmax_k").get<int>();
  cfg.head_bias = j.at("head_bias").get<bool>();
  cfg.positions = j.at("positions").get<bool>();
  cfg.cnn_score_inputs = j.at("cnn_score_inputs").get<bool>();
  cfg.cnn_levels = j.at("cnn_levels").get<int>();
  cfg.cnn_hidden = j.at("cnn_hidden").get<int>();
  cfg.agg_layers = j.at("agg_layers").get<int>();
  cfg.max_positions = j.value("max_positions", 0);
  return cfg;
}

nlohmann::json chunk_to_json(const ChunkConfig& cfg) {
  return {{"window", cfg.window},
          {"stride", cfg.stride},
          {"max_passages", cfg.max_passages},
          {"max_seq_len", cfg.max_seq_len}};
}

ChunkConfig chunk_from_json(const nlohmann::json& j) {
  ChunkConfig cfg;
  cfg.window = j.at("window").get<int>();
  cfg.stride = j.at("stride").get<int>();
  cfg.max_passages = j.at("max_passages").get<int>();
  cfg.max_seq_len = j.at("max_seq_len").get<int>();
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const RerankModel& model) {
  nlohmann::json j;
  j["format"] = "parade-checkpoint";
  j["version"] = 1;
  j["config"] = {{"encoder", encoder_to_json(model.cfg.encoder)},
                 {"agg", agg_to_json(model.cfg.agg)},
                 {"chunk", chunk_to_json(model.cfg.chunk)}};
  j["seed"] = model.cfg.encoder.seed;
  auto& tensors = j["tensors"] = nlohmann::json::object();
  for (const auto& [name, v] : model.params.all_values()) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.rows(); ++i)
      for (Index jj = 0; jj < v.cols(); ++jj) data.push_back(v(i, jj));
    tensors[name] = {{"shape", {v.rows(), v.cols()}}, {"data", std::move(data)}};
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  out << j.dump() << '\n';
}

RerankModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid checkpoint: " + e.what());
  }
  if (j.value("format", "") != "parade-checkpoint")
    throw DataError(path + ": not a parade checkpoint");
  ModelConfig cfg;
  try {
    cfg.encoder = encoder_from_json(j.at("config").at("encoder"));
    cfg.agg = agg_from_json(j.at("config").at("agg"));
    cfg.chunk = chunk_from_json(j.at("config").at("chunk"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid checkpoint header: " + e.what());
  }
  RerankModel model = make_model(cfg);

  const auto& tensors = j.at("tensors");
  auto names = model.params.names();
  if (tensors.size() != names.size())
    throw DataError(path + ": checkpoint tensor set does not match model");
  for (const auto& name : names) {
    if (!tensors.contains(name)) throw DataError(path + ": checkpoint missing tensor " + name);
    const auto& entry = tensors.at(name);
    const auto shape = entry.at("shape").get<std::vector<Index>>();
    Matrix& v = model.params.value(name);
    if (shape.size() != 2 || shape[0] != v.rows() || shape[1] != v.cols())
      throw DataError(path + ": shape mismatch for tensor " + name);
    const auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<Index>(data.size()) != v.size())
      throw DataError(path + ": data length mismatch for tensor " + name);
    std::size_t flat = 0;
    for (Index i = 0; i < v.rows(); ++i)
      for (Index jj = 0; jj < v.cols(); ++jj) v(i, jj) = data[flat++];
  }
  return model;
}

}  // namespace parade

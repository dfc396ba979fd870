#include "parade/config.hpp"
#include "parade/manifest.hpp"
#include "parade/model.hpp"
#include "parade/svg_plot.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cstring>

namespace parade {
namespace {

ModelConfig tiny_model_cfg(AggregatorKind kind = AggregatorKind::kTransformer) {
  ModelConfig cfg;
  cfg.encoder.d = 16;
  cfg.encoder.n_layers = 1;
  cfg.encoder.n_heads = 2;
  cfg.encoder.ffn_mult = 2;
  cfg.encoder.max_seq_len = 32;
  cfg.encoder.vocab_size = 128;
  cfg.encoder.seed = 12;
  cfg.chunk = ChunkConfig{12, 8, 4, 32};
  cfg.agg.kind = kind;
  return cfg;
}

TEST_CASE("checkpoint: bitwise round trip with config header") {
  test::TempDir dir("ckpt_io");
  RerankModel model = make_model(tiny_model_cfg());
  const std::string path = dir.file("m.json");
  save_checkpoint(path, model);
  const RerankModel loaded = load_checkpoint(path);
  CHECK(loaded.cfg.encoder.d == 16);
  CHECK(loaded.cfg.agg.kind == AggregatorKind::kTransformer);
  CHECK(loaded.cfg.chunk.window == 12);
  const auto names = model.params.names();
  CHECK(loaded.params.names() == names);
  for (const auto& name : names) {
    const Matrix& a = model.params.value(name);
    const Matrix& b = loaded.params.value(name);
    REQUIRE(a.rows() == b.rows());
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) ==
          0);
  }
}

TEST_CASE("checkpoint: shape or tensor-set mismatch rejected") {
  test::TempDir dir("ckpt_bad");
  RerankModel model = make_model(tiny_model_cfg());
  const std::string path = dir.file("m.json");
  save_checkpoint(path, model);
  auto text = test::read_file(path);

  // Claim a different hidden size in the header: stored shapes no longer fit.
  auto bad = text;
  const auto pos = bad.find("\"d\":16");
  REQUIRE(pos != std::string::npos);
  bad.replace(pos, 6, "\"d\":32");
  test::write_file(dir.file("bad.json"), bad);
  CHECK_THROWS_AS(load_checkpoint(dir.file("bad.json")), DataError);

  test::write_file(dir.file("notjson.json"), "not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(dir.file("notjson.json")), DataError);
}

TEST_CASE("model: rerank orders by score and breaks ties by doc id") {
  // Hand-built head-only behavior: with a fresh random model, scores are
  // deterministic, so permuting candidates must not change the output.
  RerankModel model = make_model(tiny_model_cfg(AggregatorKind::kSum));
  std::vector<Document> docs;
  for (int i = 0; i < 6; ++i) {
    Document d;
    d.doc_id = "d" + std::to_string(i);
    for (int t = 0; t < 20 + i; ++t) d.tokens.push_back(static_cast<TokenId>(8 + (t + i) % 40));
    docs.push_back(std::move(d));
  }
  std::vector<Query> queries(1);
  queries[0].query_id = "q1";
  queries[0].tokens = {5, 6};

  RunList pool_forward, pool_reversed;
  double score = 10.0;
  for (const auto& d : docs) pool_forward.queries["q1"].push_back(RunEntry{d.doc_id, score -= 1});
  pool_reversed.queries["q1"] = pool_forward.queries["q1"];
  std::reverse(pool_reversed.queries["q1"].begin(), pool_reversed.queries["q1"].end());
  // Same candidate *set* but swapped first-stage scores: keep the pool equal.
  double score2 = 10.0;
  for (auto& e : pool_reversed.queries["q1"]) e.score = score2 -= 1;

  const auto lookup = doc_lookup(docs);
  const RunList a = rerank(model, queries, lookup, pool_forward, 10, 1, "t");
  const RunList b = rerank(model, queries, lookup, pool_reversed, 10, 2, "t");
  REQUIRE(a.queries.at("q1").size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a.queries.at("q1")[i].doc_id == b.queries.at("q1")[i].doc_id);
    CHECK(a.queries.at("q1")[i].score == b.queries.at("q1")[i].score);
  }
  for (std::size_t i = 1; i < 6; ++i) {
    CHECK(a.queries.at("q1")[i - 1].score >= a.queries.at("q1")[i].score);
  }
}

TEST_CASE("model: rerank trims to the pool and flags missing docs") {
  RerankModel model = make_model(tiny_model_cfg(AggregatorKind::kMax));
  std::vector<Document> docs(1);
  docs[0].doc_id = "d0";
  docs[0].tokens = TokenSequence(24, 9);
  std::vector<Query> queries(1);
  queries[0].query_id = "q1";
  queries[0].tokens = {5};

  RunList pool;
  pool.queries["q1"] = {RunEntry{"d0", 2.0}, RunEntry{"missing", 1.0}};
  const auto lookup = doc_lookup(docs);
  CHECK_THROWS_AS(rerank(model, queries, lookup, pool, 10, 1, "t"), DataError);
  const RunList top1 = rerank(model, queries, lookup, pool, 1, 1, "t");
  CHECK(top1.queries.at("q1").size() == 1);

  // Empty candidate list: query dropped, empty run.
  RunList empty_pool;
  const RunList empty = rerank(model, queries, lookup, empty_pool, 10, 1, "t");
  CHECK(empty.queries.empty());
}

TEST_CASE("model: threaded rerank equals sequential rerank") {
  RerankModel model = make_model(tiny_model_cfg(AggregatorKind::kAttn));
  std::vector<Document> docs;
  for (int i = 0; i < 12; ++i) {
    Document d;
    d.doc_id = "d" + std::to_string(i);
    for (int t = 0; t < 30; ++t) d.tokens.push_back(static_cast<TokenId>(8 + (t * (i + 1)) % 60));
    docs.push_back(std::move(d));
  }
  std::vector<Query> queries(2);
  queries[0].query_id = "q1";
  queries[0].tokens = {5, 6};
  queries[1].query_id = "q2";
  queries[1].tokens = {7};
  RunList pool;
  for (const auto& q : queries) {
    double s = 100;
    for (const auto& d : docs) pool.queries[q.query_id].push_back(RunEntry{d.doc_id, s -= 1});
  }
  const auto lookup = doc_lookup(docs);
  const RunList seq = rerank(model, queries, lookup, pool, 12, 1, "t");
  const RunList par = rerank(model, queries, lookup, pool, 12, 4, "t");
  for (const auto& [qid, entries] : seq.queries) {
    const auto& other = par.queries.at(qid);
    REQUIRE(entries.size() == other.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      CHECK(entries[i].doc_id == other[i].doc_id);
      CHECK(entries[i].score == other[i].score);
    }
  }
}

TEST_CASE("model: scoring a tokenless document is an error") {
  RerankModel model = make_model(tiny_model_cfg());
  CHECK_THROWS_AS(score_document(model, {5}, {}, 1), DataError);
}

TEST_CASE("config: sections, comments, typed getters, overrides") {
  const auto cfg = ConfigMap::parse_string(
      "top = 1\n"
      "[train]\n"
      "lr = 0.5  # comment\n"
      "epochs = 7\n"
      "fast = true\n"
      "; full-line comment\n"
      "[synth]\n"
      "seed = 12345678901\n");
  CHECK(cfg.get_int("top", 0) == 1);
  CHECK(cfg.get_double("train.lr", 0.0) == doctest::Approx(0.5));
  CHECK(cfg.get_int("train.epochs", 0) == 7);
  CHECK(cfg.get_bool("train.fast", false));
  CHECK(cfg.get_u64("synth.seed", 0) == 12345678901ull);
  CHECK(cfg.get("absent", "fallback") == "fallback");
  CHECK_THROWS_AS(cfg.get_int("train.fast", 0), DataError);
  CHECK_THROWS_AS(ConfigMap::parse_string("novalue\n"), DataError);
  CHECK_THROWS_AS(ConfigMap::parse_string("[unclosed\n"), DataError);
}

TEST_CASE("manifest: digest stability and file output") {
  test::TempDir dir("manifest");
  test::write_file(dir.file("a.txt"), "hello\n");
  const auto d1 = file_digest(dir.file("a.txt"));
  const auto d2 = file_digest(dir.file("a.txt"));
  CHECK(d1 == d2);
  CHECK(d1.size() == 16);

  RunManifest manifest;
  manifest.command = "test";
  manifest.seeds["main"] = 7;
  manifest.input_digests["a.txt"] = d1;
  write_manifest(dir.file("manifest.json"), manifest);
  const auto text = test::read_file(dir.file("manifest.json"));
  CHECK(text.find("\"tool_version\"") != std::string::npos);
  CHECK(text.find(d1) != std::string::npos);
}

TEST_CASE("svg plot: renders points and reads CSV columns") {
  test::TempDir dir("svg");
  test::write_file(dir.file("t.csv"), "step,epoch,lr,loss\n0,0,0.1,2\n1,0,0.1,1.5\n2,0,0.1,1\n");
  const auto points = read_csv_columns(dir.file("t.csv"), "step", "loss");
  REQUIRE(points.size() == 3);
  CHECK(points[2].second == doctest::Approx(1.0));
  const auto svg = render_line_plot_svg("loss", "step", "loss", {PlotSeries{"loss", points}});
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("polyline") != std::string::npos);

  CHECK_THROWS_AS(read_csv_columns(dir.file("t.csv"), "step", "nope"), DataError);
}

}  // namespace
}  // namespace parade

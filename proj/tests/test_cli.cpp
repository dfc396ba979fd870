#include "parade/config.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cstdlib>
#include <string>

namespace parade {
namespace {

// Drives the installed binary end to end. The test runner passes its location
// through PARADE_BIN.
std::string binary() {
  const char* bin = std::getenv("PARADE_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "PARADE_BIN must point at the parade binary");
  return bin;
}

int run(const std::string& args, const std::string& out_file = "/dev/null") {
  const std::string cmd = binary() + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

TEST_CASE("cli: --help exists for every subcommand and exits 0") {
  CHECK(run("--help") == 0);
  for (const char* sub : {"index", "retrieve", "synth", "train", "rerank", "distill", "evaluate",
                          "analyze-judgments", "gradcheck", "plot-trace", "pipeline"}) {
    CAPTURE(sub);
    CHECK(run(std::string(sub) + " --help") == 0);
  }
}

TEST_CASE("cli: unknown subcommand and unknown flag are usage errors") {
  CHECK(run("bogus-subcommand") == 1);
  CHECK(run("evaluate --no-such-flag") == 1);
}

TEST_CASE("cli: missing input file is a data error") {
  test::TempDir dir("cli_err");
  test::write_file(dir.file("q.txt"), "q1 0 d1 1\n");
  test::write_file(dir.file("r.txt"), "q1 Q0 d1 1 1.000000 t\n");
  // Existing-file validation happens at parse time -> usage error.
  CHECK(run("evaluate --run " + dir.file("nope.txt") + " --qrels " + dir.file("q.txt")) == 1);
  // Parse failures inside a file -> data error.
  test::write_file(dir.file("bad.txt"), "garbage\n");
  CHECK(run("evaluate --run " + dir.file("bad.txt") + " --qrels " + dir.file("q.txt")) == 2);
}

TEST_CASE("cli: evaluate prints a TSV report") {
  test::TempDir dir("cli_eval");
  test::write_file(dir.file("q.txt"), "q1 0 d1 2\nq1 0 d2 0\n");
  test::write_file(dir.file("r.txt"), "q1 Q0 d1 1 2.000000 t\nq1 Q0 d2 2 1.000000 t\n");
  const std::string out = dir.file("report.tsv");
  CHECK(run("evaluate --run " + dir.file("r.txt") + " --qrels " + dir.file("q.txt") +
            " --metric ndcg@20 --metric map", out) == 0);
  const auto report = test::read_file(out);
  CHECK(report.find("ndcg@20\tall\t1.000000") != std::string::npos);
  CHECK(report.find("map\tall\t1.000000") != std::string::npos);
}

TEST_CASE("cli: synth -> index -> retrieve -> analyze-judgments chain") {
  test::TempDir dir("cli_chain");
  const std::string data = dir.file("data");
  CHECK(run("synth --outdir " + data +
            " --docs 60 --queries 6 --seed 3 --doc-len-lo 96 --doc-len-hi 140 --region-len 32") ==
        0);
  CHECK(run("index --corpus " + data + "/corpus.jsonl --out " + dir.file("idx.json")) == 0);
  CHECK(run("retrieve --index " + dir.file("idx.json") + " --topics " + data +
            "/topics.tsv --k 30 --out " + dir.file("run.txt")) == 0);
  CHECK(run("retrieve --index " + dir.file("idx.json") + " --topics " + data +
            "/topics.tsv --k 30 --rm3 --out " + dir.file("run_rm3.txt")) == 0);

  const std::string hist = dir.file("hist.tsv");
  CHECK(run("analyze-judgments --pjudg " + data + "/passage_judgments.jsonl --qrels " + data +
            "/qrels.txt", hist) == 0);
  const auto text = test::read_file(hist);
  CHECK(text.find("=1\t100.000000") != std::string::npos);
  CHECK(text.find("3+\t0.000000") != std::string::npos);
}

TEST_CASE("cli: gradcheck on one aggregator exits 0 below tolerance") {
  test::TempDir dir("cli_grad");
  const std::string out = dir.file("gc.txt");
  CHECK(run("gradcheck --seed 7 --dim 16 --aggregator attn --coords 10", out) == 0);
  const auto text = test::read_file(out);
  CHECK(text.find("max_rel_error") != std::string::npos);
}

TEST_CASE("cli: plot-trace renders an SVG") {
  test::TempDir dir("cli_plot");
  test::write_file(dir.file("t.csv"), "step,epoch,lr,loss\n0,0,0.1,2\n1,0,0.1,1\n");
  CHECK(run("plot-trace --csv " + dir.file("t.csv") + " --out " + dir.file("t.svg")) == 0);
  const auto svg = test::read_file(dir.file("t.svg"));
  CHECK(svg.find("<svg") != std::string::npos);
}

TEST_CASE("cli: config file supplies defaults, flags override") {
  test::TempDir dir("cli_cfg");
  test::write_file(dir.file("cfg.ini"),
                   "[synth]\n"
                   "n_docs = 40\n"
                   "n_queries = 5\n"
                   "doc_len_lo = 96\n"
                   "doc_len_hi = 120\n");
  const std::string data = dir.file("data");
  CHECK(run("synth --config " + dir.file("cfg.ini") + " --outdir " + data + " --queries 4") == 0);
  const auto topics = test::read_file(data + "/topics.tsv");
  int lines = 0;
  for (char c : topics) lines += c == '\n';
  CHECK(lines == 4);  // flag beat the config's 5
  const auto corpus = test::read_file(data + "/corpus.jsonl");
  int docs = 0;
  for (char c : corpus) docs += c == '\n';
  CHECK(docs == 40);  // config beat the built-in 200
}

TEST_CASE("cli: pipeline end to end is byte-reproducible") {
  test::TempDir dir("cli_pipe");
  test::write_file(dir.file("cfg.ini"),
                   "[pipeline]\n"
                   "seed = 5\n"
                   "n_train_queries = 4\n"
                   "metric = ndcg@10\n"
                   "[synth]\n"
                   "n_docs = 50\n"
                   "n_queries = 6\n"
                   "doc_len_lo = 96\n"
                   "doc_len_hi = 140\n"
                   "region_len = 32\n"
                   "noise_vocab_frac = 0.05\n"
                   "[chunk]\n"
                   "window = 32\n"
                   "stride = 24\n"
                   "max_passages = 8\n"
                   "max_seq_len = 48\n"
                   "[encoder]\n"
                   "d = 16\n"
                   "n_layers = 1\n"
                   "n_heads = 2\n"
                   "[train]\n"
                   "epochs = 1\n"
                   "pairs_per_epoch = 8\n"
                   "batch_size = 4\n"
                   "warmup_epochs = 0\n"
                   "[retrieval]\n"
                   "first_stage_k = 30\n"
                   "rerank_pool = 10\n");
  const std::string run_a = dir.file("outA");
  const std::string run_b = dir.file("outB");
  CHECK(run("pipeline --config " + dir.file("cfg.ini") + " --outdir " + run_a) == 0);
  CHECK(run("pipeline --config " + dir.file("cfg.ini") + " --outdir " + run_b) == 0);
  for (const char* artifact :
       {"metrics.tsv", "run.bm25.txt", "run.reranked.txt", "loss.csv", "manifest.json"}) {
    CAPTURE(artifact);
    CHECK(test::read_file(run_a + "/" + artifact) == test::read_file(run_b + "/" + artifact));
    CHECK_FALSE(test::read_file(run_a + "/" + artifact).empty());
  }
  CHECK(test::read_file(run_a + "/metrics.tsv").find("reranked.ndcg@10") != std::string::npos);
}

TEST_CASE("cli: train -> rerank -> distill round trip") {
  test::TempDir dir("cli_train");
  const std::string data = dir.file("data");
  REQUIRE(run("synth --outdir " + data +
              " --docs 40 --queries 5 --seed 4 --doc-len-lo 96 --doc-len-hi 120 --region-len 32") ==
          0);
  REQUIRE(run("index --corpus " + data + "/corpus.jsonl --out " + dir.file("idx.json")) == 0);
  REQUIRE(run("retrieve --index " + dir.file("idx.json") + " --topics " + data +
              "/topics.tsv --k 20 --out " + dir.file("run.txt")) == 0);

  const std::string train_flags =
      " --window 24 --stride 16 --max-passages 8 --max-seq-len 40 --d 16 --layers 1 --heads 2"
      " --epochs 1 --pairs-per-epoch 8 --batch-size 4 --warmup-epochs 0";
  CHECK(run("train --corpus " + data + "/corpus.jsonl --topics " + data + "/topics.tsv --qrels " +
            data + "/qrels.txt --run " + dir.file("run.txt") + " --checkpoint-out " +
            dir.file("teacher.json") + " --trace-out " + dir.file("loss.csv") +
            " --aggregator max" + train_flags) == 0);
  CHECK(run("rerank --checkpoint " + dir.file("teacher.json") + " --corpus " + data +
            "/corpus.jsonl --topics " + data + "/topics.tsv --run " + dir.file("run.txt") +
            " --out " + dir.file("rr.txt") + " --pool 10 --threads 2") == 0);
  CHECK(run("evaluate --run " + dir.file("rr.txt") + " --qrels " + data + "/qrels.txt") == 0);
  CHECK(run("distill --teacher " + dir.file("teacher.json") + " --corpus " + data +
            "/corpus.jsonl --topics " + data + "/topics.tsv --qrels " + data +
            "/qrels.txt --run " + dir.file("run.txt") + " --checkpoint-out " +
            dir.file("student.json") + " --student-d 8 --epochs 1 --pairs-per-epoch 4"
            " --batch-size 2 --warmup-epochs 0") == 0);
  CHECK(test::read_file(dir.file("student.json")).find("\"d\":8") != std::string::npos);
}

}  // namespace
}  // namespace parade

#include "parade/cli.hpp"

#include "parade/config.hpp"
#include "parade/index.hpp"
#include "parade/manifest.hpp"
#include "parade/metrics.hpp"
#include "parade/model.hpp"
#include "parade/pipeline.hpp"
#include "parade/svg_plot.hpp"
#include "parade/synth.hpp"
#include "parade/train.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace parade {

namespace {

// `--config file` is honored by every subcommand: the file supplies defaults,
// flags override. The file is located by a pre-scan so its values can seed
// the option defaults before parsing.
ConfigMap prescan_config(int argc, const char* const* argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") return ConfigMap::parse_file(argv[i + 1]);
  }
  return ConfigMap{};
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct CliState {
  ConfigMap file_cfg;
  PipelineConfig defaults;
  int exit_code = 0;
};

void add_config_option(CLI::App* cmd) {
  cmd->add_option("--config", "config file supplying defaults (flags override)")
      ->check(CLI::ExistingFile);
}

// --- subcommand wiring ----------------------------------------------------------

void setup_index(CLI::App& app, CliState& state) {
  auto* cmd = app.add_subcommand("index", "build an inverted index from a JSONL corpus");
  add_config_option(cmd);
  auto corpus = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto vocab_size = std::make_shared<int>(state.defaults.vocab.vocab_size);
  cmd->add_option("--corpus", *corpus, "corpus JSONL file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", *out, "output index file")->required();
  cmd->add_option("--vocab-size", *vocab_size, "hash vocabulary size");
  cmd->callback([&state, corpus, out, vocab_size] {
    Vocabulary vocab{*vocab_size};
    const auto docs = load_corpus(*corpus, vocab);
    save_index(*out, build_index(docs));
    std::cout << "indexed " << docs.size() << " documents -> " << *out << "\n";
  });
}

void setup_retrieve(CLI::App& app, CliState& state) {
  auto* cmd = app.add_subcommand("retrieve", "first-stage BM25 (optionally +RM3) retrieval");
  add_config_option(cmd);
  auto index_path = std::make_shared<std::string>();
  auto topics_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto k = std::make_shared<int>(1000);
  auto k1 = std::make_shared<double>(state.defaults.bm25.k1);
  auto b = std::make_shared<double>(state.defaults.bm25.b);
  auto rm3 = std::make_shared<bool>(false);
  auto fb_docs = std::make_shared<int>(10);
  auto fb_terms = std::make_shared<int>(20);
  auto orig_weight = std::make_shared<double>(0.5);
  auto tag = std::make_shared<std::string>("bm25");
  auto vocab_size = std::make_shared<int>(state.defaults.vocab.vocab_size);
  cmd->add_option("--index", *index_path, "index file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--topics", *topics_path, "topics TSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", *out, "output run file")->required();
  cmd->add_option("--k", *k, "retrieval depth");
  cmd->add_option("--k1", *k1, "BM25 k1");
  cmd->add_option("--b", *b, "BM25 b");
  cmd->add_flag("--rm3", *rm3, "apply RM3 query expansion");
  cmd->add_option("--fb-docs", *fb_docs, "RM3 feedback docs");
  cmd->add_option("--fb-terms", *fb_terms, "RM3 expansion terms");
  cmd->add_option("--orig-weight", *orig_weight, "RM3 original-query weight");
  cmd->add_option("--tag", *tag, "run tag");
  cmd->add_option("--vocab-size", *vocab_size, "hash vocabulary size");
  cmd->callback([=] {
    const InvertedIndex index = load_index(*index_path);
    Vocabulary vocab{*vocab_size};
    const auto topics = load_topics(*topics_path, vocab);
    const Bm25Params params{*k1, *b};
    RunList run;
    run.tag = *tag;
    for (const auto& query : topics) {
      std::vector<RunEntry> entries;
      if (*rm3) {
        auto first = bm25_search(index, query.tokens, params, *k);
        if (!first.empty()) {
          const Rm3Params rm3_params{*fb_docs, *fb_terms, *orig_weight};
          entries = weighted_search(index, rm3_expand(index, query.tokens, first, rm3_params),
                                    params, *k);
        }
      } else {
        entries = bm25_search(index, query.tokens, params, *k);
      }
      if (!entries.empty()) run.queries[query.query_id] = std::move(entries);
    }
    write_run(*out, run);
    std::cout << "retrieved " << run.queries.size() << " topics -> " << *out << "\n";
  });
}

void setup_synth(CLI::App& app, CliState& state) {
  auto* cmd = app.add_subcommand("synth", "generate a seeded synthetic corpus");
  add_config_option(cmd);
  auto outdir = std::make_shared<std::string>();
  auto cfg = std::make_shared<SynthConfig>(state.defaults.synth);
  auto mode = std::make_shared<std::string>(to_string(state.defaults.synth.mode));
  auto vocab_size = std::make_shared<int>(state.defaults.vocab.vocab_size);
  cmd->add_option("--outdir", *outdir, "output directory")->required();
  cmd->add_option("--docs", cfg->n_docs, "number of documents");
  cmd->add_option("--queries", cfg->n_queries, "number of queries");
  cmd->add_option("--mode", *mode, "single_passage or spread_k(k)");
  cmd->add_option("--spread-k", cfg->spread_k, "signal regions per relevant doc");
  cmd->add_option("--doc-len-lo", cfg->doc_len_lo, "min document length");
  cmd->add_option("--doc-len-hi", cfg->doc_len_hi, "max document length");
  cmd->add_option("--region-len", cfg->region_len, "placement region length");
  cmd->add_option("--rel-per-query", cfg->rel_per_query, "relevant docs per query");
  cmd->add_option("--distractors-per-query", cfg->distractors_per_query,
                  "distractor docs per query");
  cmd->add_option("--noise-frac", cfg->noise_vocab_frac, "noise vocabulary fraction");
  cmd->add_option("--phrase-len", cfg->phrase_len, "signal words per query");
  cmd->add_option("--marker-pool", cfg->marker_pool, "shared marker vocabulary size");
  cmd->add_option("--markers-per-plant", cfg->markers_per_plant,
                  "marker words prefixed to each planting");
  cmd->add_option("--seed", cfg->seed, "generator seed");
  cmd->add_option("--vocab-size", *vocab_size, "hash vocabulary size");
  cmd->callback([=] {
    int spread_k = cfg->spread_k;
    cfg->mode = synth_mode_from_string(*mode, &spread_k);
    cfg->spread_k = spread_k;
    const SynthData data = generate(*cfg, Vocabulary{*vocab_size});
    write_synth(*outdir, data);
    RunManifest manifest;
    manifest.command = "synth";
    manifest.config["synth.signal_mode"] = to_string(cfg->mode);
    manifest.seeds["synth"] = cfg->seed;
    for (const char* name :
         {"corpus.jsonl", "topics.tsv", "qrels.txt", "passage_judgments.jsonl"})
      manifest.artifact_digests[name] = file_digest(*outdir + "/" + name);
    write_manifest(*outdir + "/manifest.json", manifest);
    std::cout << "wrote " << data.corpus.size() << " docs, " << data.topics.size()
              << " topics -> " << *outdir << "\n";
  });
}

struct TrainArgs {
  std::string corpus, topics, qrels, run, checkpoint_out;
  std::string trace_out, checkpoint_dir, aggregator, loss;
  PipelineConfig cfg;
};

void add_model_options(CLI::App* cmd, std::shared_ptr<TrainArgs> args) {
  auto& model = args->cfg.model;
  cmd->add_option("--d", model.encoder.d, "encoder hidden size");
  cmd->add_option("--layers", model.encoder.n_layers, "encoder layers");
  cmd->add_option("--heads", model.encoder.n_heads, "attention heads");
  cmd->add_option("--ffn-mult", model.encoder.ffn_mult, "FFN expansion factor");
  cmd->add_option("--window", model.chunk.window, "passage window");
  cmd->add_option("--stride", model.chunk.stride, "passage stride");
  cmd->add_option("--max-passages", model.chunk.max_passages, "passage slots");
  cmd->add_option("--max-seq-len", model.chunk.max_seq_len, "encoder input cap");
  cmd->add_option("--kmax-k", model.agg.kmax_k, "k for k-max score pooling");
  cmd->add_flag("--no-head-bias",
                [args](std::int64_t) { args->cfg.model.agg.head_bias = false; },
                "drop the scoring-head and attention biases");
  cmd->add_flag("--no-agg-positions",
                [args](std::int64_t) { args->cfg.model.agg.positions = false; },
                "disable passage-position embeddings in the transformer aggregator");
  cmd->add_flag("--cnn-score-inputs",
                [args](std::int64_t) { args->cfg.model.agg.cnn_score_inputs = true; },
                "include level-0 representations in CNN scoring");
  cmd->add_option("--vocab-size", model.encoder.vocab_size, "hash vocabulary size");
  cmd->add_option("--model-seed", model.encoder.seed, "parameter init seed");
}

void add_train_options(CLI::App* cmd, std::shared_ptr<TrainArgs> args) {
  auto& train = args->cfg.train;
  cmd->add_option("--lr", train.lr, "peak learning rate");
  cmd->add_option("--epochs", train.epochs, "training epochs");
  cmd->add_option("--pairs-per-epoch", train.pairs_per_epoch, "pairs per epoch");
  cmd->add_option("--warmup-epochs", train.warmup_epochs, "warm-up epochs");
  cmd->add_option("--decay-rate", train.decay_rate, "final lr fraction after decay");
  cmd->add_option("--batch-size", train.batch_size, "pairs per optimizer step");
  cmd->add_option("--margin", train.margin, "hinge margin");
  cmd->add_option("--alpha", train.alpha, "distillation CE weight");
  cmd->add_option("--train-seed", train.seed, "sampling seed");
}

void run_training(const TrainArgs& args, const RerankModel* teacher) {
  PipelineConfig cfg = args.cfg;
  if (!args.aggregator.empty()) cfg.model.agg.kind = aggregator_from_string(args.aggregator);
  if (!args.loss.empty()) cfg.train.loss = loss_from_string(args.loss);
  cfg.model.encoder.max_seq_len =
      std::max(cfg.model.encoder.max_seq_len, cfg.model.chunk.max_seq_len);
  cfg.model.encoder.vocab_size = cfg.vocab.vocab_size = std::max(cfg.vocab.vocab_size, cfg.model.encoder.vocab_size);

  const auto docs_vec = load_corpus(args.corpus, cfg.vocab);
  const auto topics = load_topics(args.topics, cfg.vocab);
  const Qrels qrels = load_qrels(args.qrels);
  RunList pool = read_run(args.run);

  RerankModel model = make_model(cfg.model);
  const auto docs = doc_lookup(docs_vec);
  TrainData data;
  data.queries = &topics;
  data.docs = &docs;
  data.qrels = &qrels;
  data.pool = &pool;
  const TrainResult result = train_epochs(model, data, cfg.train, teacher, args.checkpoint_dir);
  save_checkpoint(args.checkpoint_out, model);
  if (!args.trace_out.empty()) write_trace(args.trace_out, result.trace);

  RunManifest manifest;
  manifest.command = teacher ? "distill" : "train";
  manifest.config["aggregate.kind"] = to_string(cfg.model.agg.kind);
  manifest.config["train.loss"] = to_string(cfg.train.loss);
  manifest.seeds = {{"encoder", cfg.model.encoder.seed}, {"train", cfg.train.seed}};
  for (const auto& [label, path] : std::map<std::string, std::string>{{"corpus", args.corpus},
                                                                      {"topics", args.topics},
                                                                      {"qrels", args.qrels},
                                                                      {"run", args.run}})
    manifest.input_digests[label] = file_digest(path);
  manifest.checkpoint_path = args.checkpoint_out;
  manifest.artifact_digests["checkpoint"] = file_digest(args.checkpoint_out);
  if (!args.trace_out.empty()) manifest.artifact_digests["trace"] = file_digest(args.trace_out);
  write_manifest(args.checkpoint_out + ".manifest.json", manifest);
  std::cout << "trained " << to_string(cfg.model.agg.kind) << " ("
            << model.params.parameter_count() << " parameters), final loss "
            << fmt6(result.trace.empty() ? 0.0 : result.trace.back().loss) << " -> "
            << args.checkpoint_out << "\n";
}

void setup_train(CLI::App& app, CliState& state) {
  auto* cmd = app.add_subcommand("train", "train a reranker on a first-stage pool");
  add_config_option(cmd);
  auto args = std::make_shared<TrainArgs>();
  args->cfg = state.defaults;
  cmd->add_option("--corpus", args->corpus, "corpus JSONL")->required()->check(CLI::ExistingFile);
  cmd->add_option("--topics", args->topics, "topics TSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--qrels", args->qrels, "qrels file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--run", args->run, "first-stage run (training pool)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--checkpoint-out", args->checkpoint_out, "output checkpoint")->required();
  cmd->add_option("--trace-out", args->trace_out, "loss trace CSV");
  cmd->add_option("--checkpoint-dir", args->checkpoint_dir, "per-epoch checkpoint directory");
  cmd->add_option("--aggregator", args->aggregator, "max|avg|sum|attn|cnn|transformer|score-*");
  cmd->add_option("--loss", args->loss, "hinge|cross_entropy");
  add_model_options(cmd, args);
  add_train_options(cmd, args);
  cmd->callback([args] {
    if (args->cfg.train.loss == LossKind::kDistill && args->loss.empty())
      throw ConfigError("use the distill subcommand for distillation");
    run_training(*args, nullptr);
  });
}

void setup_distill(CLI::App& app, CliState& state) {
  auto* cmd = app.add_subcommand("distill", "train a student against a teacher checkpoint");
  add_config_option(cmd);
  auto args = std::make_shared<TrainArgs>();
  args->cfg = state.defaults;
  auto teacher_path = std::make_shared<std::string>();
  auto student_d = std::make_shared<int>(32);
  cmd->add_option("--teacher", *teacher_path, "teacher checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--student-d", *student_d, "student hidden size");
  cmd->add_option("--corpus", args->corpus, "corpus JSONL")->required()->check(CLI::ExistingFile);
  cmd->add_option("--topics", args->topics, "topics TSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--qrels", args->qrels, "qrels file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--run", args->run, "first-stage run (training pool)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--checkpoint-out", args->checkpoint_out, "output checkpoint")->required();
  cmd->add_option("--trace-out", args->trace_out, "loss trace CSV");
  cmd->add_option("--aggregator", args->aggregator, "student aggregator (default: teacher's)");
  add_train_options(cmd, args);
  cmd->add_option("--model-seed", args->cfg.model.encoder.seed, "student init seed");
  cmd->callback([args, teacher_path, student_d] {
    const RerankModel teacher = load_checkpoint(*teacher_path);
    // The student shares the teacher's chunking so both score identical
    // inputs; only the encoder shrinks.
    TrainArgs student_args = *args;
    student_args.cfg.model = teacher.cfg;
    student_args.cfg.model.encoder.d = *student_d;
    student_args.cfg.model.encoder.seed = args->cfg.model.encoder.seed;
    if (!args->aggregator.empty())
      student_args.cfg.model.agg.kind = aggregator_from_string(args->aggregator);
    student_args.cfg.vocab.vocab_size = teacher.cfg.encoder.vocab_size;
    student_args.cfg.model.encoder.vocab_size = teacher.cfg.encoder.vocab_size;
    student_args.cfg.train.loss = LossKind::kDistill;
    student_args.aggregator.clear();
    student_args.loss.clear();
    run_training(student_args, &teacher);
  });
}

void setup_rerank(CLI::App& app, CliState& state) {
  auto* cmd = app.add_subcommand("rerank", "rerank a first-stage run with a checkpoint");
  add_config_option(cmd);
  auto checkpoint = std::make_shared<std::string>();
  auto corpus = std::make_shared<std::string>();
  auto topics = std::make_shared<std::string>();
  auto run_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto pool = std::make_shared<int>(1000);
  auto threads = std::make_shared<int>(state.defaults.threads);
  auto tag = std::make_shared<std::string>("parade");
  cmd->add_option("--checkpoint", *checkpoint, "model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--corpus", *corpus, "corpus JSONL")->required()->check(CLI::ExistingFile);
  cmd->add_option("--topics", *topics, "topics TSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--run", *run_path, "first-stage run")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", *out, "output run file")->required();
  cmd->add_option("--pool", *pool, "reranking threshold");
  cmd->add_option("--threads", *threads, "worker threads for per-document scoring");
  cmd->add_option("--tag", *tag, "run tag");
  cmd->callback([=] {
    const RerankModel model = load_checkpoint(*checkpoint);
    Vocabulary vocab{model.cfg.encoder.vocab_size};
    const auto docs_vec = load_corpus(*corpus, vocab);
    const auto queries = load_topics(*topics, vocab);
    const RunList first_stage = read_run(*run_path);
    const RunList reranked =
        rerank(model, queries, doc_lookup(docs_vec), first_stage, *pool, *threads, *tag);
    write_run(*out, reranked);
    RunManifest manifest;
    manifest.command = "rerank";
    manifest.seeds = {{"encoder", model.cfg.encoder.seed}};
    manifest.input_digests["checkpoint"] = file_digest(*checkpoint);
    manifest.input_digests["corpus"] = file_digest(*corpus);
    manifest.input_digests["run"] = file_digest(*run_path);
    manifest.artifact_digests["run"] = file_digest(*out);
    write_manifest(*out + ".manifest.json", manifest);
    std::cout << "reranked " << reranked.queries.size() << " topics -> " << *out << "\n";
  });
}

void setup_evaluate(CLI::App& app, CliState&) {
  auto* cmd = app.add_subcommand("evaluate", "score a run against qrels");
  add_config_option(cmd);
  auto run_path = std::make_shared<std::string>();
  auto qrels_path = std::make_shared<std::string>();
  auto metrics = std::make_shared<std::vector<std::string>>();
  auto per_query = std::make_shared<bool>(false);
  auto out = std::make_shared<std::string>();
  auto threads = std::make_shared<int>(1);
  cmd->add_option("--run", *run_path, "run file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--qrels", *qrels_path, "qrels file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--metric", *metrics, "metric name, repeatable (ndcg@k, map, p@k, err@k)");
  cmd->add_flag("--per-query", *per_query, "report per-query values");
  cmd->add_option("--out", *out, "also write the TSV report here");
  cmd->add_option("--threads", *threads, "worker threads for per-query evaluation");
  cmd->callback([=] {
    const RunList run = read_run(*run_path);
    const Qrels qrels = load_qrels(*qrels_path);
    if (metrics->empty()) metrics->push_back("ndcg@20");
    std::string report;
    for (const auto& name : *metrics)
      report += format_metric_report(name, compute_metric(name, run, qrels, *threads), *per_query);
    std::cout << report;
    if (!out->empty()) {
      std::ofstream f(*out);
      if (!f) throw DataError("cannot open file for writing: " + *out);
      f << report;
    }
  });
}

void setup_analyze(CLI::App& app, CliState&) {
  auto* cmd = app.add_subcommand("analyze-judgments",
                                 "relevant-passages-per-document histogram");
  add_config_option(cmd);
  auto pjudg = std::make_shared<std::string>();
  auto qrels_path = std::make_shared<std::string>();
  auto passage_threshold = std::make_shared<int>(1);
  auto doc_threshold = std::make_shared<int>(1);
  cmd->add_option("--pjudg", *pjudg, "passage judgments JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--qrels", *qrels_path, "qrels file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--passage-threshold", *passage_threshold, "passage grade threshold");
  cmd->add_option("--doc-threshold", *doc_threshold, "document qrels grade threshold");
  cmd->callback([=] {
    const auto pmap = read_passage_judgments(*pjudg);
    const Qrels qrels = load_qrels(*qrels_path);
    const PassageHistogram hist =
        relevant_passage_histogram(pmap, qrels, *passage_threshold, *doc_threshold);
    std::cout << "relevant_passages\tpct_docs\n";
    std::cout << "=1\t" << fmt6(hist.pct_exactly_one) << "\n";
    std::cout << "<=2\t" << fmt6(hist.pct_at_most_two) << "\n";
    std::cout << "3+\t" << fmt6(hist.pct_three_plus) << "\n";
  });
}

void setup_gradcheck(CLI::App& app, CliState& state) {
  auto* cmd = app.add_subcommand("gradcheck",
                                 "finite-difference check of analytic gradients");
  add_config_option(cmd);
  auto seed = std::make_shared<std::uint64_t>(7);
  auto dim = std::make_shared<int>(16);
  auto aggregator = std::make_shared<std::string>("all");
  auto coords = std::make_shared<int>(200);
  auto eps = std::make_shared<double>(1e-4);
  auto tol = std::make_shared<double>(1e-4);
  cmd->add_option("--seed", *seed, "instance seed");
  cmd->add_option("--dim", *dim, "encoder hidden size");
  cmd->add_option("--aggregator", *aggregator, "aggregator to check, or 'all'");
  cmd->add_option("--coords", *coords, "sampled coordinates per tensor");
  cmd->add_option("--eps", *eps, "finite-difference step");
  cmd->add_option("--tol", *tol, "max relative error accepted");
  cmd->callback([=, &state] {
    std::vector<AggregatorKind> kinds;
    if (*aggregator == "all") {
      kinds = {AggregatorKind::kMax,  AggregatorKind::kAvg, AggregatorKind::kSum,
               AggregatorKind::kAttn, AggregatorKind::kCnn, AggregatorKind::kTransformer};
    } else {
      kinds = {aggregator_from_string(*aggregator)};
    }
    double worst = 0.0;
    for (AggregatorKind kind : kinds) {
      ModelConfig cfg;
      cfg.encoder.d = *dim;
      cfg.encoder.n_layers = 2;
      cfg.encoder.n_heads = *dim % 4 == 0 ? 4 : 1;
      cfg.encoder.vocab_size = 64;
      cfg.encoder.max_seq_len = 64;
      cfg.encoder.seed = *seed;
      cfg.chunk = ChunkConfig{12, 8, 4, 64};
      cfg.agg.kind = kind;
      RerankModel model = make_model(cfg);
      GradCheckConfig gc;
      gc.coords_per_tensor = *coords;
      gc.epsilon = *eps;
      gc.seed = *seed;
      const GradCheckReport report = gradient_check_model(model, gc);
      worst = std::max(worst, report.max_rel_error);
      std::printf("%-12s max_rel_error %.3e over %lld coords (worst: %s)\n",
                  to_string(kind).c_str(), report.max_rel_error,
                  static_cast<long long>(report.coords_checked),
                  report.worst_tensor.c_str());
    }
    std::printf("max_rel_error %.3e\n", worst);
    if (!(worst < *tol)) state.exit_code = 3;
  });
}

void setup_plot(CLI::App& app, CliState&) {
  auto* cmd = app.add_subcommand("plot-trace", "render a CSV trace as an SVG line plot");
  add_config_option(cmd);
  auto csv = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto x = std::make_shared<std::string>("step");
  auto y = std::make_shared<std::string>("loss");
  auto title = std::make_shared<std::string>("training trace");
  cmd->add_option("--csv", *csv, "input CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", *out, "output SVG")->required();
  cmd->add_option("--x", *x, "x column");
  cmd->add_option("--y", *y, "y column");
  cmd->add_option("--title", *title, "plot title");
  cmd->callback([=] {
    PlotSeries series;
    series.label = *y;
    series.points = read_csv_columns(*csv, *x, *y);
    std::ofstream f(*out);
    if (!f) throw DataError("cannot open file for writing: " + *out);
    f << render_line_plot_svg(*title, *x, *y, {series});
    std::cout << "wrote " << series.points.size() << " points -> " << *out << "\n";
  });
}

void setup_pipeline(CLI::App& app, CliState& state) {
  auto* cmd = app.add_subcommand(
      "pipeline", "synth -> index -> retrieve -> train -> rerank -> evaluate");
  add_config_option(cmd);
  auto outdir = std::make_shared<std::string>();
  auto aggregator = std::make_shared<std::string>();
  auto seed = std::make_shared<std::uint64_t>(0);
  auto threads = std::make_shared<int>(state.defaults.threads);
  cmd->add_option("--outdir", *outdir, "output directory")->required();
  cmd->add_option("--aggregator", *aggregator, "override aggregator kind");
  cmd->add_option("--seed", *seed, "override master seed");
  cmd->add_option("--threads", *threads, "worker threads");
  cmd->callback([=, &state] {
    PipelineConfig cfg = state.defaults;
    if (!aggregator->empty()) cfg.model.agg.kind = aggregator_from_string(*aggregator);
    if (*seed != 0) {
      cfg.synth.seed = *seed;
      cfg.model.encoder.seed = *seed + 1;
      cfg.train.seed = *seed + 2;
    }
    cfg.threads = *threads;
    run_pipeline(cfg, *outdir, std::cout);
  });
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CliState state;
  try {
    state.file_cfg = prescan_config(argc, argv);
    state.defaults = pipeline_from_config(state.file_cfg);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"parade: passage-aggregation document reranking pipeline"};
  app.require_subcommand(1);
  setup_index(app, state);
  setup_retrieve(app, state);
  setup_synth(app, state);
  setup_train(app, state);
  setup_distill(app, state);
  setup_rerank(app, state);
  setup_evaluate(app, state);
  setup_analyze(app, state);
  setup_gradcheck(app, state);
  setup_plot(app, state);
  setup_pipeline(app, state);

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return state.exit_code;
}

}  // namespace parade

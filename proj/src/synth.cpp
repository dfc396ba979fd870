#include "parade/synth.hpp"

#include "parade/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace parade {

void SynthConfig::validate() const {
  if (n_docs < 1 || n_queries < 1) throw ConfigError("synth: n_docs and n_queries must be positive");
  if (doc_len_lo < 8 || doc_len_hi < doc_len_lo) throw ConfigError("synth: bad doc_len range");
  if (mode == Mode::kSpread && spread_k < 2) throw ConfigError("synth: spread mode requires k >= 2");
  if (noise_vocab_frac <= 0.0 || noise_vocab_frac > 1.0)
    throw ConfigError("synth: noise_vocab_frac must lie in (0, 1]");
  if (region_len < 8) throw ConfigError("synth: region_len must be >= 8");
  if (rel_per_query < 1 || distractors_per_query < 0)
    throw ConfigError("synth: bad per-query doc counts");
  if (phrase_len < 2 || phrase_len > 3) throw ConfigError("synth: phrase_len must be 2 or 3");
  if (marker_pool < 1) throw ConfigError("synth: marker_pool must be >= 1");
  if (markers_per_plant < 1) throw ConfigError("synth: markers_per_plant must be >= 1");
  const int needed = n_queries * (rel_per_query + distractors_per_query);
  if (needed > n_docs)
    throw ConfigError("synth: n_docs too small for the requested per-query documents");
  const int want = mode == Mode::kSpread ? spread_k : 1;
  if (doc_len_lo < want * region_len)
    throw ConfigError("synth: infeasible geometry, " + std::to_string(want) +
                      " signal regions cannot fit in the shortest documents");
  if (distractors_per_query > 0 && region_len < 2 * phrase_len + 1)
    throw ConfigError("synth: region_len too small to scatter the phrase without adjacency");
}

SynthConfig::Mode synth_mode_from_string(const std::string& name, int* spread_k_out) {
  if (name == "single_passage") return SynthConfig::Mode::kSinglePassage;
  if (name.rfind("spread", 0) == 0) {
    // accepts "spread", "spread_k(3)", "spread:3"
    if (spread_k_out) {
      for (std::size_t i = 0; i < name.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(name[i]))) {
          *spread_k_out = std::stoi(name.substr(i));
          break;
        }
      }
    }
    return SynthConfig::Mode::kSpread;
  }
  throw ConfigError("unknown signal mode: " + name);
}

std::string to_string(SynthConfig::Mode mode) {
  return mode == SynthConfig::Mode::kSinglePassage ? "single_passage" : "spread_k";
}

namespace {

std::string join_words(const std::vector<std::string>& words) {
  std::ostringstream out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out << ' ';
    out << words[i];
  }
  return out.str();
}

std::string padded_id(const char* prefix, int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, i);
  return buf;
}

}  // namespace

SynthData generate(const SynthConfig& cfg, const Vocabulary& vocab) {
  cfg.validate();
  vocab.validate();
  SplitMix64 rng(cfg.seed);
  SynthData data;

  const int noise_words = std::max(32, static_cast<int>(cfg.noise_vocab_frac * vocab.vocab_size));
  auto noise_word = [&] {
    return "n" + std::to_string(rng.next_below(static_cast<std::uint64_t>(noise_words)));
  };
  // Marker words are shared across all queries, so a trained encoder can
  // recognize relevance in held-out queries' documents; they never occur in
  // queries, distractors or background noise.
  auto marker_word = [&] {
    return "m" + std::to_string(rng.next_below(static_cast<std::uint64_t>(cfg.marker_pool)));
  };

  const int occurrences = cfg.mode == SynthConfig::Mode::kSpread ? cfg.spread_k : 1;
  int doc_counter = 0;
  auto next_doc_id = [&] { return padded_id("d", doc_counter++, 4); };

  for (int qi = 0; qi < cfg.n_queries; ++qi) {
    const std::string qid = padded_id("q", qi, 3);
    // Per-query signal words keep first-stage pools disjoint across queries.
    std::vector<std::string> phrase;
    for (int j = 0; j < cfg.phrase_len; ++j)
      phrase.push_back("q" + std::to_string(qi) + "s" + std::to_string(j));

    Query topic;
    topic.query_id = qid;
    topic.text = join_words(phrase);
    topic.tokens = tokenize(topic.text, vocab);
    data.topics.push_back(std::move(topic));

    // Relevant documents: marker + phrase embedded contiguously in
    // `occurrences` distinct regions; drawn from the upper half of the length
    // range so distractors win the BM25 length normalization.
    const int planted = cfg.phrase_len + cfg.markers_per_plant;
    for (int r = 0; r < cfg.rel_per_query; ++r) {
      const int span = cfg.doc_len_hi - cfg.doc_len_lo;
      const int len = cfg.doc_len_lo + span / 2 +
                      static_cast<int>(rng.next_below(static_cast<std::uint64_t>(span / 2 + 1)));
      std::vector<std::string> words;
      words.reserve(static_cast<std::size_t>(len));
      for (int i = 0; i < len; ++i) words.push_back(noise_word());

      const int n_regions = (len + cfg.region_len - 1) / cfg.region_len;
      std::vector<int> eligible;
      for (int region = 0; region < n_regions; ++region) {
        const int cap = std::min(cfg.region_len, len - region * cfg.region_len);
        if (cap >= planted) eligible.push_back(region);
      }
      if (static_cast<int>(eligible.size()) < occurrences)
        throw ConfigError("synth: infeasible geometry, " + std::to_string(occurrences) +
                          " signal regions cannot fit in a " + std::to_string(len) +
                          "-token document");
      const auto picks =
          sample_without_replacement(0, static_cast<int>(eligible.size()), occurrences, rng);
      std::vector<int> grades(static_cast<std::size_t>(n_regions), 0);
      for (int pick : picks) {
        const int region = eligible[static_cast<std::size_t>(pick)];
        const int cap = std::min(cfg.region_len, len - region * cfg.region_len);
        const int offset =
            static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cap - planted + 1)));
        for (int m = 0; m < cfg.markers_per_plant; ++m)
          words[static_cast<std::size_t>(region * cfg.region_len + offset + m)] = marker_word();
        for (int j = 0; j < cfg.phrase_len; ++j)
          words[static_cast<std::size_t>(region * cfg.region_len + offset +
                                         cfg.markers_per_plant + j)] =
              phrase[static_cast<std::size_t>(j)];
        grades[static_cast<std::size_t>(region)] = 1;
      }

      Document record;
      record.doc_id = next_doc_id();
      record.text = join_words(words);
      record.tokens = tokenize(record.text, vocab);
      data.qrels.entries[qid][record.doc_id] = 1;
      data.pjudg.entries[qid][record.doc_id] = grades;
      data.corpus.push_back(std::move(record));
    }

    // Distractors mirror the relevant placement passage for passage: the same
    // regions-worth of query words at the same frequency, but scattered with
    // gaps inside their region and without markers. Per-passage term counts
    // match the relevant documents exactly, so the only learnable separator
    // is the marker (and phrase contiguity), both of which transfer to
    // held-out queries.
    for (int r = 0; r < cfg.distractors_per_query; ++r) {
      const int span = cfg.doc_len_hi - cfg.doc_len_lo;
      const int len = cfg.doc_len_lo +
                      static_cast<int>(rng.next_below(static_cast<std::uint64_t>(span / 2 + 1)));
      std::vector<std::string> words;
      words.reserve(static_cast<std::size_t>(len));
      for (int i = 0; i < len; ++i) words.push_back(noise_word());

      const int full_regions = len / cfg.region_len;
      // Scattering needs one empty slot around every word.
      if (full_regions < occurrences || cfg.region_len < 2 * cfg.phrase_len + 1)
        throw ConfigError("synth: infeasible geometry for distractor placement");
      const auto regions = sample_without_replacement(0, full_regions, occurrences, rng);
      for (int region : regions) {
        std::set<int> taken;
        for (int j = 0; j < cfg.phrase_len; ++j) {
          for (;;) {
            const int pos =
                region * cfg.region_len +
                static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.region_len)));
            bool clear = true;
            for (int delta = -1; delta <= 1; ++delta)
              if (taken.count(pos + delta)) clear = false;
            if (!clear) continue;
            taken.insert(pos);
            words[static_cast<std::size_t>(pos)] = phrase[static_cast<std::size_t>(j)];
            break;
          }
        }
      }

      Document record;
      record.doc_id = next_doc_id();
      record.text = join_words(words);
      record.tokens = tokenize(record.text, vocab);
      data.corpus.push_back(std::move(record));
    }
  }

  // Background noise documents fill the corpus to n_docs.
  while (doc_counter < cfg.n_docs) {
    const int span = cfg.doc_len_hi - cfg.doc_len_lo;
    const int len =
        cfg.doc_len_lo + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(span + 1)));
    std::vector<std::string> words;
    words.reserve(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) words.push_back(noise_word());
    Document record;
    record.doc_id = next_doc_id();
    record.text = join_words(words);
    record.tokens = tokenize(record.text, vocab);
    data.corpus.push_back(std::move(record));
  }

  return data;
}

void write_synth(const std::string& outdir, const SynthData& data) {
  std::filesystem::create_directories(outdir);
  write_corpus(outdir + "/corpus.jsonl", data.corpus);
  std::ofstream topics(outdir + "/topics.tsv");
  if (!topics) throw DataError("cannot open topics file for writing");
  for (const auto& q : data.topics) topics << q.query_id << '\t' << q.text << '\n';
  write_qrels(outdir + "/qrels.txt", data.qrels);
  write_passage_judgments(outdir + "/passage_judgments.jsonl", data.pjudg);
}

}  // namespace parade

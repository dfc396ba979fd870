#include "parade/metrics.hpp"

#include "parade/rng.hpp"
#include "parade/threading.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace parade {

namespace {

// Ranked doc ids for one query under the canonical ordering.
std::vector<std::string> ranked_docs(const std::vector<RunEntry>& entries) {
  std::vector<RunEntry> sorted = entries;
  std::stable_sort(sorted.begin(), sorted.end(), run_order_less);
  std::vector<std::string> docs;
  docs.reserve(sorted.size());
  for (const auto& e : sorted) docs.push_back(e.doc_id);
  return docs;
}

double gain(int grade) { return std::pow(2.0, grade) - 1.0; }

// Means over queries that have at least one relevant document; per-query
// values may be computed in parallel, the reduction stays in query order.
MetricResult per_query_metric(
    const RunList& run, const Qrels& qrels, int threads,
    const std::function<double(const std::vector<std::string>&, const std::map<std::string, int>&)>&
        score_query) {
  std::vector<const std::pair<const std::string, std::vector<RunEntry>>*> scored;
  for (const auto& entry : run.queries)
    if (qrels.has_relevant(entry.first)) scored.push_back(&entry);
  std::vector<double> values(scored.size(), 0.0);
  parallel_for(scored.size(), threads, [&](std::size_t i) {
    values[i] = score_query(ranked_docs(scored[i]->second), qrels.entries.at(scored[i]->first));
  });
  MetricResult result;
  double total = 0.0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    result.per_query[scored[i]->first] = values[i];
    total += values[i];
  }
  result.mean = scored.empty() ? 0.0 : total / static_cast<double>(scored.size());
  return result;
}

int grade_of(const std::map<std::string, int>& judged, const std::string& doc) {
  auto it = judged.find(doc);
  return it == judged.end() ? 0 : it->second;
}

}  // namespace

MetricResult ndcg_at_k(const RunList& run, const Qrels& qrels, int k, int threads) {
  if (k < 1) throw ConfigError("ndcg cutoff must be >= 1");
  return per_query_metric(run, qrels, threads, [k](const auto& docs, const auto& judged) {
    double dcg = 0.0;
    for (std::size_t r = 0; r < docs.size() && r < static_cast<std::size_t>(k); ++r)
      dcg += gain(grade_of(judged, docs[r])) / std::log2(static_cast<double>(r) + 2.0);
    std::vector<int> grades;
    for (const auto& [doc, g] : judged)
      if (g > 0) grades.push_back(g);
    std::sort(grades.begin(), grades.end(), std::greater<>());
    double ideal = 0.0;
    for (std::size_t r = 0; r < grades.size() && r < static_cast<std::size_t>(k); ++r)
      ideal += gain(grades[r]) / std::log2(static_cast<double>(r) + 2.0);
    return ideal > 0.0 ? dcg / ideal : 0.0;
  });
}

MetricResult map_metric(const RunList& run, const Qrels& qrels, int threads) {
  return per_query_metric(run, qrels, threads, [](const auto& docs, const auto& judged) {
    int total_relevant = 0;
    for (const auto& [doc, g] : judged)
      if (g > 0) ++total_relevant;
    int hits = 0;
    double sum = 0.0;
    for (std::size_t r = 0; r < docs.size(); ++r) {
      if (grade_of(judged, docs[r]) > 0) {
        ++hits;
        sum += static_cast<double>(hits) / (static_cast<double>(r) + 1.0);
      }
    }
    return total_relevant > 0 ? sum / total_relevant : 0.0;
  });
}

MetricResult precision_at_k(const RunList& run, const Qrels& qrels, int k, int threads) {
  if (k < 1) throw ConfigError("precision cutoff must be >= 1");
  return per_query_metric(run, qrels, threads, [k](const auto& docs, const auto& judged) {
    int hits = 0;
    for (std::size_t r = 0; r < docs.size() && r < static_cast<std::size_t>(k); ++r)
      if (grade_of(judged, docs[r]) > 0) ++hits;
    return static_cast<double>(hits) / k;
  });
}

MetricResult err_at_k(const RunList& run, const Qrels& qrels, int k, int threads) {
  if (k < 1) throw ConfigError("err cutoff must be >= 1");
  const int max_grade = qrels.max_grade();
  const double denom = std::pow(2.0, max_grade);
  return per_query_metric(run, qrels, threads, [k, denom](const auto& docs, const auto& judged) {
    double err = 0.0;
    double continue_p = 1.0;
    for (std::size_t r = 0; r < docs.size() && r < static_cast<std::size_t>(k); ++r) {
      const double stop = gain(grade_of(judged, docs[r])) / denom;
      err += continue_p * stop / (static_cast<double>(r) + 1.0);
      continue_p *= 1.0 - stop;
    }
    return err;
  });
}

MetricResult compute_metric(const std::string& name, const RunList& run, const Qrels& qrels,
                            int threads) {
  std::string base = name;
  int k = 0;
  const auto at = name.find('@');
  if (at != std::string::npos) {
    base = name.substr(0, at);
    try {
      k = std::stoi(name.substr(at + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad metric cutoff in: " + name);
    }
  }
  if (base == "ndcg") return ndcg_at_k(run, qrels, k, threads);
  if (base == "map") return map_metric(run, qrels, threads);
  if (base == "p" || base == "precision") return precision_at_k(run, qrels, k, threads);
  if (base == "err") return err_at_k(run, qrels, k, threads);
  throw ConfigError("unknown metric: " + name);
}

std::string format_metric_report(const std::string& name, const MetricResult& result,
                                 bool per_query) {
  std::ostringstream out;
  char buf[64];
  if (per_query) {
    for (const auto& [qid, value] : result.per_query) {
      std::snprintf(buf, sizeof buf, "%.6f", value);
      out << name << '\t' << qid << '\t' << buf << '\n';
    }
  }
  std::snprintf(buf, sizeof buf, "%.6f", result.mean);
  out << name << '\t' << "all" << '\t' << buf << '\n';
  return out.str();
}

FoldSpec make_folds(std::vector<std::string> query_ids, int k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("fold count must be >= 1");
  if (static_cast<int>(query_ids.size()) < k)
    throw DataError("fewer queries than folds");
  SplitMix64 rng(seed);
  seeded_shuffle(query_ids, rng);
  FoldSpec spec;
  spec.folds.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < query_ids.size(); ++i)
    spec.folds[i % static_cast<std::size_t>(k)].push_back(query_ids[i]);
  return spec;
}

void write_passage_judgments(const std::string& path, const PassageJudgmentMap& pmap) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  for (const auto& [qid, docs] : pmap.entries)
    for (const auto& [did, grades] : docs) {
      nlohmann::json record{{"query_id", qid}, {"doc_id", did}, {"grades", grades}};
      out << record.dump() << '\n';
    }
}

PassageJudgmentMap read_passage_judgments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  PassageJudgmentMap pmap;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      pmap.entries[j.at("query_id").get<std::string>()][j.at("doc_id").get<std::string>()] =
          j.at("grades").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": invalid record: " + e.what());
    }
  }
  return pmap;
}

PassageHistogram relevant_passage_histogram(const PassageJudgmentMap& pmap, const Qrels& qrels,
                                            int passage_threshold, int doc_filter) {
  if (pmap.entries.empty()) throw DataError("relevant_passage_histogram: empty judgment map");
  int max_grade_seen = 0;
  int qualifying = 0;
  int exactly_one = 0, at_most_two = 0, three_plus = 0;
  for (const auto& [qid, docs] : pmap.entries) {
    for (const auto& [did, grades] : docs) {
      for (int g : grades) max_grade_seen = std::max(max_grade_seen, g);
      if (qrels.grade(qid, did) < doc_filter) continue;
      ++qualifying;
      int relevant = 0;
      for (int g : grades)
        if (g >= passage_threshold) ++relevant;
      if (relevant == 1) ++exactly_one;
      if (relevant <= 2) ++at_most_two;
      if (relevant >= 3) ++three_plus;
    }
  }
  if (passage_threshold > max_grade_seen)
    throw DataError("relevant_passage_histogram: passage_threshold above every grade");
  if (qualifying == 0) throw DataError("relevant_passage_histogram: no qualifying documents");
  PassageHistogram hist;
  hist.qualifying_docs = qualifying;
  hist.pct_exactly_one = 100.0 * exactly_one / qualifying;
  hist.pct_at_most_two = 100.0 * at_most_two / qualifying;
  hist.pct_three_plus = 100.0 * three_plus / qualifying;
  return hist;
}

std::vector<int> collapse_sentences(const std::vector<SentenceJudgment>& sentences, int max_len,
                                    int relevant_threshold) {
  if (max_len < 1) throw ConfigError("collapse_sentences: max_len must be >= 1");
  std::vector<int> passage_grades;
  bool open = false;
  int span_start = 0;
  int grade = 0;
  auto close = [&] {
    if (open) passage_grades.push_back(grade);
    open = false;
  };
  for (const auto& s : sentences) {
    const bool relevant = s.grade >= relevant_threshold;
    if (open) {
      if (s.offset + s.length - span_start <= max_len) {
        grade = std::max(grade, s.grade);
        continue;
      }
      close();
    }
    if (relevant) {
      open = true;
      span_start = s.offset;
      grade = s.grade;
      if (s.length > max_len) close();  // oversized sentence forms its own passage
    }
  }
  close();
  return passage_grades;
}

}  // namespace parade

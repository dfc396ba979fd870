#include "parade/index.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace parade {

void Bm25Params::validate() const {
  if (k1 <= 0.0) throw ConfigError("bm25 k1 must be positive");
  if (b < 0.0 || b > 1.0) throw ConfigError("bm25 b must lie in [0, 1]");
}

void Rm3Params::validate() const {
  if (fb_docs < 1) throw ConfigError("rm3 fb_docs must be positive");
  if (fb_terms < 0) throw ConfigError("rm3 fb_terms must be non-negative");
  if (original_weight < 0.0 || original_weight > 1.0)
    throw ConfigError("rm3 original_weight must lie in [0, 1]");
}

int InvertedIndex::df(TokenId term) const {
  auto it = postings.find(term);
  return it == postings.end() ? 0 : static_cast<int>(it->second.size());
}

InvertedIndex build_index(const std::vector<Document>& docs) {
  if (docs.empty()) throw DataError("cannot build an index over an empty corpus");
  InvertedIndex index;
  index.doc_count = static_cast<int>(docs.size());
  index.doc_ids.reserve(docs.size());
  index.doc_lengths.reserve(docs.size());
  for (int ordinal = 0; ordinal < index.doc_count; ++ordinal) {
    const auto& doc = docs[static_cast<std::size_t>(ordinal)];
    index.doc_ids.push_back(doc.doc_id);
    index.doc_lengths.push_back(static_cast<int>(doc.tokens.size()));
    std::map<TokenId, int> tf;
    for (TokenId t : doc.tokens) ++tf[t];
    for (const auto& [term, count] : tf) index.postings[term].push_back(Posting{ordinal, count});
  }
  const long long total =
      std::accumulate(index.doc_lengths.begin(), index.doc_lengths.end(), 0ll);
  index.avg_doc_length = static_cast<double>(total) / index.doc_count;
  return index;
}

void save_index(const std::string& path, const InvertedIndex& index) {
  nlohmann::json j;
  j["doc_ids"] = index.doc_ids;
  j["doc_lengths"] = index.doc_lengths;
  j["avg_doc_length"] = index.avg_doc_length;
  j["doc_count"] = index.doc_count;
  auto& post = j["postings"] = nlohmann::json::object();
  for (const auto& [term, plist] : index.postings) {
    nlohmann::json flat = nlohmann::json::array();
    for (const auto& p : plist) {
      flat.push_back(p.doc);
      flat.push_back(p.tf);
    }
    post[std::to_string(term)] = std::move(flat);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  out << j.dump() << '\n';
}

InvertedIndex load_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid index file: " + e.what());
  }
  InvertedIndex index;
  try {
    index.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
    index.doc_lengths = j.at("doc_lengths").get<std::vector<int>>();
    index.avg_doc_length = j.at("avg_doc_length").get<double>();
    index.doc_count = j.at("doc_count").get<int>();
    for (const auto& [key, flat] : j.at("postings").items()) {
      auto& plist = index.postings[static_cast<TokenId>(std::stol(key))];
      for (std::size_t i = 0; i + 1 < flat.size(); i += 2)
        plist.push_back(Posting{flat[i].get<int>(), flat[i + 1].get<int>()});
    }
  } catch (const std::exception& e) {
    throw DataError(path + ": invalid index file: " + e.what());
  }
  return index;
}

namespace {

double idf(const InvertedIndex& index, int df) {
  return std::log((index.doc_count - df + 0.5) / (df + 0.5) + 1.0);
}

double term_doc_score(const InvertedIndex& index, const Bm25Params& params, int tf, int doc) {
  const double norm_len = index.doc_lengths[static_cast<std::size_t>(doc)] / index.avg_doc_length;
  return tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm_len));
}

std::vector<RunEntry> top_k(const InvertedIndex& index, const std::vector<double>& scores,
                            int k) {
  std::vector<int> hits;
  for (int doc = 0; doc < index.doc_count; ++doc)
    if (scores[static_cast<std::size_t>(doc)] != 0.0) hits.push_back(doc);
  std::vector<RunEntry> out;
  out.reserve(hits.size());
  for (int doc : hits)
    out.push_back(RunEntry{index.doc_ids[static_cast<std::size_t>(doc)],
                           scores[static_cast<std::size_t>(doc)]});
  std::sort(out.begin(), out.end(), run_order_less);
  if (static_cast<int>(out.size()) > k) out.resize(static_cast<std::size_t>(k));
  return out;
}

}  // namespace

std::vector<RunEntry> bm25_search(const InvertedIndex& index, const TokenSequence& query,
                                  const Bm25Params& params, int k) {
  params.validate();
  if (k < 1) throw ConfigError("bm25_search requires k >= 1");
  WeightedQuery wquery;
  for (TokenId t : query) wquery[t] += 1.0;
  return weighted_search(index, wquery, params, k);
}

std::vector<RunEntry> weighted_search(const InvertedIndex& index, const WeightedQuery& wquery,
                                      const Bm25Params& params, int k) {
  params.validate();
  if (k < 1) throw ConfigError("weighted_search requires k >= 1");
  std::vector<double> scores(static_cast<std::size_t>(index.doc_count), 0.0);
  for (const auto& [term, weight] : wquery) {
    if (weight == 0.0) continue;
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;
    const double w_idf = weight * idf(index, static_cast<int>(it->second.size()));
    for (const auto& posting : it->second)
      scores[static_cast<std::size_t>(posting.doc)] +=
          w_idf * term_doc_score(index, params, posting.tf, posting.doc);
  }
  return top_k(index, scores, k);
}

WeightedQuery rm3_expand(const InvertedIndex& index, const TokenSequence& query,
                         const std::vector<RunEntry>& first_pass, const Rm3Params& params) {
  params.validate();
  if (first_pass.empty()) throw DataError("rm3_expand requires a non-empty first pass");
  if (query.empty()) throw DataError("rm3_expand requires a non-empty query");

  WeightedQuery original;
  for (TokenId t : query) original[t] += 1.0 / static_cast<double>(query.size());
  if (params.fb_terms == 0 || params.original_weight == 1.0) return original;

  // Feedback docs weighted by their normalized first-pass scores.
  const int fb = std::min<int>(params.fb_docs, static_cast<int>(first_pass.size()));
  std::map<std::string, int> ordinal_of;
  for (int doc = 0; doc < index.doc_count; ++doc)
    ordinal_of[index.doc_ids[static_cast<std::size_t>(doc)]] = doc;
  double score_mass = 0.0;
  for (int i = 0; i < fb; ++i) score_mass += first_pass[static_cast<std::size_t>(i)].score;
  if (score_mass <= 0.0) return original;

  // P(t|R) = sum over feedback docs of P(doc) * tf(t, doc) / len(doc).
  std::map<TokenId, double> relevance_model;
  for (int i = 0; i < fb; ++i) {
    const auto& entry = first_pass[static_cast<std::size_t>(i)];
    auto found = ordinal_of.find(entry.doc_id);
    if (found == ordinal_of.end())
      throw DataError("rm3_expand: feedback doc not in index: " + entry.doc_id);
    const int doc = found->second;
    const double doc_weight = entry.score / score_mass;
    const double len = index.doc_lengths[static_cast<std::size_t>(doc)];
    if (len <= 0.0) continue;
    for (const auto& [term, plist] : index.postings) {
      auto posting = std::lower_bound(plist.begin(), plist.end(), doc,
                                      [](const Posting& p, int d) { return p.doc < d; });
      if (posting != plist.end() && posting->doc == doc)
        relevance_model[term] += doc_weight * posting->tf / len;
    }
  }

  // Keep the fb_terms heaviest terms; ties break on ascending term id.
  std::vector<std::pair<TokenId, double>> ranked(relevance_model.begin(), relevance_model.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(ranked.size()) > params.fb_terms)
    ranked.resize(static_cast<std::size_t>(params.fb_terms));
  double kept_mass = 0.0;
  for (const auto& [term, w] : ranked) kept_mass += w;
  if (kept_mass <= 0.0) return original;

  WeightedQuery expanded;
  for (const auto& [term, w] : ranked)
    expanded[term] += (1.0 - params.original_weight) * w / kept_mass;
  for (const auto& [term, w] : original) expanded[term] += params.original_weight * w;
  return expanded;
}

}  // namespace parade

#include "parade/chunk.hpp"

#include "parade/rng.hpp"

#include <algorithm>

namespace parade {

void ChunkConfig::validate() const {
  if (stride <= 0 || stride > window) throw ConfigError("chunk stride must satisfy 0 < stride <= window");
  if (max_passages < 1) throw ConfigError("chunk max_passages must be >= 1");
  if (max_seq_len < 8) throw ConfigError("chunk max_seq_len must be >= 8");
}

std::vector<Passage> split_passages(const TokenSequence& doc, const ChunkConfig& cfg) {
  cfg.validate();
  std::vector<Passage> out;
  const int len = static_cast<int>(doc.size());
  if (len == 0) return out;
  int start = 0;
  for (;;) {
    const int plen = std::min(cfg.window, len - start);
    Passage p;
    p.start = start;
    p.tokens.assign(doc.begin() + start, doc.begin() + start + plen);
    out.push_back(std::move(p));
    if (start + cfg.window >= len) break;  // next window would add nothing new
    start += cfg.stride;
  }
  return out;
}

PassageSet cap_passages(std::vector<Passage> passages, const ChunkConfig& cfg,
                        std::uint64_t rng_seed) {
  cfg.validate();
  PassageSet set;
  const int count = static_cast<int>(passages.size());
  if (count > cfg.max_passages) {
    if (cfg.max_passages < 2)
      throw ConfigError("cap_passages: max_passages < 2 cannot keep both boundary passages");
    SplitMix64 rng(rng_seed);
    std::vector<int> keep{0};
    auto interior = sample_without_replacement(1, count - 1, cfg.max_passages - 2, rng);
    keep.insert(keep.end(), interior.begin(), interior.end());
    keep.push_back(count - 1);
    std::vector<Passage> kept;
    kept.reserve(keep.size());
    for (int i : keep) kept.push_back(std::move(passages[static_cast<std::size_t>(i)]));
    passages = std::move(kept);
  }
  set.mask.assign(static_cast<std::size_t>(cfg.max_passages), false);
  for (std::size_t i = 0; i < passages.size(); ++i) set.mask[i] = true;
  set.passages = std::move(passages);
  return set;
}

EncoderInput build_encoder_input(const TokenSequence& query, const TokenSequence& passage,
                                 const ChunkConfig& cfg) {
  cfg.validate();
  const int budget = cfg.max_seq_len - 3;  // CLS + two SEPs
  int q_len = static_cast<int>(query.size());
  int p_len = static_cast<int>(passage.size());
  if (q_len + p_len > budget) {
    p_len = std::max(0, budget - q_len);
    q_len = std::min(q_len, budget);
  }
  EncoderInput input;
  input.ids.reserve(static_cast<std::size_t>(cfg.max_seq_len));
  input.ids.push_back(kClsId);
  input.ids.insert(input.ids.end(), query.begin(), query.begin() + q_len);
  input.ids.push_back(kSepId);
  input.ids.insert(input.ids.end(), passage.begin(), passage.begin() + p_len);
  input.ids.push_back(kSepId);
  input.real_len = static_cast<int>(input.ids.size());
  input.ids.resize(static_cast<std::size_t>(cfg.max_seq_len), kPadId);
  input.attn_mask.assign(static_cast<std::size_t>(cfg.max_seq_len), false);
  for (int i = 0; i < input.real_len; ++i) input.attn_mask[static_cast<std::size_t>(i)] = true;
  return input;
}

}  // namespace parade

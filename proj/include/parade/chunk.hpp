#pragma once

#include "parade/types.hpp"

#include <cstdint>
#include <vector>

namespace parade {

// Sliding-window passage extraction plus slot capping.
struct ChunkConfig {
  int window = 225;        // tokens per passage
  int stride = 200;        // tokens between passage starts
  int max_passages = 16;   // slot count after capping
  int max_seq_len = 256;   // encoder input cap

  void validate() const;
};

struct Passage {
  int start = 0;
  TokenSequence tokens;
};

// Fixed-slot passage container. Real passages occupy a prefix of the slots,
// ordered by start offset; `mask[i]` is true iff slot i is real.
struct PassageSet {
  std::vector<Passage> passages;
  std::vector<bool> mask;

  int real_count() const { return static_cast<int>(passages.size()); }
};

// Encoder input layout: [CLS] query [SEP] passage [SEP] PAD...
struct EncoderInput {
  std::vector<TokenId> ids;
  std::vector<bool> attn_mask;
  int real_len = 0;  // non-PAD prefix length
};

// Passages start at 0, stride, 2*stride, ...; the trailing fragment is kept
// when it adds uncovered tokens. An empty document yields no passages.
std::vector<Passage> split_passages(const TokenSequence& doc, const ChunkConfig& cfg);

// Keep everything when it fits; otherwise always keep the first and last
// passage and sample the interior uniformly without replacement, re-sorted by
// start offset.
PassageSet cap_passages(std::vector<Passage> passages, const ChunkConfig& cfg,
                        std::uint64_t rng_seed);

// Over-budget inputs truncate the passage tail first, then the query tail.
EncoderInput build_encoder_input(const TokenSequence& query, const TokenSequence& passage,
                                 const ChunkConfig& cfg);

}  // namespace parade

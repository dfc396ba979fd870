#pragma once

#include "parade/chunk.hpp"
#include "parade/params.hpp"
#include "parade/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace parade {

struct EncoderConfig {
  int d = 64;
  int n_layers = 2;
  int n_heads = 4;
  int ffn_mult = 4;
  int max_seq_len = 256;
  int vocab_size = 4096;
  std::uint64_t seed = 42;

  int head_dim() const { return d / n_heads; }
  int ffn_dim() const { return d * ffn_mult; }
  void validate() const;
};

// Views into one transformer layer's tensors. Biases are 1 x n rows,
// layer-norm gain/bias are 1 x d.
struct LayerParams {
  const Matrix *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
  const Matrix *w1, *b1, *w2, *b2;
  const Matrix *ln1g, *ln1b, *ln2g, *ln2b;
  int n_heads = 1;
};

struct LayerGrads {
  Matrix *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
  Matrix *w1, *b1, *w2, *b2;
  Matrix *ln1g, *ln1b, *ln2g, *ln2b;
};

// Activations recorded by a forward pass, consumed once by the backward pass.
struct LayerNormTape {
  Matrix xhat;
  Vector inv_std;
};

struct LayerTape {
  Matrix x;                   // layer input, S x d
  Matrix q, k, v;             // projected, S x d
  std::vector<Matrix> attn;   // per-head attention probabilities, S x S
  Matrix ctx;                 // concatenated head outputs, S x d
  LayerNormTape ln1;
  Matrix hn;                  // LayerNorm(x + attention) — FFN input
  Matrix f1;                  // FFN pre-activation, S x ffn_dim
  LayerNormTape ln2;
  Matrix out;                 // layer output, S x d
};

struct PassageTape {
  std::vector<TokenId> ids;   // non-PAD prefix actually encoded
  std::vector<LayerTape> layers;
};

// Registers one layer's tensors under `prefix` (e.g. "enc.l0").
void add_layer_tensors(ParamStore& store, const std::string& prefix, int d, int ffn_mult);
LayerParams layer_params(const ParamStore& store, const std::string& prefix, int n_heads);
LayerGrads layer_grads(ParamStore& store, const std::string& prefix);

// Post-layer-norm residual transformer layer: h = LN(x + MultiHead(x)),
// out = LN(h + FFN(h)). Masked positions are excluded from attention by
// forcing their logits to -inf; at least one position must be unmasked.
Matrix transformer_layer_forward(const Matrix& x, const std::vector<bool>& mask,
                                 const LayerParams& p, LayerTape* tape);

// Returns d_loss/d_x and accumulates parameter gradients.
Matrix transformer_layer_backward(const LayerTape& tape, const Matrix& d_out,
                                  const LayerParams& p, const LayerGrads& g);

// Registers embedding plus per-layer tensors under the "enc." prefix.
void add_encoder_tensors(ParamStore& store, const EncoderConfig& cfg);

// Fresh encoder-only store, deterministically initialized from cfg.seed.
ParamStore init_params(const EncoderConfig& cfg);

// CLS relevance representation: token + position embeddings through n_layers
// transformer layers; row 0 of the last layer. Trailing PAD positions are
// skipped entirely, which is exactly equivalent to masking them.
Vector encode_passage(const EncoderInput& input, const EncoderConfig& cfg,
                      const ParamStore& store, PassageTape* tape = nullptr);

void encode_passage_backward(const PassageTape& tape, const Vector& d_cls,
                             const EncoderConfig& cfg, ParamStore& store);

// Per-passage relevance representations for one document. Row i holds the
// CLS vector of real slot i; masked rows stay zero.
struct RepMatrix {
  Matrix reps;      // max_passages x d
  int n_real = 0;   // real rows form a prefix
};

RepMatrix encode_document(const TokenSequence& query, const PassageSet& pset,
                          const ChunkConfig& chunk, const EncoderConfig& cfg,
                          const ParamStore& store, std::vector<PassageTape>* tapes = nullptr);

void encode_document_backward(const std::vector<PassageTape>& tapes, const Matrix& d_reps,
                              const EncoderConfig& cfg, ParamStore& store);

}  // namespace parade

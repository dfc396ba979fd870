#pragma once

#include "parade/encoder.hpp"
#include "parade/params.hpp"
#include "parade/types.hpp"

#include <string>
#include <vector>

namespace parade {

// Representation aggregators (Max..Transformer) pool per-passage CLS vectors
// into one document vector before scoring; the Score* baselines score each
// passage independently and pool the scalar scores.
enum class AggregatorKind {
  kMax,
  kAvg,
  kSum,
  kAttn,
  kCnn,
  kTransformer,
  kScoreMax,
  kScoreSum,
  kScoreAvg,
  kScoreKMax,
};

bool is_score_aggregator(AggregatorKind kind);
std::string to_string(AggregatorKind kind);
AggregatorKind aggregator_from_string(const std::string& name);

struct AggConfig {
  AggregatorKind kind = AggregatorKind::kMax;
  int kmax_k = 3;                 // k for k-max score pooling
  bool head_bias = true;          // bias on the scoring head and attn logits
  bool positions = true;          // passage-position embeddings (transformer)
  bool cnn_score_inputs = false;  // include level-0 inputs in CNN scoring
  int cnn_levels = 4;
  int cnn_hidden = 0;             // scoring-FFN hidden width; 0 means d
  int agg_layers = 2;             // transformer aggregator depth
  int max_positions = 0;          // passage-position table size; 0 means the
                                  // chunker slot count (set it higher to allow
                                  // evaluating with more passages than trained)

  int hidden_or(int d) const { return cnn_hidden > 0 ? cnn_hidden : d; }
  void validate() const;
};

// Registers aggregator + scoring-head tensors (prefixes "agg." and "head.").
void add_aggregator_tensors(ParamStore& store, const AggConfig& agg, const EncoderConfig& enc,
                            int max_passages);

// --- individual aggregators -------------------------------------------------

// Element-wise max over real rows; ties keep the lowest slot.
Vector agg_max(const RepMatrix& reps, std::vector<Index>* argmax = nullptr);
Vector agg_sum(const RepMatrix& reps);
Vector agg_avg(const RepMatrix& reps);

// Softmax-weighted combination, logits w . p_i (+ bias).
Vector agg_attn(const RepMatrix& reps, const Matrix& w, const Matrix* bias,
                Vector* weights_out = nullptr);

// Hierarchical pairwise convolutions. x[0] is the zero-padded input
// (next power of two rows); x[k+1] = relu(pair conv of x[k]); real[k]
// flags rows derived from at least one real passage.
struct CnnLevels {
  std::vector<Matrix> x;
  std::vector<Matrix> z;                  // pre-activations per conv level
  std::vector<std::vector<bool>> real;
};

CnnLevels agg_cnn(const RepMatrix& reps, const AggConfig& agg, const ParamStore& store);

// [aggregator CLS; p_1..p_n] + position embeddings through agg_layers
// transformer layers; returns the final-layer CLS row.
Vector agg_transformer(const RepMatrix& reps, const AggConfig& agg, const EncoderConfig& enc,
                       const ParamStore& store, Matrix* input_out = nullptr,
                       std::vector<LayerTape>* tapes = nullptr);

// rel = w_d . d_cls (+ bias).
double score_head(const Vector& d_cls, const Matrix& w, const Matrix* bias);

// Shared one-hidden-layer FFN applied to every included CNN representation;
// document score is the sum over real-derived rows.
double score_cnn(const CnnLevels& levels, const AggConfig& agg, const ParamStore& store);

enum class ScoreAggMode { kMax, kSum, kAvg, kKMax };
double aggregate_scores(const std::vector<double>& scores, ScoreAggMode mode, int k = 3);

// --- full scoring pass with tape ---------------------------------------------

struct AggTape {
  int n_real = 0;
  Vector d_cls;
  std::vector<Index> argmax;          // Max
  Vector attn_weights;                // Attn
  CnnLevels cnn;                      // Cnn
  Matrix tx_input;                    // Transformer
  std::vector<LayerTape> tx_layers;
  Vector per_scores;                  // Score* baselines
  double score = 0.0;
};

double aggregate_and_score(const RepMatrix& reps, const AggConfig& agg, const EncoderConfig& enc,
                           const ParamStore& store, AggTape* tape = nullptr);

// Accumulates parameter gradients and writes d_loss/d_reps (same shape as
// reps.reps; masked rows stay zero).
void aggregate_and_score_backward(const AggTape& tape, double d_score, const RepMatrix& reps,
                                  const AggConfig& agg, const EncoderConfig& enc,
                                  ParamStore& store, Matrix& d_reps);

}  // namespace parade

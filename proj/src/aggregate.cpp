#include "parade/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace parade {

namespace {

void require_real_rows(const RepMatrix& reps) {
  if (reps.n_real < 1) throw DataError("aggregator requires at least one real passage row");
}

// One shared kernel for every weighted combination so that uniform attention
// weights reproduce agg_avg bit for bit.
Vector weighted_combine(const RepMatrix& reps, const Vector& weights) {
  return reps.reps.topRows(reps.n_real).transpose() * weights;
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

}  // namespace

bool is_score_aggregator(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kScoreMax:
    case AggregatorKind::kScoreSum:
    case AggregatorKind::kScoreAvg:
    case AggregatorKind::kScoreKMax:
      return true;
    default:
      return false;
  }
}

std::string to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kMax: return "max";
    case AggregatorKind::kAvg: return "avg";
    case AggregatorKind::kSum: return "sum";
    case AggregatorKind::kAttn: return "attn";
    case AggregatorKind::kCnn: return "cnn";
    case AggregatorKind::kTransformer: return "transformer";
    case AggregatorKind::kScoreMax: return "score-max";
    case AggregatorKind::kScoreSum: return "score-sum";
    case AggregatorKind::kScoreAvg: return "score-avg";
    case AggregatorKind::kScoreKMax: return "score-kmax";
  }
  throw ConfigError("unknown aggregator kind");
}

AggregatorKind aggregator_from_string(const std::string& name) {
  for (AggregatorKind kind :
       {AggregatorKind::kMax, AggregatorKind::kAvg, AggregatorKind::kSum, AggregatorKind::kAttn,
        AggregatorKind::kCnn, AggregatorKind::kTransformer, AggregatorKind::kScoreMax,
        AggregatorKind::kScoreSum, AggregatorKind::kScoreAvg, AggregatorKind::kScoreKMax}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown aggregator: " + name);
}

void AggConfig::validate() const {
  if (kmax_k < 1) throw ConfigError("kmax_k must be >= 1");
  if (cnn_levels < 1) throw ConfigError("cnn_levels must be >= 1");
  if (agg_layers < 1) throw ConfigError("agg_layers must be >= 1");
}

void add_aggregator_tensors(ParamStore& store, const AggConfig& agg, const EncoderConfig& enc,
                            int max_passages) {
  agg.validate();
  const int d = enc.d;
  store.add("head.w", d, 1);
  if (agg.head_bias) store.add("head.b", 1, 1);
  switch (agg.kind) {
    case AggregatorKind::kAttn:
      store.add("agg.attn.w", d, 1);
      if (agg.head_bias) store.add("agg.attn.b", 1, 1);
      break;
    case AggregatorKind::kCnn: {
      for (int k = 0; k < agg.cnn_levels; ++k) {
        store.add("agg.cnn.k" + std::to_string(k), 2 * d, d);
        store.add("agg.cnn.b" + std::to_string(k), 1, d);
      }
      const int h = agg.hidden_or(d);
      store.add("agg.cnn.ffn.w1", d, h);
      store.add("agg.cnn.ffn.b1", 1, h);
      store.add("agg.cnn.ffn.w2", h, 1);
      store.add("agg.cnn.ffn.b2", 1, 1);
      break;
    }
    case AggregatorKind::kTransformer:
      store.add("agg.tx.cls", 1, d);
      if (agg.positions)
        store.add("agg.tx.pos", std::max(agg.max_positions, max_passages) + 1, d);
      for (int l = 0; l < agg.agg_layers; ++l)
        add_layer_tensors(store, "agg.tx.l" + std::to_string(l), d, enc.ffn_mult);
      break;
    default:
      break;
  }
}

Vector agg_max(const RepMatrix& reps, std::vector<Index>* argmax) {
  require_real_rows(reps);
  const Index d = reps.reps.cols();
  Vector out(d);
  if (argmax) argmax->assign(static_cast<std::size_t>(d), 0);
  for (Index j = 0; j < d; ++j) {
    Index best = 0;
    double best_val = reps.reps(0, j);
    for (Index i = 1; i < reps.n_real; ++i) {
      if (reps.reps(i, j) > best_val) {
        best_val = reps.reps(i, j);
        best = i;
      }
    }
    out(j) = best_val;
    if (argmax) (*argmax)[static_cast<std::size_t>(j)] = best;
  }
  return out;
}

Vector agg_sum(const RepMatrix& reps) {
  require_real_rows(reps);
  return reps.reps.topRows(reps.n_real).colwise().sum().transpose();
}

Vector agg_avg(const RepMatrix& reps) {
  require_real_rows(reps);
  const Vector uniform =
      Vector::Constant(reps.n_real, 1.0 / static_cast<double>(reps.n_real));
  return weighted_combine(reps, uniform);
}

Vector agg_attn(const RepMatrix& reps, const Matrix& w, const Matrix* bias,
                Vector* weights_out) {
  require_real_rows(reps);
  Vector logits = reps.reps.topRows(reps.n_real) * w.col(0);
  if (bias) logits.array() += (*bias)(0, 0);
  const double mx = logits.maxCoeff();
  Vector weights = (logits.array() - mx).exp().matrix();
  weights /= weights.sum();
  if (weights_out) *weights_out = weights;
  return weighted_combine(reps, weights);
}

CnnLevels agg_cnn(const RepMatrix& reps, const AggConfig& agg, const ParamStore& store) {
  require_real_rows(reps);
  const Index d = reps.reps.cols();
  CnnLevels levels;
  const int n0 = next_pow2(reps.n_real);
  Matrix x0 = Matrix::Zero(n0, d);
  x0.topRows(reps.n_real) = reps.reps.topRows(reps.n_real);
  std::vector<bool> real0(static_cast<std::size_t>(n0), false);
  for (int i = 0; i < reps.n_real; ++i) real0[static_cast<std::size_t>(i)] = true;
  levels.x.push_back(std::move(x0));
  levels.real.push_back(std::move(real0));

  for (int k = 0; k < agg.cnn_levels; ++k) {
    const Matrix& in = levels.x.back();
    const std::vector<bool>& in_real = levels.real.back();
    const Matrix& kernel = store.value("agg.cnn.k" + std::to_string(k));
    const Matrix& bias = store.value("agg.cnn.b" + std::to_string(k));
    const Index m = in.rows();
    const Index out_rows = (m + 1) / 2;
    Matrix z(out_rows, d);
    std::vector<bool> real(static_cast<std::size_t>(out_rows), false);
    RowVector pair(2 * d);
    for (Index t = 0; t < out_rows; ++t) {
      pair.leftCols(d) = in.row(2 * t);
      if (2 * t + 1 < m) {
        pair.rightCols(d) = in.row(2 * t + 1);
        real[static_cast<std::size_t>(t)] =
            in_real[static_cast<std::size_t>(2 * t)] || in_real[static_cast<std::size_t>(2 * t + 1)];
      } else {
        pair.rightCols(d).setZero();
        real[static_cast<std::size_t>(t)] = in_real[static_cast<std::size_t>(2 * t)];
      }
      z.row(t) = pair * kernel + bias.row(0);
    }
    levels.z.push_back(z);
    levels.x.push_back(z.cwiseMax(0.0));
    levels.real.push_back(std::move(real));
  }
  return levels;
}

Vector agg_transformer(const RepMatrix& reps, const AggConfig& agg, const EncoderConfig& enc,
                       const ParamStore& store, Matrix* input_out,
                       std::vector<LayerTape>* tapes) {
  require_real_rows(reps);
  const Index d = reps.reps.cols();
  const Index seq = reps.n_real + 1;
  Matrix x(seq, d);
  x.row(0) = store.value("agg.tx.cls").row(0);
  x.bottomRows(reps.n_real) = reps.reps.topRows(reps.n_real);
  if (agg.positions) {
    const Matrix& pos = store.value("agg.tx.pos");
    if (pos.rows() < seq) throw ConfigError("transformer aggregator: too many passages for position table");
    x += pos.topRows(seq);
  }
  if (input_out) *input_out = x;
  if (tapes) tapes->resize(static_cast<std::size_t>(agg.agg_layers));
  const std::vector<bool> mask(static_cast<std::size_t>(seq), true);
  for (int l = 0; l < agg.agg_layers; ++l) {
    const LayerParams p = layer_params(store, "agg.tx.l" + std::to_string(l), enc.n_heads);
    x = transformer_layer_forward(x, mask, p,
                                  tapes ? &(*tapes)[static_cast<std::size_t>(l)] : nullptr);
  }
  return x.row(0).transpose();
}

double score_head(const Vector& d_cls, const Matrix& w, const Matrix* bias) {
  double rel = d_cls.dot(w.col(0));
  if (bias) rel += (*bias)(0, 0);
  return rel;
}

namespace {

double cnn_rep_score(const RowVector& rep, const ParamStore& store) {
  const Matrix& w1 = store.value("agg.cnn.ffn.w1");
  const Matrix& b1 = store.value("agg.cnn.ffn.b1");
  const Matrix& w2 = store.value("agg.cnn.ffn.w2");
  const Matrix& b2 = store.value("agg.cnn.ffn.b2");
  const RowVector hidden = (rep * w1 + b1.row(0)).cwiseMax(0.0);
  return (hidden * w2)(0, 0) + b2(0, 0);
}

}  // namespace

double score_cnn(const CnnLevels& levels, const AggConfig& agg, const ParamStore& store) {
  double total = 0.0;
  const std::size_t first = agg.cnn_score_inputs ? 0 : 1;
  for (std::size_t lv = first; lv < levels.x.size(); ++lv) {
    const Matrix& x = levels.x[lv];
    for (Index t = 0; t < x.rows(); ++t)
      if (levels.real[lv][static_cast<std::size_t>(t)]) total += cnn_rep_score(x.row(t), store);
  }
  return total;
}

double aggregate_scores(const std::vector<double>& scores, ScoreAggMode mode, int k) {
  if (scores.empty()) throw DataError("aggregate_scores requires at least one passage score");
  switch (mode) {
    case ScoreAggMode::kMax:
      return *std::max_element(scores.begin(), scores.end());
    case ScoreAggMode::kSum:
      return std::accumulate(scores.begin(), scores.end(), 0.0);
    case ScoreAggMode::kAvg:
      return std::accumulate(scores.begin(), scores.end(), 0.0) /
             static_cast<double>(scores.size());
    case ScoreAggMode::kKMax: {
      if (k < 1) throw ConfigError("k-max pooling requires k >= 1");
      std::vector<double> sorted(scores);
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      const int kk = std::min<int>(k, static_cast<int>(sorted.size()));
      return std::accumulate(sorted.begin(), sorted.begin() + kk, 0.0) / kk;
    }
  }
  throw ConfigError("unknown score aggregation mode");
}

namespace {

ScoreAggMode score_mode(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kScoreMax: return ScoreAggMode::kMax;
    case AggregatorKind::kScoreSum: return ScoreAggMode::kSum;
    case AggregatorKind::kScoreAvg: return ScoreAggMode::kAvg;
    case AggregatorKind::kScoreKMax: return ScoreAggMode::kKMax;
    default: throw ConfigError("not a score aggregator");
  }
}

}  // namespace

double aggregate_and_score(const RepMatrix& reps, const AggConfig& agg, const EncoderConfig& enc,
                           const ParamStore& store, AggTape* tape) {
  require_real_rows(reps);
  const Matrix& head_w = store.value("head.w");
  const Matrix* head_b = agg.head_bias ? &store.value("head.b") : nullptr;
  AggTape local;
  AggTape& t = tape ? *tape : local;
  t.n_real = reps.n_real;

  double score = 0.0;
  if (is_score_aggregator(agg.kind)) {
    std::vector<double> per(static_cast<std::size_t>(reps.n_real));
    t.per_scores.resize(reps.n_real);
    for (int i = 0; i < reps.n_real; ++i) {
      const double s = score_head(reps.reps.row(i).transpose(), head_w, head_b);
      per[static_cast<std::size_t>(i)] = s;
      t.per_scores(i) = s;
    }
    score = aggregate_scores(per, score_mode(agg.kind), agg.kmax_k);
  } else if (agg.kind == AggregatorKind::kCnn) {
    t.cnn = agg_cnn(reps, agg, store);
    score = score_cnn(t.cnn, agg, store);
  } else {
    switch (agg.kind) {
      case AggregatorKind::kMax: t.d_cls = agg_max(reps, &t.argmax); break;
      case AggregatorKind::kAvg: t.d_cls = agg_avg(reps); break;
      case AggregatorKind::kSum: t.d_cls = agg_sum(reps); break;
      case AggregatorKind::kAttn:
        t.d_cls = agg_attn(reps, store.value("agg.attn.w"),
                           agg.head_bias ? &store.value("agg.attn.b") : nullptr, &t.attn_weights);
        break;
      case AggregatorKind::kTransformer:
        t.d_cls = agg_transformer(reps, agg, enc, store, &t.tx_input, &t.tx_layers);
        break;
      default:
        throw ConfigError("unknown aggregator kind");
    }
    score = score_head(t.d_cls, head_w, head_b);
  }
  t.score = score;
  return score;
}

void aggregate_and_score_backward(const AggTape& tape, double d_score, const RepMatrix& reps,
                                  const AggConfig& agg, const EncoderConfig& enc,
                                  ParamStore& store, Matrix& d_reps) {
  d_reps = Matrix::Zero(reps.reps.rows(), reps.reps.cols());
  const int n = tape.n_real;
  const Index d = reps.reps.cols();
  const Matrix& head_w = store.value("head.w");

  if (is_score_aggregator(agg.kind)) {
    // d(score)/d(per-passage score) by pooling mode, then head backward per
    // passage.
    Vector d_per = Vector::Zero(n);
    switch (score_mode(agg.kind)) {
      case ScoreAggMode::kMax: {
        Index best = 0;
        tape.per_scores.maxCoeff(&best);
        d_per(best) = d_score;
        break;
      }
      case ScoreAggMode::kSum:
        d_per.setConstant(d_score);
        break;
      case ScoreAggMode::kAvg:
        d_per.setConstant(d_score / n);
        break;
      case ScoreAggMode::kKMax: {
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Index{0});
        std::sort(order.begin(), order.end(), [&](Index a, Index b) {
          if (tape.per_scores(a) != tape.per_scores(b))
            return tape.per_scores(a) > tape.per_scores(b);
          return a < b;
        });
        const int kk = std::min<int>(agg.kmax_k, n);
        for (int i = 0; i < kk; ++i) d_per(order[static_cast<std::size_t>(i)]) = d_score / kk;
        break;
      }
    }
    Matrix& g_w = store.grad("head.w");
    for (int i = 0; i < n; ++i) {
      if (d_per(i) == 0.0) continue;
      g_w.col(0) += d_per(i) * reps.reps.row(i).transpose();
      if (agg.head_bias) store.grad("head.b")(0, 0) += d_per(i);
      d_reps.row(i) += d_per(i) * head_w.col(0).transpose();
    }
    return;
  }

  if (agg.kind == AggregatorKind::kCnn) {
    // Scoring FFN backward into every included representation...
    std::vector<Matrix> d_x;
    d_x.reserve(tape.cnn.x.size());
    for (const Matrix& x : tape.cnn.x) d_x.push_back(Matrix::Zero(x.rows(), x.cols()));
    const Matrix& w1 = store.value("agg.cnn.ffn.w1");
    const Matrix& w2 = store.value("agg.cnn.ffn.w2");
    Matrix& g_w1 = store.grad("agg.cnn.ffn.w1");
    Matrix& g_b1 = store.grad("agg.cnn.ffn.b1");
    Matrix& g_w2 = store.grad("agg.cnn.ffn.w2");
    Matrix& g_b2 = store.grad("agg.cnn.ffn.b2");
    const Matrix& b1 = store.value("agg.cnn.ffn.b1");
    const std::size_t first = agg.cnn_score_inputs ? 0 : 1;
    for (std::size_t lv = first; lv < tape.cnn.x.size(); ++lv) {
      const Matrix& x = tape.cnn.x[lv];
      for (Index t = 0; t < x.rows(); ++t) {
        if (!tape.cnn.real[lv][static_cast<std::size_t>(t)]) continue;
        const RowVector pre = x.row(t) * w1 + b1.row(0);
        const RowVector hidden = pre.cwiseMax(0.0);
        // score contribution = hidden * w2 + b2
        g_b2(0, 0) += d_score;
        g_w2.col(0) += d_score * hidden.transpose();
        RowVector d_hidden = d_score * w2.col(0).transpose();
        RowVector d_pre =
            d_hidden.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
        g_b1.row(0) += d_pre;
        g_w1 += x.row(t).transpose() * d_pre;
        d_x[lv].row(t) += d_pre * w1.transpose();
      }
    }
    // ...then conv ladder backward.
    for (int k = agg.cnn_levels - 1; k >= 0; --k) {
      const Matrix& in = tape.cnn.x[static_cast<std::size_t>(k)];
      const Matrix& z = tape.cnn.z[static_cast<std::size_t>(k)];
      const Matrix& kernel = store.value("agg.cnn.k" + std::to_string(k));
      Matrix& g_kernel = store.grad("agg.cnn.k" + std::to_string(k));
      Matrix& g_bias = store.grad("agg.cnn.b" + std::to_string(k));
      const Matrix& d_out = d_x[static_cast<std::size_t>(k + 1)];
      RowVector pair(2 * d);
      for (Index t = 0; t < d_out.rows(); ++t) {
        if (d_out.row(t).isZero(0.0)) continue;
        const RowVector d_z =
            d_out.row(t).cwiseProduct((z.row(t).array() > 0.0).cast<double>().matrix());
        pair.leftCols(d) = in.row(2 * t);
        if (2 * t + 1 < in.rows())
          pair.rightCols(d) = in.row(2 * t + 1);
        else
          pair.rightCols(d).setZero();
        g_kernel += pair.transpose() * d_z;
        g_bias.row(0) += d_z;
        const RowVector d_pair = d_z * kernel.transpose();
        d_x[static_cast<std::size_t>(k)].row(2 * t) += d_pair.leftCols(d);
        if (2 * t + 1 < in.rows())
          d_x[static_cast<std::size_t>(k)].row(2 * t + 1) += d_pair.rightCols(d);
      }
    }
    d_reps.topRows(n) = d_x[0].topRows(n);
    return;
  }

  // Head-based aggregators: rel = head(d_cls).
  Vector d_dcls = d_score * head_w.col(0);
  store.grad("head.w").col(0) += d_score * tape.d_cls;
  if (agg.head_bias) store.grad("head.b")(0, 0) += d_score;

  switch (agg.kind) {
    case AggregatorKind::kMax:
      for (Index j = 0; j < d; ++j)
        d_reps(tape.argmax[static_cast<std::size_t>(j)], j) += d_dcls(j);
      break;
    case AggregatorKind::kSum:
      for (int i = 0; i < n; ++i) d_reps.row(i) += d_dcls.transpose();
      break;
    case AggregatorKind::kAvg:
      for (int i = 0; i < n; ++i) d_reps.row(i) += d_dcls.transpose() / n;
      break;
    case AggregatorKind::kAttn: {
      const Vector& w = tape.attn_weights;
      Vector d_weights = reps.reps.topRows(n) * d_dcls;
      const double dot = w.dot(d_weights);
      Vector d_logits = (w.array() * (d_weights.array() - dot)).matrix();
      store.grad("agg.attn.w").col(0) += reps.reps.topRows(n).transpose() * d_logits;
      if (agg.head_bias) store.grad("agg.attn.b")(0, 0) += d_logits.sum();
      const Matrix& attn_w = store.value("agg.attn.w");
      for (int i = 0; i < n; ++i)
        d_reps.row(i) += w(i) * d_dcls.transpose() + d_logits(i) * attn_w.col(0).transpose();
      break;
    }
    case AggregatorKind::kTransformer: {
      Matrix d_x = Matrix::Zero(n + 1, d);
      d_x.row(0) = d_dcls.transpose();
      for (int l = agg.agg_layers - 1; l >= 0; --l) {
        const std::string prefix = "agg.tx.l" + std::to_string(l);
        const LayerParams p = layer_params(store, prefix, enc.n_heads);
        const LayerGrads g = layer_grads(store, prefix);
        d_x = transformer_layer_backward(tape.tx_layers[static_cast<std::size_t>(l)], d_x, p, g);
      }
      store.grad("agg.tx.cls").row(0) += d_x.row(0);
      if (agg.positions) store.grad("agg.tx.pos").topRows(n + 1) += d_x;
      d_reps.topRows(n) += d_x.bottomRows(n);
      break;
    }
    default:
      throw ConfigError("unknown aggregator kind");
  }
}

}  // namespace parade

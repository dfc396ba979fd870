#include "parade/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace parade {

namespace {

constexpr double kLayerNormEps = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Row-wise layer norm with gain/bias; records xhat and 1/sigma for backward.
Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormTape* tape) {
  const Index rows = x.rows(), cols = x.cols();
  Matrix xhat(rows, cols);
  Vector inv_std(rows);
  for (Index i = 0; i < rows; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double istd = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mean) * istd;
    inv_std(i) = istd;
  }
  Matrix out =
      ((xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array()).matrix();
  if (tape) {
    tape->xhat = std::move(xhat);
    tape->inv_std = std::move(inv_std);
  }
  return out;
}

// d_x from d_y; accumulates gain/bias gradients.
Matrix layer_norm_backward(const LayerNormTape& tape, const Matrix& d_y, const Matrix& gain,
                           Matrix& d_gain, Matrix& d_bias) {
  const Index rows = d_y.rows(), cols = d_y.cols();
  d_gain.row(0) += (d_y.array() * tape.xhat.array()).colwise().sum().matrix();
  d_bias.row(0) += d_y.colwise().sum();
  Matrix d_x(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const RowVector d_xhat = d_y.row(i).cwiseProduct(gain.row(0));
    const double m1 = d_xhat.mean();
    const double m2 = d_xhat.cwiseProduct(tape.xhat.row(i)).mean();
    d_x.row(i) =
        (tape.inv_std(i) * (d_xhat.array() - m1 - tape.xhat.row(i).array() * m2)).matrix();
  }
  return d_x;
}

}  // namespace

void EncoderConfig::validate() const {
  if (d < 1 || n_layers < 1 || n_heads < 1 || ffn_mult < 1 || max_seq_len < 1 || vocab_size < 4)
    throw ConfigError("encoder config fields must be positive (vocab_size >= 4)");
  if (d % n_heads != 0) throw ConfigError("encoder hidden size must be divisible by n_heads");
}

void add_layer_tensors(ParamStore& store, const std::string& prefix, int d, int ffn_mult) {
  const int dff = d * ffn_mult;
  store.add(prefix + ".wq", d, d);
  store.add(prefix + ".bq", 1, d);
  store.add(prefix + ".wk", d, d);
  store.add(prefix + ".bk", 1, d);
  store.add(prefix + ".wv", d, d);
  store.add(prefix + ".bv", 1, d);
  store.add(prefix + ".wo", d, d);
  store.add(prefix + ".bo", 1, d);
  store.add(prefix + ".ffn.w1", d, dff);
  store.add(prefix + ".ffn.b1", 1, dff);
  store.add(prefix + ".ffn.w2", dff, d);
  store.add(prefix + ".ffn.b2", 1, d);
  store.add(prefix + ".ln1.g", 1, d);
  store.add(prefix + ".ln1.b", 1, d);
  store.add(prefix + ".ln2.g", 1, d);
  store.add(prefix + ".ln2.b", 1, d);
}

LayerParams layer_params(const ParamStore& store, const std::string& prefix, int n_heads) {
  LayerParams p;
  p.wq = &store.value(prefix + ".wq");
  p.bq = &store.value(prefix + ".bq");
  p.wk = &store.value(prefix + ".wk");
  p.bk = &store.value(prefix + ".bk");
  p.wv = &store.value(prefix + ".wv");
  p.bv = &store.value(prefix + ".bv");
  p.wo = &store.value(prefix + ".wo");
  p.bo = &store.value(prefix + ".bo");
  p.w1 = &store.value(prefix + ".ffn.w1");
  p.b1 = &store.value(prefix + ".ffn.b1");
  p.w2 = &store.value(prefix + ".ffn.w2");
  p.b2 = &store.value(prefix + ".ffn.b2");
  p.ln1g = &store.value(prefix + ".ln1.g");
  p.ln1b = &store.value(prefix + ".ln1.b");
  p.ln2g = &store.value(prefix + ".ln2.g");
  p.ln2b = &store.value(prefix + ".ln2.b");
  p.n_heads = n_heads;
  return p;
}

LayerGrads layer_grads(ParamStore& store, const std::string& prefix) {
  LayerGrads g;
  g.wq = &store.grad(prefix + ".wq");
  g.bq = &store.grad(prefix + ".bq");
  g.wk = &store.grad(prefix + ".wk");
  g.bk = &store.grad(prefix + ".bk");
  g.wv = &store.grad(prefix + ".wv");
  g.bv = &store.grad(prefix + ".bv");
  g.wo = &store.grad(prefix + ".wo");
  g.bo = &store.grad(prefix + ".bo");
  g.w1 = &store.grad(prefix + ".ffn.w1");
  g.b1 = &store.grad(prefix + ".ffn.b1");
  g.w2 = &store.grad(prefix + ".ffn.w2");
  g.b2 = &store.grad(prefix + ".ffn.b2");
  g.ln1g = &store.grad(prefix + ".ln1.g");
  g.ln1b = &store.grad(prefix + ".ln1.b");
  g.ln2g = &store.grad(prefix + ".ln2.g");
  g.ln2b = &store.grad(prefix + ".ln2.b");
  return g;
}

Matrix transformer_layer_forward(const Matrix& x, const std::vector<bool>& mask,
                                 const LayerParams& p, LayerTape* tape) {
  const Index seq = x.rows();
  const Index d = x.cols();
  if (p.wq->rows() != d) throw ConfigError("transformer layer: input width mismatch");
  if (static_cast<Index>(mask.size()) != seq)
    throw ConfigError("transformer layer: mask length mismatch");
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    throw ConfigError("transformer layer: at least one position must be unmasked");
  const int heads = p.n_heads;
  const Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix q = (x * *p.wq).rowwise() + p.bq->row(0);
  Matrix k = (x * *p.wk).rowwise() + p.bk->row(0);
  Matrix v = (x * *p.wv).rowwise() + p.bv->row(0);

  Matrix ctx(seq, d);
  std::vector<Matrix> attn(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.middleCols(h * dh, dh);
    const auto kh = k.middleCols(h * dh, dh);
    Matrix scores = qh * kh.transpose() * scale;
    Matrix& a = attn[static_cast<std::size_t>(h)];
    a.resize(seq, seq);
    for (Index i = 0; i < seq; ++i) {
      double mx = kNegInf;
      for (Index j = 0; j < seq; ++j)
        if (mask[static_cast<std::size_t>(j)]) mx = std::max(mx, scores(i, j));
      double sum = 0.0;
      for (Index j = 0; j < seq; ++j) {
        if (mask[static_cast<std::size_t>(j)]) {
          const double e = std::exp(scores(i, j) - mx);
          a(i, j) = e;
          sum += e;
        } else {
          a(i, j) = 0.0;
        }
      }
      a.row(i) /= sum;
    }
    ctx.middleCols(h * dh, dh) = a * v.middleCols(h * dh, dh);
  }

  Matrix h1 = x + ((ctx * *p.wo).rowwise() + p.bo->row(0)).eval();
  LayerNormTape ln1;
  Matrix hn = layer_norm(h1, *p.ln1g, *p.ln1b, &ln1);
  Matrix f1 = (hn * *p.w1).rowwise() + p.b1->row(0);
  Matrix f2 = (f1.cwiseMax(0.0) * *p.w2).rowwise() + p.b2->row(0);
  Matrix h2 = hn + f2;
  LayerNormTape ln2;
  Matrix out = layer_norm(h2, *p.ln2g, *p.ln2b, &ln2);

  if (tape) {
    tape->x = x;
    tape->q = std::move(q);
    tape->k = std::move(k);
    tape->v = std::move(v);
    tape->attn = std::move(attn);
    tape->ctx = std::move(ctx);
    tape->ln1 = std::move(ln1);
    tape->hn = std::move(hn);
    tape->f1 = std::move(f1);
    tape->ln2 = std::move(ln2);
    tape->out = out;
  }
  return out;
}

Matrix transformer_layer_backward(const LayerTape& tape, const Matrix& d_out,
                                  const LayerParams& p, const LayerGrads& g) {
  const Index seq = tape.x.rows();
  const Index d = tape.x.cols();
  const int heads = p.n_heads;
  const Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // out = LN2(hn + f2)
  Matrix d_h2 = layer_norm_backward(tape.ln2, d_out, *p.ln2g, *g.ln2g, *g.ln2b);
  Matrix d_hn = d_h2;

  // f2 = relu(f1) * w2 + b2
  const Matrix relu1 = tape.f1.cwiseMax(0.0);
  Matrix d_relu = d_h2 * p.w2->transpose();
  *g.w2 += relu1.transpose() * d_h2;
  g.b2->row(0) += d_h2.colwise().sum();
  Matrix d_f1 = d_relu.cwiseProduct((tape.f1.array() > 0.0).cast<double>().matrix());

  // f1 = hn * w1 + b1
  d_hn += d_f1 * p.w1->transpose();
  *g.w1 += tape.hn.transpose() * d_f1;
  g.b1->row(0) += d_f1.colwise().sum();

  // hn = LN1(x + ctx * wo + bo)
  Matrix d_h1 = layer_norm_backward(tape.ln1, d_hn, *p.ln1g, *g.ln1g, *g.ln1b);
  Matrix d_x = d_h1;

  Matrix d_ctx = d_h1 * p.wo->transpose();
  *g.wo += tape.ctx.transpose() * d_h1;
  g.bo->row(0) += d_h1.colwise().sum();

  Matrix d_q = Matrix::Zero(seq, d), d_k = Matrix::Zero(seq, d), d_v = Matrix::Zero(seq, d);
  for (int h = 0; h < heads; ++h) {
    const Matrix& a = tape.attn[static_cast<std::size_t>(h)];
    const auto d_ctx_h = d_ctx.middleCols(h * dh, dh);
    const auto vh = tape.v.middleCols(h * dh, dh);
    const auto qh = tape.q.middleCols(h * dh, dh);
    const auto kh = tape.k.middleCols(h * dh, dh);

    Matrix d_a = d_ctx_h * vh.transpose();
    d_v.middleCols(h * dh, dh) += a.transpose() * d_ctx_h;

    // Softmax backward; masked entries have a == 0 so they contribute nothing.
    const Vector row_dot = (d_a.array() * a.array()).rowwise().sum().matrix();
    Matrix d_scores =
        (a.array() * (d_a.array().colwise() - row_dot.array())).matrix() * scale;

    d_q.middleCols(h * dh, dh) += d_scores * kh;
    d_k.middleCols(h * dh, dh) += d_scores.transpose() * qh;
  }

  *g.wq += tape.x.transpose() * d_q;
  g.bq->row(0) += d_q.colwise().sum();
  *g.wk += tape.x.transpose() * d_k;
  g.bk->row(0) += d_k.colwise().sum();
  *g.wv += tape.x.transpose() * d_v;
  g.bv->row(0) += d_v.colwise().sum();
  d_x += d_q * p.wq->transpose() + d_k * p.wk->transpose() + d_v * p.wv->transpose();
  return d_x;
}

void add_encoder_tensors(ParamStore& store, const EncoderConfig& cfg) {
  cfg.validate();
  store.add("enc.tok_emb", cfg.vocab_size, cfg.d);
  store.add("enc.pos_emb", cfg.max_seq_len, cfg.d);
  for (int l = 0; l < cfg.n_layers; ++l)
    add_layer_tensors(store, "enc.l" + std::to_string(l), cfg.d, cfg.ffn_mult);
}

ParamStore init_params(const EncoderConfig& cfg) {
  ParamStore store;
  add_encoder_tensors(store, cfg);
  init_params(store, cfg.seed);
  return store;
}

Vector encode_passage(const EncoderInput& input, const EncoderConfig& cfg,
                      const ParamStore& store, PassageTape* tape) {
  cfg.validate();
  if (static_cast<int>(input.ids.size()) > cfg.max_seq_len ||
      input.real_len > cfg.max_seq_len)
    throw DataError("encoder input longer than max_seq_len");
  if (input.real_len < 1) throw DataError("encoder input is empty");

  const Index seq = input.real_len;
  const Matrix& tok = store.value("enc.tok_emb");
  const Matrix& pos = store.value("enc.pos_emb");
  Matrix x(seq, cfg.d);
  for (Index i = 0; i < seq; ++i) {
    const TokenId id = input.ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= cfg.vocab_size) throw DataError("token id out of vocabulary range");
    x.row(i) = tok.row(id) + pos.row(i);
  }

  const std::vector<bool> mask(static_cast<std::size_t>(seq), true);
  if (tape) {
    tape->ids.assign(input.ids.begin(), input.ids.begin() + seq);
    tape->layers.resize(static_cast<std::size_t>(cfg.n_layers));
  }
  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerParams p = layer_params(store, "enc.l" + std::to_string(l), cfg.n_heads);
    x = transformer_layer_forward(x, mask, p,
                                  tape ? &tape->layers[static_cast<std::size_t>(l)] : nullptr);
  }
  return x.row(0).transpose();
}

void encode_passage_backward(const PassageTape& tape, const Vector& d_cls,
                             const EncoderConfig& cfg, ParamStore& store) {
  if (tape.layers.empty()) throw NumericError("backward called without a recorded forward pass");
  const Index seq = static_cast<Index>(tape.ids.size());
  Matrix d_x = Matrix::Zero(seq, cfg.d);
  d_x.row(0) = d_cls.transpose();
  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const std::string prefix = "enc.l" + std::to_string(l);
    const LayerParams p = layer_params(store, prefix, cfg.n_heads);
    const LayerGrads g = layer_grads(store, prefix);
    d_x = transformer_layer_backward(tape.layers[static_cast<std::size_t>(l)], d_x, p, g);
  }
  Matrix& d_tok = store.grad("enc.tok_emb");
  Matrix& d_pos = store.grad("enc.pos_emb");
  for (Index i = 0; i < seq; ++i) {
    d_tok.row(tape.ids[static_cast<std::size_t>(i)]) += d_x.row(i);
    d_pos.row(i) += d_x.row(i);
  }
}

RepMatrix encode_document(const TokenSequence& query, const PassageSet& pset,
                          const ChunkConfig& chunk, const EncoderConfig& cfg,
                          const ParamStore& store, std::vector<PassageTape>* tapes) {
  RepMatrix reps;
  reps.reps = Matrix::Zero(chunk.max_passages, cfg.d);
  reps.n_real = pset.real_count();
  if (tapes) tapes->resize(static_cast<std::size_t>(reps.n_real));
  for (int i = 0; i < reps.n_real; ++i) {
    const EncoderInput input =
        build_encoder_input(query, pset.passages[static_cast<std::size_t>(i)].tokens, chunk);
    reps.reps.row(i) =
        encode_passage(input, cfg, store, tapes ? &(*tapes)[static_cast<std::size_t>(i)] : nullptr)
            .transpose();
  }
  return reps;
}

void encode_document_backward(const std::vector<PassageTape>& tapes, const Matrix& d_reps,
                              const EncoderConfig& cfg, ParamStore& store) {
  for (std::size_t i = 0; i < tapes.size(); ++i) {
    const Vector d_cls = d_reps.row(static_cast<Index>(i)).transpose();
    if (d_cls.isZero(0.0)) continue;
    encode_passage_backward(tapes[i], d_cls, cfg, store);
  }
}

}  // namespace parade

#include "parade/train.hpp"

#include "parade/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace parade {

LossKind loss_from_string(const std::string& name) {
  if (name == "hinge") return LossKind::kHinge;
  if (name == "cross_entropy" || name == "ce") return LossKind::kCrossEntropy;
  if (name == "distill") return LossKind::kDistill;
  throw ConfigError("unknown loss: " + name);
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kHinge: return "hinge";
    case LossKind::kCrossEntropy: return "cross_entropy";
    case LossKind::kDistill: return "distill";
  }
  throw ConfigError("unknown loss kind");
}

void TrainConfig::validate() const {
  if (margin <= 0.0) throw ConfigError("hinge margin must be positive");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("distill alpha must lie in [0, 1]");
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (epochs < 1 || pairs_per_epoch < 1 || batch_size < 1)
    throw ConfigError("epochs, pairs_per_epoch and batch_size must be positive");
  if (warmup_epochs < 0 || warmup_epochs > epochs)
    throw ConfigError("warmup_epochs must lie in [0, epochs]");
  if (decay_rate < 0.0 || decay_rate > 1.0) throw ConfigError("decay_rate must lie in [0, 1]");
}

double hinge_loss(double s_pos, double s_neg, double margin) {
  return std::max(0.0, margin - (s_pos - s_neg));
}

void hinge_loss_grad(double s_pos, double s_neg, double margin, double& d_pos, double& d_neg) {
  if (hinge_loss(s_pos, s_neg, margin) > 0.0) {
    d_pos = -1.0;
    d_neg = 1.0;
  } else {
    d_pos = 0.0;
    d_neg = 0.0;
  }
}

double ce_loss(double logit, int label) {
  // Stable softplus form: -[y ln s(z) + (1-y) ln(1-s(z))].
  const double y = label ? 1.0 : 0.0;
  return std::max(logit, 0.0) - y * logit + std::log1p(std::exp(-std::abs(logit)));
}

double ce_loss_grad(double logit, int label) {
  const double y = label ? 1.0 : 0.0;
  return 1.0 / (1.0 + std::exp(-logit)) - y;
}

double distill_loss(double ce, double z_t, double z_s, double alpha) {
  const double diff = z_t - z_s;
  return alpha * ce + (1.0 - alpha) * diff * diff;
}

AdamOptimizer::AdamOptimizer(double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(ParamStore& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (const auto& name : params.names()) {
    const Matrix& g = params.grad(name);
    auto m_it = m_.find(name);
    if (m_it == m_.end()) {
      m_it = m_.emplace(name, Matrix::Zero(g.rows(), g.cols())).first;
      v_.emplace(name, Matrix::Zero(g.rows(), g.cols()));
    }
    Matrix& m = m_it->second;
    Matrix& v = v_.at(name);
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = (beta2_ * v.array() + (1.0 - beta2_) * g.array().square()).matrix();
    const Matrix m_hat = m / bc1;
    const Matrix v_hat = v / bc2;
    params.value(name).array() -= lr * m_hat.array() / (v_hat.array().sqrt() + eps_);
  }
}

double lr_at_step(const TrainConfig& cfg, int step, int total_steps) {
  const int steps_per_epoch = std::max(1, (cfg.pairs_per_epoch + cfg.batch_size - 1) / cfg.batch_size);
  const int warmup_steps = cfg.warmup_epochs * steps_per_epoch;
  if (warmup_steps > 0 && step < warmup_steps)
    return cfg.lr * static_cast<double>(step) / warmup_steps;
  if (total_steps <= warmup_steps) return cfg.lr;
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return cfg.lr * (1.0 - (1.0 - cfg.decay_rate) * progress);
}

std::vector<TrainingPair> sample_pairs(const Qrels& qrels, const RunList& pool,
                                       std::uint64_t seed, int n) {
  struct QueryPool {
    std::string qid;
    std::vector<std::string> positives;
    std::vector<std::string> negatives;
  };
  std::vector<QueryPool> pools;
  for (const auto& [qid, entries] : pool.queries) {
    QueryPool qp;
    qp.qid = qid;
    for (const auto& entry : entries) {
      if (qrels.grade(qid, entry.doc_id) > 0)
        qp.positives.push_back(entry.doc_id);
      else
        qp.negatives.push_back(entry.doc_id);
    }
    if (!qp.positives.empty() && !qp.negatives.empty()) pools.push_back(std::move(qp));
  }
  if (pools.empty())
    throw DataError("sample_pairs: no query has both a positive and a negative in the pool");

  SplitMix64 rng(seed);
  std::vector<TrainingPair> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& qp = pools[static_cast<std::size_t>(rng.next_below(pools.size()))];
    TrainingPair pair;
    pair.query_id = qp.qid;
    pair.pos_doc_id = qp.positives[static_cast<std::size_t>(rng.next_below(qp.positives.size()))];
    pair.neg_doc_id = qp.negatives[static_cast<std::size_t>(rng.next_below(qp.negatives.size()))];
    out.push_back(std::move(pair));
  }
  return out;
}

void write_trace(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  out << "step,epoch,lr,loss\n";
  char buf[128];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.9g\n", row.step, row.epoch, row.lr, row.loss);
    out << buf;
  }
}

namespace {

const Query& query_by_id(const std::vector<Query>& queries, const std::string& qid) {
  for (const auto& q : queries)
    if (q.query_id == qid) return q;
  throw DataError("training pair references unknown query: " + qid);
}

const Document& doc_by_id(const std::map<std::string, const Document*>& docs,
                          const std::string& did) {
  auto it = docs.find(did);
  if (it == docs.end()) throw DataError("training pair references unknown doc: " + did);
  return *it->second;
}

}  // namespace

TrainResult train_epochs(RerankModel& model, const TrainData& data, const TrainConfig& cfg,
                         const RerankModel* teacher, const std::string& checkpoint_dir) {
  cfg.validate();
  if (!data.queries || !data.docs || !data.qrels || !data.pool)
    throw ConfigError("train_epochs: incomplete training data");
  if (cfg.loss == LossKind::kDistill && !teacher)
    throw ConfigError("distillation requires a teacher model");

  AdamOptimizer optimizer;
  TrainResult result;
  const int steps_per_epoch = (cfg.pairs_per_epoch + cfg.batch_size - 1) / cfg.batch_size;
  const int total_steps = cfg.epochs * steps_per_epoch;
  int step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto pairs =
        sample_pairs(*data.qrels, *data.pool, cfg.seed + static_cast<std::uint64_t>(epoch),
                     cfg.pairs_per_epoch);
    std::size_t cursor = 0;
    while (cursor < pairs.size()) {
      const std::size_t batch_end = std::min(pairs.size(), cursor + static_cast<std::size_t>(cfg.batch_size));
      const double batch_n = static_cast<double>(batch_end - cursor);
      model.params.zero_grads();
      double batch_loss = 0.0;

      for (std::size_t i = cursor; i < batch_end; ++i) {
        const auto& pair = pairs[i];
        const Query& query = query_by_id(*data.queries, pair.query_id);
        const Document& pos = doc_by_id(*data.docs, pair.pos_doc_id);
        const Document& neg = doc_by_id(*data.docs, pair.neg_doc_id);
        const std::uint64_t pos_seed = doc_cap_seed(pos.doc_id, model.cfg.encoder.seed);
        const std::uint64_t neg_seed = doc_cap_seed(neg.doc_id, model.cfg.encoder.seed);

        if (cfg.loss == LossKind::kHinge) {
          DocTape pos_tape, neg_tape;
          const double s_pos = score_document(model, query.tokens, pos.tokens, pos_seed, &pos_tape);
          const double s_neg = score_document(model, query.tokens, neg.tokens, neg_seed, &neg_tape);
          const double loss = hinge_loss(s_pos, s_neg, cfg.margin);
          double d_pos = 0.0, d_neg = 0.0;
          hinge_loss_grad(s_pos, s_neg, cfg.margin, d_pos, d_neg);
          if (d_pos != 0.0) score_document_backward(model, pos_tape, d_pos / batch_n);
          if (d_neg != 0.0) score_document_backward(model, neg_tape, d_neg / batch_n);
          batch_loss += loss;
        } else {
          // Pointwise modes consume the pair as one positive and one negative
          // example.
          double example_loss = 0.0;
          for (int which = 0; which < 2; ++which) {
            const Document& doc = which == 0 ? pos : neg;
            const int label = which == 0 ? 1 : 0;
            const std::uint64_t cap = which == 0 ? pos_seed : neg_seed;
            DocTape tape;
            const double z = score_document(model, query.tokens, doc.tokens, cap, &tape);
            const double ce = ce_loss(z, label);
            double loss = ce;
            double d_z = ce_loss_grad(z, label);
            if (cfg.loss == LossKind::kDistill) {
              const double z_t = score_document(*teacher, query.tokens, doc.tokens,
                                                doc_cap_seed(doc.doc_id, teacher->cfg.encoder.seed),
                                                nullptr);
              loss = distill_loss(ce, z_t, z, cfg.alpha);
              d_z = cfg.alpha * d_z - 2.0 * (1.0 - cfg.alpha) * (z_t - z);
            }
            score_document_backward(model, tape, d_z / (2.0 * batch_n));
            example_loss += loss;
          }
          batch_loss += example_loss / 2.0;
        }
      }

      batch_loss /= batch_n;
      if (!std::isfinite(batch_loss))
        throw NumericError("non-finite loss at step " + std::to_string(step));
      const double lr = lr_at_step(cfg, step, total_steps);
      optimizer.step(model.params, lr);
      result.trace.push_back(TraceRow{step, epoch, lr, batch_loss});
      ++step;
      cursor = batch_end;
    }
    if (!checkpoint_dir.empty()) {
      std::filesystem::create_directories(checkpoint_dir);
      save_checkpoint(checkpoint_dir + "/ckpt_epoch" + std::to_string(epoch) + ".json", model);
    }
  }
  return result;
}

GradCheckReport gradient_check(ParamStore& store, const std::function<double()>& loss_fn,
                               const std::function<void()>& grad_fn, const GradCheckConfig& cfg) {
  store.zero_grads();
  grad_fn();
  std::map<std::string, Matrix> analytic;
  for (const auto& name : store.names()) analytic[name] = store.grad(name);

  GradCheckReport report;
  for (const auto& name : store.names()) {
    Matrix& v = store.value(name);
    const Matrix& a = analytic.at(name);
    const Index size = v.size();
    SplitMix64 rng(fnv1a64(name) ^ cfg.seed);
    std::vector<Index> coords;
    if (size <= cfg.coords_per_tensor) {
      coords.resize(static_cast<std::size_t>(size));
      std::iota(coords.begin(), coords.end(), Index{0});
    } else {
      auto picks = sample_without_replacement(0, static_cast<int>(size), cfg.coords_per_tensor, rng);
      coords.assign(picks.begin(), picks.end());
    }
    for (Index flat : coords) {
      const Index i = flat % v.rows();
      const Index j = flat / v.rows();
      const double saved = v(i, j);
      auto central = [&](double eps) {
        v(i, j) = saved + eps;
        const double up = loss_fn();
        v(i, j) = saved - eps;
        const double down = loss_fn();
        v(i, j) = saved;
        return (up - down) / (2.0 * eps);
      };
      const double an = a(i, j);
      auto rel_of = [&](double fd) {
        return std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
      };
      double rel = rel_of(central(cfg.epsilon));
      // A secant that straddles a relu/max/hinge kink is not an estimate of
      // the one-sided derivative. Shrinking the step resolves those
      // coordinates; a genuinely wrong gradient keeps its error at every
      // step size.
      for (double shrink : {10.0, 100.0}) {
        if (rel < 5e-5) break;
        rel = std::min(rel, rel_of(central(cfg.epsilon / shrink)));
      }
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = name;
      }
      ++report.coords_checked;
    }
  }
  return report;
}

GradCheckReport gradient_check_model(RerankModel& model, const GradCheckConfig& cfg) {
  // Small fixed instance: a three-token query, one multi-passage positive and
  // one negative document built from the model's own vocabulary. Biases are
  // perturbed off zero so the loss sits at a generic point: zero biases can
  // leave relu pre-activations exactly at the kink (e.g. the CNN's
  // zero-padded pairs), where no secant measures the chosen subgradient.
  init_params(model.params, model.cfg.encoder.seed, cfg.init_std);
  for (const auto& name : model.params.names()) {
    const auto leaf = name.substr(name.rfind('.') + 1);
    if (leaf.empty() || leaf[0] != 'b') continue;
    Matrix& v = model.params.value(name);
    SplitMix64 brng(fnv1a64(name) ^ cfg.seed);
    for (Index i = 0; i < v.rows(); ++i)
      for (Index j = 0; j < v.cols(); ++j) v(i, j) = brng.next_normal() * cfg.init_std * 0.5;
  }
  SplitMix64 rng(cfg.seed ^ 0x5eedull);
  const int vocab = model.cfg.encoder.vocab_size;
  auto random_tokens = [&](int n) {
    TokenSequence tokens(static_cast<std::size_t>(n));
    for (auto& t : tokens)
      t = kFirstWordId +
          static_cast<TokenId>(rng.next_below(static_cast<std::uint64_t>(vocab - kFirstWordId)));
    return tokens;
  };
  const TokenSequence query = random_tokens(3);
  const int doc_len = model.cfg.chunk.window * 2 + model.cfg.chunk.stride / 2;
  TokenSequence pos_doc = random_tokens(doc_len);
  TokenSequence neg_doc = random_tokens(doc_len);
  // Plant query terms in the positive so the two scores differ.
  for (std::size_t i = 0; i < query.size(); ++i) pos_doc[i * 7 + 1] = query[i];

  const std::uint64_t pos_seed = doc_cap_seed("gradcheck-pos", model.cfg.encoder.seed);
  const std::uint64_t neg_seed = doc_cap_seed("gradcheck-neg", model.cfg.encoder.seed);
  const double margin = 1.0;

  auto loss_fn = [&]() {
    const double s_pos = score_document(model, query, pos_doc, pos_seed, nullptr);
    const double s_neg = score_document(model, query, neg_doc, neg_seed, nullptr);
    return hinge_loss(s_pos, s_neg, margin);
  };
  auto grad_fn = [&]() {
    DocTape pos_tape, neg_tape;
    const double s_pos = score_document(model, query, pos_doc, pos_seed, &pos_tape);
    const double s_neg = score_document(model, query, neg_doc, neg_seed, &neg_tape);
    double d_pos = 0.0, d_neg = 0.0;
    hinge_loss_grad(s_pos, s_neg, margin, d_pos, d_neg);
    if (d_pos != 0.0) score_document_backward(model, pos_tape, d_pos);
    if (d_neg != 0.0) score_document_backward(model, neg_tape, d_neg);
  };

  // Keep the loss away from the hinge kink so finite differences see the
  // active branch on both sides.
  {
    const double s_pos = score_document(model, query, pos_doc, pos_seed, nullptr);
    const double s_neg = score_document(model, query, neg_doc, neg_seed, nullptr);
    if (hinge_loss(s_pos, s_neg, margin) < 1e-3)
      throw NumericError("gradient_check_model: loss landed at the hinge kink; change the seed");
  }
  return gradient_check(model.params, loss_fn, grad_fn, cfg);
}

}  // namespace parade

#include "sbg/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "sbg/error.hpp"
#include "sbg/evaluation.hpp"

namespace sbg {

void TrainConfig::validate() const {
  propagation.validate();
  if (d <= 0 || d_a <= 0) fail("E_CONFIG", "d and d_a must be positive");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    fail("E_CONFIG", "lambda must lie in [0,1]");
  if (batch_size < 1) fail("E_CONFIG", "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail("E_CONFIG", "learning_rate must be > 0");
  if (k_w < 0 || k_i < 0) fail("E_CONFIG", "k_w and k_i must be >= 0");
  if (epochs < 1) fail("E_CONFIG", "epochs must be >= 1");
  if (patience < 1) fail("E_CONFIG", "patience must be >= 1");
  if (history_cap < 0) fail("E_CONFIG", "history_cap must be >= 0");
  if (eval_pool_size < 1) fail("E_CONFIG", "eval_pool_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_epsilon > 0.0))
    fail("E_CONFIG", "invalid ADAM settings");
}

std::vector<TrainTriple> build_triples(const Corpus& corpus, int history_cap) {
  // Per-user chronological purchase timeline over the train split.
  std::map<std::string, std::vector<std::pair<std::int64_t, int>>> timeline;
  for (const auto& seq : corpus.split.train)
    for (const auto& it : seq.interactions)
      timeline[seq.user_id].emplace_back(it.timestamp, it.product);
  for (auto& [user, tl] : timeline) std::sort(tl.begin(), tl.end());

  std::vector<TrainTriple> triples;
  for (const auto& seq : corpus.split.train) {
    const auto& tl = timeline[seq.user_id];
    for (const auto& it : seq.interactions) {
      TrainTriple triple;
      triple.user_id = seq.user_id;
      triple.product = it.product;
      triple.timestamp = it.timestamp;
      triple.queries = corpus.queries.product_queries[it.product];
      // I_u: products purchased strictly before this purchase, most recent
      // first, deduplicated, capped — the target never sees itself.
      auto boundary = std::lower_bound(
          tl.begin(), tl.end(),
          std::make_pair(it.timestamp, std::numeric_limits<int>::min()));
      std::set<int> seen;
      for (auto rit = std::make_reverse_iterator(boundary); rit != tl.rend();
           ++rit) {
        if (static_cast<int>(triple.history.size()) >= history_cap) break;
        if (seen.insert(rit->second).second)
          triple.history.push_back(rit->second);
      }
      triples.push_back(std::move(triple));
    }
  }
  return triples;
}

AliasTable::AliasTable(const std::vector<double>& weights) {
  const std::size_t n = weights.size();
  if (n == 0) fail("E_STATE", "alias table over empty support");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      fail("E_STATE", "alias table weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) fail("E_STATE", "alias table weights sum to zero");

  norm_.resize(n);
  prob_.assign(n, 0.0);
  alias_.resize(n);
  std::vector<double> scaled(n);
  for (std::size_t i = 0; i < n; ++i) {
    norm_[i] = weights[i] / total;
    scaled[i] = norm_[i] * static_cast<double>(n);
  }
  std::vector<int> small, large;
  for (std::size_t i = 0; i < n; ++i)
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<int>(i));
  while (!small.empty() && !large.empty()) {
    const int s = small.back();
    const int l = large.back();
    small.pop_back();
    large.pop_back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    (scaled[l] < 1.0 ? small : large).push_back(l);
  }
  for (int i : large) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
  for (int i : small) {  // numerical leftovers
    prob_[i] = 1.0;
    alias_[i] = i;
  }
}

int AliasTable::sample(Rng& rng) const {
  const auto i = static_cast<std::size_t>(rng.next_below(prob_.size()));
  return rng.next_double() < prob_[i] ? static_cast<int>(i) : alias_[i];
}

NegativeSampler build_sampler(const Vocabulary& vocab,
                              const std::vector<int>& train_products,
                              std::uint64_t seed) {
  if (train_products.empty())
    fail("E_STATE", "negative sampler needs a non-empty training product set");
  std::vector<double> weights(vocab.size());
  for (std::size_t i = 0; i < weights.size(); ++i)
    weights[i] = std::pow(static_cast<double>(vocab.counts[i]), 0.75);
  NegativeSampler sampler{AliasTable(weights), train_products, Rng(seed)};
  return sampler;
}

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

double nce_loss(double positive_score,
                const std::vector<double>& negative_scores) {
  double loss = softplus(-positive_score);  // -log sigma(pos)
  for (double s : negative_scores) loss += softplus(s);  // -log sigma(-neg)
  return loss;
}

ResolvedTriple resolve_triple(const TrainTriple& triple, const Corpus& corpus,
                              NegativeSampler& sampler, Rng& rng, int k_w,
                              int k_i) {
  ResolvedTriple resolved;
  resolved.product = triple.product;
  resolved.history = triple.history;

  if (!triple.queries.empty()) {
    resolved.query = triple.queries[static_cast<std::size_t>(
        rng.next_below(triple.queries.size()))];
    resolved.query_tokens = corpus.queries.queries[resolved.query].token_indices;
    for (int n = 0; n < k_i; ++n) {
      for (int attempt = 0; attempt < 10; ++attempt) {
        const int cand = sampler.sample_product();
        if (cand != resolved.product) {
          resolved.product_negatives.push_back(cand);
          break;
        }
      }
    }
  }

  const auto& words = corpus.product_words[triple.product];
  if (!words.empty()) {
    std::int64_t total = 0;
    for (const auto& [token, count] : words) total += count;
    auto draw = static_cast<std::int64_t>(
        rng.next_below(static_cast<std::uint64_t>(total)));
    for (const auto& [token, count] : words) {
      if (draw < count) {
        resolved.word = token;
        break;
      }
      draw -= count;
    }
    for (int n = 0; n < k_w; ++n) {
      for (int attempt = 0; attempt < 10; ++attempt) {
        const int cand = sampler.sample_word();
        if (cand != resolved.word) {
          resolved.word_negatives.push_back(cand);
          break;
        }
      }
    }
  }
  return resolved;
}

Gradients zero_gradients(const ModelParams& params) {
  Gradients grads;
  for (const auto& ref : params.tensors())
    grads.g.emplace_back(static_cast<std::size_t>(ref.size), 0.0);
  return grads;
}

namespace {

// Indices into ModelParams::tensors() order.
enum TensorIndex {
  kWords = 0,
  kProducts = 1,
  kSequences = 2,
  kWf = 3,
  kBf = 4,
  kWh = 5,
  kZero = 6,
};

// d(score)/d(m) and d(score)/d(item) for one candidate under the f-mode.
void score_backward(const ModelParams& params, const double* m,
                    const double* item, double seed, double* grad_m,
                    double* grad_item) {
  const int d = params.d;
  if (params.mode == ScoreMode::dot) {
    for (int k = 0; k < d; ++k) {
      grad_m[k] += seed * item[k];
      grad_item[k] += seed * m[k];
    }
    return;
  }
  double nm = 0.0, ni = 0.0, dp = 0.0;
  for (int k = 0; k < d; ++k) {
    nm += m[k] * m[k];
    ni += item[k] * item[k];
    dp += m[k] * item[k];
  }
  if (nm <= 0.0 || ni <= 0.0) return;  // score pinned at 0 there
  const double inv = 1.0 / std::sqrt(nm * ni);
  const double s = dp * inv;
  for (int k = 0; k < d; ++k) {
    grad_m[k] += seed * (item[k] * inv - s * m[k] / nm);
    grad_item[k] += seed * (m[k] * inv - s * item[k] / ni);
  }
}

}  // namespace

BatchLoss compute_batch(const ModelParams& params, const BehaviorGraph& graph,
                        const std::vector<ResolvedTriple>& batch,
                        const TrainConfig& config, Gradients* grads) {
  Matrix h0 = assemble_h0(params);
  EnrichedEmbeddings enriched =
      jumping_propagate(graph, config.propagation, h0);

  BatchLoss loss;
  for (const auto& t : batch) {
    if (t.query >= 0) ++loss.n_pr;
    if (t.word >= 0) ++loss.n_lm;
  }
  const double w_pr = loss.n_pr > 0 ? 1.0 / loss.n_pr : 0.0;
  const double w_lm = loss.n_lm > 0 ? 1.0 / loss.n_lm : 0.0;

  Matrix grad_enriched;
  if (grads) {
    grad_enriched = Matrix(graph.n_nodes(), params.d);
    grad_enriched.set_zero();
  }

  const int d = params.d, d_a = params.d_a;
  std::vector<double> q_vec(d), m(d);
  std::vector<double> grad_m(d), grad_u(d), grad_q(d);
  std::vector<double> v(d), p_acc(d);
  KahanSum sum_pr, sum_lm;

  for (std::size_t ti = 0; ti < batch.size(); ++ti) {
    const auto& t = batch[ti];

    if (t.query >= 0) {
      encode_query(params, t.query_tokens, q_vec.data());
      AttentionResult att =
          user_vector_detailed(params, enriched, t.history, q_vec.data());
      mix(params, att.u.data(), q_vec.data(), m.data());

      const double pos = score_product(params, m.data(), t.product);
      std::vector<double> negs(t.product_negatives.size());
      for (std::size_t c = 0; c < negs.size(); ++c)
        negs[c] = score_product(params, m.data(), t.product_negatives[c]);
      const double term = nce_loss(pos, negs);
      if (!std::isfinite(term))
        fail("E_NONFINITE", "retrieval loss diverged at triple " +
                                std::to_string(ti) + " (product " +
                                std::to_string(t.product) + ")");
      sum_pr.add(term);

      if (grads) {
        std::fill(grad_m.begin(), grad_m.end(), 0.0);
        // seed gradients of the NCE objective, scaled to the batch mean
        score_backward(params, m.data(),
                       params.product_embeddings.row(t.product),
                       (sigmoid(pos) - 1.0) * w_pr, grad_m.data(),
                       grads->g[kProducts].data() +
                           static_cast<std::size_t>(t.product) * d);
        for (std::size_t c = 0; c < negs.size(); ++c) {
          const int neg = t.product_negatives[c];
          score_backward(params, m.data(), params.product_embeddings.row(neg),
                         sigmoid(negs[c]) * w_pr, grad_m.data(),
                         grads->g[kProducts].data() +
                             static_cast<std::size_t>(neg) * d);
        }

        // m = lambda*q + (1-lambda)*u
        for (int k = 0; k < d; ++k) {
          grad_q[k] = params.lambda * grad_m[k];
          grad_u[k] = (1.0 - params.lambda) * grad_m[k];
        }

        const std::size_t n_hist = t.history.size();
        // value path: u = sum_j alpha_j * h~_j
        for (std::size_t j = 0; j < n_hist; ++j) {
          double* ge = grad_enriched.row(t.history[j]);
          for (int k = 0; k < d; ++k) ge[k] += att.alpha[j] * grad_u[k];
        }
        // score path through the softmax (zero slot has d(loss)/d(alpha)=0
        // but participates in the normalizer)
        std::vector<double> dalpha(n_hist, 0.0);
        double s_bar = 0.0;
        for (std::size_t j = 0; j < n_hist; ++j) {
          const double* h = enriched.product_row(t.history[j]);
          for (int k = 0; k < d; ++k) dalpha[j] += grad_u[k] * h[k];
          s_bar += att.alpha[j] * dalpha[j];
        }
        std::vector<double> dr(n_hist + 1);
        for (std::size_t j = 0; j < n_hist; ++j)
          dr[j] = att.alpha[j] * (dalpha[j] - s_bar);
        dr[n_hist] = -att.alpha[n_hist] * s_bar;

        // v = t * W_h; score r = item . v
        for (int a = 0; a < d; ++a) {
          double acc = 0.0;
          const double* t_row = att.t.row(a);
          for (int b = 0; b < d_a; ++b) acc += t_row[b] * params.attention_w_h[b];
          v[a] = acc;
        }
        for (std::size_t j = 0; j < n_hist; ++j) {
          double* ge = grad_enriched.row(t.history[j]);
          for (int k = 0; k < d; ++k) ge[k] += dr[j] * v[k];
        }
        {
          double* gz = grads->g[kZero].data();
          for (int k = 0; k < d; ++k) gz[k] += dr[n_hist] * v[k];
        }

        // P[a] = sum_slots dr_slot * item_slot[a]
        std::fill(p_acc.begin(), p_acc.end(), 0.0);
        for (std::size_t j = 0; j < n_hist; ++j) {
          const double* h = enriched.product_row(t.history[j]);
          for (int a = 0; a < d; ++a) p_acc[a] += dr[j] * h[a];
        }
        for (int a = 0; a < d; ++a)
          p_acc[a] += dr[n_hist] * params.zero_inquiry[a];

        // W_h grad: sum_a P[a] * t(a,b)
        {
          double* gwh = grads->g[kWh].data();
          for (int b = 0; b < d_a; ++b) {
            double acc = 0.0;
            for (int a = 0; a < d; ++a) acc += p_acc[a] * att.t.at(a, b);
            gwh[b] += acc;
          }
        }
        // dt(a,b) = P[a]*W_h[b]; dz = dt*(1-t^2); chain to b_f, W_f, q
        {
          double* gbf = grads->g[kBf].data();
          double* gwf = grads->g[kWf].data();
          const double* wf = params.attention_w_f.data.data();
          for (int a = 0; a < d; ++a) {
            const double* t_row = att.t.row(a);
            const std::size_t row_off =
                static_cast<std::size_t>(a) * d_a * static_cast<std::size_t>(d);
            for (int b = 0; b < d_a; ++b) {
              const double dz = p_acc[a] * params.attention_w_h[b] *
                                (1.0 - t_row[b] * t_row[b]);
              if (dz == 0.0) continue;
              gbf[static_cast<std::size_t>(a) * d_a + b] += dz;
              const std::size_t off = row_off + static_cast<std::size_t>(b) * d;
              for (int k = 0; k < d; ++k) {
                gwf[off + k] += dz * q_vec[k];
                grad_q[k] += dz * wf[off + k];
              }
            }
          }
        }

        // query gradient -> mean over its word embeddings
        {
          const double inv = 1.0 / static_cast<double>(t.query_tokens.size());
          for (int token : t.query_tokens) {
            double* gw = grads->g[kWords].data() +
                         static_cast<std::size_t>(token) * d;
            for (int k = 0; k < d; ++k) gw[k] += inv * grad_q[k];
          }
        }
      }
    }

    if (t.word >= 0) {
      const double* item = params.product_embeddings.row(t.product);
      const double* word = params.word_embeddings.row(t.word);
      double pos = 0.0;
      for (int k = 0; k < d; ++k) pos += word[k] * item[k];
      std::vector<double> negs(t.word_negatives.size());
      for (std::size_t c = 0; c < negs.size(); ++c) {
        const double* neg_row = params.word_embeddings.row(t.word_negatives[c]);
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += neg_row[k] * item[k];
        negs[c] = s;
      }
      const double term = nce_loss(pos, negs);
      if (!std::isfinite(term))
        fail("E_NONFINITE", "language-model loss diverged at triple " +
                                std::to_string(ti) + " (product " +
                                std::to_string(t.product) + ")");
      sum_lm.add(term);

      if (grads) {
        double* g_item = grads->g[kProducts].data() +
                         static_cast<std::size_t>(t.product) * d;
        const double seed_pos = (sigmoid(pos) - 1.0) * w_lm;
        double* g_word =
            grads->g[kWords].data() + static_cast<std::size_t>(t.word) * d;
        for (int k = 0; k < d; ++k) {
          g_word[k] += seed_pos * item[k];
          g_item[k] += seed_pos * word[k];
        }
        for (std::size_t c = 0; c < negs.size(); ++c) {
          const double seed_neg = sigmoid(negs[c]) * w_lm;
          const double* neg_row =
              params.word_embeddings.row(t.word_negatives[c]);
          double* g_neg = grads->g[kWords].data() +
                          static_cast<std::size_t>(t.word_negatives[c]) * d;
          for (int k = 0; k < d; ++k) {
            g_neg[k] += seed_neg * item[k];
            g_item[k] += seed_neg * neg_row[k];
          }
        }
      }
    }
  }

  loss.loss_pr = loss.n_pr > 0 ? sum_pr.value() / loss.n_pr : 0.0;
  loss.loss_lm = loss.n_lm > 0 ? sum_lm.value() / loss.n_lm : 0.0;

  if (grads) {
    // History gradients flowed into enriched rows; pull them back through
    // the linear propagation onto H^(0) and scatter into the embeddings.
    Matrix grad_h0 = propagate_adjoint(graph, config.propagation, grad_enriched);
    const std::size_t np = static_cast<std::size_t>(graph.n_products) * d;
    for (std::size_t i = 0; i < np; ++i) grads->g[kProducts][i] += grad_h0.data[i];
    if (config.train_sequence_embeddings) {
      const std::size_t ns = static_cast<std::size_t>(graph.n_sequences) * d;
      for (std::size_t i = 0; i < ns; ++i)
        grads->g[kSequences][i] += grad_h0.data[np + i];
    }
  }
  return loss;
}

AdamState init_adam(const ModelParams& params) {
  AdamState state;
  for (const auto& ref : params.tensors()) {
    state.m.emplace_back(static_cast<std::size_t>(ref.size), 0.0);
    state.v.emplace_back(static_cast<std::size_t>(ref.size), 0.0);
  }
  return state;
}

void adam_update(ModelParams* params, AdamState* state, const Gradients& grads,
                 const TrainConfig& config) {
  state->t += 1;
  const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state->t));
  const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state->t));
  auto refs = params->tensors();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    double* theta = refs[i].data;
    double* m = state->m[i].data();
    double* v = state->v[i].data();
    const double* g = grads.g[i].data();
    for (std::int64_t j = 0; j < refs[i].size; ++j) {
      m[j] = config.adam_beta1 * m[j] + (1.0 - config.adam_beta1) * g[j];
      v[j] = config.adam_beta2 * v[j] + (1.0 - config.adam_beta2) * g[j] * g[j];
      theta[j] -= config.learning_rate * (m[j] / bc1) /
                  (std::sqrt(v[j] / bc2) + config.adam_epsilon);
    }
  }
}

StepStats step(ModelParams* params, AdamState* adam, const BehaviorGraph& graph,
               const std::vector<TrainTriple>& batch, const Corpus& corpus,
               NegativeSampler* sampler, Rng* rng, const TrainConfig& config) {
  std::vector<ResolvedTriple> resolved;
  resolved.reserve(batch.size());
  for (const auto& triple : batch)
    resolved.push_back(
        resolve_triple(triple, corpus, *sampler, *rng, config.k_w, config.k_i));

  Gradients grads = zero_gradients(*params);
  StepStats stats;
  stats.loss = compute_batch(*params, graph, resolved, config, &grads);

  double sq = 0.0;
  for (const auto& g : grads.g)
    for (double x : g) sq += x * x;
  stats.grad_norm = std::sqrt(sq);

  adam_update(params, adam, grads, config);
  if (!params->all_finite())
    fail("E_NONFINITE", "parameters became non-finite after an update step");
  return stats;
}

TrainResult train(const Corpus& corpus, const BehaviorGraph& graph,
                  const TrainConfig& config) {
  config.validate();
  if (graph.n_sequences != static_cast<int>(corpus.split.train.size()))
    fail("E_STATE", "graph was built from a different train split (" +
                        std::to_string(graph.n_sequences) + " vs " +
                        std::to_string(corpus.split.train.size()) +
                        " sequences)");

  ModelDims dims;
  dims.n_words = corpus.vocab.size();
  dims.n_products = corpus.products.size();
  dims.n_sequences = graph.n_sequences;
  dims.d = config.d;
  dims.d_a = config.d_a;

  Rng init_rng(derive_seed(config.seed, "init"));
  ModelParams params = init_params(dims, config.lambda, config.mode, init_rng);

  std::vector<TrainTriple> triples = build_triples(corpus, config.history_cap);
  if (triples.empty()) fail("E_STATE", "no training triples");
  NegativeSampler sampler =
      build_sampler(corpus.vocab, corpus.split.train_products,
                    derive_seed(config.seed, "negatives"));
  std::vector<EvalCase> val_cases =
      build_cases(corpus, SplitTag::validation,
                  derive_seed(config.seed, "val-cases"), config.eval_pool_size,
                  config.history_cap);

  AdamState adam = init_adam(params);
  TrainResult result;
  result.meta.graph_fingerprint = graph.fingerprint();
  double best_score = -1.0;
  int epochs_since_best = 0;

  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t_start = std::chrono::steady_clock::now();
    Rng epoch_rng(derive_seed(config.seed, "epoch/" + std::to_string(epoch)));
    epoch_rng.shuffle(order);

    KahanSum ep_pr, ep_lm;
    std::int64_t n_pr = 0, n_lm = 0;
    bool diverged = false;
    try {
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t stop = std::min(
            order.size(), start + static_cast<std::size_t>(config.batch_size));
        std::vector<TrainTriple> batch;
        batch.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i)
          batch.push_back(triples[order[i]]);
        StepStats stats =
            step(&params, &adam, graph, batch, corpus, &sampler, &epoch_rng, config);
        ep_pr.add(stats.loss.loss_pr * stats.loss.n_pr);
        ep_lm.add(stats.loss.loss_lm * stats.loss.n_lm);
        n_pr += stats.loss.n_pr;
        n_lm += stats.loss.n_lm;
      }
    } catch (const Error& e) {
      if (e.code() != "E_NONFINITE" || result.meta.best_epoch < 0) throw;
      // divergence mid-training: keep the last good checkpoint
      diverged = true;
    }
    if (diverged) break;

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.loss_pr = n_pr > 0 ? ep_pr.value() / static_cast<double>(n_pr) : 0.0;
    metrics.loss_lm = n_lm > 0 ? ep_lm.value() / static_cast<double>(n_lm) : 0.0;

    double score;
    if (!val_cases.empty()) {
      EnrichedEmbeddings enriched =
          jumping_propagate(graph, config.propagation, assemble_h0(params));
      EvalReport val = evaluate(params, enriched, val_cases);
      metrics.val_hr10 = val.hr10;
      metrics.val_ndcg10 = val.ndcg10;
      metrics.val_mrr = val.mrr100;
      score = val.ndcg10;
    } else {
      // no validation sequences: keep the final model
      score = best_score + 1.0;
    }
    metrics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    result.log.push_back(metrics);

    if (score > best_score) {
      best_score = score;
      result.params = params;
      result.meta.best_epoch = epoch;
      result.meta.val_ndcg10 = val_cases.empty() ? 0.0 : metrics.val_ndcg10;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= config.patience) {
      break;
    }
  }
  if (result.meta.best_epoch < 0)
    fail("E_STATE", "training produced no usable checkpoint");
  return result;
}

void write_metrics_log(const std::vector<EpochMetrics>& log,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("E_IO", "cannot write " + path.string());
  out << "epoch,loss_pr,loss_lm,val_hr10,val_ndcg10,val_mrr,wall_seconds\n";
  out.precision(17);
  for (const auto& m : log)
    out << m.epoch << ',' << m.loss_pr << ',' << m.loss_lm << ',' << m.val_hr10
        << ',' << m.val_ndcg10 << ',' << m.val_mrr << ',' << m.wall_seconds
        << '\n';
}

}  // namespace sbg

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sbg/behavior_graph.hpp"
#include "sbg/corpus.hpp"
#include "sbg/model.hpp"
#include "sbg/rng.hpp"

namespace sbg {

struct TrainConfig {
  int d = 64;
  int d_a = 8;
  double lambda = 0.5;
  ScoreMode mode = ScoreMode::dot;

  PropagationConfig propagation;  // omega/beta/layers
  int batch_size = 1024;
  double learning_rate = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int k_w = 5;  // word negatives per LM term
  int k_i = 2;  // product negatives per retrieval term
  int epochs = 20;
  int patience = 5;  // epochs without validation NDCG@10 improvement
  int history_cap = 20;
  bool train_sequence_embeddings = true;
  int eval_pool_size = 1000;  // validation pool size during training
  std::uint64_t seed = 42;

  void validate() const;
};

// One purchase occurrence from the train split.  query/word are re-sampled
// per epoch; history is fixed (strictly-before-timestamp products,
// most-recent-first, deduped, capped).
struct TrainTriple {
  std::string user_id;
  int product = -1;
  std::int64_t timestamp = 0;
  std::vector<int> queries;   // the product's query ids (may be empty)
  std::vector<int> history;   // I_u at this purchase
};

std::vector<TrainTriple> build_triples(const Corpus& corpus, int history_cap);

// Weighted O(1) sampling (Vose alias method).
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& weights);
  int sample(Rng& rng) const;
  const std::vector<double>& probabilities() const { return norm_; }
  std::size_t size() const { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<int> alias_;
  std::vector<double> norm_;  // normalized weights, for tests
};

struct NegativeSampler {
  AliasTable words;                 // P_w proportional to count^(3/4)
  std::vector<int> train_products;  // uniform candidate pool
  Rng rng;

  int sample_word() { return words.sample(rng); }
  int sample_product() {
    return train_products[static_cast<std::size_t>(
        rng.next_below(train_products.size()))];
  }
};

NegativeSampler build_sampler(const Vocabulary& vocab,
                              const std::vector<int>& train_products,
                              std::uint64_t seed);

// Standard negative-sampling objective -[log s(pos) + sum log s(-neg)],
// computed with stable softplus.
double nce_loss(double positive_score, const std::vector<double>& negative_scores);

// A triple with all stochastic choices resolved, so the batch loss is a
// deterministic function of the parameters (required by the gradient tests).
struct ResolvedTriple {
  int product = -1;
  int query = -1;                      // -1: no retrieval term
  std::vector<int> query_tokens;       // token indices of `query`
  std::vector<int> history;
  std::vector<int> product_negatives;  // size <= k_i (collisions skipped)
  int word = -1;                       // -1: no LM term
  std::vector<int> word_negatives;     // size <= k_w
};

// Samples query/word/negatives for one triple.  Negatives colliding with the
// positive are resampled up to 10 times, then skipped.
ResolvedTriple resolve_triple(const TrainTriple& triple, const Corpus& corpus,
                              NegativeSampler& sampler, Rng& rng, int k_w,
                              int k_i);

// Gradient buffers parallel to ModelParams::tensors().
struct Gradients {
  std::vector<std::vector<double>> g;
};
Gradients zero_gradients(const ModelParams& params);

struct BatchLoss {
  double loss_pr = 0.0;  // mean retrieval loss over triples with a query
  double loss_lm = 0.0;  // mean LM loss over triples with a word
  int n_pr = 0;
  int n_lm = 0;
  double total() const { return loss_pr + loss_lm; }
};

// Forward + analytic backward over one resolved batch.  Propagates H^(0)
// through the jumping convolution, scores with raw product embeddings, and
// chains gradients back through attention, mix, and the linear propagation
// (propagate_adjoint).  grads may be null (forward only).
BatchLoss compute_batch(const ModelParams& params, const BehaviorGraph& graph,
                        const std::vector<ResolvedTriple>& batch,
                        const TrainConfig& config, Gradients* grads);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;
};
AdamState init_adam(const ModelParams& params);
void adam_update(ModelParams* params, AdamState* state, const Gradients& grads,
                 const TrainConfig& config);

struct StepStats {
  BatchLoss loss;
  double grad_norm = 0.0;
};

// resolve -> compute_batch -> adam_update; errors with the offending triple
// index if the loss goes non-finite.
StepStats step(ModelParams* params, AdamState* adam, const BehaviorGraph& graph,
               const std::vector<TrainTriple>& batch, const Corpus& corpus,
               NegativeSampler* sampler, Rng* rng, const TrainConfig& config);

struct EpochMetrics {
  int epoch = 0;
  double loss_pr = 0.0;
  double loss_lm = 0.0;
  double val_hr10 = 0.0;
  double val_ndcg10 = 0.0;
  double val_mrr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  ModelParams params;       // best validation NDCG@10 checkpoint
  CheckpointMeta meta;      // best epoch + score + graph fingerprint
  std::vector<EpochMetrics> log;
};

// Full training loop: per-epoch shuffle, resolved batches, ADAM updates,
// validation NDCG@10 selection with patience, deterministic under seed.
TrainResult train(const Corpus& corpus, const BehaviorGraph& graph,
                  const TrainConfig& config);

void write_metrics_log(const std::vector<EpochMetrics>& log,
                       const std::filesystem::path& path);

}  // namespace sbg

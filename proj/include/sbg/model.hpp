#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sbg/behavior_graph.hpp"
#include "sbg/matrix.hpp"
#include "sbg/rng.hpp"

namespace sbg {

enum class ScoreMode { dot, cosine };

ScoreMode parse_score_mode(std::string_view name);
std::string_view score_mode_name(ScoreMode mode);

struct ModelDims {
  int n_words = 0;
  int n_products = 0;
  int n_sequences = 0;
  int d = 64;
  int d_a = 8;
};

// Named view over one trainable tensor; the canonical enumeration order of
// tensors() is what checkpoints, ADAM state and gradient buffers share.
struct TensorRef {
  std::string name;
  double* data = nullptr;
  std::int64_t size = 0;
  std::int64_t rows = 0;  // shape as persisted (rows x cols; vectors are 1 x n)
  std::int64_t cols = 0;
};

struct ModelParams {
  int d = 0;
  int d_a = 0;
  double lambda = 0.5;  // user-query balancing, fixed (not trained)
  ScoreMode mode = ScoreMode::dot;

  Matrix word_embeddings;      // |V| x d
  Matrix product_embeddings;   // n_products x d, the product rows of H^(0)
  Matrix sequence_embeddings;  // n_sequences x d, sequence rows of H^(0)
  // Query-conditioned attention: W_f in R^{d x d_a x d} stored row-major as
  // w_f[i*(d_a*d) + j*d + k]; t_{ij} = tanh(sum_k W_f[i,j,k] q_k + b_f[i,j]);
  // score(q, item) = sum_j W_h[j] * sum_i item_i * t_{ij}.
  Matrix attention_w_f;  // d x (d_a*d)
  Matrix attention_b_f;  // d x d_a
  std::vector<double> attention_w_h;  // d_a
  std::vector<double> zero_inquiry;   // d, the learnable 0' inquiry vector

  std::vector<TensorRef> tensors();
  std::vector<TensorRef> tensors() const;
  bool all_finite() const;
};

// Uniform init: embeddings in [-0.5/d, 0.5/d], attention tensors in
// [-1/sqrt(d), 1/sqrt(d)], zero_inquiry zeros.
ModelParams init_params(const ModelDims& dims, double lambda, ScoreMode mode,
                        Rng& rng);

// Stacks product embeddings over sequence embeddings into H^(0).
Matrix assemble_h0(const ModelParams& params);

// Mean of the query's word-embedding rows (phi = average).  Errors on an
// empty token list.
void encode_query(const ModelParams& params, const std::vector<int>& tokens,
                  double* out);

// t = tanh(W_f^T q + b_f), shape d x d_a; cached once per query.
void attention_context(const ModelParams& params, const double* q_vec,
                       Matrix* t);
double attention_score(const ModelParams& params, const Matrix& t,
                       const double* item_vec);
// Convenience form recomputing the context internally.
double attention_score(const ModelParams& params, const double* q_vec,
                       const double* item_vec);

struct UserContext {
  std::string user_id;
  std::vector<int> history;  // I_u, most recent first, capped
  int query_id = -1;
};

// Zero-attention internals kept for backprop and tests.
struct AttentionResult {
  Matrix t;                    // d x d_a
  std::vector<double> scores;  // |history| item scores, then the zero slot
  std::vector<double> alpha;   // softmax over the same slots
  std::vector<double> u;       // d
};

// u = sum_i alpha_i * h~_i over the enriched history rows; the zero slot
// (score from zero_inquiry) absorbs mass and contributes the zero vector.
AttentionResult user_vector_detailed(const ModelParams& params,
                                     const EnrichedEmbeddings& enriched,
                                     const std::vector<int>& history,
                                     const double* q_vec);
void user_vector(const ModelParams& params, const EnrichedEmbeddings& enriched,
                 const std::vector<int>& history, const double* q_vec,
                 double* out);

// M_uq = lambda*q + (1-lambda)*u.
void mix(const ModelParams& params, const double* u_vec, const double* q_vec,
         double* out);

// f(i, M_uq) with the RAW product embedding (enrichment is used only inside
// user_vector, per the model's uniqueness remark).
double score_product(const ModelParams& params, const double* m_uq,
                     int product);

// Scores all candidates against m_uq = mix(user_vector(...), q_vec); sorts
// by descending score, ties broken by ascending product index.
std::vector<std::pair<int, double>> rank(const ModelParams& params,
                                         const EnrichedEmbeddings& enriched,
                                         const UserContext& ctx,
                                         const double* q_vec,
                                         const std::vector<int>& candidates);

struct CheckpointMeta {
  std::string config_hash;
  std::uint64_t graph_fingerprint = 0;
  int best_epoch = -1;
  double val_ndcg10 = 0.0;
};

// Checkpoint = manifest.json (dims, lambda, mode, provenance, tensor shapes)
// plus one little-endian float32 blob per tensor.
void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta,
                     const std::filesystem::path& dir);
std::pair<ModelParams, CheckpointMeta> load_checkpoint(
    const std::filesystem::path& dir);

}  // namespace sbg

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sbg/corpus.hpp"
#include "sbg/matrix.hpp"

namespace sbg {

// Bipartite graph between products and successive-behavior sequences.
// Node indexing: products 0..n_products-1, sequences n_products..n_nodes-1.
// Adjacency stored CSR over the full (symmetric) node set; neighbor lists
// sorted ascending.  Edges are unweighted: a product occurring twice in the
// same sequence still yields a single edge.
struct BehaviorGraph {
  int n_products = 0;
  int n_sequences = 0;
  std::vector<std::int64_t> row_ptr;  // size n_nodes()+1
  std::vector<int> col;
  std::vector<std::int64_t> degree;   // row sums, size n_nodes()

  int n_nodes() const { return n_products + n_sequences; }
  std::int64_t n_edges() const {
    return static_cast<std::int64_t>(col.size()) / 2;
  }
  // Stable hash of (n_products, n_sequences, edge list) used to bind
  // checkpoints and enriched embeddings to the graph they came from.
  std::uint64_t fingerprint() const;
};

// Builds G_SB from training sequences only: edge (i, S) iff product i occurs
// in sequence S.  Sequence node s corresponds to train_sequences[s].
BehaviorGraph build_graph(const std::vector<SuccessiveSequence>& train_sequences,
                          int n_products);

// Text format: header "n_products n_sequences n_edges", then one
// "product_index \t sequence_index" line per edge (sequence_index is the
// local index, not the node id).  Round-trips bit-exactly.
void save_graph(const BehaviorGraph& graph, const std::filesystem::path& path);
BehaviorGraph load_graph(const std::filesystem::path& path);

struct PropagationConfig {
  double omega = 0.1;  // self-loop weight in F = omega*I + (1-omega)*D^-1*A
  double beta = 0.1;   // jumping-connection strength
  int layers = 4;

  void validate() const;  // throws E_CONFIG when out of range
};

// Graph-enriched embeddings H~(L) over all nodes, with provenance so stale
// caches are detectable.
struct EnrichedEmbeddings {
  Matrix values;  // n_nodes x d
  PropagationConfig config;
  std::uint64_t graph_fingerprint = 0;

  const double* product_row(int p) const { return values.row(p); }
};

// out = (omega*I + (1-omega)*D^-1*A) * in.  Isolated nodes copy their input
// row unchanged.  out must not alias in.
void propagate_once(const BehaviorGraph& graph, double omega, const Matrix& in,
                    Matrix* out);

// Plain stacking H(l) = F^l H0 (the no-jumping variant; beta = 0).
Matrix plain_propagate(const BehaviorGraph& graph, double omega, int layers,
                       const Matrix& h0);

// Jumping convolution H~(l) = F(beta*H0 + (1-beta)*H~(l-1)), H~(0) = H0.
EnrichedEmbeddings jumping_propagate(const BehaviorGraph& graph,
                                     const PropagationConfig& config,
                                     const Matrix& h0);

// Closed form ((1-beta)^l F^l + beta * sum_{k=1..l} (1-beta)^{k-1} F^k) H0,
// evaluated by accumulating F^k H0 (never materializes F^k).
Matrix closed_form_propagate(const BehaviorGraph& graph,
                             const PropagationConfig& config, const Matrix& h0);

// Adjoint of jumping_propagate as a linear map in H0: given dL/dH~(L),
// returns dL/dH0.  Needed because the propagation has no trainable
// parameters of its own but gradients must reach H0.
Matrix propagate_adjoint(const BehaviorGraph& graph,
                         const PropagationConfig& config,
                         const Matrix& grad_output);

// Laplacian-Beltrami diversity: Omega(H) = sum_k sum_{i,j} a_ij (H_ik-H_jk)^2
// over ordered pairs, i.e. each undirected edge counted twice.
double diversity(const BehaviorGraph& graph, const Matrix& h);

struct DiversityLayer {
  int layer = 0;
  double diversity_jump = 0.0;   // Omega(H~(l))
  double diversity_plain = 0.0;  // Omega(H(l))
  bool violation = false;        // Omega(H~(l)) <= Omega(H(l))
};

struct DiversityReport {
  bool hypotheses_met = false;  // omega in (0.5,1), beta in (0,1), Omega(H0)>0
  double diversity_h0 = 0.0;
  std::vector<DiversityLayer> layers;  // l = 1..max_layers
  int n_violations = 0;
};

// Computes Omega(H~(l)) and Omega(H(l)) for l = 1..max_layers.  Always runs;
// hypotheses_met flags whether the strict-growth guarantee's preconditions
// hold (jumping convolution keeps strictly more diversity than plain
// stacking under them).
DiversityReport verify_diversity_growth(const BehaviorGraph& graph,
                                        const Matrix& h0, double omega,
                                        double beta, int max_layers);

struct SpectralDiagnostics {
  std::vector<double> eigenvalues;         // of L_rw = I - D^-1*A, ascending
  std::vector<double> limit_coefficients;  // lim_l f_l(lambda), same order
};

// Dense eigendecomposition of the random-walk Laplacian (via the similarity
// transform to the symmetric normalized Laplacian).  Diagnostics only;
// refuses graphs larger than max_nodes.
SpectralDiagnostics spectral_diagnostics(const BehaviorGraph& graph,
                                         double omega, double beta,
                                         int max_nodes = 2000);

// Analytic limit lim_{l->inf} H~(l) computed spectrally (same size cap).
// diversity(graph, analytic_limit(...)) gives the over-smoothing floor that
// the jumping connection guarantees.
Matrix analytic_limit(const BehaviorGraph& graph, double omega, double beta,
                      const Matrix& h0, int max_nodes = 2000);

// Spectral filter coefficients from the appendix analysis (lambda in [0,2]):
// plain stacking g_l, jumping f_l, and the l->inf limit of f_l.
double plain_coefficient(double lambda, double omega, int layers);
double jumping_coefficient(double lambda, double omega, double beta,
                           int layers);
double limit_coefficient(double lambda, double omega, double beta);

}  // namespace sbg

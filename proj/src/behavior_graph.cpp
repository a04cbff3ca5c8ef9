#include "sbg/behavior_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "sbg/error.hpp"

namespace sbg {
namespace {

std::uint64_t fnv1a_append(std::uint64_t h, std::uint64_t value) {
  for (int byte = 0; byte < 8; ++byte) {
    h ^= (value >> (8 * byte)) & 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

void check_shape(const BehaviorGraph& graph, const Matrix& h) {
  if (h.rows != graph.n_nodes())
    fail("E_SHAPE", "matrix has " + std::to_string(h.rows) +
                        " rows but the graph has " +
                        std::to_string(graph.n_nodes()) + " nodes");
}

}  // namespace

std::uint64_t BehaviorGraph::fingerprint() const {
  std::uint64_t h = 14695981039346656037ULL;
  h = fnv1a_append(h, static_cast<std::uint64_t>(n_products));
  h = fnv1a_append(h, static_cast<std::uint64_t>(n_sequences));
  for (int node = 0; node < n_nodes(); ++node) {
    for (std::int64_t e = row_ptr[node]; e < row_ptr[node + 1]; ++e)
      h = fnv1a_append(h, (static_cast<std::uint64_t>(node) << 32) |
                              static_cast<std::uint32_t>(col[e]));
  }
  return h;
}

BehaviorGraph build_graph(const std::vector<SuccessiveSequence>& train_sequences,
                          int n_products) {
  BehaviorGraph graph;
  graph.n_products = n_products;
  graph.n_sequences = static_cast<int>(train_sequences.size());

  // Distinct products per sequence (set semantics: repeat purchases in one
  // sequence still give a single edge).
  std::vector<std::vector<int>> seq_products(train_sequences.size());
  std::vector<std::vector<int>> product_seqs(n_products);
  for (std::size_t s = 0; s < train_sequences.size(); ++s) {
    std::set<int> distinct;
    for (const auto& it : train_sequences[s].interactions) {
      if (it.product < 0 || it.product >= n_products)
        fail("E_STATE", "sequence references unknown product index " +
                            std::to_string(it.product));
      distinct.insert(it.product);
    }
    seq_products[s].assign(distinct.begin(), distinct.end());
    for (int p : seq_products[s]) product_seqs[p].push_back(static_cast<int>(s));
  }

  const int n = graph.n_nodes();
  graph.row_ptr.assign(n + 1, 0);
  graph.degree.assign(n, 0);
  for (int p = 0; p < n_products; ++p)
    graph.degree[p] = static_cast<std::int64_t>(product_seqs[p].size());
  for (int s = 0; s < graph.n_sequences; ++s)
    graph.degree[n_products + s] =
        static_cast<std::int64_t>(seq_products[s].size());
  for (int node = 0; node < n; ++node)
    graph.row_ptr[node + 1] = graph.row_ptr[node] + graph.degree[node];

  graph.col.resize(static_cast<std::size_t>(graph.row_ptr[n]));
  for (int p = 0; p < n_products; ++p) {
    std::int64_t offset = graph.row_ptr[p];
    for (int s : product_seqs[p]) graph.col[offset++] = n_products + s;
  }
  for (int s = 0; s < graph.n_sequences; ++s) {
    std::int64_t offset = graph.row_ptr[n_products + s];
    for (int p : seq_products[s]) graph.col[offset++] = p;
  }
  return graph;
}

void save_graph(const BehaviorGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("E_IO", "cannot write " + path.string());
  out << graph.n_products << ' ' << graph.n_sequences << ' ' << graph.n_edges()
      << '\n';
  for (int p = 0; p < graph.n_products; ++p) {
    for (std::int64_t e = graph.row_ptr[p]; e < graph.row_ptr[p + 1]; ++e)
      out << p << '\t' << (graph.col[e] - graph.n_products) << '\n';
  }
}

BehaviorGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("E_IO", "cannot read " + path.string());
  int n_products = 0, n_sequences = 0;
  std::int64_t n_edges = 0;
  if (!(in >> n_products >> n_sequences >> n_edges))
    fail("E_PARSE", "bad graph header in " + path.string());

  std::vector<std::vector<int>> product_seqs(n_products);
  std::vector<std::vector<int>> seq_products(n_sequences);
  int p = 0, s = 0;
  std::int64_t seen = 0;
  while (in >> p >> s) {
    if (p < 0 || p >= n_products || s < 0 || s >= n_sequences)
      fail("E_PARSE", "edge out of range in " + path.string());
    product_seqs[p].push_back(s);
    seq_products[s].push_back(p);
    ++seen;
  }
  if (seen != n_edges)
    fail("E_PARSE", "graph header promises " + std::to_string(n_edges) +
                        " edges but file has " + std::to_string(seen));

  BehaviorGraph graph;
  graph.n_products = n_products;
  graph.n_sequences = n_sequences;
  const int n = graph.n_nodes();
  graph.row_ptr.assign(n + 1, 0);
  graph.degree.assign(n, 0);
  for (int i = 0; i < n_products; ++i) {
    std::sort(product_seqs[i].begin(), product_seqs[i].end());
    graph.degree[i] = static_cast<std::int64_t>(product_seqs[i].size());
  }
  for (int j = 0; j < n_sequences; ++j) {
    std::sort(seq_products[j].begin(), seq_products[j].end());
    graph.degree[n_products + j] =
        static_cast<std::int64_t>(seq_products[j].size());
  }
  for (int node = 0; node < n; ++node)
    graph.row_ptr[node + 1] = graph.row_ptr[node] + graph.degree[node];
  graph.col.resize(static_cast<std::size_t>(graph.row_ptr[n]));
  for (int i = 0; i < n_products; ++i) {
    std::int64_t offset = graph.row_ptr[i];
    for (int j : product_seqs[i]) graph.col[offset++] = n_products + j;
  }
  for (int j = 0; j < n_sequences; ++j) {
    std::int64_t offset = graph.row_ptr[n_products + j];
    for (int i : seq_products[j]) graph.col[offset++] = i;
  }
  return graph;
}

void PropagationConfig::validate() const {
  if (!(omega >= 0.0 && omega <= 1.0))
    fail("E_CONFIG", "omega must lie in [0,1]");
  if (!(beta >= 0.0 && beta <= 1.0)) fail("E_CONFIG", "beta must lie in [0,1]");
  if (layers < 0) fail("E_CONFIG", "layers must be >= 0");
}

void propagate_once(const BehaviorGraph& graph, double omega, const Matrix& in,
                    Matrix* out) {
  check_shape(graph, in);
  if (!(omega >= 0.0 && omega <= 1.0))
    fail("E_CONFIG", "omega must lie in [0,1]");
  if (out->rows != in.rows || out->cols != in.cols)
    *out = Matrix(in.rows, in.cols);

  const int d = static_cast<int>(in.cols);
  for (int node = 0; node < graph.n_nodes(); ++node) {
    const double* src = in.row(node);
    double* dst = out->row(node);
    if (graph.degree[node] == 0) {  // isolated: full self-copy
      std::copy(src, src + d, dst);
      continue;
    }
    const double inv_deg = 1.0 / static_cast<double>(graph.degree[node]);
    for (int k = 0; k < d; ++k) dst[k] = 0.0;
    for (std::int64_t e = graph.row_ptr[node]; e < graph.row_ptr[node + 1]; ++e) {
      const double* nb = in.row(graph.col[e]);
      for (int k = 0; k < d; ++k) dst[k] += nb[k];
    }
    const double w = (1.0 - omega) * inv_deg;
    for (int k = 0; k < d; ++k) dst[k] = omega * src[k] + w * dst[k];
  }
}

Matrix plain_propagate(const BehaviorGraph& graph, double omega, int layers,
                       const Matrix& h0) {
  check_shape(graph, h0);
  Matrix h = h0;
  Matrix next(h0.rows, h0.cols);
  for (int l = 0; l < layers; ++l) {
    propagate_once(graph, omega, h, &next);
    std::swap(h, next);
  }
  return h;
}

EnrichedEmbeddings jumping_propagate(const BehaviorGraph& graph,
                                     const PropagationConfig& config,
                                     const Matrix& h0) {
  config.validate();
  check_shape(graph, h0);
  if (!h0.all_finite()) fail("E_NONFINITE", "H0 contains non-finite entries");

  Matrix h = h0;
  Matrix mixed(h0.rows, h0.cols);
  Matrix next(h0.rows, h0.cols);
  for (int l = 0; l < config.layers; ++l) {
    // beta*H0 + (1-beta)*H in lerp form: exact (mixed == H0) on the first
    // layer, where H == H0, so H~(1) and H(1) agree bit for bit.
    for (std::size_t idx = 0; idx < h.data.size(); ++idx)
      mixed.data[idx] = h.data[idx] + config.beta * (h0.data[idx] - h.data[idx]);
    propagate_once(graph, config.omega, mixed, &next);
    std::swap(h, next);
  }

  EnrichedEmbeddings enriched;
  enriched.values = std::move(h);
  enriched.config = config;
  enriched.graph_fingerprint = graph.fingerprint();
  return enriched;
}

Matrix closed_form_propagate(const BehaviorGraph& graph,
                             const PropagationConfig& config, const Matrix& h0) {
  config.validate();
  check_shape(graph, h0);
  if (config.layers == 0) return h0;

  const double beta = config.beta;
  Matrix power = h0;  // F^k H0 as k advances
  Matrix next(h0.rows, h0.cols);
  Matrix acc(h0.rows, h0.cols);
  acc.set_zero();
  double jump_coef = beta;  // beta * (1-beta)^{k-1}
  for (int k = 1; k <= config.layers; ++k) {
    propagate_once(graph, config.omega, power, &next);
    std::swap(power, next);
    axpy(jump_coef, power.data, acc.data);
    jump_coef *= (1.0 - beta);
  }
  // jump_coef has become beta*(1-beta)^L; the plain term carries (1-beta)^L.
  const double plain_coef = std::pow(1.0 - beta, config.layers);
  axpy(plain_coef, power.data, acc.data);
  return acc;
}

Matrix propagate_adjoint(const BehaviorGraph& graph,
                         const PropagationConfig& config,
                         const Matrix& grad_output) {
  config.validate();
  check_shape(graph, grad_output);

  const int d = static_cast<int>(grad_output.cols);
  Matrix g = grad_output;
  Matrix ft(grad_output.rows, grad_output.cols);
  Matrix grad_h0(grad_output.rows, grad_output.cols);
  grad_h0.set_zero();

  // Transpose of one propagation: (F^T y)_i = c_i y_i + (1-omega) *
  // sum_{j ~ i} y_j / deg_j, with c_i = omega (or 1 for isolated nodes).
  auto apply_ft = [&](const Matrix& y, Matrix* out) {
    for (int node = 0; node < graph.n_nodes(); ++node) {
      const double* src = y.row(node);
      double* dst = out->row(node);
      if (graph.degree[node] == 0) {
        std::copy(src, src + d, dst);
        continue;
      }
      for (int k = 0; k < d; ++k) dst[k] = 0.0;
      for (std::int64_t e = graph.row_ptr[node]; e < graph.row_ptr[node + 1];
           ++e) {
        const int nb = graph.col[e];
        const double w = 1.0 / static_cast<double>(graph.degree[nb]);
        const double* y_nb = y.row(nb);
        for (int k = 0; k < d; ++k) dst[k] += w * y_nb[k];
      }
      for (int k = 0; k < d; ++k)
        dst[k] = config.omega * src[k] + (1.0 - config.omega) * dst[k];
    }
  };

  for (int l = 0; l < config.layers; ++l) {
    apply_ft(g, &ft);
    std::swap(g, ft);
    axpy(config.beta, g.data, grad_h0.data);
    for (double& v : g.data) v *= (1.0 - config.beta);
  }
  axpy(1.0, g.data, grad_h0.data);
  return grad_h0;
}

double diversity(const BehaviorGraph& graph, const Matrix& h) {
  check_shape(graph, h);
  const int d = static_cast<int>(h.cols);
  double total = 0.0;
  for (int node = 0; node < graph.n_nodes(); ++node) {
    const double* hi = h.row(node);
    for (std::int64_t e = graph.row_ptr[node]; e < graph.row_ptr[node + 1]; ++e) {
      const double* hj = h.row(graph.col[e]);
      for (int k = 0; k < d; ++k) {
        const double diff = hi[k] - hj[k];
        total += diff * diff;
      }
    }
  }
  return total;  // ordered pairs: each undirected edge counted twice
}

DiversityReport verify_diversity_growth(const BehaviorGraph& graph,
                                        const Matrix& h0, double omega,
                                        double beta, int max_layers) {
  check_shape(graph, h0);
  DiversityReport report;
  report.diversity_h0 = diversity(graph, h0);
  report.hypotheses_met = omega > 0.5 && omega < 1.0 && beta > 0.0 &&
                          beta < 1.0 && report.diversity_h0 > 0.0;

  PropagationConfig config{omega, beta, max_layers};
  config.validate();

  Matrix jump = h0, plain = h0;
  Matrix mixed(h0.rows, h0.cols), next(h0.rows, h0.cols);
  for (int l = 1; l <= max_layers; ++l) {
    for (std::size_t idx = 0; idx < jump.data.size(); ++idx)
      mixed.data[idx] = jump.data[idx] + beta * (h0.data[idx] - jump.data[idx]);
    propagate_once(graph, omega, mixed, &next);
    std::swap(jump, next);
    propagate_once(graph, omega, plain, &next);
    std::swap(plain, next);

    DiversityLayer layer;
    layer.layer = l;
    layer.diversity_jump = diversity(graph, jump);
    layer.diversity_plain = diversity(graph, plain);
    layer.violation = !(layer.diversity_jump > layer.diversity_plain);
    if (layer.violation) ++report.n_violations;
    report.layers.push_back(layer);
  }
  return report;
}

namespace {

// Eigendecomposition of the symmetric normalized Laplacian restricted to
// non-isolated nodes.  L_rw = D^-1 L = D^-1/2 L_sym D^1/2 shares its
// eigenvalues, so spectra/limits transfer through the similarity transform.
struct LaplacianEigen {
  std::vector<int> nodes;  // non-isolated node ids
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

LaplacianEigen laplacian_eigen(const BehaviorGraph& graph, int max_nodes) {
  if (graph.n_nodes() > max_nodes)
    fail("E_STATE", "graph has " + std::to_string(graph.n_nodes()) +
                        " nodes, above the dense-eigendecomposition cap of " +
                        std::to_string(max_nodes));
  LaplacianEigen result;
  std::vector<int> position(graph.n_nodes(), -1);
  for (int node = 0; node < graph.n_nodes(); ++node) {
    if (graph.degree[node] > 0) {
      position[node] = static_cast<int>(result.nodes.size());
      result.nodes.push_back(node);
    }
  }
  const int m = static_cast<int>(result.nodes.size());
  Eigen::MatrixXd lsym = Eigen::MatrixXd::Identity(m, m);
  for (int r = 0; r < m; ++r) {
    const int node = result.nodes[r];
    for (std::int64_t e = graph.row_ptr[node]; e < graph.row_ptr[node + 1]; ++e) {
      const int nb = graph.col[e];
      lsym(r, position[nb]) -=
          1.0 / std::sqrt(static_cast<double>(graph.degree[node]) *
                          static_cast<double>(graph.degree[nb]));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lsym);
  if (solver.info() != Eigen::Success)
    fail("E_STATE", "eigendecomposition failed to converge");
  result.eigenvalues = solver.eigenvalues();
  result.eigenvectors = solver.eigenvectors();
  return result;
}

}  // namespace

SpectralDiagnostics spectral_diagnostics(const BehaviorGraph& graph,
                                         double omega, double beta,
                                         int max_nodes) {
  LaplacianEigen eig = laplacian_eigen(graph, max_nodes);
  SpectralDiagnostics diag;
  // Isolated nodes contribute eigenvalue 0 (their L_rw row is zero).
  const int n_isolated = graph.n_nodes() - static_cast<int>(eig.nodes.size());
  for (int i = 0; i < n_isolated; ++i) diag.eigenvalues.push_back(0.0);
  for (int i = 0; i < eig.eigenvalues.size(); ++i)
    diag.eigenvalues.push_back(eig.eigenvalues[i]);
  std::sort(diag.eigenvalues.begin(), diag.eigenvalues.end());
  for (double lambda : diag.eigenvalues)
    diag.limit_coefficients.push_back(limit_coefficient(lambda, omega, beta));
  return diag;
}

Matrix analytic_limit(const BehaviorGraph& graph, double omega, double beta,
                      const Matrix& h0, int max_nodes) {
  check_shape(graph, h0);
  if (!(beta > 0.0))
    fail("E_CONFIG", "analytic limit requires beta > 0 (no jump, no floor)");
  LaplacianEigen eig = laplacian_eigen(graph, max_nodes);
  const int m = static_cast<int>(eig.nodes.size());
  const int d = static_cast<int>(h0.cols);

  // H_inf = D^-1/2 V diag(f_inf(mu)) V^T D^1/2 H0 on non-isolated nodes;
  // isolated rows are fixed points of the recursion and stay at H0.
  Eigen::MatrixXd x(m, d);
  for (int r = 0; r < m; ++r) {
    const int node = eig.nodes[r];
    const double scale = std::sqrt(static_cast<double>(graph.degree[node]));
    for (int k = 0; k < d; ++k) x(r, k) = scale * h0.at(node, k);
  }
  Eigen::MatrixXd y = eig.eigenvectors.transpose() * x;
  for (int r = 0; r < m; ++r)
    y.row(r) *= limit_coefficient(eig.eigenvalues[r], omega, beta);
  Eigen::MatrixXd z = eig.eigenvectors * y;

  Matrix out = h0;
  for (int r = 0; r < m; ++r) {
    const int node = eig.nodes[r];
    const double scale = 1.0 / std::sqrt(static_cast<double>(graph.degree[node]));
    for (int k = 0; k < d; ++k) out.at(node, k) = scale * z(r, k);
  }
  return out;
}

double plain_coefficient(double lambda, double omega, int layers) {
  return std::pow(1.0 - (1.0 - omega) * lambda, layers);
}

double jumping_coefficient(double lambda, double omega, double beta,
                           int layers) {
  const double g1 = 1.0 - (1.0 - omega) * lambda;
  double f = std::pow(1.0 - beta, layers) * std::pow(g1, layers);
  double coef = beta;
  double gk = 1.0;
  for (int k = 1; k <= layers; ++k) {
    gk *= g1;
    f += coef * gk;
    coef *= (1.0 - beta);
  }
  return f;
}

double limit_coefficient(double lambda, double omega, double beta) {
  const double g1 = 1.0 - (1.0 - omega) * lambda;
  return beta * g1 / (1.0 - (1.0 - beta) * g1);
}

}  // namespace sbg

#pragma once

// Shared test fixtures: a temp-dir RAII guard, record/corpus builders, a
// dense reference implementation of the graph propagation, random graph
// generators, and the planted-signal corpus used by the experiment suites.

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sbg/behavior_graph.hpp"
#include "sbg/corpus.hpp"
#include "sbg/matrix.hpp"
#include "sbg/rng.hpp"
#include "sbg/training.hpp"

namespace sbgtest {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sbg-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline sbg::ReviewRecord rec(std::string user, std::string product,
                             std::int64_t ts, std::string text,
                             std::vector<std::string> category = {"books"}) {
  sbg::ReviewRecord r;
  r.user_id = std::move(user);
  r.product_id = std::move(product);
  r.timestamp = ts;
  r.review_text = std::move(text);
  r.category_path = std::move(category);
  return r;
}

inline std::string join_category(const std::vector<std::string>& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += '>';
    out += path[i];
  }
  return out;
}

// Serializes records in the tab-separated input layout.
inline void write_tsv(const std::filesystem::path& file,
                      const std::vector<sbg::ReviewRecord>& records) {
  std::ofstream out(file);
  for (const auto& r : records) {
    out << r.user_id << '\t' << r.product_id << '\t' << r.timestamp << '\t'
        << join_category(r.category_path) << '\t' << r.review_text << '\n';
  }
}

// ---------------------------------------------------------------------------
// Dense reference propagation.  Builds F = omega*I + (1-omega)*D^-1*A
// explicitly (isolated nodes get an identity row) and iterates the textbook
// recurrences, so the sparse kernels can be checked against an independent
// implementation.

inline sbg::Matrix dense_f(const sbg::BehaviorGraph& g, double omega) {
  const int n = g.n_nodes();
  sbg::Matrix f(n, n);
  for (int i = 0; i < n; ++i) {
    if (g.degree[i] == 0) {
      f.at(i, i) = 1.0;
      continue;
    }
    f.at(i, i) = omega;
    const double w = (1.0 - omega) / static_cast<double>(g.degree[i]);
    for (std::int64_t e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e)
      f.at(i, g.col[e]) += w;
  }
  return f;
}

inline sbg::Matrix dense_matmul(const sbg::Matrix& a, const sbg::Matrix& b) {
  sbg::Matrix out(a.rows, b.cols);
  for (std::int64_t i = 0; i < a.rows; ++i)
    for (std::int64_t k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (std::int64_t j = 0; j < b.cols; ++j)
        out.at(i, j) += aik * b.at(k, j);
    }
  return out;
}

inline sbg::Matrix dense_plain(const sbg::BehaviorGraph& g, double omega,
                               int layers, const sbg::Matrix& h0) {
  const sbg::Matrix f = dense_f(g, omega);
  sbg::Matrix h = h0;
  for (int l = 0; l < layers; ++l) h = dense_matmul(f, h);
  return h;
}

inline sbg::Matrix dense_jumping(const sbg::BehaviorGraph& g, double omega,
                                 double beta, int layers,
                                 const sbg::Matrix& h0) {
  const sbg::Matrix f = dense_f(g, omega);
  sbg::Matrix h = h0;
  for (int l = 0; l < layers; ++l) {
    sbg::Matrix mixed(h0.rows, h0.cols);
    for (std::size_t i = 0; i < mixed.data.size(); ++i)
      mixed.data[i] = beta * h0.data[i] + (1.0 - beta) * h.data[i];
    h = dense_matmul(f, mixed);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Random graphs.  Sequences are laid out as a chain over the products
// (sequence s touches products s mod P and s+1 mod P) plus random extras, so
// every generated graph is connected with decent algebraic connectivity --
// the over-smoothing decay checks need a spectral gap, not a near-path graph.

inline sbg::BehaviorGraph random_connected_graph(int n_products,
                                                 int n_sequences,
                                                 int extra_per_sequence,
                                                 sbg::Rng& rng) {
  std::vector<sbg::SuccessiveSequence> seqs(n_sequences);
  for (int s = 0; s < n_sequences; ++s) {
    std::set<int> members;
    members.insert(s % n_products);
    members.insert((s + 1) % n_products);
    for (int e = 0; e < extra_per_sequence; ++e)
      members.insert(static_cast<int>(rng.next_below(n_products)));
    seqs[s].seq_id = s;
    seqs[s].user_id = "synthetic";
    for (int p : members)
      seqs[s].interactions.push_back({p, 0, -1, SIZE_MAX});
  }
  return sbg::build_graph(seqs, n_products);
}

inline sbg::Matrix random_h0(int n, int d, sbg::Rng& rng) {
  sbg::Matrix h(n, d);
  for (auto& v : h.data) v = rng.uniform(-1.0, 1.0);
  return h;
}

// ---------------------------------------------------------------------------
// Planted-signal corpus: users belong to latent interest clusters and buy
// within their cluster with probability p_in, in shopping bursts spaced
// further apart than the sequence gap R.  Categories only reveal a coarse
// department (5 clusters each), so ranking inside a department requires the
// personalization signal carried by user history.

struct PlantedOptions {
  int n_users = 2000;
  int n_products = 1000;
  int n_clusters = 10;
  double p_in = 0.9;
  int min_bursts = 4;
  int max_bursts = 6;
  int min_burst_len = 2;
  int max_burst_len = 4;
  int cluster_vocab = 40;
  int shared_vocab = 40;
  std::uint64_t seed = 1;
};

inline std::vector<sbg::ReviewRecord> planted_corpus(
    const PlantedOptions& opt) {
  sbg::Rng rng(sbg::derive_seed(opt.seed, "planted-corpus"));
  const int per_cluster = opt.n_products / opt.n_clusters;
  std::vector<sbg::ReviewRecord> records;

  auto cluster_word = [](int c, int j) {
    return "c" + std::to_string(c) + "w" + std::to_string(j);
  };

  for (int u = 0; u < opt.n_users; ++u) {
    const int cluster = u % opt.n_clusters;
    const std::string dept = cluster < opt.n_clusters / 2 ? "alpha" : "beta";
    const std::int64_t user_start = 1'600'000'000 + 1000LL * u;
    const int n_bursts =
        opt.min_bursts +
        static_cast<int>(rng.next_below(opt.max_bursts - opt.min_bursts + 1));
    char user_id[16];
    std::snprintf(user_id, sizeof user_id, "u%05d", u);

    for (int b = 0; b < n_bursts; ++b) {
      const int len = opt.min_burst_len +
                      static_cast<int>(rng.next_below(
                          opt.max_burst_len - opt.min_burst_len + 1));
      for (int i = 0; i < len; ++i) {
        int product;
        if (rng.next_double() < opt.p_in) {
          product = cluster * per_cluster +
                    static_cast<int>(rng.next_below(per_cluster));
        } else {
          product = static_cast<int>(rng.next_below(opt.n_products));
        }
        const int product_cluster = product / per_cluster;
        const std::string product_dept =
            product_cluster < opt.n_clusters / 2 ? "alpha" : "beta";

        std::string text = product_dept;
        for (int w = 0; w < 5; ++w)
          text += ' ' + cluster_word(product_cluster,
                                     static_cast<int>(rng.next_below(
                                         opt.cluster_vocab)));
        for (int w = 0; w < 2; ++w)
          text += " common" + std::to_string(rng.next_below(opt.shared_vocab));

        char product_id[16];
        std::snprintf(product_id, sizeof product_id, "p%04d", product);
        // Bursts are 10 days apart (> R); purchases inside a burst are an
        // hour apart, so each burst becomes one successive sequence.
        const std::int64_t ts =
            user_start + 864'000LL * b + 3'600LL * i;
        records.push_back(
            rec(user_id, product_id, ts, text, {product_dept}));
      }
    }
  }
  return records;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// Central finite-difference check of the analytic batch gradients.  Walks
// every coordinate of every trainable tensor; returns the worst relative
// error |analytic - numeric| / max(1, |analytic|, |numeric|).

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::int64_t worst_index = -1;
};

inline GradCheckResult gradient_check(sbg::ModelParams& params,
                                      const sbg::BehaviorGraph& graph,
                                      const std::vector<sbg::ResolvedTriple>& batch,
                                      const sbg::TrainConfig& config,
                                      double step = 1e-5) {
  sbg::Gradients grads = sbg::zero_gradients(params);
  sbg::compute_batch(params, graph, batch, config, &grads);

  GradCheckResult result;
  auto refs = params.tensors();
  for (std::size_t t = 0; t < refs.size(); ++t) {
    for (std::int64_t i = 0; i < refs[t].size; ++i) {
      const double saved = refs[t].data[i];
      refs[t].data[i] = saved + step;
      const double up =
          sbg::compute_batch(params, graph, batch, config, nullptr).total();
      refs[t].data[i] = saved - step;
      const double down =
          sbg::compute_batch(params, graph, batch, config, nullptr).total();
      refs[t].data[i] = saved;

      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grads.g[t][static_cast<std::size_t>(i)];
      const double rel = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_tensor = refs[t].name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace sbgtest

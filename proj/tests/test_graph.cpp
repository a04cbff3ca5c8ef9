#include "sbg/behavior_graph.hpp"

#include <cmath>
#include <cstdlib>
#include <vector>

#include "doctest.h"
#include "sbg/rng.hpp"
#include "support/helpers.hpp"

using namespace sbg;
using sbgtest::TempDir;

namespace {

SuccessiveSequence seq_of(int id, std::vector<int> products) {
  SuccessiveSequence s;
  s.seq_id = id;
  s.user_id = "u";
  for (std::size_t i = 0; i < products.size(); ++i)
    s.interactions.push_back(
        {products[i], static_cast<std::int64_t>(i), -1, SIZE_MAX});
  return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

// 2 products + 1 sequence, everything connected.
BehaviorGraph triangle_graph() {
  return build_graph({seq_of(0, {0, 1})}, 2);
}

}  // namespace

TEST_CASE("build_graph forms one edge per distinct product-sequence pair") {
  // Sequences [[p0,p1],[p1,p2]]: deg(p1)=2, four edges total.
  const BehaviorGraph g =
      build_graph({seq_of(0, {0, 1}), seq_of(1, {1, 2})}, 3);
  CHECK(g.n_products == 3);
  CHECK(g.n_sequences == 2);
  CHECK(g.n_nodes() == 5);
  CHECK(g.n_edges() == 4);
  CHECK(g.degree == std::vector<std::int64_t>{1, 2, 1, 2, 2});

  // Repeated products inside one sequence still give a single edge.
  const BehaviorGraph dup = build_graph({seq_of(0, {0, 0, 0, 1})}, 2);
  CHECK(dup.n_edges() == 2);
  CHECK(dup.degree[0] == 1);
}

TEST_CASE("build_graph with no sequences leaves all products isolated") {
  const BehaviorGraph g = build_graph({}, 4);
  CHECK(g.n_nodes() == 4);
  CHECK(g.n_edges() == 0);
  CHECK(g.degree == std::vector<std::int64_t>{0, 0, 0, 0});
}

TEST_CASE("graph adjacency is bipartite and symmetric") {
  Rng rng(7);
  const BehaviorGraph g = sbgtest::random_connected_graph(12, 20, 2, rng);
  for (int i = 0; i < g.n_nodes(); ++i) {
    for (std::int64_t e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
      const int j = g.col[e];
      const bool i_is_product = i < g.n_products;
      const bool j_is_product = j < g.n_products;
      CHECK(i_is_product != j_is_product);
      // symmetric: j lists i back
      bool found = false;
      for (std::int64_t e2 = g.row_ptr[j]; e2 < g.row_ptr[j + 1]; ++e2)
        if (g.col[e2] == i) found = true;
      CHECK(found);
    }
    CHECK(g.degree[i] == g.row_ptr[i + 1] - g.row_ptr[i]);
  }
}

TEST_CASE("graph save/load round-trips bit-exactly and keeps the fingerprint") {
  TempDir tmp("graph-roundtrip");
  Rng rng(11);
  const BehaviorGraph g = sbgtest::random_connected_graph(9, 14, 2, rng);
  const auto file = tmp.path() / "graph.tsv";
  save_graph(g, file);
  const BehaviorGraph back = load_graph(file);
  CHECK(back.n_products == g.n_products);
  CHECK(back.n_sequences == g.n_sequences);
  CHECK(back.row_ptr == g.row_ptr);
  CHECK(back.col == g.col);
  CHECK(back.degree == g.degree);
  CHECK(back.fingerprint() == g.fingerprint());
}

TEST_CASE("fingerprint distinguishes different graphs") {
  const BehaviorGraph a = build_graph({seq_of(0, {0, 1})}, 2);
  const BehaviorGraph b = build_graph({seq_of(0, {0, 1}), seq_of(1, {1})}, 2);
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("propagate_once matches the worked three-node example") {
  // Features h = (1, 3, 2) for (p0, p1, s0) at omega = 0.5:
  // p0 -> 0.5*1 + 0.5*2 = 1.5; p1 -> 0.5*3 + 0.5*2 = 2.5;
  // s0 -> 0.5*2 + 0.5*(1+3)/2 = 2.0.
  const BehaviorGraph g = triangle_graph();
  Matrix h(3, 1);
  h.at(0, 0) = 1.0;
  h.at(1, 0) = 3.0;
  h.at(2, 0) = 2.0;
  Matrix out(3, 1);
  propagate_once(g, 0.5, h, &out);
  CHECK(out.at(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(out.at(1, 0) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(out.at(2, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("propagate_once with omega=1 is the identity") {
  Rng rng(3);
  const BehaviorGraph g = sbgtest::random_connected_graph(6, 9, 1, rng);
  const Matrix h = sbgtest::random_h0(g.n_nodes(), 4, rng);
  Matrix out(h.rows, h.cols);
  propagate_once(g, 1.0, h, &out);
  CHECK(max_abs_diff(out, h) == 0.0);
}

TEST_CASE("propagate_once keeps isolated rows unchanged for any omega") {
  // Product 2 appears in no sequence.
  const BehaviorGraph g = build_graph({seq_of(0, {0, 1})}, 3);
  Rng rng(5);
  const Matrix h = sbgtest::random_h0(g.n_nodes(), 3, rng);
  for (double omega : {0.0, 0.3, 0.9}) {
    Matrix out(h.rows, h.cols);
    propagate_once(g, omega, h, &out);
    for (int k = 0; k < 3; ++k) CHECK(out.at(2, k) == h.at(2, k));
  }
}

TEST_CASE("propagate_once rejects shape mismatches") {
  const BehaviorGraph g = triangle_graph();
  Matrix h(2, 1);  // needs 3 rows
  Matrix out(2, 1);
  CHECK_THROWS_WITH_AS(propagate_once(g, 0.5, h, &out),
                       doctest::Contains("E_SHAPE"), Error);
}

TEST_CASE("propagation preserves constant vectors exactly") {
  Rng rng(13);
  const BehaviorGraph g = sbgtest::random_connected_graph(10, 17, 2, rng);
  Matrix h(g.n_nodes(), 2, 0.75);
  Matrix out(h.rows, h.cols);
  propagate_once(g, 0.2, h, &out);
  for (double v : out.data) CHECK(v == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("sparse propagation agrees with the dense operator oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int P = 3 + static_cast<int>(rng.next_below(10));
    const int S = P + static_cast<int>(rng.next_below(10));
    const BehaviorGraph g = sbgtest::random_connected_graph(P, S, 2, rng);
    const Matrix h0 = sbgtest::random_h0(g.n_nodes(), 5, rng);
    const double omega = rng.uniform(0.05, 0.95);

    Matrix out(h0.rows, h0.cols);
    propagate_once(g, omega, h0, &out);
    const Matrix dense =
        sbgtest::dense_matmul(sbgtest::dense_f(g, omega), h0);
    CHECK(max_abs_diff(out, dense) < 1e-12);
  }
}

TEST_CASE("jumping_propagate matches the dense recurrence oracle") {
  Rng rng(19);
  for (int trial = 0; trial < 6; ++trial) {
    const BehaviorGraph g = sbgtest::random_connected_graph(
        4 + static_cast<int>(rng.next_below(8)),
        8 + static_cast<int>(rng.next_below(8)), 2, rng);
    const Matrix h0 = sbgtest::random_h0(g.n_nodes(), 3, rng);
    const PropagationConfig cfg{rng.uniform(0.05, 0.95),
                                rng.uniform(0.05, 0.95),
                                1 + static_cast<int>(rng.next_below(6))};
    const EnrichedEmbeddings got = jumping_propagate(g, cfg, h0);
    const Matrix want =
        sbgtest::dense_jumping(g, cfg.omega, cfg.beta, cfg.layers, h0);
    CHECK(max_abs_diff(got.values, want) < 1e-10);
    CHECK(got.graph_fingerprint == g.fingerprint());
  }
}

TEST_CASE("jumping_propagate boundary behavior") {
  Rng rng(23);
  const BehaviorGraph g = sbgtest::random_connected_graph(6, 10, 2, rng);
  const Matrix h0 = sbgtest::random_h0(g.n_nodes(), 4, rng);

  SUBCASE("zero layers returns H0 exactly") {
    const EnrichedEmbeddings e = jumping_propagate(g, {0.3, 0.4, 0}, h0);
    CHECK(max_abs_diff(e.values, h0) == 0.0);
  }
  SUBCASE("beta=1 collapses to a single propagation regardless of depth") {
    Matrix once(h0.rows, h0.cols);
    propagate_once(g, 0.3, h0, &once);
    for (int layers : {1, 3, 7}) {
      const EnrichedEmbeddings e = jumping_propagate(g, {0.3, 1.0, layers}, h0);
      CHECK(max_abs_diff(e.values, once) == 0.0);
    }
  }
  SUBCASE("one layer equals plain propagation bit for bit") {
    const EnrichedEmbeddings e = jumping_propagate(g, {0.3, 0.4, 1}, h0);
    Matrix once(h0.rows, h0.cols);
    propagate_once(g, 0.3, h0, &once);
    CHECK(max_abs_diff(e.values, once) == 0.0);
  }
  SUBCASE("non-finite input is rejected") {
    Matrix bad = h0;
    bad.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(jumping_propagate(g, {0.3, 0.4, 2}, bad),
                         doctest::Contains("E_NONFINITE"), Error);
  }
}

TEST_CASE("propagation is linear in H0") {
  Rng rng(29);
  const BehaviorGraph g = sbgtest::random_connected_graph(7, 12, 2, rng);
  const Matrix a = sbgtest::random_h0(g.n_nodes(), 3, rng);
  const Matrix b = sbgtest::random_h0(g.n_nodes(), 3, rng);
  const double c = 2.375;
  const PropagationConfig cfg{0.2, 0.3, 5};

  Matrix combo(a.rows, a.cols);
  for (std::size_t i = 0; i < combo.data.size(); ++i)
    combo.data[i] = c * a.data[i] + b.data[i];

  const Matrix lhs = jumping_propagate(g, cfg, combo).values;
  const Matrix fa = jumping_propagate(g, cfg, a).values;
  const Matrix fb = jumping_propagate(g, cfg, b).values;
  Matrix rhs(a.rows, a.cols);
  for (std::size_t i = 0; i < rhs.data.size(); ++i)
    rhs.data[i] = c * fa.data[i] + fb.data[i];

  double scale = 0.0;
  for (double v : lhs.data) scale = std::max(scale, std::abs(v));
  CHECK(max_abs_diff(lhs, rhs) <= 1e-8 * std::max(1.0, scale));
}

TEST_CASE("closed form matches the iterative propagation across a grid") {
  Rng rng(31);
  for (double omega : {0.1, 0.55, 0.9}) {
    for (double beta : {0.1, 0.5, 0.9}) {
      for (int layers : {1, 4, 16, 64}) {
        const BehaviorGraph g = sbgtest::random_connected_graph(
            4 + static_cast<int>(rng.next_below(6)),
            8 + static_cast<int>(rng.next_below(6)), 2, rng);
        const Matrix h0 = sbgtest::random_h0(g.n_nodes(), 3, rng);
        const PropagationConfig cfg{omega, beta, layers};
        const Matrix iterative = jumping_propagate(g, cfg, h0).values;
        const Matrix closed = closed_form_propagate(g, cfg, h0);
        CHECK(max_abs_diff(iterative, closed) <= 1e-6);
      }
    }
  }
}

TEST_CASE("closed form telescopes to one propagation at L=1 and to plain at beta=0") {
  Rng rng(37);
  const BehaviorGraph g = sbgtest::random_connected_graph(6, 11, 2, rng);
  const Matrix h0 = sbgtest::random_h0(g.n_nodes(), 4, rng);

  Matrix once(h0.rows, h0.cols);
  propagate_once(g, 0.4, h0, &once);
  CHECK(max_abs_diff(closed_form_propagate(g, {0.4, 0.7, 1}, h0), once) <
        1e-12);

  const Matrix plain = plain_propagate(g, 0.4, 6, h0);
  CHECK(max_abs_diff(closed_form_propagate(g, {0.4, 0.0, 6}, h0), plain) <
        1e-12);
}

TEST_CASE("propagation config validation") {
  const auto check_rejected = [](double omega, double beta, int layers) {
    const PropagationConfig bad{omega, beta, layers};
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("E_CONFIG"), Error);
  };
  check_rejected(-0.1, 0.5, 1);
  check_rejected(0.5, 1.5, 1);
  check_rejected(0.5, 0.5, -1);
  const PropagationConfig ok{0.0, 1.0, 0};
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("diversity oracle values") {
  SUBCASE("single edge with scalar features 0 and 1 gives 2") {
    const BehaviorGraph g = build_graph({seq_of(0, {0})}, 1);
    Matrix h(2, 1);
    h.at(0, 0) = 0.0;
    h.at(1, 0) = 1.0;
    CHECK(diversity(g, h) == doctest::Approx(2.0).epsilon(1e-14));
  }
  SUBCASE("constant embeddings have zero diversity") {
    Rng rng(41);
    const BehaviorGraph g = sbgtest::random_connected_graph(5, 9, 2, rng);
    Matrix h(g.n_nodes(), 3, 1.25);
    CHECK(diversity(g, h) == 0.0);
  }
  SUBCASE("diversity is quadratic under scaling") {
    Rng rng(43);
    const BehaviorGraph g = sbgtest::random_connected_graph(5, 9, 2, rng);
    Matrix h = sbgtest::random_h0(g.n_nodes(), 3, rng);
    const double base = diversity(g, h);
    for (double& v : h.data) v *= 2.0;
    CHECK(diversity(g, h) == doctest::Approx(4.0 * base).epsilon(1e-12));
  }
}

TEST_CASE("diversity growth on a connected graph shows no violations past layer 1") {
  Rng rng(47);
  const BehaviorGraph g = sbgtest::random_connected_graph(3, 3, 1, rng);
  const Matrix h0 = sbgtest::random_h0(g.n_nodes(), 3, rng);
  const DiversityReport report = verify_diversity_growth(g, h0, 0.7, 0.3, 64);
  CHECK(report.hypotheses_met);
  CHECK(report.diversity_h0 > 0.0);
  REQUIRE(report.layers.size() == 64);
  // Layer 1 is the algebraic tie f_1 = g_1: both convolutions coincide.
  CHECK(report.layers[0].diversity_jump ==
        report.layers[0].diversity_plain);
  for (std::size_t i = 1; i < report.layers.size(); ++i) {
    CHECK(report.layers[i].diversity_jump >
          report.layers[i].diversity_plain);
  }
  // Plain diversity decays: Omega(H^(64)) < Omega(H^(1)).
  CHECK(report.layers[63].diversity_plain < report.layers[0].diversity_plain);
}

TEST_CASE("diversity growth flags out-of-range hypotheses but still computes") {
  Rng rng(53);
  const BehaviorGraph g = sbgtest::random_connected_graph(5, 8, 2, rng);
  const Matrix h0 = sbgtest::random_h0(g.n_nodes(), 2, rng);
  const DiversityReport report = verify_diversity_growth(g, h0, 0.1, 0.1, 8);
  CHECK_FALSE(report.hypotheses_met);
  CHECK(report.layers.size() == 8);
  for (const auto& layer : report.layers) {
    CHECK(std::isfinite(layer.diversity_jump));
    CHECK(std::isfinite(layer.diversity_plain));
  }
}

TEST_CASE("spectral diagnostics match hand-computed small graphs") {
  SUBCASE("single edge has eigenvalues 0 and 2") {
    const BehaviorGraph g = build_graph({seq_of(0, {0})}, 1);
    const SpectralDiagnostics d = spectral_diagnostics(g, 0.7, 0.3);
    REQUIRE(d.eigenvalues.size() == 2);
    CHECK(d.eigenvalues[0] == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(d.eigenvalues[1] == doctest::Approx(2.0).epsilon(1e-10));
  }
  SUBCASE("smallest eigenvalue is 0 and range is [0,2]") {
    Rng rng(59);
    const BehaviorGraph g = sbgtest::random_connected_graph(8, 13, 2, rng);
    const SpectralDiagnostics d = spectral_diagnostics(g, 0.7, 0.3);
    REQUIRE(!d.eigenvalues.empty());
    CHECK(std::abs(d.eigenvalues.front()) < 1e-8);
    for (double ev : d.eigenvalues) {
      CHECK(ev > -1e-8);
      CHECK(ev < 2.0 + 1e-8);
    }
  }
  SUBCASE("limit coefficient at lambda=0 is 1") {
    CHECK(limit_coefficient(0.0, 0.7, 0.3) == doctest::Approx(1.0));
    CHECK(limit_coefficient(0.0, 0.55, 0.9) == doctest::Approx(1.0));
  }
  SUBCASE("size cap is enforced") {
    Rng rng(61);
    const BehaviorGraph g = sbgtest::random_connected_graph(30, 40, 1, rng);
    CHECK_THROWS_WITH_AS(spectral_diagnostics(g, 0.7, 0.3, 10),
                         doctest::Contains("E_STATE"), Error);
  }
}

TEST_CASE("filter coefficients: f dominates g and approaches the limit") {
  for (double omega : {0.55, 0.7, 0.9}) {
    for (double beta : {0.1, 0.5, 0.9}) {
      for (double lambda : {0.0, 0.37, 1.0, 1.62, 2.0}) {
        // l=1 tie, strict dominance afterwards for lambda > 0.
        CHECK(jumping_coefficient(lambda, omega, beta, 1) ==
              doctest::Approx(plain_coefficient(lambda, omega, 1))
                  .epsilon(1e-12));
        for (int l : {2, 4, 16}) {
          const double f = jumping_coefficient(lambda, omega, beta, l);
          const double g = plain_coefficient(lambda, omega, l);
          if (lambda == 0.0) {
            CHECK(f == doctest::Approx(g).epsilon(1e-12));
          } else {
            CHECK(f > g);
          }
        }
        const double f200 = jumping_coefficient(lambda, omega, beta, 200);
        CHECK(f200 ==
              doctest::Approx(limit_coefficient(lambda, omega, beta))
                  .epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("long-run diversity approaches the analytic spectral limit") {
  Rng rng(67);
  const BehaviorGraph g = sbgtest::random_connected_graph(8, 14, 3, rng);
  const Matrix h0 = sbgtest::random_h0(g.n_nodes(), 4, rng);
  const double omega = 0.7, beta = 0.3;

  const Matrix limit = analytic_limit(g, omega, beta, h0);
  const double limit_div = diversity(g, limit);
  CHECK(limit_div > 0.0);

  const Matrix h200 = jumping_propagate(g, {omega, beta, 200}, h0).values;
  const double div200 = diversity(g, h200);
  CHECK(div200 > 0.5 * limit_div);
  // 200 layers is effectively converged at these settings.
  CHECK(div200 == doctest::Approx(limit_div).epsilon(1e-3));

  // Plain convolution, by contrast, collapses.
  const Matrix plain200 = plain_propagate(g, omega, 200, h0);
  CHECK(diversity(g, plain200) < 1e-3 * diversity(g, h0));
}

TEST_CASE("analytic limit fixes isolated rows at H0") {
  const BehaviorGraph g = build_graph({seq_of(0, {0, 1})}, 3);  // p2 isolated
  Rng rng(71);
  const Matrix h0 = sbgtest::random_h0(g.n_nodes(), 2, rng);
  const Matrix limit = analytic_limit(g, 0.7, 0.3, h0);
  for (int k = 0; k < 2; ++k)
    CHECK(limit.at(2, k) == doctest::Approx(h0.at(2, k)).epsilon(1e-12));
}

TEST_CASE("propagate_adjoint is the exact transpose of the forward map") {
  // <A x, y> == <x, A^T y> for the linear map A = jumping_propagate.
  Rng rng(73);
  for (int trial = 0; trial < 8; ++trial) {
    const BehaviorGraph g = sbgtest::random_connected_graph(
        3 + static_cast<int>(rng.next_below(8)),
        5 + static_cast<int>(rng.next_below(10)), 2, rng);
    const PropagationConfig cfg{rng.uniform(0.05, 0.95),
                                rng.uniform(0.0, 0.95),
                                static_cast<int>(rng.next_below(6))};
    const Matrix x = sbgtest::random_h0(g.n_nodes(), 3, rng);
    const Matrix y = sbgtest::random_h0(g.n_nodes(), 3, rng);

    const Matrix ax = jumping_propagate(g, cfg, x).values;
    const Matrix aty = propagate_adjoint(g, cfg, y);

    const double lhs = dot(std::span<const double>(ax.data),
                           std::span<const double>(y.data));
    const double rhs = dot(std::span<const double>(x.data),
                           std::span<const double>(aty.data));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

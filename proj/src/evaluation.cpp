#include "sbg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "sbg/error.hpp"
#include "sbg/rng.hpp"

namespace sbg {
namespace {

// Evaluation-time I_u per user: training purchases, most recent first,
// deduplicated, capped.
std::map<std::string, std::vector<int>> train_histories(const Corpus& corpus,
                                                        int history_cap) {
  std::map<std::string, std::vector<std::pair<std::int64_t, int>>> timeline;
  for (const auto& seq : corpus.split.train)
    for (const auto& it : seq.interactions)
      timeline[seq.user_id].emplace_back(it.timestamp, it.product);

  std::map<std::string, std::vector<int>> history;
  for (auto& [user, tl] : timeline) {
    std::sort(tl.begin(), tl.end());
    std::vector<int> h;
    std::set<int> seen;
    for (auto rit = tl.rbegin(); rit != tl.rend(); ++rit) {
      if (static_cast<int>(h.size()) >= history_cap) break;
      if (seen.insert(rit->second).second) h.push_back(rit->second);
    }
    history.emplace(user, std::move(h));
  }
  return history;
}

}  // namespace

std::vector<EvalCase> build_cases(const Corpus& corpus, SplitTag which,
                                  std::uint64_t seed, int pool_size,
                                  int history_cap) {
  if (pool_size < 1) fail("E_CONFIG", "pool_size must be >= 1");
  const std::vector<SuccessiveSequence>* sequences = nullptr;
  switch (which) {
    case SplitTag::train: sequences = &corpus.split.train; break;
    case SplitTag::validation: sequences = &corpus.split.validation; break;
    case SplitTag::test: sequences = &corpus.split.test; break;
  }

  const auto histories = train_histories(corpus, history_cap);
  const auto& universe = corpus.split.train_products;
  Rng rng(seed);

  std::vector<EvalCase> cases;
  for (const auto& seq : *sequences) {
    auto hist_it = histories.find(seq.user_id);
    for (const auto& it : seq.interactions) {
      if (it.query < 0) continue;  // no query, nothing to issue
      EvalCase c;
      c.user_id = seq.user_id;
      c.query_id = it.query;
      c.query_tokens = corpus.queries.queries[it.query].token_indices;
      c.target = it.product;
      if (hist_it != histories.end()) c.history = hist_it->second;

      if (static_cast<int>(universe.size()) <= pool_size) {
        c.candidates = universe;  // pool capped at the full universe
      } else {
        std::vector<int> pool = universe;
        auto pos = std::lower_bound(pool.begin(), pool.end(), c.target);
        std::swap(*pos, pool.back());
        pool.pop_back();
        // partial Fisher-Yates: first pool_size-1 entries are a uniform
        // without-replacement sample
        const std::size_t need = static_cast<std::size_t>(pool_size) - 1;
        for (std::size_t i = 0; i < need; ++i) {
          const std::size_t j =
              i + static_cast<std::size_t>(rng.next_below(pool.size() - i));
          std::swap(pool[i], pool[j]);
        }
        c.candidates.reserve(static_cast<std::size_t>(pool_size));
        c.candidates.push_back(c.target);
        c.candidates.insert(c.candidates.end(), pool.begin(),
                            pool.begin() + static_cast<std::ptrdiff_t>(need));
      }
      cases.push_back(std::move(c));
    }
  }
  return cases;
}

double metric_hr(int rank, int k) {
  if (rank < 1) fail("E_STATE", "rank must be >= 1");
  return rank <= k ? 1.0 : 0.0;
}

double metric_ndcg(int rank, int k) {
  if (rank < 1) fail("E_STATE", "rank must be >= 1");
  if (rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

double metric_mrr(int rank, int n) {
  if (rank < 1) fail("E_STATE", "rank must be >= 1");
  return rank <= n ? 1.0 / static_cast<double>(rank) : 0.0;
}

EvalReport evaluate(const ModelParams& params,
                    const EnrichedEmbeddings& enriched,
                    const std::vector<EvalCase>& cases) {
  EvalReport report;
  report.n_cases = cases.size();
  if (cases.empty()) return report;

  KahanSum hr10, ndcg10, ndcg20, ndcg100, mrr100;
  std::vector<double> q_vec(params.d);
  report.ranks.reserve(cases.size());
  for (const auto& c : cases) {
    encode_query(params, c.query_tokens, q_vec.data());
    UserContext ctx{c.user_id, c.history, c.query_id};
    auto ranked = rank(params, enriched, ctx, q_vec.data(), c.candidates);
    int target_rank = -1;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      if (ranked[i].first == c.target) {
        target_rank = static_cast<int>(i) + 1;
        break;
      }
    }
    if (target_rank < 0)
      fail("E_STATE", "target product missing from its own candidate pool");
    report.ranks.push_back(target_rank);
    hr10.add(metric_hr(target_rank, 10));
    ndcg10.add(metric_ndcg(target_rank, 10));
    ndcg20.add(metric_ndcg(target_rank, 20));
    ndcg100.add(metric_ndcg(target_rank, 100));
    mrr100.add(metric_mrr(target_rank, 100));
  }
  const double n = static_cast<double>(cases.size());
  report.hr10 = hr10.value() / n;
  report.ndcg10 = ndcg10.value() / n;
  report.ndcg20 = ndcg20.value() / n;
  report.ndcg100 = ndcg100.value() / n;
  report.mrr100 = mrr100.value() / n;
  return report;
}

void write_eval_report(const EvalReport& report,
                       const std::vector<EvalCase>& cases,
                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    nlohmann::json j;
    j["hr10"] = report.hr10;
    j["ndcg10"] = report.ndcg10;
    j["ndcg20"] = report.ndcg20;
    j["ndcg100"] = report.ndcg100;
    j["mrr100"] = report.mrr100;
    j["n_cases"] = report.n_cases;
    j["config_fingerprint"] = report.config_fingerprint;
    std::ofstream out(dir / "metrics.json", std::ios::binary);
    if (!out) fail("E_IO", "cannot write " + (dir / "metrics.json").string());
    out << j.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "metrics.txt", std::ios::binary);
    if (!out) fail("E_IO", "cannot write " + (dir / "metrics.txt").string());
    char line[64];
    auto emit = [&](const char* name, double value) {
      std::snprintf(line, sizeof line, "%-10s %.6f\n", name, value);
      out << line;
    };
    emit("HR@10", report.hr10);
    emit("NDCG@10", report.ndcg10);
    emit("NDCG@20", report.ndcg20);
    emit("NDCG@100", report.ndcg100);
    emit("MRR@100", report.mrr100);
    out << "cases      " << report.n_cases << '\n';
  }
  {
    if (cases.size() != report.ranks.size())
      fail("E_STATE", "per-case ranks do not match the case list");
    std::ofstream out(dir / "cases.csv", std::ios::binary);
    if (!out) fail("E_IO", "cannot write " + (dir / "cases.csv").string());
    out << "user_id,query_id,target,rank\n";
    for (std::size_t i = 0; i < cases.size(); ++i)
      out << cases[i].user_id << ',' << cases[i].query_id << ','
          << cases[i].target << ',' << report.ranks[i] << '\n';
  }
}

}  // namespace sbg

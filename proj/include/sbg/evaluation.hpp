#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sbg/behavior_graph.hpp"
#include "sbg/corpus.hpp"
#include "sbg/model.hpp"

namespace sbg {

struct EvalCase {
  std::string user_id;
  int query_id = -1;
  std::vector<int> query_tokens;
  int target = -1;              // target product index
  std::vector<int> candidates;  // pool incl. target exactly once, no dups
  std::vector<int> history;     // I_u from train sequences, most recent first
};

// One case per (user, query, target) occurrence in the chosen split's
// sequences; interactions without a query are skipped.  Negatives drawn
// uniformly without replacement from training products excluding the target;
// pool capped at the training-product universe when it is smaller.
std::vector<EvalCase> build_cases(const Corpus& corpus, SplitTag which,
                                  std::uint64_t seed, int pool_size = 1000,
                                  int history_cap = 20);

// Rank metrics for a single relevant item at 1-based `rank`.
double metric_hr(int rank, int k);
double metric_ndcg(int rank, int k);    // 1/log2(rank+1) if rank <= k else 0
double metric_mrr(int rank, int n = 100);

struct EvalReport {
  double hr10 = 0.0;
  double ndcg10 = 0.0;
  double ndcg20 = 0.0;
  double ndcg100 = 0.0;
  double mrr100 = 0.0;
  std::vector<int> ranks;  // per-case target rank, 1-based
  std::size_t n_cases = 0;
  std::string config_fingerprint;
};

// Ranks each case's candidates with model::rank and aggregates unweighted
// means (compensated summation, so aggregation order cannot matter).
EvalReport evaluate(const ModelParams& params, const EnrichedEmbeddings& enriched,
                    const std::vector<EvalCase>& cases);

// Writes metrics.json, metrics.txt (aligned table) and cases.csv
// (user_id,query_id,target,rank) under dir.
void write_eval_report(const EvalReport& report, const std::vector<EvalCase>& cases,
                       const std::filesystem::path& dir);

}  // namespace sbg

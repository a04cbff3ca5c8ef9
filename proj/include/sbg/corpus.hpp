#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sbg/error.hpp"

namespace sbg {

// One raw interaction event: a user reviewed/purchased a product at a
// point in time, with the review text and the product's category path.
struct ReviewRecord {
  std::string user_id;
  std::string product_id;
  std::int64_t timestamp = 0;  // seconds since epoch, non-negative
  std::string review_text;
  std::vector<std::string> category_path;  // root -> leaf

  bool operator==(const ReviewRecord&) const = default;
};

enum class InputFormat { tsv, json_lines };

InputFormat parse_input_format(std::string_view name);

struct IngestResult {
  std::vector<ReviewRecord> records;
  // (1-based line number, reason) for every rejected line.
  std::vector<std::pair<std::size_t, std::string>> bad_lines;
};

// Reads records in file order. Malformed lines are collected and reported;
// more than max_bad_lines of them aborts with the offending line numbers.
IngestResult ingest(const std::filesystem::path& path, InputFormat format,
                    std::size_t max_bad_lines = 100);

// Lowercase, split on any non-alphanumeric byte, drop empty tokens.
std::vector<std::string> tokenize(std::string_view text);

struct Vocabulary {
  std::unordered_map<std::string, int> token_index;
  std::vector<std::string> tokens;       // index -> token, lexicographic
  std::vector<std::int64_t> counts;      // index -> corpus frequency

  int lookup(std::string_view token) const;
  std::size_t size() const { return tokens.size(); }
};

// Counts tokens over review texts; tokens below min_count are dropped.
// Indices are assigned in lexicographic token order so the vocabulary is
// independent of record order.
Vocabulary build_vocabulary(const std::vector<ReviewRecord>& records,
                            int min_count);

struct ProductCatalog {
  std::unordered_map<std::string, int> index;  // product_id -> index
  std::vector<std::string> ids;                // index -> product_id

  int lookup(std::string_view product_id) const;
  int size() const { return static_cast<int>(ids.size()); }
};

// Product indices are assigned in lexicographic product_id order.
ProductCatalog build_catalog(const std::vector<ReviewRecord>& records);

struct Query {
  int query_id = -1;
  std::vector<int> token_indices;  // non-empty, all < |V|
  std::string source_category;     // representative raw category path
};

struct QuerySet {
  std::vector<Query> queries;                     // by query_id
  std::vector<std::vector<int>> product_queries;  // product index -> query ids
  std::vector<int> record_query;                  // record index -> query id, -1 if none
};

// Each distinct category path becomes one candidate query: category terms
// concatenated root->leaf, tokenized, duplicate tokens removed keeping the
// first occurrence, tokens missing from the vocabulary dropped. Candidates
// with identical surviving token sequences are merged into one query.
QuerySet extract_queries(const std::vector<ReviewRecord>& records,
                         const Vocabulary& vocab, const ProductCatalog& catalog);

struct Interaction {
  int product = -1;
  std::int64_t timestamp = 0;
  int query = -1;                 // query of the source record, -1 if none
  std::size_t record = SIZE_MAX;  // source record index (not serialized)
};

// A maximal chronological run of one user's purchases in which consecutive
// gaps do not exceed the time interval R.
struct SuccessiveSequence {
  int seq_id = -1;
  std::string user_id;
  std::vector<Interaction> interactions;  // sorted by (timestamp, product_id)

  std::int64_t start_time() const { return interactions.front().timestamp; }
  std::int64_t end_time() const { return interactions.back().timestamp; }
};

// Per user, records are sorted by (timestamp, product_id) and a new sequence
// starts whenever the gap to the previous record exceeds r_seconds. Sequence
// ids are assigned by (user_id, start order), users in lexicographic order.
std::vector<SuccessiveSequence> segment_sequences(
    const std::vector<ReviewRecord>& records, const ProductCatalog& catalog,
    const QuerySet& queries, std::int64_t r_seconds);

enum class SplitTag { train, validation, test };

struct DatasetSplit {
  std::vector<SuccessiveSequence> train;
  // Validation/test keep only interactions whose product occurs in train;
  // sequences left empty by the filter are dropped from these lists.
  std::vector<SuccessiveSequence> validation;
  std::vector<SuccessiveSequence> test;

  std::vector<SplitTag> assignment;  // seq_id -> bucket, covers all sequences
  std::vector<char> product_in_train;  // product index -> occurs in train
  std::vector<int> train_products;     // sorted indices of products in train
  // user -> positions into `train`, chronological.
  std::unordered_map<std::string, std::vector<std::size_t>> user_train;
};

// Chronological per-user split: with >=3 sequences the last goes to test and
// the second last to validation; with exactly 2 the last goes to test; a
// single sequence goes to train.
DatasetSplit split(const std::vector<SuccessiveSequence>& sequences,
                   int n_products);

// Rebuilds the derived split structures (filtered val/test lists, train
// product set, per-user train index) from a persisted tag assignment.
DatasetSplit split_from_assignment(const std::vector<SuccessiveSequence>& sequences,
                                   std::vector<SplitTag> assignment,
                                   int n_products);

// Prepared corpus: everything training and evaluation read.
struct Corpus {
  Vocabulary vocab;
  ProductCatalog products;
  QuerySet queries;
  std::vector<SuccessiveSequence> sequences;  // all, indexed by seq_id
  DatasetSplit split;
  // product index -> (token index, count) over the product's train reviews.
  std::vector<std::vector<std::pair<int, std::int64_t>>> product_words;
  std::int64_t n_reviews = 0;
  std::int64_t n_users = 0;
};

struct PrepareOptions {
  std::int64_t r_seconds = 7 * 86400;  // one week
  int min_count = 5;
  std::size_t max_bad_lines = 100;
};

Corpus prepare_corpus(const std::vector<ReviewRecord>& records,
                      const PrepareOptions& options);

// Line-oriented text artifacts with deterministic ordering; save/load
// round-trips the corpus exactly.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace sbg

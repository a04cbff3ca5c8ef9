#include "sbg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace sbg {
namespace {

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

bool parse_timestamp(std::string_view s, std::int64_t* out) {
  if (s.empty()) return false;
  std::int64_t value = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    if (value > (INT64_MAX - (c - '0')) / 10) return false;
    value = value * 10 + (c - '0');
  }
  *out = value;
  return true;
}

std::vector<std::string> parse_category(std::string_view joined) {
  std::vector<std::string> path;
  if (joined.empty()) return path;
  for (auto& part : split_on(joined, '>')) {
    if (!part.empty()) path.push_back(std::move(part));
  }
  return path;
}

bool parse_tsv_line(const std::string& line, ReviewRecord* rec,
                    std::string* reason) {
  auto fields = split_on(line, '\t');
  if (fields.size() != 5) {
    *reason = "expected 5 tab-separated fields, got " +
              std::to_string(fields.size());
    return false;
  }
  if (fields[0].empty() || fields[1].empty()) {
    *reason = "empty user_id or product_id";
    return false;
  }
  std::int64_t ts = 0;
  if (!parse_timestamp(fields[2], &ts)) {
    *reason = "bad timestamp '" + fields[2] + "'";
    return false;
  }
  rec->user_id = std::move(fields[0]);
  rec->product_id = std::move(fields[1]);
  rec->timestamp = ts;
  rec->category_path = parse_category(fields[3]);
  rec->review_text = std::move(fields[4]);
  return true;
}

bool parse_json_line(const std::string& line, ReviewRecord* rec,
                     std::string* reason) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    *reason = "invalid json object";
    return false;
  }
  if (!j.contains("user_id") || !j.contains("product_id") ||
      !j.contains("timestamp")) {
    *reason = "missing user_id/product_id/timestamp";
    return false;
  }
  if (!j["user_id"].is_string() || !j["product_id"].is_string()) {
    *reason = "user_id/product_id must be strings";
    return false;
  }
  rec->user_id = j["user_id"].get<std::string>();
  rec->product_id = j["product_id"].get<std::string>();
  if (rec->user_id.empty() || rec->product_id.empty()) {
    *reason = "empty user_id or product_id";
    return false;
  }
  if (j["timestamp"].is_number_integer()) {
    auto ts = j["timestamp"].get<std::int64_t>();
    if (ts < 0) {
      *reason = "negative timestamp";
      return false;
    }
    rec->timestamp = ts;
  } else {
    *reason = "timestamp must be a non-negative integer";
    return false;
  }
  rec->review_text = j.value("review_text", std::string());
  rec->category_path.clear();
  if (j.contains("category_path")) {
    const auto& cp = j["category_path"];
    if (cp.is_string()) {
      rec->category_path = parse_category(cp.get<std::string>());
    } else if (cp.is_array()) {
      for (const auto& item : cp) {
        if (!item.is_string()) {
          *reason = "category_path array must contain strings";
          return false;
        }
        if (!item.get<std::string>().empty())
          rec->category_path.push_back(item.get<std::string>());
      }
    } else if (!cp.is_null()) {
      *reason = "category_path must be a string or array";
      return false;
    }
  }
  return true;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

InputFormat parse_input_format(std::string_view name) {
  if (name == "tsv") return InputFormat::tsv;
  if (name == "json-lines" || name == "jsonl") return InputFormat::json_lines;
  fail("E_CONFIG", "unknown input format '" + std::string(name) + "'");
}

IngestResult ingest(const std::filesystem::path& path, InputFormat format,
                    std::size_t max_bad_lines) {
  std::ifstream in(path);
  if (!in) fail("E_IO", "cannot open input file " + path.string());

  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    ReviewRecord rec;
    std::string reason;
    bool ok = format == InputFormat::tsv ? parse_tsv_line(line, &rec, &reason)
                                         : parse_json_line(line, &rec, &reason);
    if (ok) {
      result.records.push_back(std::move(rec));
    } else {
      result.bad_lines.emplace_back(line_no, reason);
    }
  }
  if (result.bad_lines.size() > max_bad_lines) {
    std::string lines;
    for (std::size_t i = 0; i < std::min<std::size_t>(10, result.bad_lines.size()); ++i) {
      if (i) lines += ",";
      lines += std::to_string(result.bad_lines[i].first);
    }
    fail("E_PARSE", std::to_string(result.bad_lines.size()) +
                        " malformed lines (limit " +
                        std::to_string(max_bad_lines) +
                        "), first line numbers: " + lines);
  }
  return result;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

int Vocabulary::lookup(std::string_view token) const {
  auto it = token_index.find(std::string(token));
  return it == token_index.end() ? -1 : it->second;
}

Vocabulary build_vocabulary(const std::vector<ReviewRecord>& records,
                            int min_count) {
  if (min_count < 1) fail("E_CONFIG", "min_count must be >= 1");
  std::map<std::string, std::int64_t> counts;
  for (const auto& rec : records) {
    for (auto& tok : tokenize(rec.review_text)) ++counts[tok];
  }
  Vocabulary vocab;
  for (auto& [tok, count] : counts) {
    if (count < min_count) continue;
    vocab.token_index.emplace(tok, static_cast<int>(vocab.tokens.size()));
    vocab.tokens.push_back(tok);
    vocab.counts.push_back(count);
  }
  if (vocab.tokens.empty())
    fail("E_STATE", "vocabulary is empty after min_count=" +
                        std::to_string(min_count) + " filtering");
  return vocab;
}

int ProductCatalog::lookup(std::string_view product_id) const {
  auto it = index.find(std::string(product_id));
  return it == index.end() ? -1 : it->second;
}

ProductCatalog build_catalog(const std::vector<ReviewRecord>& records) {
  std::set<std::string> ids;
  for (const auto& rec : records) ids.insert(rec.product_id);
  ProductCatalog catalog;
  catalog.ids.assign(ids.begin(), ids.end());
  for (std::size_t i = 0; i < catalog.ids.size(); ++i)
    catalog.index.emplace(catalog.ids[i], static_cast<int>(i));
  return catalog;
}

QuerySet extract_queries(const std::vector<ReviewRecord>& records,
                         const Vocabulary& vocab,
                         const ProductCatalog& catalog) {
  // category path string -> surviving token index sequence
  std::map<std::string, std::vector<int>> category_tokens;
  for (const auto& rec : records) {
    if (rec.category_path.empty()) continue;
    std::string key = join(rec.category_path, ">");
    if (category_tokens.count(key)) continue;
    std::vector<int> indices;
    std::set<std::string> seen;
    for (auto& tok : tokenize(join(rec.category_path, " "))) {
      if (!seen.insert(tok).second) continue;  // dedup, keep first occurrence
      int idx = vocab.lookup(tok);
      if (idx >= 0) indices.push_back(idx);
    }
    category_tokens.emplace(std::move(key), std::move(indices));
  }

  // Merge categories with identical token sequences; the representative
  // category is the lexicographically smallest (map iteration order).
  std::map<std::vector<int>, std::string> sequence_rep;
  for (const auto& [cat, toks] : category_tokens) {
    if (toks.empty()) continue;
    sequence_rep.try_emplace(toks, cat);
  }

  QuerySet qs;
  std::map<std::string, int> category_query;  // category string -> query id
  {
    // Deterministic query order: by representative category string.
    std::map<std::string, const std::vector<int>*> by_rep;
    for (const auto& [toks, rep] : sequence_rep) by_rep.emplace(rep, &toks);
    for (const auto& [rep, toks] : by_rep) {
      Query q;
      q.query_id = static_cast<int>(qs.queries.size());
      q.token_indices = *toks;
      q.source_category = rep;
      qs.queries.push_back(std::move(q));
    }
    std::map<std::vector<int>, int> sequence_query;
    for (const auto& q : qs.queries) sequence_query[q.token_indices] = q.query_id;
    for (const auto& [cat, toks] : category_tokens) {
      if (toks.empty()) continue;
      category_query[cat] = sequence_query.at(toks);
    }
  }

  qs.product_queries.assign(catalog.size(), {});
  qs.record_query.assign(records.size(), -1);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.category_path.empty()) continue;
    auto it = category_query.find(join(rec.category_path, ">"));
    if (it == category_query.end()) continue;  // all tokens unknown
    qs.record_query[r] = it->second;
    auto& pq = qs.product_queries[catalog.lookup(rec.product_id)];
    if (std::find(pq.begin(), pq.end(), it->second) == pq.end())
      pq.push_back(it->second);
  }
  for (auto& pq : qs.product_queries) std::sort(pq.begin(), pq.end());
  return qs;
}

std::vector<SuccessiveSequence> segment_sequences(
    const std::vector<ReviewRecord>& records, const ProductCatalog& catalog,
    const QuerySet& queries, std::int64_t r_seconds) {
  if (r_seconds <= 0) fail("E_CONFIG", "time interval R must be > 0");

  std::map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t r = 0; r < records.size(); ++r)
    by_user[records[r].user_id].push_back(r);

  std::vector<SuccessiveSequence> sequences;
  for (auto& [user, recs] : by_user) {
    std::stable_sort(recs.begin(), recs.end(),
                     [&](std::size_t a, std::size_t b) {
                       if (records[a].timestamp != records[b].timestamp)
                         return records[a].timestamp < records[b].timestamp;
                       return records[a].product_id < records[b].product_id;
                     });
    SuccessiveSequence current;
    current.user_id = user;
    std::int64_t prev_ts = 0;
    for (std::size_t r : recs) {
      const auto& rec = records[r];
      if (!current.interactions.empty() && rec.timestamp - prev_ts > r_seconds) {
        current.seq_id = static_cast<int>(sequences.size());
        sequences.push_back(std::move(current));
        current = SuccessiveSequence{};
        current.user_id = user;
      }
      const int query =
          r < queries.record_query.size() ? queries.record_query[r] : -1;
      current.interactions.push_back(
          Interaction{catalog.lookup(rec.product_id), rec.timestamp, query, r});
      prev_ts = rec.timestamp;
    }
    if (!current.interactions.empty()) {
      current.seq_id = static_cast<int>(sequences.size());
      sequences.push_back(std::move(current));
    }
  }
  return sequences;
}

DatasetSplit split_from_assignment(const std::vector<SuccessiveSequence>& sequences,
                                   std::vector<SplitTag> assignment,
                                   int n_products) {
  DatasetSplit ds;
  ds.assignment = std::move(assignment);
  ds.product_in_train.assign(n_products, 0);

  for (const auto& seq : sequences) {
    if (ds.assignment[seq.seq_id] != SplitTag::train) continue;
    for (const auto& it : seq.interactions) ds.product_in_train[it.product] = 1;
  }
  for (int p = 0; p < n_products; ++p)
    if (ds.product_in_train[p]) ds.train_products.push_back(p);

  for (const auto& seq : sequences) {
    switch (ds.assignment[seq.seq_id]) {
      case SplitTag::train:
        ds.user_train[seq.user_id].push_back(ds.train.size());
        ds.train.push_back(seq);
        break;
      case SplitTag::validation:
      case SplitTag::test: {
        SuccessiveSequence filtered = seq;
        std::erase_if(filtered.interactions, [&](const Interaction& it) {
          return !ds.product_in_train[it.product];
        });
        if (filtered.interactions.empty()) break;
        (ds.assignment[seq.seq_id] == SplitTag::validation ? ds.validation
                                                           : ds.test)
            .push_back(std::move(filtered));
        break;
      }
    }
  }
  if (ds.test.empty())
    fail("E_STATE", "zero test sequences after splitting; nothing to evaluate");
  return ds;
}

DatasetSplit split(const std::vector<SuccessiveSequence>& sequences,
                   int n_products) {
  std::map<std::string, std::vector<int>> user_seqs;
  for (const auto& seq : sequences) user_seqs[seq.user_id].push_back(seq.seq_id);

  std::vector<SplitTag> assignment(sequences.size(), SplitTag::train);
  for (auto& [user, ids] : user_seqs) {
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
      return sequences[a].start_time() < sequences[b].start_time();
    });
    const std::size_t n = ids.size();
    if (n >= 2) assignment[ids[n - 1]] = SplitTag::test;
    if (n >= 3) assignment[ids[n - 2]] = SplitTag::validation;
  }
  return split_from_assignment(sequences, std::move(assignment), n_products);
}

Corpus prepare_corpus(const std::vector<ReviewRecord>& records,
                      const PrepareOptions& options) {
  Corpus corpus;
  corpus.n_reviews = static_cast<std::int64_t>(records.size());
  corpus.vocab = build_vocabulary(records, options.min_count);
  corpus.products = build_catalog(records);
  corpus.queries = extract_queries(records, corpus.vocab, corpus.products);
  corpus.sequences = segment_sequences(records, corpus.products, corpus.queries,
                                       options.r_seconds);
  corpus.split = split(corpus.sequences, corpus.products.size());

  std::set<std::string> users;
  for (const auto& rec : records) users.insert(rec.user_id);
  corpus.n_users = static_cast<std::int64_t>(users.size());

  // Words associated with each product, from train-split reviews only.
  std::vector<std::map<int, std::int64_t>> words(corpus.products.size());
  for (const auto& seq : corpus.split.train) {
    for (const auto& it : seq.interactions) {
      for (const auto& tok : tokenize(records[it.record].review_text)) {
        int idx = corpus.vocab.lookup(tok);
        if (idx >= 0) ++words[it.product][idx];
      }
    }
  }
  corpus.product_words.resize(corpus.products.size());
  for (int p = 0; p < corpus.products.size(); ++p)
    corpus.product_words[p].assign(words[p].begin(), words[p].end());
  return corpus;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("E_IO", "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("E_IO", "cannot read " + path.string());
  return in;
}

constexpr std::string_view kVocabFile = "vocabulary.tsv";
constexpr std::string_view kProductsFile = "products.tsv";
constexpr std::string_view kQueriesFile = "queries.tsv";
constexpr std::string_view kSequencesFile = "sequences.tsv";
constexpr std::string_view kSplitFile = "split.tsv";
constexpr std::string_view kProductWordsFile = "product_words.tsv";
constexpr std::string_view kMetaFile = "meta.tsv";

std::string tag_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::validation: return "validation";
    case SplitTag::test: return "test";
  }
  return "train";
}

SplitTag parse_tag(std::string_view s) {
  if (s == "train") return SplitTag::train;
  if (s == "validation") return SplitTag::validation;
  if (s == "test") return SplitTag::test;
  fail("E_PARSE", "unknown split tag '" + std::string(s) + "'");
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  {
    auto out = open_out(dir / kVocabFile);
    for (std::size_t i = 0; i < corpus.vocab.size(); ++i)
      out << corpus.vocab.tokens[i] << '\t' << corpus.vocab.counts[i] << '\n';
  }
  {
    auto out = open_out(dir / kProductsFile);
    for (int p = 0; p < corpus.products.size(); ++p) {
      out << corpus.products.ids[p] << '\t';
      const auto& pq = corpus.queries.product_queries[p];
      for (std::size_t i = 0; i < pq.size(); ++i) {
        if (i) out << ',';
        out << pq[i];
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / kQueriesFile);
    for (const auto& q : corpus.queries.queries) {
      out << q.query_id << '\t' << q.source_category << '\t';
      for (std::size_t i = 0; i < q.token_indices.size(); ++i) {
        if (i) out << ',';
        out << q.token_indices[i];
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / kSequencesFile);
    for (const auto& seq : corpus.sequences) {
      out << seq.seq_id << '\t' << seq.user_id << '\t';
      for (std::size_t i = 0; i < seq.interactions.size(); ++i) {
        const auto& it = seq.interactions[i];
        if (i) out << ',';
        out << it.product << ':' << it.timestamp << ':' << it.query;
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / kSplitFile);
    for (std::size_t s = 0; s < corpus.split.assignment.size(); ++s)
      out << s << '\t' << tag_name(corpus.split.assignment[s]) << '\n';
  }
  {
    auto out = open_out(dir / kProductWordsFile);
    for (int p = 0; p < corpus.products.size(); ++p) {
      out << p << '\t';
      const auto& pw = corpus.product_words[p];
      for (std::size_t i = 0; i < pw.size(); ++i) {
        if (i) out << ',';
        out << pw[i].first << ':' << pw[i].second;
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / kMetaFile);
    out << "n_reviews\t" << corpus.n_reviews << '\n';
    out << "n_users\t" << corpus.n_users << '\n';
  }
}

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  {
    auto in = open_in(dir / kVocabFile);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = split_on(line, '\t');
      if (fields.size() != 2) fail("E_PARSE", "bad vocabulary line: " + line);
      corpus.vocab.token_index.emplace(fields[0],
                                       static_cast<int>(corpus.vocab.tokens.size()));
      corpus.vocab.tokens.push_back(fields[0]);
      corpus.vocab.counts.push_back(std::stoll(fields[1]));
    }
  }
  {
    auto in = open_in(dir / kProductsFile);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = split_on(line, '\t');
      if (fields.size() != 2) fail("E_PARSE", "bad products line: " + line);
      int idx = corpus.products.size();
      corpus.products.index.emplace(fields[0], idx);
      corpus.products.ids.push_back(fields[0]);
      corpus.queries.product_queries.emplace_back();
      if (!fields[1].empty()) {
        for (auto& part : split_on(fields[1], ','))
          corpus.queries.product_queries[idx].push_back(std::stoi(part));
      }
    }
  }
  {
    auto in = open_in(dir / kQueriesFile);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = split_on(line, '\t');
      if (fields.size() != 3) fail("E_PARSE", "bad queries line: " + line);
      Query q;
      q.query_id = std::stoi(fields[0]);
      q.source_category = fields[1];
      for (auto& part : split_on(fields[2], ','))
        q.token_indices.push_back(std::stoi(part));
      if (q.query_id != static_cast<int>(corpus.queries.queries.size()))
        fail("E_PARSE", "non-contiguous query ids in queries file");
      corpus.queries.queries.push_back(std::move(q));
    }
  }
  {
    auto in = open_in(dir / kSequencesFile);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = split_on(line, '\t');
      if (fields.size() != 3) fail("E_PARSE", "bad sequences line: " + line);
      SuccessiveSequence seq;
      seq.seq_id = std::stoi(fields[0]);
      seq.user_id = fields[1];
      for (auto& part : split_on(fields[2], ',')) {
        auto triple = split_on(part, ':');
        if (triple.size() != 3) fail("E_PARSE", "bad interaction: " + part);
        seq.interactions.push_back(Interaction{std::stoi(triple[0]),
                                               std::stoll(triple[1]),
                                               std::stoi(triple[2]), SIZE_MAX});
      }
      if (seq.seq_id != static_cast<int>(corpus.sequences.size()))
        fail("E_PARSE", "non-contiguous sequence ids in sequences file");
      corpus.sequences.push_back(std::move(seq));
    }
  }
  std::vector<SplitTag> assignment(corpus.sequences.size(), SplitTag::train);
  {
    auto in = open_in(dir / kSplitFile);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = split_on(line, '\t');
      if (fields.size() != 2) fail("E_PARSE", "bad split line: " + line);
      std::size_t id = std::stoul(fields[0]);
      if (id >= assignment.size()) fail("E_PARSE", "split refers to unknown seq");
      assignment[id] = parse_tag(fields[1]);
    }
  }
  corpus.split =
      split_from_assignment(corpus.sequences, assignment, corpus.products.size());
  {
    corpus.product_words.assign(corpus.products.size(), {});
    auto in = open_in(dir / kProductWordsFile);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = split_on(line, '\t');
      if (fields.size() != 2) fail("E_PARSE", "bad product_words line: " + line);
      int p = std::stoi(fields[0]);
      if (fields[1].empty()) continue;
      for (auto& part : split_on(fields[1], ',')) {
        auto pair = split_on(part, ':');
        if (pair.size() != 2) fail("E_PARSE", "bad word count: " + part);
        corpus.product_words[p].emplace_back(std::stoi(pair[0]),
                                             std::stoll(pair[1]));
      }
    }
  }
  {
    auto in = open_in(dir / kMetaFile);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = split_on(line, '\t');
      if (fields.size() != 2) continue;
      if (fields[0] == "n_reviews") corpus.n_reviews = std::stoll(fields[1]);
      if (fields[0] == "n_users") corpus.n_users = std::stoll(fields[1]);
    }
  }
  return corpus;
}

}  // namespace sbg

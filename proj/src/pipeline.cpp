#include "sbg/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "sbg/behavior_graph.hpp"
#include "sbg/error.hpp"
#include "sbg/evaluation.hpp"
#include "sbg/model.hpp"

namespace sbg {
namespace {

std::string format_double(double v) { return nlohmann::json(v).dump(); }

std::int64_t parse_i64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::int64_t parsed = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    fail("E_CONFIG", "key '" + key + "' expects an integer, got '" + value + "'");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  return static_cast<int>(parse_i64(key, value));
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::uint64_t parsed = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    fail("E_CONFIG",
         "key '" + key + "' expects an unsigned integer, got '" + value + "'");
  }
}

double parse_f64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double parsed = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    fail("E_CONFIG", "key '" + key + "' expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on")
    return true;
  if (value == "false" || value == "0" || value == "no" || value == "off")
    return false;
  fail("E_CONFIG", "key '" + key + "' expects a boolean, got '" + value + "'");
}

struct ConfigKey {
  const char* name;
  bool identity;  // participates in the config hash
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
  bool boolean = false;
};

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"input", false, [](const RunConfig& c) { return c.input; },
       [](RunConfig& c, const std::string& v) { c.input = v; }},
      {"input_format", true, [](const RunConfig& c) { return c.input_format; },
       [](RunConfig& c, const std::string& v) { c.input_format = v; }},
      {"r_seconds", true,
       [](const RunConfig& c) { return std::to_string(c.r_seconds); },
       [](RunConfig& c, const std::string& v) {
         c.r_seconds = parse_i64("r_seconds", v);
       }},
      {"min_count", true,
       [](const RunConfig& c) { return std::to_string(c.min_count); },
       [](RunConfig& c, const std::string& v) {
         c.min_count = parse_int("min_count", v);
       }},
      {"max_bad_lines", true,
       [](const RunConfig& c) { return std::to_string(c.max_bad_lines); },
       [](RunConfig& c, const std::string& v) {
         c.max_bad_lines = parse_i64("max_bad_lines", v);
       }},
      {"d", true, [](const RunConfig& c) { return std::to_string(c.d); },
       [](RunConfig& c, const std::string& v) { c.d = parse_int("d", v); }},
      {"d_a", true, [](const RunConfig& c) { return std::to_string(c.d_a); },
       [](RunConfig& c, const std::string& v) { c.d_a = parse_int("d_a", v); }},
      {"lambda", true, [](const RunConfig& c) { return format_double(c.lambda); },
       [](RunConfig& c, const std::string& v) { c.lambda = parse_f64("lambda", v); }},
      {"f_mode", true, [](const RunConfig& c) { return c.f_mode; },
       [](RunConfig& c, const std::string& v) { c.f_mode = v; }},
      {"history_cap", true,
       [](const RunConfig& c) { return std::to_string(c.history_cap); },
       [](RunConfig& c, const std::string& v) {
         c.history_cap = parse_int("history_cap", v);
       }},
      {"omega", true, [](const RunConfig& c) { return format_double(c.omega); },
       [](RunConfig& c, const std::string& v) { c.omega = parse_f64("omega", v); }},
      {"beta", true, [](const RunConfig& c) { return format_double(c.beta); },
       [](RunConfig& c, const std::string& v) { c.beta = parse_f64("beta", v); }},
      {"layers", true, [](const RunConfig& c) { return std::to_string(c.layers); },
       [](RunConfig& c, const std::string& v) { c.layers = parse_int("layers", v); }},
      {"no_jump", true,
       [](const RunConfig& c) { return c.no_jump ? "true" : "false"; },
       [](RunConfig& c, const std::string& v) { c.no_jump = parse_bool("no_jump", v); },
       true},
      {"batch_size", true,
       [](const RunConfig& c) { return std::to_string(c.batch_size); },
       [](RunConfig& c, const std::string& v) {
         c.batch_size = parse_int("batch_size", v);
       }},
      {"learning_rate", true,
       [](const RunConfig& c) { return format_double(c.learning_rate); },
       [](RunConfig& c, const std::string& v) {
         c.learning_rate = parse_f64("learning_rate", v);
       }},
      {"adam_beta1", true,
       [](const RunConfig& c) { return format_double(c.adam_beta1); },
       [](RunConfig& c, const std::string& v) {
         c.adam_beta1 = parse_f64("adam_beta1", v);
       }},
      {"adam_beta2", true,
       [](const RunConfig& c) { return format_double(c.adam_beta2); },
       [](RunConfig& c, const std::string& v) {
         c.adam_beta2 = parse_f64("adam_beta2", v);
       }},
      {"adam_epsilon", true,
       [](const RunConfig& c) { return format_double(c.adam_epsilon); },
       [](RunConfig& c, const std::string& v) {
         c.adam_epsilon = parse_f64("adam_epsilon", v);
       }},
      {"k_w", true, [](const RunConfig& c) { return std::to_string(c.k_w); },
       [](RunConfig& c, const std::string& v) { c.k_w = parse_int("k_w", v); }},
      {"k_i", true, [](const RunConfig& c) { return std::to_string(c.k_i); },
       [](RunConfig& c, const std::string& v) { c.k_i = parse_int("k_i", v); }},
      {"epochs", true, [](const RunConfig& c) { return std::to_string(c.epochs); },
       [](RunConfig& c, const std::string& v) { c.epochs = parse_int("epochs", v); }},
      {"patience", true,
       [](const RunConfig& c) { return std::to_string(c.patience); },
       [](RunConfig& c, const std::string& v) {
         c.patience = parse_int("patience", v);
       }},
      {"train_sequence_embeddings", true,
       [](const RunConfig& c) {
         return c.train_sequence_embeddings ? "true" : "false";
       },
       [](RunConfig& c, const std::string& v) {
         c.train_sequence_embeddings = parse_bool("train_sequence_embeddings", v);
       },
       true},
      {"pool_size", true,
       [](const RunConfig& c) { return std::to_string(c.pool_size); },
       [](RunConfig& c, const std::string& v) {
         c.pool_size = parse_int("pool_size", v);
       }},
      {"diag_layers", true, [](const RunConfig& c) { return c.diag_layers; },
       [](RunConfig& c, const std::string& v) { c.diag_layers = v; }},
      {"spectral_max_nodes", true,
       [](const RunConfig& c) { return std::to_string(c.spectral_max_nodes); },
       [](RunConfig& c, const std::string& v) {
         c.spectral_max_nodes = parse_int("spectral_max_nodes", v);
       }},
      {"seed", true, [](const RunConfig& c) { return std::to_string(c.seed); },
       [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); }},
      {"corpus_dir", false, [](const RunConfig& c) { return c.corpus_dir; },
       [](RunConfig& c, const std::string& v) { c.corpus_dir = v; }},
      {"run_dir", false, [](const RunConfig& c) { return c.run_dir; },
       [](RunConfig& c, const std::string& v) { c.run_dir = v; }},
  };
  return keys;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string sha256_hex(const std::string& payload) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(payload.data(), payload.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1)
    fail("E_STATE", "SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::vector<int> parse_layer_grid(const std::string& text) {
  std::vector<int> grid;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    const int l = parse_int("diag_layers", part);
    if (l < 0) fail("E_CONFIG", "diag_layers entries must be >= 0");
    grid.push_back(l);
  }
  if (grid.empty()) fail("E_CONFIG", "diag_layers is empty");
  return grid;
}

}  // namespace

void RunConfig::validate() const {
  parse_input_format(input_format);
  parse_score_mode(f_mode);
  if (r_seconds <= 0) fail("E_CONFIG", "r_seconds must be > 0");
  if (min_count < 1) fail("E_CONFIG", "min_count must be >= 1");
  if (max_bad_lines < 0) fail("E_CONFIG", "max_bad_lines must be >= 0");
  if (d <= 0 || d_a <= 0) fail("E_CONFIG", "d and d_a must be positive");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    fail("E_CONFIG", "lambda must lie in [0,1]");
  if (history_cap < 0) fail("E_CONFIG", "history_cap must be >= 0");
  PropagationConfig{omega, beta, layers}.validate();
  if (batch_size < 1) fail("E_CONFIG", "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail("E_CONFIG", "learning_rate must be > 0");
  if (k_w < 0 || k_i < 0) fail("E_CONFIG", "k_w and k_i must be >= 0");
  if (epochs < 1) fail("E_CONFIG", "epochs must be >= 1");
  if (patience < 1) fail("E_CONFIG", "patience must be >= 1");
  if (pool_size < 1) fail("E_CONFIG", "pool_size must be >= 1");
  if (spectral_max_nodes < 1)
    fail("E_CONFIG", "spectral_max_nodes must be >= 1");
  parse_layer_grid(diag_layers);
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_epsilon > 0.0))
    fail("E_CONFIG", "invalid ADAM settings");
}

std::vector<ConfigKeyInfo> config_key_list() {
  std::vector<ConfigKeyInfo> list;
  for (const auto& entry : config_keys())
    list.push_back(ConfigKeyInfo{entry.name, entry.boolean});
  return list;
}

void apply_override(RunConfig* config, const std::string& key,
                    const std::string& value) {
  for (const auto& entry : config_keys()) {
    if (key == entry.name) {
      entry.set(*config, value);
      return;
    }
  }
  fail("E_CONFIG", "unknown config key '" + key + "'");
}

RunConfig load_run_config(
    const std::optional<std::filesystem::path>& config_file,
    const std::vector<std::string>& overrides, bool apply_env) {
  RunConfig config;

  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) fail("E_IO", "cannot read config file " + config_file->string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        fail("E_CONFIG", config_file->string() + ":" + std::to_string(line_no) +
                             ": expected key=value");
      apply_override(&config, trim(line.substr(0, eq)),
                     trim(line.substr(eq + 1)));
    }
  }

  if (apply_env) {
    for (const auto& entry : config_keys()) {
      std::string env_name = "SBG_";
      for (const char* p = entry.name; *p; ++p)
        env_name.push_back(static_cast<char>(
            std::toupper(static_cast<unsigned char>(*p))));
      if (const char* value = std::getenv(env_name.c_str()))
        entry.set(config, value);
    }
  }

  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      fail("E_CONFIG", "override '" + item + "' is not key=value");
    apply_override(&config, trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
  return config;
}

std::string dump_run_config(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& entry : config_keys())
    pairs.emplace_back(entry.name, entry.get(config));
  std::sort(pairs.begin(), pairs.end());
  std::string out;
  for (const auto& [k, v] : pairs) out += k + "=" + v + "\n";
  return out;
}

void write_run_config(const RunConfig& config,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("E_IO", "cannot write " + path.string());
  out << dump_run_config(config);
}

std::string config_hash(const RunConfig& config) {
  // Paths are plumbing, not identity: exclude them so the same experiment in
  // a different directory hashes the same.
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& entry : config_keys())
    if (entry.identity) pairs.emplace_back(entry.name, entry.get(config));
  std::sort(pairs.begin(), pairs.end());
  std::string payload;
  for (const auto& [k, v] : pairs) payload += k + "=" + v + "\n";
  return sha256_hex(payload).substr(0, 12);
}

std::filesystem::path resolve_run_dir(const RunConfig& config) {
  std::filesystem::path dir;
  if (!config.run_dir.empty()) {
    dir = config.run_dir;
  } else {
    std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm_utc);
    dir = std::filesystem::path("runs") / (config_hash(config) + "-" + stamp);
  }
  std::filesystem::create_directories(dir);
  return dir;
}

std::filesystem::path resolve_corpus_dir(const RunConfig& config) {
  if (!config.corpus_dir.empty()) return config.corpus_dir;
  return resolve_run_dir(config) / "corpus";
}

TrainConfig to_train_config(const RunConfig& config) {
  TrainConfig tc;
  tc.d = config.d;
  tc.d_a = config.d_a;
  tc.lambda = config.lambda;
  tc.mode = parse_score_mode(config.f_mode);
  tc.propagation.omega = config.omega;
  tc.propagation.beta = config.no_jump ? 0.0 : config.beta;
  tc.propagation.layers = config.layers;
  tc.batch_size = config.batch_size;
  tc.learning_rate = config.learning_rate;
  tc.adam_beta1 = config.adam_beta1;
  tc.adam_beta2 = config.adam_beta2;
  tc.adam_epsilon = config.adam_epsilon;
  tc.k_w = config.k_w;
  tc.k_i = config.k_i;
  tc.epochs = config.epochs;
  tc.patience = config.patience;
  tc.history_cap = config.history_cap;
  tc.train_sequence_embeddings = config.train_sequence_embeddings;
  tc.eval_pool_size = config.pool_size;
  tc.seed = config.seed;
  return tc;
}

CorpusStats corpus_stats(const Corpus& corpus, std::int64_t n_edges) {
  CorpusStats stats;
  stats.n_reviews = corpus.n_reviews;
  stats.n_users = corpus.n_users;
  stats.n_products = corpus.products.size();
  stats.n_queries = static_cast<std::int64_t>(corpus.queries.queries.size());
  stats.n_sequences = static_cast<std::int64_t>(corpus.sequences.size());
  stats.n_edges = n_edges;
  return stats;
}

std::filesystem::path cmd_prepare(const RunConfig& config) {
  config.validate();
  if (config.input.empty())
    fail("E_CONFIG", "prepare needs input=<raw review file>");

  const auto run_dir = resolve_run_dir(config);
  const auto corpus_dir = resolve_corpus_dir(config);

  IngestResult ingested =
      ingest(config.input, parse_input_format(config.input_format),
             static_cast<std::size_t>(config.max_bad_lines));
  if (!ingested.bad_lines.empty())
    std::cerr << "warning: skipped " << ingested.bad_lines.size()
              << " malformed input lines\n";

  PrepareOptions options;
  options.r_seconds = config.r_seconds;
  options.min_count = config.min_count;
  options.max_bad_lines = static_cast<std::size_t>(config.max_bad_lines);
  Corpus corpus = prepare_corpus(ingested.records, options);
  save_corpus(corpus, corpus_dir);

  BehaviorGraph graph =
      build_graph(corpus.split.train, corpus.products.size());
  save_graph(graph, corpus_dir / "graph.tsv");

  const CorpusStats stats = corpus_stats(corpus, graph.n_edges());
  {
    nlohmann::json j;
    j["reviews"] = stats.n_reviews;
    j["users"] = stats.n_users;
    j["products"] = stats.n_products;
    j["queries"] = stats.n_queries;
    j["sequences"] = stats.n_sequences;
    j["edges"] = stats.n_edges;
    std::ofstream out(corpus_dir / "stats.json", std::ios::binary);
    if (!out) fail("E_IO", "cannot write stats.json");
    out << j.dump(2) << '\n';
  }
  std::cout << "prepared corpus: reviews=" << stats.n_reviews
            << " users=" << stats.n_users << " products=" << stats.n_products
            << " queries=" << stats.n_queries
            << " sequences=" << stats.n_sequences << " edges=" << stats.n_edges
            << "\n"
            << "reference counts for the public Magazine 5-core subset: "
               "users=694 products=876 queries=170 sequences=2337 edges=3078\n";

  write_run_config(config, run_dir / "config.txt");
  return corpus_dir;
}

std::filesystem::path cmd_train(const RunConfig& config) {
  config.validate();
  const auto run_dir = resolve_run_dir(config);
  const auto corpus_dir = resolve_corpus_dir(config);
  if (!std::filesystem::exists(corpus_dir / "meta.tsv"))
    fail("E_STATE", "no prepared corpus at " + corpus_dir.string() +
                        "; run the prepare subcommand first");

  Corpus corpus = load_corpus(corpus_dir);
  BehaviorGraph graph = load_graph(corpus_dir / "graph.tsv");

  TrainResult result = train(corpus, graph, to_train_config(config));
  result.meta.config_hash = config_hash(config);

  const auto checkpoint_dir = run_dir / "checkpoint";
  save_checkpoint(result.params, result.meta, checkpoint_dir);
  write_metrics_log(result.log, run_dir / "metrics.csv");
  write_run_config(config, run_dir / "config.txt");
  std::cout << "trained " << result.log.size() << " epochs; best epoch "
            << result.meta.best_epoch << " (validation NDCG@10 "
            << result.meta.val_ndcg10 << ")\n";
  return checkpoint_dir;
}

std::filesystem::path cmd_eval(const RunConfig& config,
                               const std::filesystem::path& checkpoint_dir,
                               bool force) {
  config.validate();
  const auto run_dir = resolve_run_dir(config);
  const auto corpus_dir = resolve_corpus_dir(config);

  Corpus corpus = load_corpus(corpus_dir);
  BehaviorGraph graph = load_graph(corpus_dir / "graph.tsv");
  auto [params, meta] = load_checkpoint(checkpoint_dir);

  const std::string hash = config_hash(config);
  if (!force) {
    if (!meta.config_hash.empty() && meta.config_hash != hash)
      fail("E_STATE", "checkpoint was trained under config " +
                          meta.config_hash + " but this config hashes to " +
                          hash + " (use --force to evaluate anyway)");
    if (meta.graph_fingerprint != 0 &&
        meta.graph_fingerprint != graph.fingerprint())
      fail("E_STATE",
           "checkpoint graph fingerprint does not match the prepared graph "
           "(use --force to evaluate anyway)");
  }

  PropagationConfig prop{config.omega, config.no_jump ? 0.0 : config.beta,
                         config.layers};
  EnrichedEmbeddings enriched =
      jumping_propagate(graph, prop, assemble_h0(params));
  std::vector<EvalCase> cases =
      build_cases(corpus, SplitTag::test, derive_seed(config.seed, "test-cases"),
                  config.pool_size, config.history_cap);
  EvalReport report = evaluate(params, enriched, cases);
  report.config_fingerprint = hash;

  const auto eval_dir = run_dir / "eval";
  write_eval_report(report, cases, eval_dir);
  write_run_config(config, run_dir / "config.txt");
  std::cout << "evaluated " << report.n_cases << " cases: HR@10=" << report.hr10
            << " NDCG@10=" << report.ndcg10 << " MRR@100=" << report.mrr100
            << "\n";
  return eval_dir;
}

std::filesystem::path cmd_diagnose(const RunConfig& config) {
  config.validate();
  const auto run_dir = resolve_run_dir(config);
  const auto corpus_dir = resolve_corpus_dir(config);

  Corpus corpus = load_corpus(corpus_dir);
  BehaviorGraph graph = load_graph(corpus_dir / "graph.tsv");
  const std::vector<int> grid = parse_layer_grid(config.diag_layers);
  const int max_layer = *std::max_element(grid.begin(), grid.end());

  // H0 from a checkpoint when available, otherwise random.
  Matrix h0;
  bool have_checkpoint = false;
  ModelParams params;
  const auto checkpoint_dir = run_dir / "checkpoint";
  if (std::filesystem::exists(checkpoint_dir / "manifest.json")) {
    auto loaded = load_checkpoint(checkpoint_dir);
    params = std::move(loaded.first);
    h0 = assemble_h0(params);
    have_checkpoint = true;
  } else {
    h0 = Matrix(graph.n_nodes(), config.d);
    Rng rng(derive_seed(config.seed, "diagnose-h0"));
    const double bound = 0.5 / config.d;
    for (double& v : h0.data) v = rng.uniform(-bound, bound);
  }

  const auto diag_dir = run_dir / "diagnostics";
  std::filesystem::create_directories(diag_dir);

  const double beta = config.no_jump ? 0.0 : config.beta;
  DiversityReport growth =
      verify_diversity_growth(graph, h0, config.omega, beta, max_layer);
  {
    std::ofstream out(diag_dir / "diversity.csv", std::ios::binary);
    if (!out) fail("E_IO", "cannot write diversity.csv");
    out.precision(17);
    out << "layer,omega,beta,omega_jump_diversity,omega_plain_diversity\n";
    for (int l : grid) {
      double jump = growth.diversity_h0, plain = growth.diversity_h0;
      if (l > 0) {
        jump = growth.layers[static_cast<std::size_t>(l) - 1].diversity_jump;
        plain = growth.layers[static_cast<std::size_t>(l) - 1].diversity_plain;
      }
      out << l << ',' << config.omega << ',' << beta << ',' << jump << ','
          << plain << '\n';
    }
  }

  {
    SpectralDiagnostics spectral = spectral_diagnostics(
        graph, config.omega, beta, config.spectral_max_nodes);
    std::ofstream out(diag_dir / "spectral.csv", std::ios::binary);
    if (!out) fail("E_IO", "cannot write spectral.csv");
    out.precision(17);
    out << "eigenvalue,limit_coefficient\n";
    for (std::size_t i = 0; i < spectral.eigenvalues.size(); ++i)
      out << spectral.eigenvalues[i] << ',' << spectral.limit_coefficients[i]
          << '\n';
  }

  if (have_checkpoint) {
    // Post-hoc NDCG@10 versus propagation depth, both variants.
    std::vector<EvalCase> cases = build_cases(
        corpus, SplitTag::test, derive_seed(config.seed, "test-cases"),
        config.pool_size, config.history_cap);
    std::ofstream out(diag_dir / "ndcg_vs_layers.csv", std::ios::binary);
    if (!out) fail("E_IO", "cannot write ndcg_vs_layers.csv");
    out.precision(17);
    out << "layer,ndcg10_jump,ndcg10_plain\n";
    for (int l : grid) {
      EnrichedEmbeddings with_jump = jumping_propagate(
          graph, PropagationConfig{config.omega, config.beta, l}, h0);
      EnrichedEmbeddings without_jump = jumping_propagate(
          graph, PropagationConfig{config.omega, 0.0, l}, h0);
      const double ndcg_jump = evaluate(params, with_jump, cases).ndcg10;
      const double ndcg_plain = evaluate(params, without_jump, cases).ndcg10;
      out << l << ',' << ndcg_jump << ',' << ndcg_plain << '\n';
    }
  }

  write_run_config(config, run_dir / "config.txt");
  std::cout << "diagnostics written to " << diag_dir.string()
            << (growth.hypotheses_met
                    ? ""
                    : " (strict-growth guarantee not applicable for this"
                      " omega/beta)")
            << "; violations=" << growth.n_violations << "\n";
  return diag_dir;
}

}  // namespace sbg

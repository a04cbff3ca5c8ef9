#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sbg/corpus.hpp"
#include "sbg/training.hpp"

namespace sbg {

// Flat key=value configuration for every pipeline stage.  Precedence:
// defaults < config file < SBG_* environment variables < command-line
// key=value overrides.  Unknown keys are rejected.
struct RunConfig {
  // corpus
  std::string input;                 // raw review file
  std::string input_format = "tsv";  // tsv | json-lines
  std::int64_t r_seconds = 7 * 86400;
  int min_count = 5;
  std::int64_t max_bad_lines = 100;

  // model
  int d = 64;
  int d_a = 8;
  double lambda = 0.5;
  std::string f_mode = "dot";  // dot | cosine
  int history_cap = 20;

  // propagation
  double omega = 0.1;
  double beta = 0.1;
  int layers = 4;
  bool no_jump = false;  // SBG(oj): plain stacked convolution, i.e. beta = 0

  // training
  int batch_size = 1024;
  double learning_rate = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int k_w = 5;
  int k_i = 2;
  int epochs = 20;
  int patience = 5;
  bool train_sequence_embeddings = true;

  // evaluation
  int pool_size = 1000;

  // diagnostics
  std::string diag_layers = "0,1,2,4,8,16,32,64";
  int spectral_max_nodes = 2000;

  // plumbing
  std::uint64_t seed = 42;
  std::string corpus_dir;  // prepared-corpus directory (default <run>/corpus)
  std::string run_dir;     // default runs/<config-hash>-<timestamp>

  void validate() const;
};

// Applies `key=value` lines (file) / strings (overrides) on top of defaults.
RunConfig load_run_config(const std::optional<std::filesystem::path>& config_file,
                          const std::vector<std::string>& overrides,
                          bool apply_env = true);
void apply_override(RunConfig* config, const std::string& key,
                    const std::string& value);

// Key inventory for building per-key CLI flags.
struct ConfigKeyInfo {
  std::string name;
  bool boolean = false;
};
std::vector<ConfigKeyInfo> config_key_list();

// Canonical one-key-per-line dump (sorted keys); the config hash is the
// first 12 hex chars of SHA-256 over this dump.
std::string dump_run_config(const RunConfig& config);
void write_run_config(const RunConfig& config, const std::filesystem::path& path);
std::string config_hash(const RunConfig& config);

// Resolved output locations; creates the run directory on first use.
std::filesystem::path resolve_run_dir(const RunConfig& config);
std::filesystem::path resolve_corpus_dir(const RunConfig& config);

// Maps the flat run config onto the training module's config (no_jump=true
// zeroes beta, recovering plain stacking).
TrainConfig to_train_config(const RunConfig& config);

// Subcommand bodies (the CLI is a thin wrapper; tests call these directly).
// Each returns the primary artifact directory it wrote.
std::filesystem::path cmd_prepare(const RunConfig& config);
std::filesystem::path cmd_train(const RunConfig& config);
std::filesystem::path cmd_eval(const RunConfig& config,
                               const std::filesystem::path& checkpoint_dir,
                               bool force = false);
std::filesystem::path cmd_diagnose(const RunConfig& config);

// Writes stats.json (+ table) with counts comparable to the dataset paper
// table: reviews, users, products, queries, sequences, edges.
struct CorpusStats {
  std::int64_t n_reviews = 0;
  std::int64_t n_users = 0;
  std::int64_t n_products = 0;
  std::int64_t n_queries = 0;
  std::int64_t n_sequences = 0;
  std::int64_t n_edges = 0;
};
CorpusStats corpus_stats(const Corpus& corpus, std::int64_t n_edges);

}  // namespace sbg

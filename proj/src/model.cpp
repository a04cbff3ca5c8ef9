#include "sbg/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sbg/error.hpp"

namespace sbg {

ScoreMode parse_score_mode(std::string_view name) {
  if (name == "dot") return ScoreMode::dot;
  if (name == "cosine") return ScoreMode::cosine;
  fail("E_CONFIG", "unknown f-mode '" + std::string(name) + "'");
}

std::string_view score_mode_name(ScoreMode mode) {
  return mode == ScoreMode::dot ? "dot" : "cosine";
}

std::vector<TensorRef> ModelParams::tensors() {
  std::vector<TensorRef> refs;
  auto add_matrix = [&](const char* name, Matrix& m) {
    refs.push_back(TensorRef{name, m.data.data(),
                             static_cast<std::int64_t>(m.data.size()), m.rows,
                             m.cols});
  };
  auto add_vector = [&](const char* name, std::vector<double>& v) {
    refs.push_back(TensorRef{name, v.data(), static_cast<std::int64_t>(v.size()),
                             1, static_cast<std::int64_t>(v.size())});
  };
  add_matrix("word_embeddings", word_embeddings);
  add_matrix("product_embeddings", product_embeddings);
  add_matrix("sequence_embeddings", sequence_embeddings);
  add_matrix("attention_w_f", attention_w_f);
  add_matrix("attention_b_f", attention_b_f);
  add_vector("attention_w_h", attention_w_h);
  add_vector("zero_inquiry", zero_inquiry);
  return refs;
}

std::vector<TensorRef> ModelParams::tensors() const {
  // Read-only callers (checkpointing, tests) share the mutable enumeration.
  return const_cast<ModelParams*>(this)->tensors();
}

bool ModelParams::all_finite() const {
  for (const auto& ref : tensors())
    for (std::int64_t i = 0; i < ref.size; ++i)
      if (!std::isfinite(ref.data[i])) return false;
  return true;
}

ModelParams init_params(const ModelDims& dims, double lambda, ScoreMode mode,
                        Rng& rng) {
  if (dims.d <= 0 || dims.d_a <= 0)
    fail("E_CONFIG", "embedding dimensions must be positive");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    fail("E_CONFIG", "lambda must lie in [0,1]");

  ModelParams params;
  params.d = dims.d;
  params.d_a = dims.d_a;
  params.lambda = lambda;
  params.mode = mode;
  params.word_embeddings = Matrix(dims.n_words, dims.d);
  params.product_embeddings = Matrix(dims.n_products, dims.d);
  params.sequence_embeddings = Matrix(dims.n_sequences, dims.d);
  params.attention_w_f = Matrix(dims.d, static_cast<std::int64_t>(dims.d_a) * dims.d);
  params.attention_b_f = Matrix(dims.d, dims.d_a);
  params.attention_w_h.assign(dims.d_a, 0.0);
  params.zero_inquiry.assign(dims.d, 0.0);

  const double emb = 0.5 / dims.d;
  for (double& v : params.word_embeddings.data) v = rng.uniform(-emb, emb);
  for (double& v : params.product_embeddings.data) v = rng.uniform(-emb, emb);
  for (double& v : params.sequence_embeddings.data) v = rng.uniform(-emb, emb);
  const double att = 1.0 / std::sqrt(static_cast<double>(dims.d));
  for (double& v : params.attention_w_f.data) v = rng.uniform(-att, att);
  for (double& v : params.attention_b_f.data) v = rng.uniform(-att, att);
  for (double& v : params.attention_w_h) v = rng.uniform(-att, att);
  // zero_inquiry starts at zero: the zero slot begins with score 0.
  return params;
}

Matrix assemble_h0(const ModelParams& params) {
  Matrix h0(params.product_embeddings.rows + params.sequence_embeddings.rows,
            params.d);
  std::copy(params.product_embeddings.data.begin(),
            params.product_embeddings.data.end(), h0.data.begin());
  std::copy(params.sequence_embeddings.data.begin(),
            params.sequence_embeddings.data.end(),
            h0.data.begin() + params.product_embeddings.data.size());
  return h0;
}

void encode_query(const ModelParams& params, const std::vector<int>& tokens,
                  double* out) {
  if (tokens.empty()) fail("E_STATE", "cannot encode an empty query");
  std::fill(out, out + params.d, 0.0);
  for (int token : tokens) {
    const double* row = params.word_embeddings.row(token);
    for (int k = 0; k < params.d; ++k) out[k] += row[k];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (int k = 0; k < params.d; ++k) out[k] *= inv;
}

void attention_context(const ModelParams& params, const double* q_vec,
                       Matrix* t) {
  const int d = params.d, d_a = params.d_a;
  if (t->rows != d || t->cols != d_a) *t = Matrix(d, d_a);
  for (int i = 0; i < d; ++i) {
    const double* wf_row = params.attention_w_f.row(i);  // [j*d + k]
    const double* bf_row = params.attention_b_f.row(i);
    double* t_row = t->row(i);
    for (int j = 0; j < d_a; ++j) {
      double z = bf_row[j];
      const double* wf = wf_row + static_cast<std::int64_t>(j) * d;
      for (int k = 0; k < d; ++k) z += wf[k] * q_vec[k];
      t_row[j] = std::tanh(z);
    }
  }
}

double attention_score(const ModelParams& params, const Matrix& t,
                       const double* item_vec) {
  const int d = params.d, d_a = params.d_a;
  double score = 0.0;
  for (int j = 0; j < d_a; ++j) {
    double y = 0.0;
    for (int i = 0; i < d; ++i) y += item_vec[i] * t.at(i, j);
    score += y * params.attention_w_h[j];
  }
  return score;
}

double attention_score(const ModelParams& params, const double* q_vec,
                       const double* item_vec) {
  Matrix t;
  attention_context(params, q_vec, &t);
  return attention_score(params, t, item_vec);
}

AttentionResult user_vector_detailed(const ModelParams& params,
                                     const EnrichedEmbeddings& enriched,
                                     const std::vector<int>& history,
                                     const double* q_vec) {
  AttentionResult result;
  attention_context(params, q_vec, &result.t);

  const std::size_t n = history.size();
  result.scores.resize(n + 1);
  for (std::size_t j = 0; j < n; ++j)
    result.scores[j] = attention_score(params, result.t,
                                       enriched.product_row(history[j]));
  result.scores[n] = attention_score(params, result.t, params.zero_inquiry.data());

  double max_score = *std::max_element(result.scores.begin(), result.scores.end());
  result.alpha.resize(n + 1);
  double z = 0.0;
  for (std::size_t j = 0; j <= n; ++j) {
    result.alpha[j] = std::exp(result.scores[j] - max_score);
    z += result.alpha[j];
  }
  for (double& a : result.alpha) a /= z;

  result.u.assign(params.d, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double* row = enriched.product_row(history[j]);
    for (int k = 0; k < params.d; ++k) result.u[k] += result.alpha[j] * row[k];
  }
  return result;  // zero slot's alpha mass contributes nothing to u
}

void user_vector(const ModelParams& params, const EnrichedEmbeddings& enriched,
                 const std::vector<int>& history, const double* q_vec,
                 double* out) {
  AttentionResult r = user_vector_detailed(params, enriched, history, q_vec);
  std::copy(r.u.begin(), r.u.end(), out);
}

void mix(const ModelParams& params, const double* u_vec, const double* q_vec,
         double* out) {
  for (int k = 0; k < params.d; ++k)
    out[k] = params.lambda * q_vec[k] + (1.0 - params.lambda) * u_vec[k];
}

double score_product(const ModelParams& params, const double* m_uq,
                     int product) {
  const double* item = params.product_embeddings.row(product);
  const int d = params.d;
  double dot_value = 0.0;
  for (int k = 0; k < d; ++k) dot_value += m_uq[k] * item[k];
  if (params.mode == ScoreMode::dot) return dot_value;
  double nm = 0.0, ni = 0.0;
  for (int k = 0; k < d; ++k) {
    nm += m_uq[k] * m_uq[k];
    ni += item[k] * item[k];
  }
  if (nm <= 0.0 || ni <= 0.0) return 0.0;
  return dot_value / std::sqrt(nm * ni);
}

std::vector<std::pair<int, double>> rank(const ModelParams& params,
                                         const EnrichedEmbeddings& enriched,
                                         const UserContext& ctx,
                                         const double* q_vec,
                                         const std::vector<int>& candidates) {
  if (candidates.empty()) fail("E_STATE", "rank called with no candidates");
  std::vector<double> u(params.d), m(params.d);
  user_vector(params, enriched, ctx.history, q_vec, u.data());
  mix(params, u.data(), q_vec, m.data());

  std::vector<std::pair<int, double>> scored;
  scored.reserve(candidates.size());
  for (int c : candidates)
    scored.emplace_back(c, score_product(params, m.data(), c));
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return scored;
}

namespace {

constexpr int kCheckpointVersion = 1;

void write_f32_blob(const std::filesystem::path& path, const double* data,
                    std::int64_t size) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("E_IO", "cannot write " + path.string());
  std::vector<unsigned char> bytes(static_cast<std::size_t>(size) * 4);
  for (std::int64_t i = 0; i < size; ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(data[i]));
    bytes[i * 4 + 0] = static_cast<unsigned char>(bits & 0xff);
    bytes[i * 4 + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
    bytes[i * 4 + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
    bytes[i * 4 + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void read_f32_blob(const std::filesystem::path& path, double* data,
                   std::int64_t size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("E_IO", "cannot read " + path.string());
  std::vector<unsigned char> bytes(static_cast<std::size_t>(size) * 4);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()) ||
      in.peek() != std::ifstream::traits_type::eof())
    fail("E_PARSE", "tensor blob " + path.string() + " has the wrong size");
  for (std::int64_t i = 0; i < size; ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[i * 4 + 0]) |
                               (static_cast<std::uint32_t>(bytes[i * 4 + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[i * 4 + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[i * 4 + 3]) << 24);
    data[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  return std::strtoull(s.c_str(), nullptr, 16);
}

}  // namespace

void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["d"] = params.d;
  manifest["d_a"] = params.d_a;
  manifest["lambda"] = params.lambda;
  manifest["mode"] = std::string(score_mode_name(params.mode));
  manifest["n_words"] = params.word_embeddings.rows;
  manifest["n_products"] = params.product_embeddings.rows;
  manifest["n_sequences"] = params.sequence_embeddings.rows;
  manifest["config_hash"] = meta.config_hash;
  manifest["graph_fingerprint"] = hex64(meta.graph_fingerprint);
  manifest["best_epoch"] = meta.best_epoch;
  manifest["val_ndcg10"] = meta.val_ndcg10;

  nlohmann::json tensor_list = nlohmann::json::array();
  for (const auto& ref : params.tensors()) {
    nlohmann::json entry;
    entry["name"] = ref.name;
    entry["rows"] = ref.rows;
    entry["cols"] = ref.cols;
    entry["file"] = ref.name + ".f32";
    tensor_list.push_back(entry);
    write_f32_blob(dir / (ref.name + ".f32"), ref.data, ref.size);
  }
  manifest["tensors"] = tensor_list;

  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) fail("E_IO", "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

std::pair<ModelParams, CheckpointMeta> load_checkpoint(
    const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) fail("E_IO", "cannot read " + (dir / "manifest.json").string());
  nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
  if (manifest.is_discarded())
    fail("E_PARSE", "invalid checkpoint manifest in " + dir.string());
  if (manifest.value("format_version", -1) != kCheckpointVersion)
    fail("E_PARSE", "unsupported checkpoint format version");

  ModelDims dims;
  dims.n_words = manifest.at("n_words").get<int>();
  dims.n_products = manifest.at("n_products").get<int>();
  dims.n_sequences = manifest.at("n_sequences").get<int>();
  dims.d = manifest.at("d").get<int>();
  dims.d_a = manifest.at("d_a").get<int>();

  ModelParams params;
  params.d = dims.d;
  params.d_a = dims.d_a;
  params.lambda = manifest.at("lambda").get<double>();
  params.mode = parse_score_mode(manifest.at("mode").get<std::string>());
  params.word_embeddings = Matrix(dims.n_words, dims.d);
  params.product_embeddings = Matrix(dims.n_products, dims.d);
  params.sequence_embeddings = Matrix(dims.n_sequences, dims.d);
  params.attention_w_f = Matrix(dims.d, static_cast<std::int64_t>(dims.d_a) * dims.d);
  params.attention_b_f = Matrix(dims.d, dims.d_a);
  params.attention_w_h.assign(dims.d_a, 0.0);
  params.zero_inquiry.assign(dims.d, 0.0);

  auto refs = params.tensors();
  const auto& tensor_list = manifest.at("tensors");
  if (tensor_list.size() != refs.size())
    fail("E_PARSE", "checkpoint manifest lists " +
                        std::to_string(tensor_list.size()) + " tensors, expected " +
                        std::to_string(refs.size()));
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& entry = tensor_list[i];
    if (entry.at("name").get<std::string>() != refs[i].name ||
        entry.at("rows").get<std::int64_t>() != refs[i].rows ||
        entry.at("cols").get<std::int64_t>() != refs[i].cols)
      fail("E_SHAPE", "checkpoint tensor '" + refs[i].name +
                          "' does not match the manifest shape");
    read_f32_blob(dir / entry.at("file").get<std::string>(), refs[i].data,
                  refs[i].size);
  }

  CheckpointMeta meta;
  meta.config_hash = manifest.value("config_hash", "");
  meta.graph_fingerprint = parse_hex64(manifest.value("graph_fingerprint", "0"));
  meta.best_epoch = manifest.value("best_epoch", -1);
  meta.val_ndcg10 = manifest.value("val_ndcg10", 0.0);
  return {std::move(params), meta};
}

}  // namespace sbg

#include "sbg/fetch.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <vector>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>
#include <zlib.h>

#include "sbg/error.hpp"

namespace sbg {
namespace {

constexpr const char* kMagazineReviews =
    "http://deepyeti.ucsd.edu/jianmo/amazon/categoryFilesSmall/"
    "Magazine_Subscriptions_5.json.gz";
constexpr const char* kMagazineMeta =
    "http://deepyeti.ucsd.edu/jianmo/amazon/metaFiles2/"
    "meta_Magazine_Subscriptions.json.gz";

std::string url_filename(const std::string& url) {
  std::string path = url;
  const auto query = path.find('?');
  if (query != std::string::npos) path.erase(query);
  const auto slash = path.find_last_of('/');
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  return name.empty() ? "download.bin" : name;
}

std::string read_recorded_checksum(const std::filesystem::path& sums) {
  std::ifstream in(sums);
  std::string hex;
  if (in >> hex) return hex;
  return {};
}

void record_checksum(const std::filesystem::path& file,
                     const std::string& hex) {
  std::ofstream out(file.string() + ".sha256", std::ios::binary);
  if (!out) fail("E_IO", "cannot write " + file.string() + ".sha256");
  out << hex << "  " << file.filename().string() << '\n';
}

std::string sanitize_field(std::string s, bool strip_gt) {
  for (char& c : s)
    if (c == '\t' || c == '\n' || c == '\r' || (strip_gt && c == '>')) c = ' ';
  return s;
}

// Iterates text lines from a plain or gzipped file.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(const std::string&)>& fn) {
  const bool gz = path.extension() == ".gz";
  if (!gz) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("E_IO", "cannot read " + path.string());
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      fn(line);
    }
    return;
  }
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) fail("E_IO", "cannot open gzip file " + path.string());
  std::string pending;
  char buffer[1 << 16];
  int n = 0;
  while ((n = gzread(f, buffer, sizeof buffer)) > 0) {
    pending.append(buffer, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (;;) {
      const auto nl = pending.find('\n', start);
      if (nl == std::string::npos) break;
      std::string line = pending.substr(start, nl - start);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      fn(line);
      start = nl + 1;
    }
    pending.erase(0, start);
  }
  const bool bad = n < 0;
  gzclose(f);
  if (bad) fail("E_PARSE", "gzip stream error in " + path.string());
  if (!pending.empty()) fn(pending);
}

std::string category_from_meta(const nlohmann::json& j) {
  std::vector<std::string> parts;
  auto push = [&](const nlohmann::json& arr) {
    for (const auto& item : arr)
      if (item.is_string() && !item.get<std::string>().empty())
        parts.push_back(sanitize_field(item.get<std::string>(), true));
  };
  if (j.contains("category") && j["category"].is_array()) {
    push(j["category"]);
  } else if (j.contains("categories") && j["categories"].is_array() &&
             !j["categories"].empty() && j["categories"][0].is_array()) {
    push(j["categories"][0]);  // older dumps: list of paths, take the first
  }
  std::string joined;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) joined += ">";
    joined += parts[i];
  }
  return joined;
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("E_IO", "cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    fail("E_STATE", "SHA-256 init failed");
  }
  std::vector<char> buffer(1 << 20);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (in.gcount() > 0)
      EVP_DigestUpdate(ctx, buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::filesystem::path fetch_file(
    const std::string& url, const std::filesystem::path& out_dir,
    const std::optional<std::string>& expected_sha256) {
  std::filesystem::create_directories(out_dir);
  const auto out = out_dir / url_filename(url);

  if (std::filesystem::exists(out)) {
    const std::string actual = sha256_file(out);
    const std::string recorded =
        read_recorded_checksum(out.string() + ".sha256");
    const std::string& reference = expected_sha256 ? *expected_sha256 : recorded;
    if (!reference.empty() && actual == reference) {
      if (recorded.empty()) record_checksum(out, actual);
      return out;  // cache hit, no download
    }
    if (reference.empty()) {
      record_checksum(out, actual);  // adopt the cached file
      return out;
    }
  }

  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    fail("E_CONFIG", "URL must start with http:// or https://: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string base =
      path_start == std::string::npos ? url : url.substr(0, path_start);
  const std::string path =
      path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(base);
  client.set_follow_location(true);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);

  std::ofstream sink(out, std::ios::binary);
  if (!sink) fail("E_IO", "cannot write " + out.string());
  auto res = client.Get(path, [&](const char* data, std::size_t len) {
    sink.write(data, static_cast<std::streamsize>(len));
    return static_cast<bool>(sink);
  });
  sink.close();
  if (!res || res->status != 200) {
    std::error_code ec;
    std::filesystem::remove(out, ec);
    const std::string status =
        res ? "HTTP " + std::to_string(res->status)
            : "connection failed (" + httplib::to_string(res.error()) + ")";
    fail("E_NETWORK", "download of " + url + " failed: " + status +
                          "; check connectivity or place the file manually at " +
                          out.string());
  }

  const std::string actual = sha256_file(out);
  if (expected_sha256 && actual != *expected_sha256)
    fail("E_CHECKSUM", out.string() + " has sha256 " + actual + ", expected " +
                           *expected_sha256);
  record_checksum(out, actual);
  return out;
}

void gunzip_file(const std::filesystem::path& gz_path,
                 const std::filesystem::path& out_path) {
  gzFile f = gzopen(gz_path.string().c_str(), "rb");
  if (!f) fail("E_IO", "cannot open gzip file " + gz_path.string());
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    gzclose(f);
    fail("E_IO", "cannot write " + out_path.string());
  }
  char buffer[1 << 16];
  int n = 0;
  while ((n = gzread(f, buffer, sizeof buffer)) > 0)
    out.write(buffer, static_cast<std::streamsize>(n));
  const bool bad = n < 0;
  gzclose(f);
  if (bad) fail("E_PARSE", "gzip stream error in " + gz_path.string());
}

void convert_amazon(const std::filesystem::path& reviews_path,
                    const std::optional<std::filesystem::path>& meta_path,
                    const std::filesystem::path& out_tsv) {
  std::map<std::string, std::string> categories;
  if (meta_path) {
    for_each_line(*meta_path, [&](const std::string& line) {
      if (line.empty()) return;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("asin")) return;
      const std::string category = category_from_meta(j);
      if (!category.empty())
        categories.emplace(j["asin"].get<std::string>(), category);
    });
  }

  std::ofstream out(out_tsv, std::ios::binary);
  if (!out) fail("E_IO", "cannot write " + out_tsv.string());
  std::int64_t written = 0, skipped = 0;
  for_each_line(reviews_path, [&](const std::string& line) {
    if (line.empty()) return;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("reviewerID") ||
        !j.contains("asin") || !j.contains("unixReviewTime") ||
        !j["unixReviewTime"].is_number_integer()) {
      ++skipped;
      return;
    }
    const std::string asin = j["asin"].get<std::string>();
    const auto cat = categories.find(asin);
    out << sanitize_field(j["reviewerID"].get<std::string>(), false) << '\t'
        << sanitize_field(asin, false) << '\t'
        << j["unixReviewTime"].get<std::int64_t>() << '\t'
        << (cat == categories.end() ? "" : cat->second) << '\t'
        << sanitize_field(j.value("reviewText", std::string()), false) << '\n';
    ++written;
  });
  if (written == 0)
    fail("E_PARSE", "no usable review records in " + reviews_path.string());
  if (skipped > 0)
    std::cerr << "warning: skipped " << skipped
              << " unparseable review lines during conversion\n";
}

std::filesystem::path cmd_fetch(const std::string& dataset, std::string url,
                                std::string meta_url,
                                const std::optional<std::string>& sha256,
                                const std::filesystem::path& out_dir) {
  if (dataset == "magazine") {
    if (url.empty()) url = kMagazineReviews;
    if (meta_url.empty()) meta_url = kMagazineMeta;
  } else if (!dataset.empty()) {
    fail("E_CONFIG", "unknown dataset '" + dataset +
                         "' (known: magazine); pass --url instead");
  }

  const std::string tsv_name =
      dataset.empty() ? "reviews.tsv" : dataset + ".tsv";
  const auto tsv = out_dir / tsv_name;
  const bool convert = !dataset.empty() || !meta_url.empty();
  if (convert && std::filesystem::exists(tsv)) return tsv;  // cached output

  if (url.empty())
    fail("E_CONFIG",
         "no URL given and no cached file under " + out_dir.string() +
             "; pass --url (and optionally --meta-url) or --dataset magazine");

  const auto reviews = fetch_file(url, out_dir, sha256);
  if (!convert) return reviews;

  std::optional<std::filesystem::path> meta;
  if (!meta_url.empty()) meta = fetch_file(meta_url, out_dir, std::nullopt);
  convert_amazon(reviews, meta, tsv);
  return tsv;
}

}  // namespace sbg

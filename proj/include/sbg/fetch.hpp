#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace sbg {

std::string sha256_file(const std::filesystem::path& path);

// Downloads url into out_dir (filename from the URL path), writes
// <file>.sha256 alongside, and skips the download when the file already
// exists with a matching recorded checksum.  Supports http/https.
std::filesystem::path fetch_file(const std::string& url,
                                 const std::filesystem::path& out_dir,
                                 const std::optional<std::string>& expected_sha256);

// Streaming gzip decompression (zlib).
void gunzip_file(const std::filesystem::path& gz_path,
                 const std::filesystem::path& out_path);

// Converts public Amazon-review JSON lines (optionally gzipped; fields
// reviewerID/asin/unixReviewTime/reviewText) plus the matching metadata file
// (asin/categories) into the canonical 5-column review TSV.
void convert_amazon(const std::filesystem::path& reviews_path,
                    const std::optional<std::filesystem::path>& meta_path,
                    const std::filesystem::path& out_tsv);

// fetch subcommand body: resolves dataset shortcuts (currently "magazine"),
// downloads review + metadata files, converts Amazon-schema inputs to the
// canonical TSV, and returns the path to feed into prepare.  A cached,
// already-converted TSV short-circuits the network entirely.
std::filesystem::path cmd_fetch(const std::string& dataset, std::string url,
                                std::string meta_url,
                                const std::optional<std::string>& sha256,
                                const std::filesystem::path& out_dir);

}  // namespace sbg

#pragma once

// Embedding file format (little-endian):
//   char[4] "EMB1", u32 format version = 1, u32 dim, u64 record count,
//   records {u64 id, f32[dim]}, then u32 byte length + UTF-8 model_version.
// A persisted snapshot is one such file plus "<file>.json" holding the
// snapshot version and HNSW build parameters.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "semret/index.hpp"

namespace semret::index {

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

struct EmbeddingFile {
  std::uint32_t dim = 0;
  std::string model_version;
  std::vector<EmbeddingRecord> records;  // each carries model_version
};

void write_embeddings(std::ostream& out, std::uint32_t dim, const std::vector<EmbeddingRecord>& records,
                      const std::string& model_version);
EmbeddingFile read_embeddings(std::istream& in);

void save_embeddings(const std::filesystem::path& path, std::uint32_t dim,
                     const std::vector<EmbeddingRecord>& records, const std::string& model_version);
EmbeddingFile load_embeddings(const std::filesystem::path& path);

void save_snapshot(const std::filesystem::path& path, const IndexSnapshot& snapshot);
std::shared_ptr<const IndexSnapshot> load_snapshot(const std::filesystem::path& path);

}  // namespace semret::index

#pragma once

// Immutable searchable snapshots of item embeddings, batch ingestion with
// validation, and a single-writer publication point for concurrent readers.

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "semret/hnsw.hpp"

namespace semret::index {

struct EmbeddingRecord {
  std::uint64_t id = 0;
  std::vector<float> vector;
  std::string model_version;

  bool operator==(const EmbeddingRecord&) const = default;
};

struct SearchHit {
  std::uint64_t id = 0;
  float score = 0.0f;

  bool operator==(const SearchHit&) const = default;
};

inline constexpr double kNormTolerance = 1e-5;

/// Batch-level ingest failure (the whole batch is refused).
class IngestError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct IngestResult;

class IndexSnapshot {
 public:
  /// A snapshot with no records and no model version yet.
  static std::shared_ptr<const IndexSnapshot> empty(HnswParams params = {});

  /// Builds from scratch; records are ordered by id and must already be valid.
  static std::shared_ptr<const IndexSnapshot> build(std::vector<EmbeddingRecord> records,
                                                    HnswParams params, std::uint64_t version);

  std::uint64_t version() const { return version_; }
  const std::string& model_version() const { return model_version_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const HnswParams& params() const { return params_; }
  const std::vector<std::uint64_t>& ids() const { return ids_; }
  std::span<const float> vector_at(std::size_t pos) const {
    return {vectors_.data() + pos * dim_, dim_};
  }
  std::optional<std::size_t> find(std::uint64_t id) const;
  const HnswGraph& graph() const { return graph_; }

  /// Brute-force top-k by dot product, ties by ascending id.
  std::vector<SearchHit> search_exact(std::span<const float> query, std::size_t k) const;
  /// Graph search; throws std::invalid_argument when ef_search < k.
  std::vector<SearchHit> search_ann(std::span<const float> query, std::size_t k,
                                    std::size_t ef_search) const;
  std::vector<SearchHit> search_ann(std::span<const float> query, std::size_t k) const {
    return search_ann(query, k, params_.ef_search);
  }

 private:
  friend IngestResult ingest(std::span<const EmbeddingRecord> records,
                             const std::shared_ptr<const IndexSnapshot>& current);
  void check_query(std::span<const float> query) const;
  void append(const EmbeddingRecord& r);

  std::uint64_t version_ = 0;
  std::string model_version_;
  std::size_t dim_ = 0;
  HnswParams params_;
  std::vector<std::uint64_t> ids_;
  std::vector<float> vectors_;
  std::unordered_map<std::uint64_t, std::size_t> pos_;
  HnswGraph graph_;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t overwritten = 0;
  std::vector<std::uint64_t> rejected_ids;
  std::vector<std::string> reasons;  // aligned with rejected_ids
};

struct IngestResult {
  std::shared_ptr<const IndexSnapshot> snapshot;
  IngestReport report;
};

/// Why a record fails validation, or nullopt when it passes.
std::optional<std::string> validate_record(const EmbeddingRecord& r, std::size_t dim);

/// New snapshot = current with the valid records added (overwriting by id).
/// Throws IngestError when the batch mixes model versions or its version
/// differs from a non-empty current snapshot.
IngestResult ingest(std::span<const EmbeddingRecord> records,
                    const std::shared_ptr<const IndexSnapshot>& current);

/// The published snapshot. Readers take a reference and keep using it; the
/// writer replaces it in one step.
class SnapshotStore {
 public:
  explicit SnapshotStore(std::shared_ptr<const IndexSnapshot> initial = nullptr);
  std::shared_ptr<const IndexSnapshot> current() const;
  void publish(std::shared_ptr<const IndexSnapshot> next);
  /// Serializes writers: ingests against the current snapshot and publishes.
  IngestReport ingest_and_publish(std::span<const EmbeddingRecord> records);

 private:
  mutable std::mutex mu_;
  std::mutex writer_;
  std::shared_ptr<const IndexSnapshot> current_;
};

}  // namespace semret::index

#pragma once

// Batch embedding generation: scan entities, encode them with a frozen model,
// and hand validated record batches to a sink (usually an index ingest).

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "semret/corpus.hpp"
#include "semret/encoder.hpp"
#include "semret/index.hpp"

namespace semret::pipeline {

struct Entity {
  std::uint64_t id = 0;
  std::string text;
};

enum class Side { item, query };

std::vector<Entity> catalog_entities(const std::vector<corpus::Product>& catalog);
std::vector<Entity> query_entities(const std::vector<corpus::Query>& queries);

struct PipelineReport {
  std::size_t batches = 0;
  std::size_t embedded = 0;
  std::vector<std::uint64_t> skipped;  // encode faults or repeated ids
  std::vector<std::string> reasons;
};

using BatchSink = std::function<void(std::vector<index::EmbeddingRecord>&&)>;

/// Each distinct id is embedded once, in input order; batches hold at most
/// `batch_size` records. Entities whose encoding fails are skipped and logged.
PipelineReport embedding_generation_pipeline(std::span<const Entity> entities,
                                             const encoder::TextEmbedder& model,
                                             std::size_t batch_size, const BatchSink& sink,
                                             Side side = Side::item);

/// Convenience: all batches concatenated.
std::vector<index::EmbeddingRecord> embed_all(std::span<const Entity> entities,
                                              const encoder::TextEmbedder& model,
                                              std::size_t batch_size = 128,
                                              Side side = Side::item,
                                              PipelineReport* report = nullptr);

}  // namespace semret::pipeline

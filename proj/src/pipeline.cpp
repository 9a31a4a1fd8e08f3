#include "semret/pipeline.hpp"

#include <iostream>
#include <unordered_set>

namespace semret::pipeline {

std::vector<Entity> catalog_entities(const std::vector<corpus::Product>& catalog) {
  std::vector<Entity> out;
  out.reserve(catalog.size());
  for (const auto& p : catalog) out.push_back({p.id, p.title});
  return out;
}

std::vector<Entity> query_entities(const std::vector<corpus::Query>& queries) {
  std::vector<Entity> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back({q.id, q.text});
  return out;
}

PipelineReport embedding_generation_pipeline(std::span<const Entity> entities,
                                             const encoder::TextEmbedder& model,
                                             std::size_t batch_size, const BatchSink& sink,
                                             Side side) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  PipelineReport report;
  std::unordered_set<std::uint64_t> seen;
  std::vector<index::EmbeddingRecord> batch;
  batch.reserve(batch_size);
  auto flush = [&] {
    if (batch.empty()) return;
    ++report.batches;
    report.embedded += batch.size();
    sink(std::move(batch));
    batch.clear();
    batch.reserve(batch_size);
  };
  auto skip = [&](std::uint64_t id, std::string why) {
    std::clog << "embedding pipeline: skipping id " << id << ": " << why << '\n';
    report.skipped.push_back(id);
    report.reasons.push_back(std::move(why));
  };

  for (const auto& e : entities) {
    if (!seen.insert(e.id).second) {
      skip(e.id, "repeated id");
      continue;
    }
    index::EmbeddingRecord r;
    r.id = e.id;
    r.model_version = model.model_version();
    try {
      r.vector = side == Side::item ? model.embed_item(e.text) : model.embed_query(e.text);
    } catch (const std::exception& ex) {
      skip(e.id, ex.what());
      continue;
    }
    if (auto why = index::validate_record(r, model.dim())) {
      skip(e.id, *why);
      continue;
    }
    batch.push_back(std::move(r));
    if (batch.size() == batch_size) flush();
  }
  flush();
  return report;
}

std::vector<index::EmbeddingRecord> embed_all(std::span<const Entity> entities,
                                              const encoder::TextEmbedder& model,
                                              std::size_t batch_size, Side side,
                                              PipelineReport* report) {
  std::vector<index::EmbeddingRecord> out;
  out.reserve(entities.size());
  auto rep = embedding_generation_pipeline(
      entities, model, batch_size,
      [&](std::vector<index::EmbeddingRecord>&& b) {
        for (auto& r : b) out.push_back(std::move(r));
      },
      side);
  if (report) *report = std::move(rep);
  return out;
}

}  // namespace semret::pipeline

#pragma once

// JSONL serialization of corpus artifacts. Field names match the in-memory
// struct field names; enums are written as their lowercase names.

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "semret/corpus.hpp"

namespace semret::corpus {

void to_json(nlohmann::json& j, const Product& p);
void from_json(const nlohmann::json& j, Product& p);
void to_json(nlohmann::json& j, const Query& q);
void from_json(const nlohmann::json& j, Query& q);
void to_json(nlohmann::json& j, const InteractionEvent& e);
void from_json(const nlohmann::json& j, InteractionEvent& e);
void to_json(nlohmann::json& j, const LabeledPair& p);
void from_json(const nlohmann::json& j, LabeledPair& p);
void to_json(nlohmann::json& j, const TrainingTriplet& t);
void from_json(const nlohmann::json& j, TrainingTriplet& t);

CorpusConfig corpus_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CorpusConfig& c);

template <class T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& rows);

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path);

/// Writes config.json, catalog.jsonl, queries.jsonl, events.jsonl, pairs.<domain>.jsonl and
/// triplets.jsonl under `dir`.
void write_corpus(const std::filesystem::path& dir, const World& world,
                  const DomainDatasets& datasets, const std::vector<TrainingTriplet>& triplets);

/// Rebuilds the world from the written files plus the generation config.
World load_world(const std::filesystem::path& dir, const CorpusConfig& config);

struct CorpusFiles {
  World world;
  DomainDatasets datasets;
  std::vector<TrainingTriplet> triplets;
};

/// Reads everything write_corpus produced, including config.json.
CorpusFiles load_corpus(const std::filesystem::path& dir);

}  // namespace semret::corpus

#pragma once

// JSON config files with dotted `key=value` overrides, and the typed settings
// each CLI verb reads from them. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "semret/encoder.hpp"
#include "semret/hnsw.hpp"

namespace semret::config {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses a JSON object from `path`; an empty path gives {}.
nlohmann::json load(const std::filesystem::path& path);

/// Applies `a.b.c=value`. The value is parsed as JSON when it parses, and kept
/// as a string otherwise. Intermediate objects are created as needed.
void apply_override(nlohmann::json& cfg, std::string_view assignment);

nlohmann::json resolve(const std::filesystem::path& path, std::span<const std::string> overrides);

/// Throws ConfigError naming the first key of `j` not in `allowed`.
void check_keys(const nlohmann::json& j, std::span<const std::string_view> allowed, std::string_view where);

encoder::EncoderShape encoder_shape(const nlohmann::json& j);  // section "encoder"
index::HnswParams hnsw_params(const nlohmann::json& j);        // section "hnsw"

enum class Stage { pretrain, siamese, dssm };

struct TrainingSettings {
  Stage stage = Stage::siamese;
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double margin = 0.4;
  std::uint64_t seed = 13;
  std::uint64_t init_seed = 3;
  std::string corpus_dir = "corpus";
  std::string checkpoint_in;  // empty: random init
  std::string checkpoint_out = "model.ckpt";
  std::string telemetry_out;
  std::string round_report_out;
  std::vector<std::size_t> schedule{300, 300, 600};  // batches per round
  std::string feedback = "oracle";                   // or "human"
  bool in_batch_negatives = true;
  bool easy_negatives_only = false;
  bool rescale_projection = true;
  std::size_t dssm_negatives = 1;
  encoder::EncoderShape shape;
};

/// Keys: stage ("1"/"pretrain", "2"/"siamese", "dssm"), epochs, batch_size,
/// lr, margin, seed, init_seed, corpus_dir, checkpoint_in, checkpoint_out,
/// telemetry_out, round_report_out, schedule, feedback, in_batch_negatives,
/// easy_negatives_only, rescale_projection, dssm_negatives, encoder, hitl, service.
TrainingSettings training_settings(const nlohmann::json& j);

struct IngestSettings {
  std::string checkpoint = "model.ckpt";
  std::string corpus_dir = "corpus";
  std::string snapshot_in;  // empty: start from an empty index
  std::string snapshot_out = "index.emb";
  std::size_t batch_size = 256;
  index::HnswParams hnsw;
};

IngestSettings ingest_settings(const nlohmann::json& j);

struct EvaluateSettings {
  std::string checkpoint = "model.ckpt";
  std::string snapshot = "index.emb";
  std::string corpus_dir = "corpus";
  std::string judgments;  // empty: oracle judgments for the sampled queries
  std::string judgments_out;
  std::string report_out = "report.json";
  std::string csv_out;
  std::size_t queries = 200;
  std::uint64_t seed = 19;
  std::size_t k = 20;
  std::size_t ef_search = 64;
};

EvaluateSettings evaluate_settings(const nlohmann::json& j);

struct ServeSettings {
  std::string checkpoint = "model.ckpt";
  std::string snapshot = "index.emb";
  std::string corpus_dir = "corpus";
  std::string judgments_out = "judgments.human.jsonl";
  std::string host = "127.0.0.1";
  int port = 8080;
  double score_floor = 0.15;
  std::size_t ef_search = 64;
  bool warm_cache = true;
  std::size_t per_domain_queries = 5;
  std::size_t k_per_query = 10;
  std::size_t timeout_ms = 600000;
};

/// Section "service" plus top-level checkpoint/snapshot/corpus_dir keys.
ServeSettings serve_settings(const nlohmann::json& j);

}  // namespace semret::config

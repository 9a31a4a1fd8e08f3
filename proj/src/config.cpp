#include "semret/config.hpp"

#include <fstream>

namespace semret::config {

using json = nlohmann::json;

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key ") + key + ": " + e.what());
  }
}

const json& section(const json& j, const char* name) {
  static const json empty = json::object();
  if (!j.contains(name)) return empty;
  if (!j.at(name).is_object()) throw ConfigError(std::string("config section ") + name + " must be an object");
  return j.at(name);
}

}  // namespace

json load(const std::filesystem::path& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + path.string() + " must hold a JSON object");
  return j;
}

void apply_override(json& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override must look like key=value: " + std::string(assignment));
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("empty path segment in override " + key);
    if (!node->is_object()) throw ConfigError("override " + key + " descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

json resolve(const std::filesystem::path& path, std::span<const std::string> overrides) {
  auto j = load(path);
  for (const auto& o : overrides) apply_override(j, o);
  return j;
}

void check_keys(const json& j, std::span<const std::string_view> allowed, std::string_view where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == k;
    if (!ok) throw ConfigError("unknown config key " + std::string(where) + k);
  }
}

encoder::EncoderShape encoder_shape(const json& j) {
  const auto& s = section(j, "encoder");
  static constexpr std::string_view keys[] = {"vocab", "hidden", "output"};
  check_keys(s, keys, "encoder.");
  encoder::EncoderShape shape;
  read(s, "vocab", shape.vocab);
  read(s, "hidden", shape.hidden);
  read(s, "output", shape.output);
  if (shape.vocab < 2 || shape.hidden == 0 || shape.output == 0)
    throw ConfigError("encoder needs vocab >= 2 and non-zero hidden/output");
  return shape;
}

index::HnswParams hnsw_params(const json& j) {
  const auto& s = section(j, "hnsw");
  static constexpr std::string_view keys[] = {"M", "ef_construction", "ef_search", "seed"};
  check_keys(s, keys, "hnsw.");
  index::HnswParams p;
  read(s, "M", p.M);
  read(s, "ef_construction", p.ef_construction);
  read(s, "ef_search", p.ef_search);
  read(s, "seed", p.seed);
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

TrainingSettings training_settings(const json& j) {
  static constexpr std::string_view keys[] = {
      "stage",          "epochs",          "batch_size",         "lr",
      "margin",         "seed",            "init_seed",          "corpus_dir",
      "checkpoint_in",  "checkpoint_out",  "telemetry_out",      "round_report_out",
      "schedule",       "feedback",        "in_batch_negatives", "easy_negatives_only",
      "rescale_projection", "dssm_negatives", "encoder",
      "service",        "snapshot"};
  check_keys(j, keys, "");
  TrainingSettings t;
  if (j.contains("stage")) {
    const auto& v = j.at("stage");
    const std::string s = v.is_number_integer() ? std::to_string(v.get<int>()) : v.get<std::string>();
    if (s == "1" || s == "pretrain") t.stage = Stage::pretrain;
    else if (s == "2" || s == "siamese") t.stage = Stage::siamese;
    else if (s == "dssm") t.stage = Stage::dssm;
    else throw ConfigError("stage must be 1, 2 or dssm, got " + s);
  }
  read(j, "epochs", t.epochs);
  read(j, "batch_size", t.batch_size);
  read(j, "lr", t.lr);
  read(j, "margin", t.margin);
  read(j, "seed", t.seed);
  read(j, "init_seed", t.init_seed);
  read(j, "corpus_dir", t.corpus_dir);
  read(j, "checkpoint_in", t.checkpoint_in);
  read(j, "checkpoint_out", t.checkpoint_out);
  read(j, "telemetry_out", t.telemetry_out);
  read(j, "round_report_out", t.round_report_out);
  read(j, "schedule", t.schedule);
  read(j, "feedback", t.feedback);
  read(j, "in_batch_negatives", t.in_batch_negatives);
  read(j, "easy_negatives_only", t.easy_negatives_only);
  read(j, "rescale_projection", t.rescale_projection);
  read(j, "dssm_negatives", t.dssm_negatives);
  t.shape = encoder_shape(j);
  if (t.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(t.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(t.margin > 0.0 && t.margin <= 2.0)) throw ConfigError("margin must lie in (0, 2]");
  if (t.feedback != "oracle" && t.feedback != "human") throw ConfigError("feedback must be oracle or human");
  if (t.stage != Stage::pretrain && t.schedule.empty()) throw ConfigError("schedule needs at least one round");
  return t;
}

IngestSettings ingest_settings(const json& j) {
  static constexpr std::string_view keys[] = {"checkpoint", "corpus_dir", "snapshot_in", "snapshot_out",
                                              "batch_size", "hnsw"};
  check_keys(j, keys, "");
  IngestSettings s;
  read(j, "checkpoint", s.checkpoint);
  read(j, "corpus_dir", s.corpus_dir);
  read(j, "snapshot_in", s.snapshot_in);
  read(j, "snapshot_out", s.snapshot_out);
  read(j, "batch_size", s.batch_size);
  s.hnsw = hnsw_params(j);
  if (s.batch_size == 0) throw ConfigError("batch_size must be positive");
  return s;
}

EvaluateSettings evaluate_settings(const json& j) {
  static constexpr std::string_view keys[] = {"checkpoint", "snapshot", "corpus_dir", "judgments",
                                              "judgments_out", "report_out", "csv_out", "queries",
                                              "seed", "k", "ef_search"};
  check_keys(j, keys, "");
  EvaluateSettings s;
  read(j, "checkpoint", s.checkpoint);
  read(j, "snapshot", s.snapshot);
  read(j, "corpus_dir", s.corpus_dir);
  read(j, "judgments", s.judgments);
  read(j, "judgments_out", s.judgments_out);
  read(j, "report_out", s.report_out);
  read(j, "csv_out", s.csv_out);
  read(j, "queries", s.queries);
  read(j, "seed", s.seed);
  read(j, "k", s.k);
  read(j, "ef_search", s.ef_search);
  if (s.k == 0 || s.queries == 0) throw ConfigError("k and queries must be positive");
  return s;
}

ServeSettings serve_settings(const json& j) {
  ServeSettings s;
  read(j, "checkpoint", s.checkpoint);
  read(j, "snapshot", s.snapshot);
  read(j, "corpus_dir", s.corpus_dir);
  const auto& sv = section(j, "service");
  static constexpr std::string_view keys[] = {"judgments_out", "host", "port", "score_floor", "ef_search",
                                              "warm_cache", "per_domain_queries", "k_per_query",
                                              "timeout_ms"};
  check_keys(sv, keys, "service.");
  read(sv, "judgments_out", s.judgments_out);
  read(sv, "host", s.host);
  read(sv, "port", s.port);
  read(sv, "score_floor", s.score_floor);
  read(sv, "ef_search", s.ef_search);
  read(sv, "warm_cache", s.warm_cache);
  read(sv, "per_domain_queries", s.per_domain_queries);
  read(sv, "k_per_query", s.k_per_query);
  read(sv, "timeout_ms", s.timeout_ms);
  if (s.port < 0 || s.port > 65535) throw ConfigError("service.port must lie in [0, 65535]");
  return s;
}

}  // namespace semret::config

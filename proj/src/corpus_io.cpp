#include "semret/corpus_io.hpp"

#include <fstream>
#include <stdexcept>

namespace semret::corpus {

using nlohmann::json;

void to_json(json& j, const Product& p) {
  j = json{{"id", p.id}, {"title", p.title}, {"department", p.department},
           {"product_type", p.product_type}};
}
void from_json(const json& j, Product& p) {
  j.at("id").get_to(p.id);
  j.at("title").get_to(p.title);
  j.at("department").get_to(p.department);
  j.at("product_type").get_to(p.product_type);
}

void to_json(json& j, const Query& q) {
  j = json{{"id", q.id}, {"text", q.text}, {"segment", to_string(q.segment)},
           {"intended_product_type", q.intended_product_type}};
}
void from_json(const json& j, Query& q) {
  j.at("id").get_to(q.id);
  j.at("text").get_to(q.text);
  q.segment = parse_segment(j.at("segment").get<std::string>());
  j.at("intended_product_type").get_to(q.intended_product_type);
}

void to_json(json& j, const InteractionEvent& e) {
  j = json{{"query_id", e.query_id}, {"product_id", e.product_id},
           {"impressions", e.impressions}, {"clicks", e.clicks}};
}
void from_json(const json& j, InteractionEvent& e) {
  j.at("query_id").get_to(e.query_id);
  j.at("product_id").get_to(e.product_id);
  j.at("impressions").get_to(e.impressions);
  j.at("clicks").get_to(e.clicks);
  if (e.clicks > e.impressions) throw std::invalid_argument("event has clicks > impressions");
}

void to_json(json& j, const LabeledPair& p) {
  j = json{{"query_text", p.query_text}, {"item_text", p.item_text}, {"grade", p.grade},
           {"domain", to_string(p.domain)}, {"source", to_string(p.source)}};
}
void from_json(const json& j, LabeledPair& p) {
  j.at("query_text").get_to(p.query_text);
  j.at("item_text").get_to(p.item_text);
  j.at("grade").get_to(p.grade);
  if (p.grade < 0 || p.grade > 2) throw std::invalid_argument("grade out of range");
  p.domain = parse_domain(j.at("domain").get<std::string>());
  p.source = parse_label_source(j.at("source").get<std::string>());
}

void to_json(json& j, const TrainingTriplet& t) {
  j = json{{"anchor_text", t.anchor_text}, {"positive_text", t.positive_text},
           {"negative_text", t.negative_text}, {"negative_kind", to_string(t.negative_kind)}};
}
void from_json(const json& j, TrainingTriplet& t) {
  j.at("anchor_text").get_to(t.anchor_text);
  j.at("positive_text").get_to(t.positive_text);
  j.at("negative_text").get_to(t.negative_text);
  t.negative_kind = parse_negative_kind(j.at("negative_kind").get<std::string>());
}

#define SEMRET_CORPUS_FIELDS(X)                                                            \
  X(seed) X(n_products) X(n_departments) X(n_product_types) X(extra_query_terms) X(confuser_rate) X(n_queries) X(head_share)     \
  X(torso_share) X(holdout_fraction) X(head_traffic) X(torso_traffic) X(n_events)          \
  X(shown_same_type) X(shown_same_department) X(shown_other) X(ctr_match)                  \
  X(ctr_same_department) X(ctr_other) X(click_threshold) X(impression_floor) X(ctr_ceiling) \
  X(hard_fraction) X(n_triplets) X(general_pairs) X(sem_pairs) X(organic_pairs)             \
  X(ads_pairs) X(pretrain_per_task) X(feedback_queries_per_domain)

CorpusConfig corpus_config_from_json(const json& j) {
  CorpusConfig c;
  const json& section = j.contains("corpus") ? j.at("corpus") : json::object();
#define READ_FIELD(name) \
  if (section.contains(#name)) section.at(#name).get_to(c.name);
  SEMRET_CORPUS_FIELDS(READ_FIELD)
#undef READ_FIELD
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
  return c;
}

json to_json(const CorpusConfig& c) {
  json section = json::object();
#define WRITE_FIELD(name) section[#name] = c.name;
  SEMRET_CORPUS_FIELDS(WRITE_FIELD)
#undef WRITE_FIELD
  section.erase("seed");
  return json{{"seed", c.seed}, {"corpus", section}};
}

template <class T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : rows) out << json(r).dump() << '\n';
}

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<T> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line).get<T>());
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

template void write_jsonl(const std::filesystem::path&, const std::vector<Product>&);
template void write_jsonl(const std::filesystem::path&, const std::vector<Query>&);
template void write_jsonl(const std::filesystem::path&, const std::vector<InteractionEvent>&);
template void write_jsonl(const std::filesystem::path&, const std::vector<LabeledPair>&);
template void write_jsonl(const std::filesystem::path&, const std::vector<TrainingTriplet>&);
template std::vector<Product> read_jsonl(const std::filesystem::path&);
template std::vector<Query> read_jsonl(const std::filesystem::path&);
template std::vector<InteractionEvent> read_jsonl(const std::filesystem::path&);
template std::vector<LabeledPair> read_jsonl(const std::filesystem::path&);
template std::vector<TrainingTriplet> read_jsonl(const std::filesystem::path&);

void write_corpus(const std::filesystem::path& dir, const World& world,
                  const DomainDatasets& datasets, const std::vector<TrainingTriplet>& triplets) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.json", std::ios::trunc);
    if (!cfg) throw std::runtime_error("cannot write " + (dir / "config.json").string());
    cfg << to_json(world.config).dump(2) << '\n';
  }
  write_jsonl(dir / "catalog.jsonl", world.catalog);
  write_jsonl(dir / "queries.jsonl", world.queries);
  write_jsonl(dir / "events.jsonl", world.events);
  for (const auto& [domain, pairs] : datasets)
    write_jsonl(dir / ("pairs." + std::string(to_string(domain)) + ".jsonl"), pairs);
  write_jsonl(dir / "triplets.jsonl", triplets);
}

World load_world(const std::filesystem::path& dir, const CorpusConfig& config) {
  World w;
  w.config = config;
  w.taxonomy = Taxonomy::make(config.n_departments, config.n_product_types, config.extra_query_terms);
  w.catalog = read_jsonl<Product>(dir / "catalog.jsonl");
  w.queries = read_jsonl<Query>(dir / "queries.jsonl");
  w.events = read_jsonl<InteractionEvent>(dir / "events.jsonl");
  for (std::size_t i = 0; i < w.catalog.size(); ++i) w.product_index.emplace(w.catalog[i].id, i);
  for (std::size_t i = 0; i < w.queries.size(); ++i) w.query_index.emplace(w.queries[i].id, i);
  for (const auto& q : w.queries)
    (is_heldout(q, config.seed, config.holdout_fraction) ? w.heldout_queries : w.train_queries)
        .push_back(q);
  return w;
}

CorpusFiles load_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw std::runtime_error("no corpus config at " + (dir / "config.json").string());
  CorpusFiles f;
  f.world = load_world(dir, corpus_config_from_json(json::parse(in)));
  for (Domain d : kAllDomains)
    f.datasets[d] = read_jsonl<LabeledPair>(dir / ("pairs." + std::string(to_string(d)) + ".jsonl"));
  f.triplets = read_jsonl<TrainingTriplet>(dir / "triplets.jsonl");
  return f;
}

}  // namespace semret::corpus

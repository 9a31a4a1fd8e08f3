#pragma once

// Deterministic synthetic e-commerce world: a product taxonomy, a catalog with
// template-composed titles, segmented queries, a simulated click log, and every
// training/evaluation dataset derived from them.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace semret::corpus {

enum class Segment { head, torso, tail };
enum class Domain { general_language, sem, organic, ads };
enum class LabelSource { synthetic_truth, pseudo_label, human };
enum class NegativeKind { easy, hard };

inline constexpr Domain kAllDomains[] = {Domain::general_language, Domain::sem, Domain::organic,
                                         Domain::ads};

std::string_view to_string(Segment s);
std::string_view to_string(Domain d);
std::string_view to_string(LabelSource s);
std::string_view to_string(NegativeKind k);
Segment parse_segment(std::string_view s);
Domain parse_domain(std::string_view s);
LabelSource parse_label_source(std::string_view s);
NegativeKind parse_negative_kind(std::string_view s);

struct Product {
  std::uint64_t id = 0;
  std::string title;
  std::string department;
  std::string product_type;

  bool operator==(const Product&) const = default;
};

struct Query {
  std::uint64_t id = 0;
  std::string text;
  Segment segment = Segment::tail;
  std::string intended_product_type;

  bool operator==(const Query&) const = default;
};

struct InteractionEvent {
  std::uint64_t query_id = 0;
  std::uint64_t product_id = 0;
  std::uint64_t impressions = 0;
  std::uint64_t clicks = 0;

  bool operator==(const InteractionEvent&) const = default;
};

struct LabeledPair {
  std::string query_text;
  std::string item_text;
  int grade = 0;
  Domain domain = Domain::organic;
  LabelSource source = LabelSource::synthetic_truth;

  bool operator==(const LabeledPair&) const = default;
};

struct TrainingTriplet {
  std::string anchor_text;
  std::string positive_text;
  std::string negative_text;
  NegativeKind negative_kind = NegativeKind::easy;

  bool operator==(const TrainingTriplet&) const = default;
};

/// Per product-type vocabulary. Title terms appear in catalog titles; query
/// terms are the shifted vocabulary shoppers use and never appear in titles.
struct ProductTypeInfo {
  std::string name;
  std::string department;
  std::vector<std::string> title_terms;
  std::vector<std::string> query_terms;
  std::vector<std::string> attributes;
  std::optional<std::string> exemplar_title;
};

struct DepartmentInfo {
  std::string name;
  std::vector<std::string> brands;
  std::vector<std::string> attributes;
};

/// Closed label vocabularies and the type -> department function.
class Taxonomy {
 public:
  static Taxonomy make(std::size_t n_departments, std::size_t n_product_types,
                       std::size_t extra_query_terms = 4);

  const std::vector<DepartmentInfo>& departments() const { return departments_; }
  const std::vector<ProductTypeInfo>& product_types() const { return types_; }
  const std::vector<std::string>& generic_terms() const { return generic_; }

  std::size_t type_index(std::string_view type) const;
  std::size_t department_index(std::string_view dept) const;
  const std::string& department_of(std::string_view type) const;
  std::vector<std::string> department_labels() const;
  std::vector<std::string> product_type_labels() const;

 private:
  std::vector<DepartmentInfo> departments_;
  std::vector<ProductTypeInfo> types_;
  std::vector<std::string> generic_;
  std::unordered_map<std::string, std::size_t> type_index_;
  std::unordered_map<std::string, std::size_t> dept_index_;
};

struct CorpusConfig {
  std::uint64_t seed = 7;
  std::size_t n_products = 2000;
  std::size_t n_departments = 8;
  std::size_t n_product_types = 40;
  std::size_t extra_query_terms = 4;  // rare shopper synonyms per type
  double confuser_rate = 0.25;        // titles that mention a sibling type
  std::size_t n_queries = 2000;
  double head_share = 0.2;   // of distinct queries
  double torso_share = 0.3;  // tail gets the remainder
  double holdout_fraction = 0.2;
  // Share of impression volume per segment.
  double head_traffic = 0.7;
  double torso_traffic = 0.2;
  std::size_t n_events = 300000;
  // Legacy-system shown set per query.
  std::size_t shown_same_type = 8;
  std::size_t shown_same_department = 10;
  std::size_t shown_other = 4;
  double ctr_match = 0.30;
  double ctr_same_department = 0.03;
  double ctr_other = 0.005;
  std::uint64_t click_threshold = 3;
  std::uint64_t impression_floor = 20;
  double ctr_ceiling = 0.02;
  double hard_fraction = 0.5;
  std::size_t n_triplets = 20000;
  std::size_t general_pairs = 20000;
  std::size_t sem_pairs = 20000;
  std::size_t organic_pairs = 40000;
  std::size_t ads_pairs = 40000;
  std::size_t pretrain_per_task = 20000;
  std::size_t feedback_queries_per_domain = 40;
};

std::vector<Product> generate_catalog(std::uint64_t seed, std::size_t n_products,
                                      std::size_t n_departments, std::size_t n_product_types);
std::vector<Product> generate_catalog(const Taxonomy& taxonomy, std::uint64_t seed,
                                      std::size_t n_products, double confuser_rate = 0.0);

std::vector<Query> generate_queries(const Taxonomy& taxonomy, std::uint64_t seed,
                                    std::size_t n_queries, double head_share, double torso_share);

/// Whether a query belongs to the held-out (evaluation / feedback) split.
bool is_heldout(const Query& q, std::uint64_t seed, double holdout_fraction);

struct ClickModel {
  std::size_t shown_same_type = 8;
  std::size_t shown_same_department = 10;
  std::size_t shown_other = 4;
  double ctr_match = 0.30;
  double ctr_same_department = 0.03;
  double ctr_other = 0.005;
  double head_traffic = 0.7;
  double torso_traffic = 0.2;
};

/// Aggregated (query, product) impression/click rows, sorted by (query_id, product_id).
std::vector<InteractionEvent> generate_click_log(const Taxonomy& taxonomy,
                                                 const std::vector<Product>& catalog,
                                                 const std::vector<Query>& queries,
                                                 std::uint64_t seed, std::size_t n_events,
                                                 const ClickModel& model = {});

/// Grade from engagement: clicks >= threshold -> 2, 1..threshold-1 -> 1, 0 -> none.
std::optional<int> pseudo_grade(const InteractionEvent& e, std::uint64_t click_threshold);

std::vector<LabeledPair> pseudo_label(const std::vector<InteractionEvent>& events,
                                      const std::vector<Product>& catalog,
                                      const std::vector<Query>& queries,
                                      std::uint64_t click_threshold);

struct MiningConfig {
  std::uint64_t impression_floor = 20;
  double ctr_ceiling = 0.02;
  std::uint64_t click_threshold = 3;
  double hard_fraction = 0.5;
  std::size_t n_triplets = 20000;
  std::uint64_t seed = 7;
};

bool is_hard_negative(const InteractionEvent& e, std::uint64_t impression_floor, double ctr_ceiling);

std::vector<TrainingTriplet> mine_negatives(const std::vector<InteractionEvent>& events,
                                            const std::vector<Product>& catalog,
                                            const std::vector<Query>& queries,
                                            const MiningConfig& cfg);

/// Ground-truth relevance: same type -> 2, same department -> 1, otherwise 0.
int truth_grade(const Taxonomy& taxonomy, std::string_view intended_type, const Product& p);

using DomainDatasets = std::map<Domain, std::vector<LabeledPair>>;

struct PretrainPair {
  std::string text;
  std::string label;
  std::size_t label_index = 0;
};

struct PretrainSet {
  std::vector<std::string> department_labels;
  std::vector<std::string> product_type_labels;
  std::vector<PretrainPair> department;
  std::vector<PretrainPair> product_type;
};

PretrainSet build_pretrain_pairs(const Taxonomy& taxonomy, const std::vector<Product>& catalog,
                                 const std::vector<Query>& queries, std::size_t n_per_task,
                                 std::uint64_t seed);

/// A held-out query with a graded candidate pool; the unit of fusion feedback.
struct FeedbackCandidate {
  std::uint64_t item_id = 0;
  std::string text;
  int grade = 0;
};

struct FeedbackQuery {
  std::uint64_t query_id = 0;
  Domain domain = Domain::organic;
  std::string query_text;
  std::vector<FeedbackCandidate> candidates;
};

using FeedbackPools = std::map<Domain, std::vector<FeedbackQuery>>;

/// Everything generated for one seed and config.
struct World {
  CorpusConfig config;
  Taxonomy taxonomy;
  std::vector<Product> catalog;
  std::vector<Query> queries;
  std::vector<Query> train_queries;
  std::vector<Query> heldout_queries;
  std::vector<InteractionEvent> events;

  const Product& product(std::uint64_t id) const;
  const Query& query(std::uint64_t id) const;

  std::unordered_map<std::uint64_t, std::size_t> product_index;
  std::unordered_map<std::uint64_t, std::size_t> query_index;
};

World generate_world(const CorpusConfig& config);

DomainDatasets build_domain_datasets(const World& world);
std::vector<TrainingTriplet> build_triplets(const World& world);
PretrainSet build_pretrain_pairs(const World& world);
FeedbackPools build_feedback_pools(const World& world);

}  // namespace semret::corpus

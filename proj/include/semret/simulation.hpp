#pragma once

// Offline retrieval simulation: sample evaluation queries by traffic segment,
// retrieve k items per query from an index snapshot, join relevance judgments
// and report mean NDCG / IAR at several cutoffs.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "semret/corpus.hpp"
#include "semret/encoder.hpp"
#include "semret/index.hpp"

namespace semret::metrics {

struct Judgment {
  std::uint64_t query_id = 0;
  std::uint64_t item_id = 0;
  int grade = 0;
  std::string source;  // "oracle", "human", ...

  bool operator==(const Judgment&) const = default;
};

void to_json(nlohmann::json& j, const Judgment& x);
void from_json(const nlohmann::json& j, Judgment& x);

/// Grade lookup keyed by (query_id, item_id). The first judgment for a key wins.
class Judgments {
 public:
  /// Returns false when the key already had a grade.
  bool add(const Judgment& j);
  std::optional<int> grade(std::uint64_t query_id, std::uint64_t item_id) const;
  std::size_t size() const { return grades_.size(); }

 private:
  std::map<std::pair<std::uint64_t, std::uint64_t>, int> grades_;
};

/// JSONL {query_id, item_id, grade, source}; throws on grades outside {0,1,2}.
std::vector<Judgment> read_judgments(const std::filesystem::path& path);
void write_judgments(const std::filesystem::path& path, std::span<const Judgment> rows);
Judgments index_judgments(std::span<const Judgment> rows);

struct EvalQuery {
  std::uint64_t id = 0;
  std::string text;
  corpus::Segment segment = corpus::Segment::tail;
  std::string intended_product_type;
};

/// Up to n queries, allocated to segments in proportion to their share of the
/// pool (largest remainder) and drawn deterministically within each segment.
/// Returned in ascending id order.
std::vector<EvalQuery> sample_eval_queries(const std::vector<corpus::Query>& pool, std::size_t n,
                                           std::uint64_t seed);

/// Ground-truth judgments of every catalog item for every evaluation query.
std::vector<Judgment> oracle_judgments(const corpus::Taxonomy& taxonomy,
                                       const std::vector<corpus::Product>& catalog,
                                       std::span<const EvalQuery> queries);

struct SimulationConfig {
  std::size_t k = 20;
  std::size_t ef_search = 64;
  std::vector<std::size_t> cutoffs{5, 10, 20};
};

struct CutoffMetrics {
  std::size_t cutoff = 0;
  double ndcg = 0.0;
  double iar = 0.0;
};

struct SegmentMetrics {
  corpus::Segment segment = corpus::Segment::tail;
  std::size_t query_count = 0;
  std::vector<CutoffMetrics> metrics;
};

struct MetricReport {
  std::string model_id;
  std::size_t query_count = 0;
  std::size_t retrieved = 0;
  std::size_t assumed_grades = 0;  // retrieved items without a judgment, scored 0
  std::vector<CutoffMetrics> overall;
  std::vector<SegmentMetrics> segments;

  double ndcg(std::size_t cutoff) const;
  double iar(std::size_t cutoff) const;
};

class ModelVersionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws ModelVersionMismatch when the model and the snapshot disagree.
MetricReport simulate_offline(const encoder::TextEmbedder& model,
                              const index::IndexSnapshot& snapshot,
                              std::span<const EvalQuery> queries, const Judgments& judgments,
                              const SimulationConfig& cfg = {});

nlohmann::json to_json(const MetricReport& r);

/// (value - baseline) / baseline; 0 when the baseline is 0.
double relative_change(double value, double baseline);

/// One row per model: absolute NDCG/IAR per cutoff followed by the relative
/// change against `rows[baseline]`.
std::string comparison_csv(std::span<const MetricReport> rows, std::size_t baseline);

}  // namespace semret::metrics

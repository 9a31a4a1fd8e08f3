#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "../common/oracles.hpp"
#include "../common/small_world.hpp"
#include "semret/simulation.hpp"

using namespace semret;
using namespace semret::metrics;

namespace {

/// Looks texts up in a fixed table; unknown text maps to the first axis.
class TableEmbedder final : public encoder::TextEmbedder {
 public:
  explicit TableEmbedder(std::map<std::string, std::vector<float>> t, std::string version = "table-1")
      : table_(std::move(t)), version_(std::move(version)) {}
  std::vector<float> embed_query(std::string_view text) const override { return lookup(text); }
  std::vector<float> embed_item(std::string_view text) const override { return lookup(text); }
  std::uint32_t dim() const override { return 2; }
  const std::string& model_version() const override { return version_; }

 private:
  std::vector<float> lookup(std::string_view text) const {
    auto it = table_.find(std::string(text));
    return it == table_.end() ? std::vector<float>{1, 0} : it->second;
  }
  std::map<std::string, std::vector<float>> table_;
  std::string version_;
};

std::shared_ptr<const index::IndexSnapshot> three_items(const std::string& version = "table-1") {
  return index::IndexSnapshot::build({{1, {1, 0}, version}, {2, {0.8f, 0.6f}, version}, {3, {0, 1}, version}}, {}, 1);
}

}  // namespace

TEST(Judgments, FirstWins) {
  Judgments j;
  EXPECT_TRUE(j.add({1, 2, 2, "oracle"}));
  EXPECT_FALSE(j.add({1, 2, 0, "human"}));
  EXPECT_EQ(j.grade(1, 2), 2);
  EXPECT_EQ(j.grade(2, 1), std::nullopt);
}

TEST(Judgments, JsonlRoundTripAndValidation) {
  const auto path = std::filesystem::temp_directory_path() / "semret_judgments_test.jsonl";
  const std::vector<Judgment> rows{{1, 2, 0, "oracle"}, {3, 4, 2, "human"}};
  write_judgments(path, rows);
  EXPECT_EQ(read_judgments(path), rows);
  std::ofstream(path) << R"({"query_id":1,"item_id":2,"grade":3,"source":"human"})" << '\n';
  EXPECT_THROW(read_judgments(path), std::invalid_argument);
  std::filesystem::remove(path);
}

TEST(SampleEvalQueries, StratifiedAndDeterministic) {
  const auto& w = fixture::small_world();
  const auto a = sample_eval_queries(w.heldout_queries, 40, 3);
  EXPECT_EQ(a.size(), 40u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), [](auto& x, auto& y) { return x.id < y.id; }));
  std::map<corpus::Segment, double> pool, got;
  for (const auto& q : w.heldout_queries) pool[q.segment] += 1;
  for (const auto& q : a) got[q.segment] += 1;
  for (const auto& [seg, n] : pool)
    EXPECT_NEAR(got[seg], 40.0 * n / static_cast<double>(w.heldout_queries.size()), 1.0);
  const auto b = sample_eval_queries(w.heldout_queries, 40, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
  EXPECT_EQ(sample_eval_queries(w.heldout_queries, 100000, 3).size(), w.heldout_queries.size());
}

TEST(Simulation, ComputesMetricsAgainstOracle) {
  TableEmbedder model({{"q", {1, 0}}});
  const auto snap = three_items();
  const std::vector<EvalQuery> qs{{10, "q", corpus::Segment::head, "t"}};
  Judgments j;
  j.add({10, 1, 2, "oracle"});
  j.add({10, 2, 0, "oracle"});
  SimulationConfig cfg;
  cfg.k = 3;
  cfg.cutoffs = {1, 2, 3};
  const auto rep = simulate_offline(model, *snap, qs, j, cfg);
  EXPECT_EQ(rep.assumed_grades, 1u);
  EXPECT_EQ(rep.retrieved, 3u);
  const std::vector<int> grades{2, 0, 0};
  for (std::size_t c : {1u, 2u, 3u}) {
    EXPECT_NEAR(rep.ndcg(c), oracle::ndcg_by_permutation(grades, c), 1e-12);
    EXPECT_NEAR(rep.iar(c), oracle::iar(grades, c), 1e-12);
  }
  ASSERT_EQ(rep.segments.size(), 1u);
  EXPECT_EQ(rep.segments[0].segment, corpus::Segment::head);
  EXPECT_THROW(rep.ndcg(7), std::out_of_range);
}

TEST(Simulation, GradeSourceDoesNotMatter) {
  TableEmbedder model({{"a", {1, 0}}, {"b", {0, 1}}});
  const auto snap = three_items();
  const std::vector<EvalQuery> qs{{1, "a", corpus::Segment::head, ""}, {2, "b", corpus::Segment::tail, ""}};
  Judgments oracle_j, human_j;
  for (std::uint64_t q : {1, 2})
    for (std::uint64_t i : {1, 2, 3}) {
      const int g = static_cast<int>((q + i) % 3);
      oracle_j.add({q, i, g, "oracle"});
      human_j.add({q, i, g, "human"});
    }
  EXPECT_EQ(to_json(simulate_offline(model, *snap, qs, oracle_j)), to_json(simulate_offline(model, *snap, qs, human_j)));
}

TEST(Simulation, RejectsModelMismatch) {
  TableEmbedder model({}, "other");
  const std::vector<EvalQuery> qs{{1, "a", corpus::Segment::head, ""}};
  EXPECT_THROW(simulate_offline(model, *three_items(), qs, Judgments{}), ModelVersionMismatch);
}

TEST(Simulation, ComparisonCsv) {
  MetricReport a, b;
  a.model_id = "base";
  a.overall = {{5, 0.5, 0.4}};
  b.model_id = "new";
  b.overall = {{5, 0.6, 0.2}};
  const std::vector<MetricReport> rows{a, b};
  const auto csv = comparison_csv(rows, 0);
  EXPECT_EQ(csv,
            "model,ndcg@5,iar@5,ndcg@5_rel,iar@5_rel\n"
            "base,0.500000,0.400000,0.000000,0.000000\n"
            "new,0.600000,0.200000,0.200000,-0.500000\n");
  EXPECT_EQ(relative_change(1.0, 0.0), 0.0);
  EXPECT_THROW(comparison_csv(rows, 2), std::out_of_range);
}

TEST(Simulation, OracleJudgmentsCoverCatalog) {
  const auto& w = fixture::small_world();
  const auto qs = sample_eval_queries(w.heldout_queries, 5, 1);
  const auto js = oracle_judgments(w.taxonomy, w.catalog, qs);
  EXPECT_EQ(js.size(), qs.size() * w.catalog.size());
  for (const auto& j : js) EXPECT_EQ(j.source, "oracle");
}

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "../common/oracles.hpp"
#include "semret/embedding_io.hpp"
#include "semret/index.hpp"

using namespace semret::index;

namespace {

std::vector<EmbeddingRecord> records_from(const std::vector<std::vector<float>>& vecs, std::uint64_t first_id = 0,
                                          const std::string& version = "m1") {
  std::vector<EmbeddingRecord> out;
  for (std::size_t i = 0; i < vecs.size(); ++i) out.push_back({first_id + i, vecs[i], version});
  return out;
}

std::vector<std::uint64_t> ids_of(const std::vector<SearchHit>& hits) {
  std::vector<std::uint64_t> out;
  for (const auto& h : hits) out.push_back(h.id);
  return out;
}

double recall_at(const IndexSnapshot& s, const std::vector<std::vector<float>>& vecs,
                 const std::vector<std::vector<float>>& queries, std::size_t k, std::size_t ef) {
  std::vector<std::uint64_t> ids(vecs.size());
  std::iota(ids.begin(), ids.end(), 0);
  double hits = 0;
  for (const auto& q : queries) {
    std::set<std::uint64_t> truth;
    for (const auto& [id, score] : oracle::exact_topk(vecs, ids, q, k)) truth.insert(id);
    for (const auto& h : s.search_ann(q, k, ef)) hits += truth.contains(h.id);
  }
  return hits / static_cast<double>(queries.size() * k);
}

}  // namespace

TEST(Hnsw, ParamsValidate) {
  HnswParams p;
  p.validate();
  p.M = 1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Snapshot, ExactSearchMatchesOracle) {
  const auto vecs = oracle::isotropic_unit_vectors(500, 16, 1);
  auto s = IndexSnapshot::build(records_from(vecs), {}, 1);
  std::vector<std::uint64_t> ids(vecs.size());
  std::iota(ids.begin(), ids.end(), 0);
  for (const auto& q : oracle::isotropic_unit_vectors(20, 16, 2)) {
    const auto hits = s->search_exact(q, 10);
    const auto truth = oracle::exact_topk(vecs, ids, q, 10);
    ASSERT_EQ(hits.size(), truth.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
      EXPECT_EQ(hits[i].id, truth[i].first);
      EXPECT_NEAR(hits[i].score, truth[i].second, 1e-5);
    }
  }
}

TEST(Snapshot, TiesBreakByAscendingId) {
  std::vector<float> v{1, 0, 0};
  std::vector<EmbeddingRecord> rs{{9, v, "m"}, {3, v, "m"}, {5, v, "m"}, {4, {0, 1, 0}, "m"}};
  auto s = IndexSnapshot::build(rs, {}, 1);
  EXPECT_EQ(ids_of(s->search_exact(v, 3)), (std::vector<std::uint64_t>{3, 5, 9}));
  EXPECT_EQ(ids_of(s->search_ann(v, 3, 10)), (std::vector<std::uint64_t>{3, 5, 9}));
}

TEST(Snapshot, AnnRecallOnClusteredData) {
  const auto vecs = oracle::clustered_unit_vectors(3000, 32, 100, 0.1, 3);
  auto s = IndexSnapshot::build(records_from(vecs), {}, 1);
  const auto queries = oracle::clustered_unit_vectors(100, 32, 100, 0.1, 3);
  EXPECT_GE(recall_at(*s, vecs, queries, 10, 64), 0.95);
}

TEST(Snapshot, AnnSmallIndexIsExact) {
  const auto vecs = oracle::isotropic_unit_vectors(50, 8, 4);
  auto s = IndexSnapshot::build(records_from(vecs), {}, 1);
  for (const auto& q : oracle::isotropic_unit_vectors(10, 8, 5))
    EXPECT_EQ(ids_of(s->search_ann(q, 10, 64)), ids_of(s->search_exact(q, 10)));
}

TEST(Snapshot, ReturnsAtMostSizeAndRejectsSmallEf) {
  const auto vecs = oracle::isotropic_unit_vectors(5, 4, 6);
  auto s = IndexSnapshot::build(records_from(vecs), {}, 1);
  EXPECT_EQ(s->search_ann(vecs[0], 10, 64).size(), 5u);
  EXPECT_THROW(s->search_ann(vecs[0], 10, 5), std::invalid_argument);
  EXPECT_THROW(s->search_exact(std::vector<float>{1, 0}, 1), std::invalid_argument);
}

TEST(Snapshot, GraphIsDeterministic) {
  const auto vecs = oracle::isotropic_unit_vectors(300, 8, 7);
  auto a = IndexSnapshot::build(records_from(vecs), {}, 1);
  auto b = IndexSnapshot::build(records_from(vecs), {}, 1);
  EXPECT_EQ(a->graph().max_level(), b->graph().max_level());
  for (std::uint32_t n = 0; n < 300; ++n) EXPECT_EQ(a->graph().links(n, 0), b->graph().links(n, 0));
}

TEST(Snapshot, DegreeBounded) {
  const auto vecs = oracle::isotropic_unit_vectors(1000, 8, 8);
  HnswParams p;
  p.M = 4;
  auto s = IndexSnapshot::build(records_from(vecs), p, 1);
  for (std::uint32_t n = 0; n < 1000; ++n) EXPECT_LE(s->graph().links(n, 0).size(), 8u);
}

TEST(Ingest, ValidatesRecords) {
  EXPECT_FALSE(validate_record({1, {1, 0}, "m"}, 2));
  EXPECT_TRUE(validate_record({1, {1, 0, 0}, "m"}, 2));
  EXPECT_TRUE(validate_record({1, {0.5f, 0.5f}, "m"}, 2));
  EXPECT_TRUE(validate_record({1, {std::nanf(""), 1}, "m"}, 2));
}

TEST(Ingest, RejectsBadRecordsAcceptsTheRest) {
  std::vector<EmbeddingRecord> batch{{1, {1, 0}, "m"}, {2, {2, 0}, "m"}, {1, {0, 1}, "m"}, {3, {0, 1}, "m"}};
  const auto res = ingest(batch, IndexSnapshot::empty());
  EXPECT_EQ(res.report.accepted, 2u);
  EXPECT_EQ(res.report.rejected_ids, (std::vector<std::uint64_t>{2, 1}));
  EXPECT_EQ(res.snapshot->size(), 2u);
  EXPECT_EQ(res.snapshot->version(), 1u);
  EXPECT_EQ(res.snapshot->model_version(), "m");
}

TEST(Ingest, MixedOrMismatchedVersionsRefuseTheBatch) {
  std::vector<EmbeddingRecord> mixed{{1, {1, 0}, "a"}, {2, {0, 1}, "b"}};
  EXPECT_THROW(ingest(mixed, IndexSnapshot::empty()), IngestError);
  const auto first = ingest(std::vector<EmbeddingRecord>{{1, {1, 0}, "a"}}, IndexSnapshot::empty());
  EXPECT_THROW(ingest(std::vector<EmbeddingRecord>{{2, {0, 1}, "b"}}, first.snapshot), IngestError);
}

TEST(Ingest, IncrementalMatchesBulkBuild) {
  const auto vecs = oracle::isotropic_unit_vectors(400, 8, 9);
  const auto all = records_from(vecs);
  auto cur = IndexSnapshot::empty();
  for (std::size_t i = 0; i < all.size(); i += 100)
    cur = ingest(std::span(all).subspan(i, 100), cur).snapshot;
  EXPECT_EQ(cur->version(), 4u);
  EXPECT_EQ(cur->size(), 400u);
  for (const auto& q : oracle::isotropic_unit_vectors(10, 8, 10))
    EXPECT_EQ(ids_of(cur->search_exact(q, 5)), ids_of(IndexSnapshot::build(all, {}, 1)->search_exact(q, 5)));
}

TEST(Ingest, OverwriteReplacesVectorAndLeavesOldSnapshotIntact) {
  auto first = ingest(std::vector<EmbeddingRecord>{{1, {1, 0}, "m"}, {2, {0.6f, 0.8f}, "m"}}, IndexSnapshot::empty()).snapshot;
  const auto second = ingest(std::vector<EmbeddingRecord>{{1, {0, -1}, "m"}}, first);
  EXPECT_EQ(second.report.overwritten, 1u);
  EXPECT_EQ(second.snapshot->size(), 2u);
  const std::vector<float> q{1, 0};
  EXPECT_EQ(first->search_exact(q, 1)[0].id, 1u);
  EXPECT_EQ(second.snapshot->search_exact(q, 1)[0].id, 2u);
  EXPECT_EQ(second.snapshot->search_ann(q, 2, 10).back().id, 1u);
}

TEST(SnapshotStore, ReadersSeeOneVersionPerSearch) {
  const auto vecs = oracle::isotropic_unit_vectors(2000, 8, 11);
  const auto all = records_from(vecs);
  SnapshotStore store(IndexSnapshot::empty());
  store.ingest_and_publish(std::span(all).first(500));
  std::atomic<bool> stop{false};
  std::atomic<int> bad{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 3; ++t)
    readers.emplace_back([&] {
      std::uint64_t last = 0;
      while (!stop) {
        const auto s = store.current();
        if (s->version() < last || s->size() != 500 * s->version()) ++bad;
        last = s->version();
        if (s->search_ann(vecs[0], 5).size() != 5) ++bad;
      }
    });
  for (std::size_t i = 500; i < all.size(); i += 500) store.ingest_and_publish(std::span(all).subspan(i, 500));
  stop = true;
  for (auto& r : readers) r.join();
  EXPECT_EQ(bad.load(), 0);
  EXPECT_EQ(store.current()->version(), 4u);
}

TEST(EmbeddingIo, RoundTrip) {
  const auto recs = records_from(oracle::isotropic_unit_vectors(20, 6, 12), 100, "STWR-abc");
  std::stringstream buf;
  write_embeddings(buf, 6, recs, "STWR-abc");
  const auto back = read_embeddings(buf);
  EXPECT_EQ(back.dim, 6u);
  EXPECT_EQ(back.model_version, "STWR-abc");
  EXPECT_EQ(back.records, recs);
}

TEST(EmbeddingIo, RejectsGarbage) {
  std::stringstream buf("NOPE and more bytes");
  EXPECT_THROW(read_embeddings(buf), std::runtime_error);
}

TEST(EmbeddingIo, SnapshotRoundTripKeepsVersionAndParams) {
  const auto dir = std::filesystem::temp_directory_path() / "semret_index_test";
  std::filesystem::create_directories(dir);
  HnswParams p;
  p.M = 8;
  auto s = IndexSnapshot::build(records_from(oracle::isotropic_unit_vectors(100, 6, 13), 0, "v"), p, 7);
  save_snapshot(dir / "idx.emb", *s);
  const auto back = load_snapshot(dir / "idx.emb");
  EXPECT_EQ(back->version(), 7u);
  EXPECT_EQ(back->params(), p);
  EXPECT_EQ(back->model_version(), "v");
  const auto q = oracle::isotropic_unit_vectors(1, 6, 14)[0];
  EXPECT_EQ(back->search_ann(q, 5), s->search_ann(q, 5));
  std::filesystem::remove_all(dir);
}

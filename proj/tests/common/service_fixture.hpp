#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <unistd.h>

#include "small_world.hpp"
#include "semret/pipeline.hpp"
#include "semret/service.hpp"

namespace fixture {

/// A small world served by a randomly initialized encoder, plus a labeling
/// backend writing to a fresh temporary judgments file.
struct ServiceFixture {
  const semret::corpus::World& world = small_world();
  std::shared_ptr<const semret::corpus::FeedbackPools> pools;
  std::shared_ptr<const semret::encoder::SiameseEmbedder> model;
  std::shared_ptr<semret::index::SnapshotStore> store;
  std::shared_ptr<semret::service::RetrievalService> retrieval;
  std::filesystem::path judgments;
  std::shared_ptr<semret::service::LabelingQueue> queue;
  std::shared_ptr<semret::fusion::WeightsBoard> board;
  std::shared_ptr<semret::service::HitlBackend> hitl;
  std::shared_ptr<semret::service::ApiHandler> api;

  explicit ServiceFixture(semret::service::ServiceConfig cfg = {}) {
    using namespace semret;
    static std::atomic<int> counter{0};
    pools = std::make_shared<const corpus::FeedbackPools>(corpus::build_feedback_pools(world));
    model = std::make_shared<const encoder::SiameseEmbedder>(
        std::make_shared<const encoder::EncoderParams>(encoder::EncoderParams::init_random({4096, 32, 32}, 21)));
    store = std::make_shared<index::SnapshotStore>(index::IndexSnapshot::empty());
    const auto entities = pipeline::catalog_entities(world.catalog);
    store->ingest_and_publish(pipeline::embed_all(entities, *model));
    retrieval = std::make_shared<service::RetrievalService>(model, store, cfg);
    service::TitleMap titles;
    for (const auto& p : world.catalog) titles[p.id] = p.title;
    retrieval->set_titles(std::move(titles));
    judgments = std::filesystem::temp_directory_path() /
                ("semret_judgments_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".jsonl");
    std::filesystem::remove(judgments);
    queue = std::make_shared<service::LabelingQueue>(judgments);
    board = std::make_shared<fusion::WeightsBoard>();
    hitl = std::make_shared<service::HitlBackend>(pools, queue, board);
    api = std::make_shared<service::ApiHandler>(retrieval, hitl);
  }
  ~ServiceFixture() { std::filesystem::remove(judgments); }

  std::vector<semret::service::LabelingTask> enqueue_all(std::size_t per_domain = 5, std::size_t k = 10,
                                                         std::size_t round = 0) {
    return hitl->enqueue_labeling_round(semret::corpus::kAllDomains, semret::service::rank_with_embedder(*model),
                                        per_domain, k, store->current()->version(), round);
  }
};

}  // namespace fixture

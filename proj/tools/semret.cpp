// Command-line entry points for every pipeline stage.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "semret/checkpoint.hpp"
#include "semret/config.hpp"
#include "semret/corpus_io.hpp"
#include "semret/embedding_io.hpp"
#include "semret/experiment.hpp"
#include "semret/http_api.hpp"
#include "semret/pipeline.hpp"
#include "semret/service.hpp"
#include "semret/simulation.hpp"
#include "semret/training.hpp"

namespace {

using namespace semret;
using nlohmann::json;

struct Common {
  std::string config;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--set", c.sets, "override a config key, e.g. --set lr=0.002 or --set hnsw.M=32")
      ->take_all();
}

json resolved(const Common& c) { return config::resolve(c.config, c.sets); }

std::shared_ptr<const encoder::TextEmbedder> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[4] = {};
  in.read(magic, 4);
  in.seekg(0);
  if (std::string(magic, 4) == "DSSM")
    return std::make_shared<encoder::DssmEmbedder>(
        std::make_shared<encoder::DssmParams>(checkpoint::read_dssm(in)));
  return std::make_shared<encoder::SiameseEmbedder>(
      std::make_shared<encoder::EncoderParams>(checkpoint::read_encoder(in)));
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

int gen_corpus(const Common& c, const std::string& out) {
  const auto cfg = corpus::corpus_config_from_json(resolved(c));
  const auto world = corpus::generate_world(cfg);
  const auto datasets = corpus::build_domain_datasets(world);
  const auto triplets = corpus::build_triplets(world);
  corpus::write_corpus(out, world, datasets, triplets);
  std::cout << "wrote " << world.catalog.size() << " products, " << world.queries.size() << " queries, "
            << world.events.size() << " event rows, " << triplets.size() << " triplets to " << out << '\n';
  return 0;
}

training::AdamConfig adam_with_lr(double lr) {
  training::AdamConfig a;
  a.lr = lr;
  return a;
}

int pretrain(const Common& c) {
  auto s = config::training_settings(resolved(c));
  const auto files = corpus::load_corpus(s.corpus_dir);
  const auto data = training::tokenize_pretrain(corpus::build_pretrain_pairs(files.world), s.shape.vocab);
  training::PretrainConfig pc;
  pc.epochs = s.epochs;
  pc.batch_size = s.batch_size;
  pc.adam = adam_with_lr(s.lr);
  pc.seed = s.seed;
  auto init = s.checkpoint_in.empty() ? encoder::EncoderParams::init_random(s.shape, s.init_seed)
                                      : checkpoint::load_encoder(s.checkpoint_in);
  const auto res = training::pretrain(std::move(init), data, pc);
  checkpoint::save(s.checkpoint_out, res.params);
  if (!s.telemetry_out.empty()) {
    std::ofstream out(s.telemetry_out, std::ios::trunc);
    for (std::size_t e = 0; e < res.epochs.size(); ++e)
      out << json{{"epoch", e}, {"department", res.epochs[e].department},
                  {"product_type", res.epochs[e].product_type}}.dump()
          << '\n';
  }
  for (std::size_t e = 0; e < res.epochs.size(); ++e)
    std::cout << "epoch " << e << " cross-entropy " << res.epochs[e].total() << '\n';
  std::cout << "department accuracy "
            << training::classification_accuracy(res.params, res.department_head, data.department)
            << ", product_type accuracy "
            << training::classification_accuracy(res.params, res.product_type_head, data.product_type) << '\n'
            << "saved " << s.checkpoint_out << " (" << checkpoint::digest(checkpoint::quantized(res.params)) << ")\n";
  return 0;
}

void report_rounds(const fusion::ScheduleResult& sched) {
  for (const auto& r : sched.reports)
    std::cout << "round " << r.round << ' ' << corpus::to_string(r.domain) << " x=" << r.x << " w=" << r.w
              << " p=" << r.p << " batches=" << r.batches_drawn << (r.stale ? " stale" : "")
              << (r.fell_back ? " oracle-fallback" : "") << '\n';
}

int train_siamese(const config::TrainingSettings& s, fusion::FeedbackProvider& feedback,
                  const corpus::CorpusFiles& files, fusion::WeightsBoard* board) {
  auto init = s.checkpoint_in.empty() ? encoder::EncoderParams::init_random(s.shape, s.init_seed)
                                      : checkpoint::load_encoder(s.checkpoint_in);
  if (s.checkpoint_in.empty()) std::clog << "no checkpoint_in: stage 2 starts from random weights\n";
  const auto triplets = s.easy_negatives_only ? experiment::easy_triplets(files.world) : files.triplets;
  auto data = training::tokenize_stage2(files.datasets, triplets, init.shape.vocab);
  training::Stage2Config sc;
  sc.triplet.margin = s.margin;
  sc.adam = adam_with_lr(s.lr);
  sc.in_batch_negatives = s.in_batch_negatives;
  sc.rescale_projection = s.rescale_projection;
  sc.seed = s.seed;
  const auto source = s.feedback == "human" ? fusion::FeedbackSource::human : fusion::FeedbackSource::oracle;
  const auto schedule = fusion::FusionSchedule::progressive(s.schedule, s.batch_size, source);
  const auto res = training::train_stage2(std::move(init), std::move(data), schedule, feedback, sc, board);
  checkpoint::save(s.checkpoint_out, res.params);
  if (!s.telemetry_out.empty()) training::write_telemetry(s.telemetry_out, res.telemetry);
  if (!s.round_report_out.empty()) fusion::write_round_reports(s.round_report_out, res.schedule.reports);
  report_rounds(res.schedule);
  std::cout << "saved " << s.checkpoint_out << " (" << checkpoint::digest(checkpoint::quantized(res.params)) << ")\n";
  return 0;
}

int train(const Common& c) {
  const auto s = config::training_settings(resolved(c));
  const auto files = corpus::load_corpus(s.corpus_dir);
  if (s.stage == config::Stage::pretrain) return pretrain(c);
  if (s.stage == config::Stage::dssm) {
    const auto data = training::dssm_examples(files.datasets.at(corpus::Domain::ads), files.world.catalog,
                                              s.dssm_negatives, s.shape.vocab, s.seed);
    training::DssmTrainConfig tc;
    tc.steps = 0;
    for (auto b : s.schedule) tc.steps += b;
    tc.batch_size = s.batch_size;
    tc.adam = adam_with_lr(s.lr);
    tc.seed = s.seed;
    const auto res = training::train_dssm(encoder::DssmParams::init_random(s.shape, s.init_seed), data, tc);
    checkpoint::save(s.checkpoint_out, res.params);
    std::cout << "dssm loss " << res.step_loss.front() << " -> " << res.step_loss.back() << "\nsaved "
              << s.checkpoint_out << '\n';
    return 0;
  }
  if (s.feedback == "human") throw config::ConfigError("human feedback runs through the hitl-round verb");
  fusion::OracleFeedback feedback(
      std::make_shared<const corpus::FeedbackPools>(corpus::build_feedback_pools(files.world)));
  return train_siamese(s, feedback, files, nullptr);
}

int ingest(const Common& c) {
  const auto s = config::ingest_settings(resolved(c));
  const auto model = load_model(s.checkpoint);
  const auto files = corpus::load_corpus(s.corpus_dir);
  auto store = std::make_shared<index::SnapshotStore>(
      s.snapshot_in.empty() ? index::IndexSnapshot::empty(s.hnsw) : index::load_snapshot(s.snapshot_in));
  std::size_t rejected = 0;
  const auto entities = pipeline::catalog_entities(files.world.catalog);
  const auto rep = pipeline::embedding_generation_pipeline(
      entities, *model, s.batch_size, [&](std::vector<index::EmbeddingRecord>&& batch) {
        rejected += store->ingest_and_publish(batch).rejected_ids.size();
      });
  const auto snap = store->current();
  index::save_snapshot(s.snapshot_out, *snap);
  std::cout << "embedded " << rep.embedded << " items in " << rep.batches << " batches, skipped "
            << rep.skipped.size() << ", rejected " << rejected << "; snapshot v" << snap->version() << " with "
            << snap->size() << " records (" << snap->model_version() << ") -> " << s.snapshot_out << '\n';
  return 0;
}

int evaluate(const Common& c) {
  const auto s = config::evaluate_settings(resolved(c));
  const auto model = load_model(s.checkpoint);
  const auto snapshot = index::load_snapshot(s.snapshot);
  const auto files = corpus::load_corpus(s.corpus_dir);
  const auto pools = corpus::build_feedback_pools(files.world);
  const auto queries = experiment::heldout_eval_queries(files.world, pools, s.queries, s.seed);
  std::vector<metrics::Judgment> rows =
      s.judgments.empty() ? metrics::oracle_judgments(files.world.taxonomy, files.world.catalog, queries)
                          : metrics::read_judgments(s.judgments);
  if (!s.judgments_out.empty()) metrics::write_judgments(s.judgments_out, rows);
  metrics::SimulationConfig sc;
  sc.k = s.k;
  sc.ef_search = s.ef_search;
  const auto report = metrics::simulate_offline(*model, *snapshot, queries, metrics::index_judgments(rows), sc);
  const auto j = metrics::to_json(report);
  write_json(s.report_out, j);
  if (!s.csv_out.empty()) {
    std::ofstream out(s.csv_out, std::ios::trunc);
    out << metrics::comparison_csv(std::span(&report, 1), 0);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

struct Serving {
  std::shared_ptr<service::RetrievalService> retrieval;
  std::shared_ptr<service::HitlBackend> hitl;
  std::shared_ptr<index::SnapshotStore> store;
};

Serving make_serving(const config::ServeSettings& s, const corpus::CorpusFiles& files,
                     std::shared_ptr<const encoder::TextEmbedder> model,
                     std::shared_ptr<fusion::WeightsBoard> board) {
  Serving out;
  out.store = std::make_shared<index::SnapshotStore>(
      s.snapshot.empty() ? nullptr : index::load_snapshot(s.snapshot));
  service::ServiceConfig sc;
  sc.score_floor = s.score_floor;
  sc.ef_search = s.ef_search;
  out.retrieval = std::make_shared<service::RetrievalService>(std::move(model), out.store, sc);
  service::TitleMap titles;
  for (const auto& p : files.world.catalog) titles.emplace(p.id, p.title);
  out.retrieval->set_titles(std::move(titles));
  if (s.warm_cache) {
    std::vector<std::string> log;
    for (const auto& q : files.world.queries) log.push_back(q.text);
    out.retrieval->warm_cache(log);
  }
  out.hitl = std::make_shared<service::HitlBackend>(
      std::make_shared<const corpus::FeedbackPools>(corpus::build_feedback_pools(files.world)),
      std::make_shared<service::LabelingQueue>(s.judgments_out), std::move(board));
  return out;
}

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int serve(const Common& c, bool enqueue) {
  const auto j = resolved(c);
  const auto s = config::serve_settings(j);
  const auto files = corpus::load_corpus(s.corpus_dir);
  const auto model = load_model(s.checkpoint);
  auto serving = make_serving(s, files, model, std::make_shared<fusion::WeightsBoard>());
  if (enqueue) {
    const auto snap = serving.store->current();
    const auto tasks = serving.hitl->enqueue_labeling_round(
        corpus::kAllDomains, service::rank_with_embedder(*model), s.per_domain_queries, s.k_per_query,
        snap ? snap->version() : 0, 0);
    std::clog << "opened " << tasks.size() << " labeling tasks\n";
  }
  service::HttpServer server(std::make_shared<service::ApiHandler>(serving.retrieval, serving.hitl));
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::clog << "serving on http://" << s.host << ':' << s.port << '\n';
  server.run(s.host, s.port);
  g_server = nullptr;
  return 0;
}

int hitl_round(const Common& c) {
  const auto j = resolved(c);
  auto t = config::training_settings(j);
  t.feedback = "human";
  const auto s = config::serve_settings(j);
  const auto files = corpus::load_corpus(t.corpus_dir);
  auto board = std::make_shared<fusion::WeightsBoard>();
  // Retrieval serves the frozen checkpoint; labeling ranks with the weights being trained.
  std::shared_ptr<const encoder::TextEmbedder> model =
      t.checkpoint_in.empty()
          ? std::make_shared<encoder::SiameseEmbedder>(std::make_shared<encoder::EncoderParams>(
                checkpoint::quantized(encoder::EncoderParams::init_random(t.shape, t.init_seed))))
          : load_model(t.checkpoint_in);
  auto serving = make_serving(s, files, model, board);
  service::HttpServer server(std::make_shared<service::ApiHandler>(serving.retrieval, serving.hitl));
  const int port = server.start(s.host, s.port);
  std::clog << "labeling API on http://" << s.host << ':' << port << '\n';
  service::HumanFeedbackProvider::Options opts;
  opts.per_domain_queries = s.per_domain_queries;
  opts.k_per_query = s.k_per_query;
  opts.timeout = std::chrono::milliseconds(s.timeout_ms);
  service::HumanFeedbackProvider feedback(*serving.hitl, opts, serving.store);
  const int rc = train_siamese(t, feedback, files, board.get());
  server.stop();
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semret: semantic ads retrieval pipeline"};
  app.require_subcommand(1);

  Common gen, pre, tr, ing, ev, sv, hr;
  std::string corpus_out = "corpus";
  bool enqueue = false;

  auto* g = app.add_subcommand("gen-corpus", "generate the synthetic world and every dataset");
  add_common(g, gen);
  g->add_option("--out", corpus_out, "output directory");
  auto* p = app.add_subcommand("pretrain", "stage-1 classification pretraining");
  add_common(p, pre);
  auto* t = app.add_subcommand("train", "stage-2 training with fusion sampling (or stage=dssm)");
  add_common(t, tr);
  auto* i = app.add_subcommand("ingest", "embed the catalog and build an index snapshot");
  add_common(i, ing);
  auto* e = app.add_subcommand("evaluate", "offline retrieval simulation");
  add_common(e, ev);
  auto* s = app.add_subcommand("serve", "HTTP retrieval and labeling service");
  add_common(s, sv);
  s->add_flag("--enqueue", enqueue, "open one labeling round at startup");
  auto* h = app.add_subcommand("hitl-round", "stage-2 training with human feedback over the HTTP API");
  add_common(h, hr);

  CLI11_PARSE(app, argc, argv);
  try {
    if (g->parsed()) return gen_corpus(gen, corpus_out);
    if (p->parsed()) return pretrain(pre);
    if (t->parsed()) return train(tr);
    if (i->parsed()) return ingest(ing);
    if (e->parsed()) return evaluate(ev);
    if (s->parsed()) return serve(sv, enqueue);
    if (h->parsed()) return hitl_round(hr);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}

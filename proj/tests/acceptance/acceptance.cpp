// One PASS/FAIL line per primary criterion; exit status 1 if any fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "../common/gradcheck.hpp"
#include "../common/oracles.hpp"
#include "semret/experiment.hpp"
#include "semret/fusion.hpp"
#include "semret/metrics.hpp"
#include "semret/pipeline.hpp"
#include "semret/service.hpp"

using namespace semret;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail, Clock::time_point start) {
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << " [" << std::fixed
            << std::setprecision(1) << secs << " s]" << std::endl;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

void weight_values() {
  const auto t0 = Clock::now();
  bool ok = fusion::weight(0.5) == 0.5;
  const double e0 = std::abs(fusion::weight(0.0) - 1.0 / (1.0 + std::exp(-5.0)));
  const double e1 = std::abs(fusion::weight(1.0) - 1.0 / (1.0 + std::exp(5.0)));
  ok = ok && e0 <= 1e-9 && e1 <= 1e-9;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> t(0.0, 0.5);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double x = t(rng);
    worst = std::max(worst, std::abs(fusion::weight(0.5 + x) + fusion::weight(0.5 - x) - 1.0));
  }
  ok = ok && worst <= 1e-12;
  report("logistic weight values", ok,
         "w(0.5)=" + fmt(fusion::weight(0.5), 17) + " |w(0)-ref|=" + fmt(e0) + " |w(1)-ref|=" + fmt(e1) +
             " max symmetry error=" + fmt(worst),
         t0);
}

void ndcg_oracle() {
  const auto t0 = Clock::now();
  std::size_t lists = 0, checks = 0;
  double worst = 0.0;
  bool sorted_ok = true;
  for (std::size_t n = 1; n <= 6; ++n) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code, ++lists) {
      std::vector<int> g(n);
      auto c = code;
      for (std::size_t i = 0; i < n; ++i, c /= 3) g[i] = static_cast<int>(c % 3);
      for (std::size_t p = 1; p <= 6; ++p, ++checks)
        worst = std::max(worst, std::abs(metrics::ndcg(g, p) - oracle::ndcg_by_permutation(g, p)));
      auto s = g;
      std::sort(s.rbegin(), s.rend());
      if (s.front() > 0)
        for (std::size_t p = 1; p <= 6; ++p) sorted_ok = sorted_ok && metrics::ndcg(s, p) == 1.0;
    }
  }
  report("NDCG matches all-permutations oracle", worst <= 1e-12 && sorted_ok,
         std::to_string(lists) + " lists (" + std::to_string(checks) + " list/cutoff pairs), max error " +
             fmt(worst) + ", sorted lists score exactly 1: " + (sorted_ok ? "yes" : "no"),
         t0);
}

void gradient_check() {
  const auto t0 = Clock::now();
  const encoder::EncoderShape shape;  // defaults
  std::mt19937_64 rng(2024);
  const gradcheck::Tolerance tol;
  std::map<std::string, gradcheck::Outcome> per_loss;
  std::size_t head_checked = 0, head_bad = 0;

  for (int e = 0; e < 20; ++e) {
    auto params = encoder::EncoderParams::init_random(shape, 1000 + e);
    training::PairExample pe{gradcheck::random_tokens(rng, shape.vocab, 8),
                             gradcheck::random_tokens(rng, shape.vocab, 8), training::grade_to_target(e % 3)};
    auto pair = [&] {
      return training::pair_loss(encoder::encode(params, pe.query), encoder::encode(params, pe.item), pe.target);
    };
    gradcheck::check(params, training::backward(params, pe), pair, 25, rng, tol, per_loss["pair"]);
  }

  training::TripletConfig tc;
  for (int e = 0, used = 0; used < 20; ++e) {
    auto params = encoder::EncoderParams::init_random(shape, 2000 + e);
    training::TripletExample te{gradcheck::random_tokens(rng, shape.vocab, 8),
                                gradcheck::random_tokens(rng, shape.vocab, 8),
                                gradcheck::random_tokens(rng, shape.vocab, 8)};
    const auto a = encoder::encode(params, te.anchor);
    const double active = (a - encoder::encode(params, te.positive)).norm() -
                          (a - encoder::encode(params, te.negative)).norm() + tc.margin;
    // Examples within 1e-2 of the hinge are skipped; the loss has no derivative there.
    if (active < 1e-2) continue;
    ++used;
    auto trip = [&] {
      return training::triplet_loss(encoder::encode(params, te.anchor), encoder::encode(params, te.positive),
                                    encoder::encode(params, te.negative), tc);
    };
    gradcheck::check(params, training::backward(params, te, tc), trip, 25, rng, tol, per_loss["triplet"]);
  }

  for (int e = 0; e < 20; ++e) {
    auto params = encoder::EncoderParams::init_random(shape, 3000 + e);
    auto head = encoder::ClassificationHead::init_random(encoder::Task::product_type, shape.output, 40, 4000 + e);
    training::ClassificationExample ce{gradcheck::random_tokens(rng, shape.vocab, 8), static_cast<std::size_t>(e % 40)};
    training::GradientSet grad(shape);
    training::HeadGradient hg(head);
    training::accumulate_classification(params, head, ce, grad, hg);
    auto loss = [&] { return training::cross_entropy(encoder::classify(params, head, ce.tokens), ce.label); };
    gradcheck::check(params, grad, loss, 25, rng, tol, per_loss["cross-entropy"]);
    for (int c = 0; c < 25; ++c) {
      const auto i = rng() % static_cast<std::size_t>(head.weights.size());
      const auto j = rng() % static_cast<std::size_t>(head.bias.size());
      const double nw = oracle::central_difference(loss, head.weights.data()[i], tol.h);
      const double nb = oracle::central_difference(loss, head.bias(static_cast<Eigen::Index>(j)), tol.h);
      head_checked += 2;
      head_bad += !oracle::close(hg.weights.data()[i], nw, tol.rel, tol.abs);
      head_bad += !oracle::close(hg.bias(static_cast<Eigen::Index>(j)), nb, tol.rel, tol.abs);
    }
  }

  bool ok = head_bad == 0;
  std::string detail;
  for (const auto& [name, o] : per_loss) {
    ok = ok && o.mismatches.empty();
    detail += name + " " + std::to_string(o.checked - o.mismatches.size()) + "/" + std::to_string(o.checked) + ", ";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, o.mismatches.size()); ++i) {
      const auto& m = o.mismatches[i];
      detail += "[" + m.tensor + " " + fmt(m.analytic) + " vs " + fmt(m.numeric) + "] ";
    }
  }
  detail += "head " + std::to_string(head_checked - head_bad) + "/" + std::to_string(head_checked) +
            " (h=1e-4, rel 1e-4, abs 1e-6)";
  report("analytic gradients match finite differences", ok, detail, t0);
}

double ann_recall(const std::vector<std::vector<float>>& vecs, const std::vector<std::vector<float>>& queries) {
  std::vector<index::EmbeddingRecord> recs;
  for (std::size_t i = 0; i < vecs.size(); ++i) recs.push_back({i, vecs[i], "bench"});
  const auto snap = index::IndexSnapshot::build(std::move(recs), {}, 1);
  double hits = 0;
  for (const auto& q : queries) {
    std::set<std::uint64_t> truth;
    for (const auto& h : snap->search_exact(q, 10)) truth.insert(h.id);
    for (const auto& h : snap->search_ann(q, 10)) hits += truth.contains(h.id);
  }
  return hits / static_cast<double>(queries.size() * 10);
}

void ann_quality() {
  const auto t0 = Clock::now();
  const auto base = oracle::clustered_unit_vectors(11000, 64, 1000, 0.1, 77);
  const std::vector<std::vector<float>> vecs(base.begin(), base.begin() + 10000);
  const std::vector<std::vector<float>> queries(base.begin() + 10000, base.end());
  const double clustered = ann_recall(vecs, queries);
  report("ANN recall@10 >= 0.95 (10k clustered unit vectors, d=64, M=16, efC=200, ef=64, 1000 queries)",
         clustered >= 0.95, "recall@10 = " + fmt(clustered), t0);

  const auto t1 = Clock::now();
  const double iso = ann_recall(oracle::isotropic_unit_vectors(10000, 64, 78),
                                oracle::isotropic_unit_vectors(1000, 64, 79));
  const double secs = std::chrono::duration<double>(Clock::now() - t1).count();
  std::cout << "INFO ANN recall@10 on 10k isotropic unit vectors (same parameters): " << fmt(iso) << " ["
            << std::fixed << std::setprecision(1) << secs << " s]" << std::endl;
}

struct Row {
  std::string name;
  metrics::MetricReport report;
};

void print_table(const std::vector<Row>& rows) {
  std::cout << "\n" << std::left << std::setw(34) << "model" << std::right;
  for (const char* h : {"NDCG@5", "NDCG@10", "NDCG@20", "IAR@5", "IAR@10", "IAR@20"}) std::cout << std::setw(9) << h;
  std::cout << "\n";
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(34) << r.name << std::right << std::fixed << std::setprecision(4);
    for (std::size_t c : {5u, 10u, 20u}) std::cout << std::setw(9) << r.report.ndcg(c);
    for (std::size_t c : {5u, 10u, 20u}) std::cout << std::setw(9) << r.report.iar(c);
    std::cout << "\n";
  }
  std::cout << std::endl;
}

metrics::MetricReport eval_params(const experiment::Benchmark& b, const encoder::EncoderParams& p) {
  const encoder::SiameseEmbedder model(std::make_shared<const encoder::EncoderParams>(p));
  return experiment::evaluate(b, model);
}

void end_to_end() {
  const auto t0 = Clock::now();
  const experiment::ExperimentConfig cfg;
  const auto bench = experiment::make_benchmark(cfg);

  const auto pre = experiment::run_pretrain(bench);
  const auto t_pre = Clock::now();
  fusion::WeightsBoard board;
  const auto full = experiment::run_stage2(bench, pre.params, false, &board);
  const auto t_full = Clock::now();
  const auto dssm = experiment::run_dssm(bench);
  const auto t_dssm = Clock::now();

  std::vector<Row> rows;
  rows.push_back({"untrained (random init)", eval_params(bench, encoder::EncoderParams::init_random(cfg.shape, cfg.init_seed))});
  rows.push_back({"stage 1 only", eval_params(bench, pre.params)});
  rows.push_back({"two-stage Siamese", eval_params(bench, full.params)});
  const encoder::DssmEmbedder dssm_model(std::make_shared<const encoder::DssmParams>(dssm.params));
  rows.push_back({"DSSM baseline", experiment::evaluate(bench, dssm_model)});
  const auto siamese = rows[2].report;
  const auto base = rows[3].report;

  const double lift = metrics::relative_change(siamese.ndcg(5), base.ndcg(5));
  report("two-stage Siamese vs DSSM: NDCG@5 >= +10% relative and strictly lower IAR@5",
         lift >= 0.10 && siamese.iar(5) < base.iar(5),
         "NDCG@5 " + fmt(siamese.ndcg(5)) + " vs " + fmt(base.ndcg(5)) + " (" + fmt(100 * lift, 3) + "%), IAR@5 " +
             fmt(siamese.iar(5)) + " vs " + fmt(base.iar(5)) + "; " + std::to_string(bench.eval_queries.size()) +
             " queries, k=" + std::to_string(cfg.k),
         t0);

  const auto t2 = Clock::now();
  const auto easy = experiment::run_stage2(bench, pre.params, true);
  rows.push_back({"two-stage, easy negatives only", eval_params(bench, easy.params)});
  const double drop = -metrics::relative_change(rows.back().report.ndcg(5), siamese.ndcg(5));
  report("hard-negative ablation: easy-only NDCG@5 drops >= 1% relative", drop >= 0.01,
         "NDCG@5 " + fmt(rows.back().report.ndcg(5)) + " vs " + fmt(siamese.ndcg(5)) + " (drop " + fmt(100 * drop, 3) +
             "%)",
         t2);

  const auto t3 = Clock::now();
  bool mono = true;
  std::string mono_detail;
  const auto schedule = fusion::FusionSchedule::progressive(cfg.batches_per_round, cfg.batch_size);
  const auto& per_round = full.schedule.weights_per_round;
  mono = per_round.size() == 3;
  for (std::size_t r = 0; r < per_round.size(); ++r) {
    const auto& ws = per_round[r];
    double sum = 0.0;
    for (const auto& w : ws) sum += w.p;
    const auto min_x = std::min_element(ws.begin(), ws.end(), [](auto& a, auto& b) { return a.x < b.x; });
    const auto max_p = std::max_element(ws.begin(), ws.end(), [](auto& a, auto& b) { return a.p < b.p; });
    std::vector<corpus::Domain> active;
    for (const auto& w : ws) active.push_back(w.domain);
    const bool round_ok = active == schedule.rounds[r].active && std::abs(sum - 1.0) <= 1e-9 && min_x->p == max_p->p;
    mono = mono && round_ok;
    mono_detail += "round " + std::to_string(r) + ": " + std::to_string(ws.size()) + " active, min-x " +
                   std::string(corpus::to_string(min_x->domain)) + " p=" + fmt(min_x->p, 3) + ", sum p-1=" +
                   fmt(sum - 1.0, 2) + "; ";
  }
  std::map<std::size_t, std::vector<corpus::Domain>> reported;
  for (const auto& rep : full.schedule.reports) {
    reported[rep.round].push_back(rep.domain);
    if (rep.examples_drawn == 0) mono = false;
  }
  for (std::size_t r = 0; r < schedule.rounds.size(); ++r) mono = mono && reported[r] == schedule.rounds[r].active;
  mono = mono && board.snapshot()->revision == 3;
  report("HITL monotonicity (min-x domain holds max p, sum p = 1 +- 1e-9, progressive activation)", mono,
         mono_detail + "board revisions " + std::to_string(board.snapshot()->revision), t3);

  const auto t4 = Clock::now();
  const auto scratch = experiment::run_stage2(bench, encoder::EncoderParams::init_random(cfg.shape, cfg.init_seed));
  rows.push_back({"stage 2 from random init", eval_params(bench, scratch.params)});
  const auto from_scratch = rows.back().report;
  report("pretraining effect: stage 2 from stage 1 beats stage 2 from random init on NDCG@5",
         siamese.ndcg(5) > from_scratch.ndcg(5),
         "NDCG@5 " + fmt(siamese.ndcg(5)) + " (pretrained) vs " + fmt(from_scratch.ndcg(5)) + " (random init)", t4);

  std::cout << "\nbenchmark: " << bench.world.catalog.size() << " products, " << bench.eval_queries.size()
            << " held-out queries, k=" << cfg.k << "; pretrain "
            << fmt(std::chrono::duration<double>(t_pre - t0).count(), 3) << " s, stage 2 "
            << fmt(std::chrono::duration<double>(t_full - t_pre).count(), 3) << " s, DSSM "
            << fmt(std::chrono::duration<double>(t_dssm - t_full).count(), 3) << " s";
  print_table(rows);
}

void serving_contract() {
  const auto t0 = Clock::now();
  const auto taxonomy = corpus::Taxonomy::make(8, 40);
  const auto catalog = corpus::generate_catalog(taxonomy, 5, 12000, 0.25);
  auto model = std::make_shared<const encoder::SiameseEmbedder>(
      std::make_shared<const encoder::EncoderParams>(encoder::EncoderParams::init_random({}, 3)));
  const auto entities = pipeline::catalog_entities(catalog);
  auto records = pipeline::embed_all(entities, *model);
  const std::vector<index::EmbeddingRecord> initial(records.begin(), records.begin() + 10000);
  const std::vector<index::EmbeddingRecord> extra(records.begin() + 10000, records.end());

  auto store = std::make_shared<index::SnapshotStore>(index::IndexSnapshot::empty());
  store->ingest_and_publish(initial);
  service::RetrievalService svc(model, store);

  std::mutex mu;
  std::map<std::uint64_t, std::shared_ptr<const index::IndexSnapshot>> published;
  published[store->current()->version()] = store->current();

  std::vector<std::string> queries;
  for (const auto& q : corpus::generate_queries(taxonomy, 6, 1000, 0.2, 0.3)) queries.push_back(q.text);

  struct Observation {
    std::size_t query = 0;
    std::uint64_t version = 0;
    std::vector<std::uint64_t> ids;
    double ms = 0.0;
  };
  std::vector<std::vector<Observation>> per_thread(4);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> ingesting{true};
  std::atomic<int> errors{0};

  std::thread writer([&] {
    for (std::size_t i = 0; i < extra.size(); i += 250) {
      const std::span<const index::EmbeddingRecord> batch(extra.data() + i, std::min<std::size_t>(250, extra.size() - i));
      store->ingest_and_publish(batch);
      std::lock_guard lock(mu);
      published[store->current()->version()] = store->current();
    }
    ingesting = false;
  });
  // Readers keep going until the ingest is over and at least 1000 requests ran.
  std::vector<std::thread> readers;
  for (int t = 0; t < 4; ++t)
    readers.emplace_back([&, t] {
      for (std::size_t n; (n = next++) < queries.size() || ingesting;) {
        const auto i = n % queries.size();
        const auto s = Clock::now();
        try {
          const auto r = svc.retrieve({queries[i], 20, false});
          Observation o;
          o.ms = std::chrono::duration<double, std::milli>(Clock::now() - s).count();
          o.query = i;
          o.version = r.snapshot_version;
          for (const auto& it : r.items) o.ids.push_back(it.id);
          per_thread[static_cast<std::size_t>(t)].push_back(std::move(o));
        } catch (const std::exception&) {
          ++errors;
        }
      }
    });
  writer.join();
  for (auto& r : readers) r.join();
  std::vector<Observation> obs;
  for (auto& v : per_thread) obs.insert(obs.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));

  std::set<std::uint64_t> versions;
  std::size_t consistent = 0;
  for (const auto& o : obs) {
    versions.insert(o.version);
    auto it = published.find(o.version);
    if (it == published.end()) continue;
    const auto vec = model->embed_query(queries[o.query]);
    std::vector<std::uint64_t> expected;
    for (const auto& h : it->second->search_ann(vec, 20, 64))
      if (h.score >= service::ServiceConfig{}.score_floor) expected.push_back(h.id);
    consistent += expected == o.ids;
  }
  std::vector<double> ms;
  for (const auto& o : obs) ms.push_back(o.ms);
  std::sort(ms.begin(), ms.end());
  const double p99 = ms[static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(ms.size()))) - 1];
  const bool ok = errors == 0 && consistent == obs.size() && p99 <= 50.0;
  report("serving contract (10k-record snapshot, retrieves during ingest match exactly one snapshot, p99 <= 50 ms)", ok,
         std::to_string(consistent) + "/" + std::to_string(obs.size()) + " responses reproduce their snapshot_version, " +
             std::to_string(versions.size()) + " versions observed of " + std::to_string(published.size()) +
             " published, p50 " + fmt(ms[ms.size() / 2], 3) + " ms, p99 " + fmt(p99, 3) + " ms over " +
             std::to_string(ms.size()) + " requests, errors " + std::to_string(errors.load()),
         t0);
}

}  // namespace

int main() {
  std::cout << std::unitbuf;
  weight_values();
  ndcg_oracle();
  gradient_check();
  ann_quality();
  serving_contract();
  end_to_end();
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}

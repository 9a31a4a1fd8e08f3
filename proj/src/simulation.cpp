#include "semret/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "semret/metrics.hpp"

namespace semret::metrics {

using corpus::Segment;

void to_json(nlohmann::json& j, const Judgment& x) {
  j = nlohmann::json{{"query_id", x.query_id}, {"item_id", x.item_id}, {"grade", x.grade}, {"source", x.source}};
}

void from_json(const nlohmann::json& j, Judgment& x) {
  j.at("query_id").get_to(x.query_id);
  j.at("item_id").get_to(x.item_id);
  j.at("grade").get_to(x.grade);
  x.source = j.value("source", std::string("unknown"));
  if (x.grade < 0 || x.grade > 2) throw std::invalid_argument("judgment grade must be 0, 1 or 2");
}

bool Judgments::add(const Judgment& j) {
  return grades_.emplace(std::make_pair(j.query_id, j.item_id), j.grade).second;
}

std::optional<int> Judgments::grade(std::uint64_t query_id, std::uint64_t item_id) const {
  auto it = grades_.find({query_id, item_id});
  if (it == grades_.end()) return std::nullopt;
  return it->second;
}

std::vector<Judgment> read_judgments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<Judgment> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(nlohmann::json::parse(line).get<Judgment>());
  }
  return out;
}

void write_judgments(const std::filesystem::path& path, std::span<const Judgment> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : rows) out << nlohmann::json(r).dump() << '\n';
}

Judgments index_judgments(std::span<const Judgment> rows) {
  Judgments j;
  for (const auto& r : rows) j.add(r);
  return j;
}

std::vector<EvalQuery> sample_eval_queries(const std::vector<corpus::Query>& pool, std::size_t n,
                                           std::uint64_t seed) {
  std::map<Segment, std::vector<const corpus::Query*>> by_segment;
  for (const auto& q : pool) by_segment[q.segment].push_back(&q);
  n = std::min(n, pool.size());

  // Largest-remainder allocation.
  std::map<Segment, std::size_t> quota;
  std::vector<std::pair<double, Segment>> remainders;
  std::size_t assigned = 0;
  for (const auto& [seg, qs] : by_segment) {
    const double exact = static_cast<double>(n) * static_cast<double>(qs.size()) / static_cast<double>(pool.size());
    quota[seg] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[seg];
    remainders.emplace_back(exact - std::floor(exact), seg);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; assigned < n && i < remainders.size(); ++i, ++assigned) ++quota[remainders[i].second];

  std::vector<EvalQuery> out;
  for (auto& [seg, qs] : by_segment) {
    std::sort(qs.begin(), qs.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
    std::mt19937_64 rng(seed * 31 + static_cast<std::uint64_t>(seg));
    std::shuffle(qs.begin(), qs.end(), rng);
    for (std::size_t i = 0; i < std::min(quota[seg], qs.size()); ++i)
      out.push_back({qs[i]->id, qs[i]->text, qs[i]->segment, qs[i]->intended_product_type});
  }
  std::sort(out.begin(), out.end(), [](const EvalQuery& a, const EvalQuery& b) { return a.id < b.id; });
  return out;
}

std::vector<Judgment> oracle_judgments(const corpus::Taxonomy& taxonomy,
                                       const std::vector<corpus::Product>& catalog,
                                       std::span<const EvalQuery> queries) {
  std::vector<Judgment> out;
  out.reserve(queries.size() * catalog.size());
  for (const auto& q : queries)
    for (const auto& p : catalog)
      out.push_back({q.id, p.id, corpus::truth_grade(taxonomy, q.intended_product_type, p), "oracle"});
  return out;
}

double MetricReport::ndcg(std::size_t cutoff) const {
  for (const auto& m : overall)
    if (m.cutoff == cutoff) return m.ndcg;
  throw std::out_of_range("no NDCG at cutoff " + std::to_string(cutoff));
}

double MetricReport::iar(std::size_t cutoff) const {
  for (const auto& m : overall)
    if (m.cutoff == cutoff) return m.iar;
  throw std::out_of_range("no IAR at cutoff " + std::to_string(cutoff));
}

MetricReport simulate_offline(const encoder::TextEmbedder& model,
                              const index::IndexSnapshot& snapshot,
                              std::span<const EvalQuery> queries, const Judgments& judgments,
                              const SimulationConfig& cfg) {
  if (model.model_version() != snapshot.model_version())
    throw ModelVersionMismatch("model " + model.model_version() + " does not match index model " +
                               snapshot.model_version());
  if (cfg.k == 0 || cfg.cutoffs.empty()) throw std::invalid_argument("simulation needs k >= 1 and cutoffs");

  std::vector<const EvalQuery*> ordered;
  for (const auto& q : queries) ordered.push_back(&q);
  std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

  MetricReport rep;
  rep.model_id = model.model_version();
  rep.query_count = ordered.size();
  const auto nc = cfg.cutoffs.size();
  std::vector<double> ndcg_sum(nc, 0.0), iar_sum(nc, 0.0);
  std::map<Segment, std::pair<std::size_t, std::vector<std::pair<double, double>>>> seg;

  for (const auto* q : ordered) {
    const auto vec = model.embed_query(q->text);
    const auto hits = snapshot.search_ann(vec, cfg.k, std::max(cfg.ef_search, cfg.k));
    std::vector<int> grades;
    grades.reserve(hits.size());
    for (const auto& h : hits) {
      auto g = judgments.grade(q->id, h.id);
      if (!g) ++rep.assumed_grades;
      grades.push_back(g.value_or(0));
    }
    rep.retrieved += hits.size();
    auto& s = seg[q->segment];
    ++s.first;
    s.second.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) {
      const double nd = ndcg(grades, cfg.cutoffs[c]);
      const double ia = iar(grades, cfg.cutoffs[c]);
      ndcg_sum[c] += nd;
      iar_sum[c] += ia;
      s.second[c].first += nd;
      s.second[c].second += ia;
    }
  }

  const double n = std::max<double>(1.0, static_cast<double>(ordered.size()));
  for (std::size_t c = 0; c < nc; ++c) rep.overall.push_back({cfg.cutoffs[c], ndcg_sum[c] / n, iar_sum[c] / n});
  for (const auto& [segment, data] : seg) {
    SegmentMetrics sm{segment, data.first, {}};
    const double m = static_cast<double>(data.first);
    for (std::size_t c = 0; c < nc; ++c)
      sm.metrics.push_back({cfg.cutoffs[c], data.second[c].first / m, data.second[c].second / m});
    rep.segments.push_back(std::move(sm));
  }
  return rep;
}

namespace {

nlohmann::json cutoffs_json(const std::vector<CutoffMetrics>& ms) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& m : ms) {
    j["ndcg@" + std::to_string(m.cutoff)] = m.ndcg;
    j["iar@" + std::to_string(m.cutoff)] = m.iar;
  }
  return j;
}

}  // namespace

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json segs = nlohmann::json::object();
  for (const auto& s : r.segments) {
    auto j = cutoffs_json(s.metrics);
    j["query_count"] = s.query_count;
    segs[std::string(corpus::to_string(s.segment))] = j;
  }
  return {{"model_id", r.model_id},
          {"query_count", r.query_count},
          {"retrieved", r.retrieved},
          {"assumed_grades", r.assumed_grades},
          {"metrics", cutoffs_json(r.overall)},
          {"segments", segs}};
}

double relative_change(double value, double baseline) {
  if (baseline == 0.0) return 0.0;
  return (value - baseline) / baseline;
}

std::string comparison_csv(std::span<const MetricReport> rows, std::size_t baseline) {
  if (baseline >= rows.size()) throw std::out_of_range("baseline row out of range");
  const auto& base = rows[baseline];
  std::ostringstream os;
  os << "model";
  for (const auto& m : base.overall) os << ",ndcg@" << m.cutoff;
  for (const auto& m : base.overall) os << ",iar@" << m.cutoff;
  for (const auto& m : base.overall) os << ",ndcg@" << m.cutoff << "_rel";
  for (const auto& m : base.overall) os << ",iar@" << m.cutoff << "_rel";
  os << '\n' << std::fixed << std::setprecision(6);
  for (const auto& r : rows) {
    os << r.model_id;
    for (const auto& m : r.overall) os << ',' << m.ndcg;
    for (const auto& m : r.overall) os << ',' << m.iar;
    for (const auto& m : base.overall) os << ',' << relative_change(r.ndcg(m.cutoff), m.ndcg);
    for (const auto& m : base.overall) os << ',' << relative_change(r.iar(m.cutoff), m.iar);
    os << '\n';
  }
  return os.str();
}

}  // namespace semret::metrics

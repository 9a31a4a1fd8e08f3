#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. None of these call into the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace oracle {

/// DCG written straight from the definition, 1-based ranks.
inline double dcg(const std::vector<int>& grades, std::size_t p) {
  double s = 0.0;
  for (std::size_t r = 1; r <= std::min(p, grades.size()); ++r)
    s += static_cast<double>(grades[r - 1]) / std::log2(static_cast<double>(r) + 1.0);
  return s;
}

/// NDCG with the ideal taken as the best DCG over every permutation of the
/// clipped list.
inline double ndcg_by_permutation(std::vector<int> grades, std::size_t p) {
  grades.resize(std::min(p, grades.size()));
  const double actual = dcg(grades, p);
  std::vector<int> perm = grades;
  std::sort(perm.begin(), perm.end());
  double best = 0.0;
  do best = std::max(best, dcg(perm, p));
  while (std::next_permutation(perm.begin(), perm.end()));
  return best == 0.0 ? 0.0 : actual / best;
}

inline double iar(const std::vector<int>& grades, std::size_t n) {
  const auto m = std::min(n, grades.size());
  if (m == 0) return 0.0;
  return static_cast<double>(std::count(grades.begin(), grades.begin() + static_cast<long>(m), 0)) /
         static_cast<double>(m);
}

inline double logistic_weight(double x) { return 1.0 / (1.0 + std::exp(10.0 * x - 5.0)); }

/// Top-k ids by descending dot product, ties by ascending id.
inline std::vector<std::pair<std::uint64_t, double>> exact_topk(const std::vector<std::vector<float>>& vecs,
                                                                const std::vector<std::uint64_t>& ids,
                                                                const std::vector<float>& q,
                                                                std::size_t k) {
  std::vector<std::pair<std::uint64_t, double>> all;
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < q.size(); ++d) s += static_cast<double>(vecs[i][d]) * q[d];
    all.emplace_back(ids[i], s);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

/// Central finite difference of f with respect to x[i].
inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

inline bool close(double analytic, double numeric, double rel, double abs) {
  return std::abs(analytic - numeric) <= abs + rel * std::max(std::abs(analytic), std::abs(numeric));
}

/// Unit vectors around `centers` random unit centers, with per-coordinate
/// Gaussian noise sigma added before normalizing.
inline std::vector<std::vector<float>> clustered_unit_vectors(std::size_t n, std::size_t dim,
                                                              std::size_t centers, double sigma,
                                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto unit = [&](std::vector<double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    for (auto& x : v) x /= s;
    return v;
  };
  std::vector<std::vector<double>> cs;
  for (std::size_t c = 0; c < centers; ++c) {
    std::vector<double> v(dim);
    for (auto& x : v) x = g(rng);
    cs.push_back(unit(v));
  }
  std::uniform_int_distribution<std::size_t> pick(0, centers - 1);
  std::vector<std::vector<float>> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto v = cs[pick(rng)];
    for (auto& x : v) x += sigma * g(rng);
    v = unit(v);
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

inline std::vector<std::vector<float>> isotropic_unit_vectors(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<float>> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(dim);
    double s = 0.0;
    for (auto& x : v) {
      x = g(rng);
      s += x * x;
    }
    s = std::sqrt(s);
    std::vector<float> f(dim);
    for (std::size_t d = 0; d < dim; ++d) f[d] = static_cast<float>(v[d] / s);
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace oracle

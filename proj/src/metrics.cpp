#include "semret/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace semret::metrics {

namespace {

void require_cutoff(std::size_t p) {
  if (p == 0) throw std::invalid_argument("metric cutoff must be >= 1");
}

}  // namespace

double dcg(std::span<const int> grades, std::size_t p) {
  require_cutoff(p);
  const std::size_t n = std::min(p, grades.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum += static_cast<double>(grades[i]) / std::log2(static_cast<double>(i) + 2.0);
  return sum;
}

double idcg(std::span<const int> grades, std::size_t p) {
  require_cutoff(p);
  std::vector<int> ideal(grades.begin(), grades.begin() + static_cast<std::ptrdiff_t>(std::min(p, grades.size())));
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  return dcg(ideal, p);
}

double ndcg(std::span<const int> grades, std::size_t p) {
  const double ideal = idcg(grades, p);
  if (ideal <= 0.0) return 0.0;
  return dcg(grades, p) / ideal;
}

double iar(std::span<const int> grades, std::size_t n) {
  require_cutoff(n);
  const std::size_t len = std::min(n, grades.size());
  if (len == 0) return 0.0;
  std::size_t irrelevant = 0;
  for (std::size_t i = 0; i < len; ++i)
    if (grades[i] == 0) ++irrelevant;
  return static_cast<double>(irrelevant) / static_cast<double>(len);
}

}  // namespace semret::metrics

#pragma once

// Graded relevance metrics over ranked lists with grades in {0, 1, 2}.
// Every list is clipped to the cutoff before computing; the ideal DCG is taken
// from the same clipped list sorted by grade.

#include <cstddef>
#include <span>

namespace semret::metrics {

/// sum_{i=1..p} rel_i / log2(i + 1) over the first p grades.
double dcg(std::span<const int> grades, std::size_t p);

/// DCG of the clipped list sorted by grade descending.
double idcg(std::span<const int> grades, std::size_t p);

/// dcg / idcg over the clipped list; 0 when every clipped grade is 0.
double ndcg(std::span<const int> grades, std::size_t p);

/// Fraction of grade-0 items among the first n (actual length when shorter);
/// 0 for an empty list.
double iar(std::span<const int> grades, std::size_t n);

}  // namespace semret::metrics

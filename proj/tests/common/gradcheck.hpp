#pragma once

// Finite-difference checks of the analytic encoder gradients, shared by the
// unit tests and the acceptance binary.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "semret/training.hpp"

namespace gradcheck {

struct Mismatch {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct Outcome {
  std::size_t checked = 0;
  std::vector<Mismatch> mismatches;
  double worst_abs = 0.0;
};

struct Tolerance {
  double h = 1e-4;
  double rel = 1e-4;
  double abs = 1e-6;
};

/// Compares `grad` against central differences of `loss` at `per_tensor`
/// coordinates of every tensor. Embedding coordinates are drawn from touched
/// rows, so the check never degenerates into comparing zeros.
inline void check(semret::encoder::EncoderParams& params, const semret::training::GradientSet& grad,
                  const std::function<double()>& loss, std::size_t per_tensor, std::mt19937_64& rng,
                  const Tolerance& tol, Outcome& out) {
  std::vector<std::pair<std::string, std::span<double>>> ps;
  params.visit_tensors([&](const char* name, std::span<double> s) { ps.emplace_back(name, s); });
  std::vector<std::span<const double>> gs;
  grad.d.visit_tensors([&](const char*, std::span<const double> s) { gs.push_back(s); });
  const std::size_t hidden = params.shape.hidden;
  for (std::size_t t = 0; t < ps.size(); ++t) {
    auto& [name, p] = ps[t];
    for (std::size_t c = 0; c < per_tensor; ++c) {
      std::size_t i = 0;
      if (name == "embedding") {
        const auto row = grad.rows[rng() % grad.rows.size()];
        i = static_cast<std::size_t>(row) * hidden + rng() % hidden;
      } else {
        i = rng() % p.size();
      }
      const double numeric = oracle::central_difference(loss, p[i], tol.h);
      const double analytic = gs[t][i];
      ++out.checked;
      out.worst_abs = std::max(out.worst_abs, std::abs(analytic - numeric));
      if (!oracle::close(analytic, numeric, tol.rel, tol.abs))
        out.mismatches.push_back({name, i, analytic, numeric});
    }
  }
}

inline semret::TokenSequence random_tokens(std::mt19937_64& rng, std::uint32_t vocab, std::size_t max_len) {
  semret::TokenSequence s;
  const std::size_t n = 1 + rng() % max_len;
  for (std::size_t i = 0; i < n; ++i) s.buckets.push_back(1 + static_cast<std::uint32_t>(rng() % (vocab - 1)));
  s.original_length = n;
  return s;
}

}  // namespace gradcheck

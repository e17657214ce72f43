#pragma once

// Seeded 2-D k-means (complex samples treated as points in R^2). Lloyd
// iterations from a k-means++ init, empty clusters re-seeded to the point
// farthest from its current center. All tie-breaks resolve to the lowest
// index so runs are bit-reproducible given a seed.

#include <algorithm>
#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "csifb/rng.hpp"

namespace csifb {

using Complex = std::complex<double>;
using CSpan = std::span<const Complex>;

struct KmeansConfig {
  int max_iter = 300;
  double tol = 1e-6;  // convergence: max center movement relative to data RMS
};

struct KmeansResult {
  std::vector<Complex> centers;
  double distortion = 0.0;  // mean squared distance to the nearest center
  bool degenerate = false;  // fewer distinct points than requested centers
  int iterations = 0;
};

inline int nearest_center(Complex z, const std::vector<Complex>& centers) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double d = std::norm(z - centers[i]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// k-means++ seeding: first center uniform, each next one sampled with
// probability proportional to the squared distance to the nearest chosen
// center.
inline std::vector<Complex> kmeanspp_init(CSpan points, int k, Rng& rng) {
  const std::size_t n = points.size();
  if (k < 1 || n == 0) throw std::invalid_argument("kmeanspp_init: empty input");
  std::vector<Complex> centers;
  centers.reserve(k);
  centers.push_back(points[rng.index(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = std::norm(points[i] - centers[0]);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (u < cum) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);  // all residual distances zero: duplicates only
    }
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], std::norm(points[i] - centers.back()));
    }
  }
  return centers;
}

// Lloyd iterations from the given initial centers.
inline KmeansResult lloyd(CSpan points, std::vector<Complex> centers,
                          const KmeansConfig& cfg = {}) {
  const std::size_t n = points.size();
  const std::size_t k = centers.size();
  if (n == 0 || k == 0) throw std::invalid_argument("lloyd: empty input");

  double rms = 0.0;
  for (auto z : points) rms += std::norm(z);
  rms = std::sqrt(rms / static_cast<double>(n));
  const double move_tol = cfg.tol * (rms > 0.0 ? rms : 1.0);

  std::vector<int> assign(n, 0);
  std::vector<Complex> sums(k);
  std::vector<std::size_t> counts(k);

  KmeansResult res;
  int iter = 0;
  for (; iter < cfg.max_iter; ++iter) {
    std::fill(sums.begin(), sums.end(), Complex(0.0, 0.0));
    std::fill(counts.begin(), counts.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
      const int a = nearest_center(points[i], centers);
      assign[i] = a;
      sums[a] += points[i];
      counts[a]++;
    }
    // Re-seed empty clusters to the point farthest from its assigned center.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      double far_d = -1.0;
      std::size_t far_i = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[assign[i]] <= 1) continue;  // do not empty another cluster
        const double d = std::norm(points[i] - centers[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      if (far_d < 0.0) continue;  // nothing movable: duplicates everywhere
      sums[assign[far_i]] -= points[far_i];
      counts[assign[far_i]]--;
      assign[far_i] = static_cast<int>(c);
      sums[c] = points[far_i];
      counts[c] = 1;
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      const Complex next = sums[c] / static_cast<double>(counts[c]);
      movement = std::max(movement, std::abs(next - centers[c]));
      centers[c] = next;
    }
    if (movement <= move_tol) {
      ++iter;
      break;
    }
  }

  double dist = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dist += std::norm(points[i] - centers[nearest_center(points[i], centers)]);
  }
  res.centers = std::move(centers);
  res.distortion = dist / static_cast<double>(n);
  res.iterations = iter;
  return res;
}

namespace detail {

// Distinct points in deterministic (re, im) lexicographic order.
inline std::vector<Complex> distinct_points(CSpan points) {
  std::vector<Complex> v(points.begin(), points.end());
  std::sort(v.begin(), v.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace detail

inline KmeansResult kmeans_fit(CSpan points, int k, std::uint64_t seed,
                               const KmeansConfig& cfg = {}) {
  if (points.empty()) throw std::invalid_argument("kmeans_fit: no points");
  if (k < 1) throw std::invalid_argument("kmeans_fit: k must be >= 1");

  std::vector<Complex> distinct = detail::distinct_points(points);
  if (static_cast<int>(distinct.size()) < k) {
    // Fewer distinct values than centers: every point sits on a center.
    KmeansResult res;
    res.centers = distinct;
    for (std::size_t i = res.centers.size(); i < static_cast<std::size_t>(k); ++i) {
      res.centers.push_back(distinct[i % distinct.size()]);
    }
    res.distortion = 0.0;
    res.degenerate = true;
    return res;
  }

  Rng rng(seed);
  return lloyd(points, kmeanspp_init(points, k, rng), cfg);
}

}  // namespace csifb

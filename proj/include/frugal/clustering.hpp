#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "frugal/core.hpp"

namespace frugal {

struct ClusterModel {
  Matrix centroids;                     // K x d
  std::vector<std::size_t> assignment;  // length n
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // after every assignment pass
  std::size_t lloyd_iterations = 0;

  std::size_t clusters() const noexcept { return centroids.rows(); }
};

// Indicator and squared-distance matrices over the rows a model was fit on.
struct ClusterMatrices {
  Matrix C;  // n x K, one 1 per row
  Matrix D;  // n x K squared euclidean distances
};

namespace detail {

// Assigns each point to its nearest centroid (ties to the lowest id) and
// returns the inertia.
inline double assign_points(const Matrix& x, const Matrix& centroids, std::vector<std::size_t>& assignment,
                            std::vector<double>& own_distance) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < centroids.rows(); ++k) {
      const double dist = squared_distance(x.row(i), centroids.row(k));
      if (dist < best) {
        best = dist;
        arg = k;
      }
    }
    assignment[i] = arg;
    own_distance[i] = best;
    inertia += best;
  }
  return inertia;
}

inline Matrix kmeanspp_seed(const Matrix& x, std::size_t K, Rng& rng) {
  const std::size_t n = x.rows();
  Matrix centroids(K, x.cols());
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.below(n);
  for (std::size_t k = 0;; ++k) {
    std::copy(x.row(pick).begin(), x.row(pick).end(), centroids.row(k).begin());
    if (k + 1 == K) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(x.row(i), centroids.row(k)));
      total += nearest[i];
    }
    if (total <= 0.0) {
      pick = rng.below(n);
      continue;
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += nearest[i];
      if (acc > target && nearest[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }
  return centroids;
}

}  // namespace detail

// Lloyd's algorithm from k-means++ seeding. Stops when the assignment no longer
// changes or after max_iterations update steps. A centroid left without points
// is moved onto the point farthest from its own centroid.
inline ClusterModel kmeans(const Matrix& x, std::size_t K, std::uint64_t seed, std::size_t max_iterations = 100) {
  const std::size_t n = x.rows();
  if (K < 1) throw ParameterError("kmeans: K must be >= 1");
  if (K > n) throw ParameterError("kmeans: K=" + std::to_string(K) + " exceeds n=" + std::to_string(n));
  for (double v : x.data())
    if (!std::isfinite(v)) throw ParameterError("kmeans: non-finite feature");

  Rng rng(seed);
  ClusterModel model;
  model.centroids = detail::kmeanspp_seed(x, K, rng);
  model.assignment.assign(n, 0);
  std::vector<double> own(n, 0.0);
  model.inertia = detail::assign_points(x, model.centroids, model.assignment, own);
  model.inertia_trace.push_back(model.inertia);

  const std::size_t d = x.cols();
  std::vector<std::size_t> counts(K);
  std::vector<std::size_t> previous;
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    std::fill(counts.begin(), counts.end(), 0);
    Matrix sums(K, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = model.assignment[i];
      ++counts[k];
      auto s = sums.row(k);
      auto p = x.row(i);
      for (std::size_t j = 0; j < d; ++j) s[j] += p[j];
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (counts[k] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) model.centroids(k, j) = sums(k, j) / static_cast<double>(counts[k]);
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (counts[k] != 0) continue;
      std::size_t far = 0;
      double far_dist = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dist = squared_distance(x.row(i), model.centroids.row(model.assignment[i]));
        if (dist > far_dist) {
          far_dist = dist;
          far = i;
        }
      }
      std::copy(x.row(far).begin(), x.row(far).end(), model.centroids.row(k).begin());
      // Claim the point so a second empty cluster picks a different one.
      --counts[model.assignment[far]];
      model.assignment[far] = k;
      counts[k] = 1;
    }
    previous = model.assignment;
    model.inertia = detail::assign_points(x, model.centroids, model.assignment, own);
    model.inertia_trace.push_back(model.inertia);
    model.lloyd_iterations = iter + 1;
    if (previous == model.assignment) break;
  }
  return model;
}

inline ClusterMatrices materialize(const ClusterModel& model, const Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t K = model.clusters();
  if (model.assignment.size() != n) throw ShapeError("materialize: assignment length does not match rows");
  if (model.centroids.cols() != x.cols()) throw ShapeError("materialize: dimension mismatch");
  ClusterMatrices out{Matrix(n, K), Matrix(n, K)};
  for (std::size_t i = 0; i < n; ++i) {
    out.C(i, model.assignment[i]) = 1.0;
    for (std::size_t k = 0; k < K; ++k) out.D(i, k) = squared_distance(x.row(i), model.centroids.row(k));
  }
  return out;
}

}  // namespace frugal

#pragma once

// Brute-force references for the classical landscape features and the
// statistics used by the analysis module. Written from the definitions with
// double loops; no shared helpers with the implementation.

#include "ltk/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

namespace oracle {

inline double dist(const ltk::Matrix& X, Eigen::Index a, Eigen::Index b) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < X.cols(); ++k) s += (X(a, k) - X(b, k)) * (X(a, k) - X(b, k));
  return std::sqrt(s);
}

/// Sample correlation from the textbook sums.
inline std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n, mb = sb / n;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

/// Index of the j-th best sample, "better" meaning smaller y then smaller index.
inline std::vector<Eigen::Index> ranking(const ltk::Vector& y) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) idx[i] = i;
  // selection sort keeps the tie rule explicit
  for (std::size_t a = 0; a < idx.size(); ++a) {
    std::size_t best = a;
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const bool better = y[idx[b]] < y[idx[best]] || (y[idx[b]] == y[idx[best]] && idx[b] < idx[best]);
      if (better) best = b;
    }
    std::swap(idx[a], idx[best]);
  }
  return idx;
}

struct Nbc {
  std::optional<double> nb_nn_ratio, ratio_std, nn_rank_corr;
};

inline Nbc nbc(const ltk::Observation& obs) {
  const Eigen::Index m = obs.X.rows();
  const auto order = ranking(obs.y);
  std::vector<double> rank(static_cast<std::size_t>(m));
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<double>(r);
  std::vector<double> nn_all, nn, nb, ratios;
  for (Eigen::Index i = 0; i < m; ++i) {
    double near = INFINITY, near_better = INFINITY;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      near = std::min(near, dist(obs.X, i, j));
      if (rank[j] < rank[i]) near_better = std::min(near_better, dist(obs.X, i, j));
    }
    nn_all.push_back(near);
    if (rank[i] > 0) {
      nn.push_back(near);
      nb.push_back(near_better);
      ratios.push_back(near_better / near);
    }
  }
  const auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
  Nbc out;
  out.nb_nn_ratio = mean(nb) / mean(nn);
  const double mr = mean(ratios);
  double var = 0.0;
  for (double r : ratios) var += (r - mr) * (r - mr);
  out.ratio_std = std::sqrt(var / static_cast<double>(ratios.size()));
  out.nn_rank_corr = pearson(nn_all, rank);
  return out;
}

/// Mean pairwise distance of the best ceil(q m) samples and of all samples.
inline std::pair<double, double> dispersion(const ltk::Observation& obs, double q) {
  const Eigen::Index m = obs.X.rows();
  const auto order = ranking(obs.y);
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(m) - 1e-9));
  const auto mean_pairs = [&](std::size_t n) {
    double s = 0.0;
    int c = 0;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        s += dist(obs.X, order[a], order[b]);
        ++c;
      }
    }
    return s / c;
  };
  return {mean_pairs(k), mean_pairs(static_cast<std::size_t>(m))};
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

/// Unbiased sample covariance of the rows.
inline std::vector<std::vector<double>> covariance(const ltk::Matrix& X) {
  const auto n = static_cast<std::size_t>(X.rows()), k = static_cast<std::size_t>(X.cols());
  std::vector<double> mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) mean[c] += X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) / static_cast<double>(n);
  }
  std::vector<std::vector<double>> cov(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        cov[a][b] += (X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) - mean[a]) *
                     (X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) - mean[b]) / static_cast<double>(n - 1);
      }
    }
  }
  return cov;
}

}  // namespace oracle

#include "ltk/ela.hpp"

#include "ltk/error.hpp"
#include "ltk/problems.hpp"
#include "ltk/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace ltk::ela {

namespace {

double distance(const Matrix& X, Eigen::Index i, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < X.cols(); ++k) {
    const double diff = X(i, k) - X(j, k);
    s += diff * diff;
  }
  return std::sqrt(s);
}

Matrix distance_matrix(const Matrix& X) {
  const Eigen::Index m = X.rows();
  Matrix D = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) D(i, j) = D(j, i) = distance(X, i, j);
  }
  return D;
}

/// Sample indices ordered by (y, index).
std::vector<Eigen::Index> order_by_y(const Vector& y) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(y.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return y[a] < y[b]; });
  return idx;
}

Eigen::Index argmin_first(const Vector& y) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < y.size(); ++i) {
    if (y[i] < y[best]) best = i;
  }
  return best;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size()));
}

/// Missing when either input is constant.
Feature pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  if (a.size() < 2 || *amin == *amax || *bmin == *bmax) return std::nullopt;
  const double ma = mean_of(a), mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

Feature finite_or_missing(double v) { return std::isfinite(v) ? Feature(v) : std::nullopt; }

double box_diagonal(const Observation& obs) { return (obs.ub - obs.lb).norm(); }

Vector minmax_normalized(const Vector& y) {
  const double lo = y.minCoeff(), hi = y.maxCoeff();
  if (hi == lo) return Vector::Zero(y.size());
  return (y.array() - lo) / (hi - lo);
}

std::string percent_tag(double q) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", static_cast<int>(std::lround(q * 100.0)));
  return buf;
}

FeatureVector make(const Observation& obs) {
  FeatureVector fv;
  fv.m = obs.population();
  fv.d = obs.dimension();
  return fv;
}

double mean_pairwise(const Matrix& D, const std::vector<Eigen::Index>& subset) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t a = 0; a < subset.size(); ++a) {
    for (std::size_t b = a + 1; b < subset.size(); ++b) {
      s += D(subset[a], subset[b]);
      ++n;
    }
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

// Information content helpers over a symbol sequence in {-1, 0, 1}.
std::vector<int> symbols(const std::vector<double>& diffs, double eps) {
  std::vector<int> s(diffs.size());
  for (std::size_t k = 0; k < diffs.size(); ++k) s[k] = diffs[k] < -eps ? -1 : (diffs[k] > eps ? 1 : 0);
  return s;
}

double entropy_unequal_pairs(const std::vector<int>& s) {
  if (s.size() < 2) return 0.0;
  std::array<std::array<double, 3>, 3> counts{};
  for (std::size_t k = 0; k + 1 < s.size(); ++k) counts[s[k] + 1][s[k + 1] + 1] += 1.0;
  const double n = static_cast<double>(s.size() - 1);
  double h = 0.0;
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 3; ++q) {
      if (p == q || counts[p][q] == 0.0) continue;
      const double prob = counts[p][q] / n;
      h -= prob * std::log(prob) / std::log(6.0);
    }
  }
  return h;
}

double partial_information(const std::vector<int>& s) {
  if (s.empty()) return 0.0;
  std::size_t len = 0;
  int last = 0;
  for (int v : s) {
    if (v == 0 || v == last) continue;
    ++len;
    last = v;
  }
  return static_cast<double>(len) / static_cast<double>(s.size());
}

struct LeastSquaresFit {
  Vector coef;
  double r2;
};

std::optional<LeastSquaresFit> fit(const Matrix& A, const Vector& y) {
  const double mu = y.mean();
  const double ss_tot = (y.array() - mu).square().sum();
  if (ss_tot == 0.0) return std::nullopt;
  Vector coef = A.colPivHouseholderQr().solve(y);
  const double ss_res = (A * coef - y).squaredNorm();
  return LeastSquaresFit{std::move(coef), 1.0 - ss_res / ss_tot};
}

/// Adjusted R^2 when the model has fewer terms than samples, plain R^2 otherwise.
Feature adjusted(const std::optional<LeastSquaresFit>& f, Eigen::Index m, Eigen::Index p) {
  if (!f) return std::nullopt;
  if (m > p) return finite_or_missing(1.0 - (1.0 - f->r2) * static_cast<double>(m - 1) / static_cast<double>(m - p));
  return finite_or_missing(f->r2);
}

Matrix design(const Matrix& X, bool squares, bool interactions) {
  const Eigen::Index m = X.rows(), d = X.cols();
  const Eigen::Index p = 1 + d + (squares ? d : 0) + (interactions ? d * (d - 1) / 2 : 0);
  Matrix A(m, p);
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index c = 0;
    A(i, c++) = 1.0;
    for (Eigen::Index k = 0; k < d; ++k) A(i, c++) = X(i, k);
    if (squares) {
      for (Eigen::Index k = 0; k < d; ++k) A(i, c++) = X(i, k) * X(i, k);
    }
    if (interactions) {
      for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = a + 1; b < d; ++b) A(i, c++) = X(i, a) * X(i, b);
      }
    }
  }
  return A;
}

// Gaussian class model for discriminant analysis.
struct ClassModel {
  Vector mean;
  Eigen::LLT<Eigen::MatrixXd> chol;
  double log_det = 0.0;
  double log_prior = -std::numeric_limits<double>::infinity();
};

Eigen::MatrixXd regularized(Eigen::MatrixXd cov) {
  const Eigen::Index d = cov.rows();
  const double lambda = 1e-6 * std::max(cov.trace() / static_cast<double>(d), 1e-12);
  cov.diagonal().array() += lambda;
  return cov;
}

ClassModel class_model(const Vector& mean, const Eigen::MatrixXd& cov, double prior) {
  ClassModel cm;
  cm.mean = mean;
  cm.chol.compute(regularized(cov));
  const auto& L = cm.chol.matrixLLT();
  for (Eigen::Index k = 0; k < L.rows(); ++k) cm.log_det += 2.0 * std::log(L(k, k));
  cm.log_prior = prior > 0.0 ? std::log(prior) : -std::numeric_limits<double>::infinity();
  return cm;
}

double discriminant(const ClassModel& cm, const Vector& x) {
  if (!std::isfinite(cm.log_prior)) return -std::numeric_limits<double>::infinity();
  const Vector diff = x - cm.mean;
  const Vector sol = cm.chol.matrixL().solve(diff);
  return -0.5 * sol.squaredNorm() - 0.5 * cm.log_det + cm.log_prior;
}

/// Misclassification rates (lda, qda) under 10-fold CV with folds i mod 10.
std::pair<double, double> discriminant_cv(const Matrix& X, const std::vector<int>& label) {
  const Eigen::Index m = X.rows(), d = X.cols();
  constexpr int kFolds = 10;
  long lda_wrong = 0, qda_wrong = 0;
  for (int fold = 0; fold < kFolds; ++fold) {
    std::array<Vector, 2> mean{Vector::Zero(d), Vector::Zero(d)};
    std::array<double, 2> count{0.0, 0.0};
    for (Eigen::Index i = 0; i < m; ++i) {
      if (i % kFolds == fold) continue;
      mean[label[i]] += X.row(i).transpose();
      count[label[i]] += 1.0;
    }
    const double n_train = count[0] + count[1];
    if (n_train == 0.0) continue;
    std::array<Eigen::MatrixXd, 2> scatter{Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d)};
    for (int c = 0; c < 2; ++c) {
      if (count[c] > 0.0) mean[c] /= count[c];
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      if (i % kFolds == fold) continue;
      const Vector diff = X.row(i).transpose() - mean[label[i]];
      scatter[label[i]].selfadjointView<Eigen::Lower>().rankUpdate(diff);
    }
    for (int c = 0; c < 2; ++c) scatter[c] = scatter[c].selfadjointView<Eigen::Lower>();

    const Eigen::MatrixXd pooled = (scatter[0] + scatter[1]) / std::max(n_train - 2.0, 1.0);
    std::array<ClassModel, 2> lda, qda;
    for (int c = 0; c < 2; ++c) {
      const double prior = count[c] / n_train;
      lda[c] = class_model(mean[c], pooled, prior);
      qda[c] = class_model(mean[c], scatter[c] / std::max(count[c] - 1.0, 1.0), prior);
    }
    for (Eigen::Index i = fold; i < m; i += kFolds) {
      const Vector x = X.row(i).transpose();
      const int lda_pred = discriminant(lda[1], x) > discriminant(lda[0], x) ? 1 : 0;
      const int qda_pred = discriminant(qda[1], x) > discriminant(qda[0], x) ? 1 : 0;
      lda_wrong += lda_pred != label[i];
      qda_wrong += qda_pred != label[i];
    }
  }
  return {static_cast<double>(lda_wrong) / static_cast<double>(m), static_cast<double>(qda_wrong) / static_cast<double>(m)};
}

}  // namespace

std::vector<std::string> FeatureVector::names() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.name);
  return out;
}

Vector FeatureVector::imputed(double fill) const {
  Vector v(static_cast<Eigen::Index>(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) v[static_cast<Eigen::Index>(i)] = entries[i].value.value_or(fill);
  return v;
}

std::size_t FeatureVector::missing_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const NamedFeature& e) { return !e.value; }));
}

const Feature& FeatureVector::at(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e.value;
  }
  throw Error("no feature named " + name);
}

void FeatureVector::append(const FeatureVector& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
}

FeatureVector fdc_features(const Observation& obs) {
  obs.validate();
  FeatureVector fv = make(obs);
  const Matrix& X = obs.X;
  const Eigen::Index m = X.rows();
  const Eigen::Index best = argmin_first(obs.y);

  std::vector<double> y(obs.y.data(), obs.y.data() + m), to_best(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) to_best[i] = distance(X, i, best);

  std::vector<double> pair_dist, pair_ydiff;
  pair_dist.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  pair_ydiff.reserve(pair_dist.capacity());
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      pair_dist.push_back(distance(X, i, j));
      pair_ydiff.push_back(std::abs(obs.y[i] - obs.y[j]));
    }
  }
  const Vector centroid = X.colwise().mean().transpose();
  const double centroid_best = (centroid - X.row(best).transpose()).norm() / box_diagonal(obs);

  fv.entries = {{"fdc.corr_dist_best", m >= 3 ? pearson(y, to_best) : std::nullopt},
                {"fdc.dist_mean", mean_of(pair_dist)},
                {"fdc.dist_std", std_of(pair_dist)},
                {"fdc.ydiff_mean", finite_or_missing(mean_of(pair_ydiff))},
                {"fdc.ydiff_std", finite_or_missing(std_of(pair_ydiff))},
                {"fdc.centroid_best", centroid_best}};
  return fv;
}

FeatureVector dispersion_features(const Observation& obs, const std::vector<double>& quantiles) {
  obs.validate();
  FeatureVector fv = make(obs);
  const Eigen::Index m = obs.population();
  const bool enough = m >= 10;
  Matrix D;
  std::vector<Eigen::Index> order;
  double all_mean = 0.0;
  if (enough) {
    D = distance_matrix(obs.X);
    order = order_by_y(obs.y);
    all_mean = mean_pairwise(D, order);
  }
  for (double q : quantiles) {
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("dispersion quantile must lie in (0, 1]");
    const std::string tag = percent_tag(q);
    Feature ratio, diff;
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(m) - 1e-9));
    if (enough && k >= 2) {
      const std::vector<Eigen::Index> top(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(k, order.size())));
      const double top_mean = mean_pairwise(D, top);
      diff = top_mean - all_mean;
      if (all_mean > 0.0) ratio = top_mean / all_mean;
    }
    fv.entries.push_back({"disp.ratio_q" + tag, ratio});
    fv.entries.push_back({"disp.diff_q" + tag, diff});
  }
  return fv;
}

std::vector<double> ic_epsilon_grid() {
  std::vector<double> grid{0.0};
  for (int k = 0; k < 15; ++k) grid.push_back(std::pow(10.0, -5.0 + 10.0 * k / 14.0));
  return grid;
}

FeatureVector information_content(const Observation& obs) {
  obs.validate();
  FeatureVector fv = make(obs);
  const std::vector<std::string> names = {"ic.h_max", "ic.eps_s", "ic.m0", "ic.eps_half", "ic.neutral0"};
  auto all_missing = [&] {
    for (const auto& n : names) fv.entries.push_back({n, std::nullopt});
    return fv;
  };
  const Eigen::Index m = obs.population();
  if (m < 10) return all_missing();

  // Nearest-neighbour tour from the best sample, ties to the lower index.
  std::vector<bool> visited(static_cast<std::size_t>(m), false);
  std::vector<Eigen::Index> tour{argmin_first(obs.y)};
  visited[tour[0]] = true;
  for (Eigen::Index step = 1; step < m; ++step) {
    const Eigen::Index cur = tour.back();
    Eigen::Index next = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (visited[j]) continue;
      const double dj = distance(obs.X, cur, j);
      if (dj < best) {
        best = dj;
        next = j;
      }
    }
    if (best == 0.0) return all_missing();
    visited[next] = true;
    tour.push_back(next);
  }

  const Vector yn = minmax_normalized(obs.y);
  std::vector<double> diffs(static_cast<std::size_t>(m - 1));
  for (std::size_t k = 0; k + 1 < tour.size(); ++k) diffs[k] = yn[tour[k + 1]] - yn[tour[k]];

  const auto grid = ic_epsilon_grid();
  double h_max = 0.0;
  Feature eps_s, eps_half;
  const std::vector<int> s0 = symbols(diffs, 0.0);
  const double m0 = partial_information(s0);
  for (double eps : grid) {
    const std::vector<int> s = symbols(diffs, eps);
    const double h = entropy_unequal_pairs(s);
    h_max = std::max(h_max, h);
    if (!eps_s && h < 0.05) eps_s = eps;
    if (!eps_half && m0 > 0.0 && partial_information(s) < 0.5 * m0) eps_half = eps;
  }
  const double neutral = static_cast<double>(std::count(s0.begin(), s0.end(), 0)) / static_cast<double>(s0.size());
  fv.entries = {{names[0], h_max}, {names[1], eps_s}, {names[2], m0}, {names[3], eps_half}, {names[4], neutral}};
  return fv;
}

FeatureVector nbc_features(const Observation& obs) {
  obs.validate();
  FeatureVector fv = make(obs);
  const Eigen::Index m = obs.population();
  const Matrix D = distance_matrix(obs.X);
  const auto order = order_by_y(obs.y);
  std::vector<double> rank(static_cast<std::size_t>(m));
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<double>(r);

  std::vector<double> nn_all(static_cast<std::size_t>(m)), nn, nb, ratio;
  bool zero_nn = false;
  for (Eigen::Index i = 0; i < m; ++i) {
    double nn_i = std::numeric_limits<double>::infinity();
    double nb_i = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      nn_i = std::min(nn_i, D(i, j));
      if (rank[j] < rank[i]) nb_i = std::min(nb_i, D(i, j));
    }
    nn_all[i] = nn_i;
    if (rank[i] == 0.0) continue;
    nn.push_back(nn_i);
    nb.push_back(nb_i);
    if (nn_i == 0.0) zero_nn = true;
    else ratio.push_back(nb_i / nn_i);
  }
  Feature mean_ratio, ratio_std;
  const double nn_mean = mean_of(nn);
  if (nn_mean > 0.0) mean_ratio = mean_of(nb) / nn_mean;
  if (!zero_nn) ratio_std = std_of(ratio);
  fv.entries = {{"nbc.nb_nn_ratio", mean_ratio}, {"nbc.ratio_std", ratio_std}, {"nbc.nn_rank_corr", pearson(nn_all, rank)}};
  return fv;
}

FeatureVector distribution_features(const Vector& y) {
  FeatureVector fv;
  fv.m = y.size();
  const std::vector<std::string> names = {"dist.skewness", "dist.kurtosis", "dist.peaks"};
  if (y.size() < 4 || !y.allFinite()) {
    for (const auto& n : names) fv.entries.push_back({n, std::nullopt});
    return fv;
  }
  const double lo = y.minCoeff(), hi = y.maxCoeff();
  if (lo == hi) {
    fv.entries = {{names[0], std::nullopt}, {names[1], std::nullopt}, {names[2], 1.0}};
    return fv;
  }
  const double mu = y.mean();
  const auto c = (y.array() - mu);
  const double m2 = c.square().mean(), m3 = c.cube().mean(), m4 = c.square().square().mean();

  constexpr int kBins = 64;
  constexpr double kBandwidth = 2.0;
  std::array<double, kBins> hist{}, smooth{};
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const int b = std::min(kBins - 1, static_cast<int>(std::floor((y[i] - lo) / (hi - lo) * kBins)));
    hist[b] += 1.0;
  }
  for (int b = 0; b < kBins; ++b) {
    for (int k = 0; k < kBins; ++k) {
      const double u = (b - k) / kBandwidth;
      smooth[b] += hist[k] * std::exp(-0.5 * u * u);
    }
  }
  const double top = *std::max_element(smooth.begin(), smooth.end());
  int peaks = 0;
  for (int b = 0; b < kBins; ++b) {
    const bool rises = b == 0 || smooth[b] > smooth[b - 1];
    const bool holds = b == kBins - 1 || smooth[b] >= smooth[b + 1];
    if (rises && holds && smooth[b] >= 0.1 * top) ++peaks;
  }
  fv.entries = {{names[0], finite_or_missing(m3 / std::pow(m2, 1.5))},
                {names[1], finite_or_missing(m4 / (m2 * m2) - 3.0)},
                {names[2], static_cast<double>(peaks)}};
  return fv;
}

FeatureVector meta_model_features(const Observation& obs) {
  obs.validate();
  FeatureVector fv = make(obs);
  const Eigen::Index m = obs.population(), d = obs.dimension();
  const Matrix lin = design(obs.X, false, false);
  const auto lin_fit = fit(lin, obs.y);
  Feature intercept, coef_ratio;
  if (lin_fit) {
    intercept = finite_or_missing(lin_fit->coef[0]);
    const Vector a = lin_fit->coef.tail(d).cwiseAbs();
    if (a.minCoeff() > 0.0) coef_ratio = finite_or_missing(a.maxCoeff() / a.minCoeff());
  }
  const Matrix lin_int = design(obs.X, false, true);
  const Matrix quad = design(obs.X, true, false);
  const Matrix quad_int = design(obs.X, true, true);
  const auto quad_fit = fit(quad, obs.y);
  Feature quad_cond;
  if (quad_fit) {
    const Vector a = quad_fit->coef.tail(d).cwiseAbs();
    if (a.minCoeff() > 0.0) quad_cond = finite_or_missing(a.maxCoeff() / a.minCoeff());
  }
  fv.entries = {{"meta.lin_adj_r2", adjusted(lin_fit, m, lin.cols())},
                {"meta.lin_intercept", intercept},
                {"meta.lin_coef_ratio", coef_ratio},
                {"meta.linint_adj_r2", adjusted(fit(lin_int, obs.y), m, lin_int.cols())},
                {"meta.quad_adj_r2", adjusted(quad_fit, m, quad.cols())},
                {"meta.quad_cond", quad_cond},
                {"meta.quadint_adj_r2", adjusted(fit(quad_int, obs.y), m, quad_int.cols())}};
  return fv;
}

FeatureVector level_set_features(const Observation& obs) {
  obs.validate();
  FeatureVector fv = make(obs);
  const Eigen::Index m = obs.population();
  const auto order = order_by_y(obs.y);
  for (double q : {0.1, 0.25, 0.5}) {
    const std::string tag = percent_tag(q);
    Feature lda, qda, ratio;
    const double threshold = obs.y[order[static_cast<std::size_t>(std::floor(q * static_cast<double>(m - 1)))]];
    std::vector<int> label(static_cast<std::size_t>(m));
    int below = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      label[i] = obs.y[i] <= threshold ? 1 : 0;
      below += label[i];
    }
    if (m >= 10 && below >= 2 && m - below >= 2) {
      const auto [e_lda, e_qda] = discriminant_cv(obs.X, label);
      lda = e_lda;
      qda = e_qda;
      if (e_qda > 0.0) ratio = e_lda / e_qda;
    }
    fv.entries.push_back({"ls.lda_mmce_q" + tag, lda});
    fv.entries.push_back({"ls.qda_mmce_q" + tag, qda});
    fv.entries.push_back({"ls.lda_qda_ratio_q" + tag, ratio});
  }
  return fv;
}

FeatureVector convexity_features(const Observation& obs, problems::Problem& problem, std::uint64_t seed,
                                 const ProbeOptions& opts) {
  obs.validate();
  FeatureVector fv = make(obs);
  const Eigen::Index m = obs.population(), d = obs.dimension();
  Rng rng(seed);
  Matrix probes(opts.convexity_pairs, d);
  Vector linear(opts.convexity_pairs);
  for (int k = 0; k < opts.convexity_pairs; ++k) {
    const auto i = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(m)));
    auto j = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(m - 1)));
    if (j >= i) ++j;
    const double lambda = rng.uniform();
    probes.row(k) = lambda * obs.X.row(i) + (1.0 - lambda) * obs.X.row(j);
    linear[k] = lambda * obs.y[i] + (1.0 - lambda) * obs.y[j];
  }
  const Vector y = problem.evaluate_batch(probes);
  const Vector delta = y - linear;
  const auto n = static_cast<double>(opts.convexity_pairs);
  fv.entries = {{"conv.convex_p", (delta.array() < -opts.convexity_eps).cast<double>().sum() / n},
                {"conv.linear_p", (delta.array().abs() <= opts.convexity_eps).cast<double>().sum() / n},
                {"conv.lin_dev_orig", finite_or_missing(delta.mean())},
                {"conv.lin_dev_abs", finite_or_missing(delta.cwiseAbs().mean())}};
  return fv;
}

FeatureVector local_search_features(const Observation& obs, problems::Problem& problem, const ProbeOptions& opts) {
  obs.validate();
  FeatureVector fv = make(obs);
  const Eigen::Index d = obs.dimension();
  const auto order = order_by_y(obs.y);
  const auto starts = std::min<std::size_t>(static_cast<std::size_t>(opts.local_starts), order.size());
  const Vector width = obs.ub - obs.lb;

  Matrix ends(static_cast<Eigen::Index>(starts), d);
  Vector end_y(static_cast<Eigen::Index>(starts));
  double fe_total = 0.0;
  for (std::size_t s = 0; s < starts; ++s) {
    // Compass search: probe +-step on every axis, move to the best improving
    // probe, otherwise halve the step.
    Vector x = obs.X.row(order[s]).transpose();
    double fx = obs.y[order[s]];
    double step = 0.1;
    long used = 0;
    while (used + 2 * d <= opts.local_budget_per_start && step > 1e-6) {
      Matrix probes(2 * d, d);
      for (Eigen::Index k = 0; k < d; ++k) {
        for (int sign : {0, 1}) {
          Vector p = x;
          p[k] += (sign == 0 ? -1.0 : 1.0) * step * width[k];
          p[k] = std::clamp(p[k], obs.lb[k], obs.ub[k]);
          probes.row(2 * k + sign) = p.transpose();
        }
      }
      const Vector fy = problem.evaluate_batch(probes);
      used += 2 * d;
      Eigen::Index arg;
      const double best = fy.minCoeff(&arg);
      if (best < fx) {
        fx = best;
        x = probes.row(arg).transpose();
      } else {
        step *= 0.5;
      }
    }
    ends.row(static_cast<Eigen::Index>(s)) = x.transpose();
    end_y[static_cast<Eigen::Index>(s)] = fx;
    fe_total += static_cast<double>(used);
  }

  // Single-link clustering of end points at 1% of the box diagonal.
  const double radius = 0.01 * box_diagonal(obs);
  std::vector<std::size_t> cluster(starts);
  std::iota(cluster.begin(), cluster.end(), std::size_t{0});
  auto root = [&](std::size_t a) {
    while (cluster[a] != a) a = cluster[a] = cluster[cluster[a]];
    return a;
  };
  for (std::size_t a = 0; a < starts; ++a) {
    for (std::size_t b = a + 1; b < starts; ++b) {
      if (distance(ends, static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) <= radius) cluster[root(b)] = root(a);
    }
  }
  std::vector<double> size(starts, 0.0);
  for (std::size_t a = 0; a < starts; ++a) size[root(a)] += 1.0;
  const double n_clusters = static_cast<double>(std::count_if(size.begin(), size.end(), [](double v) { return v > 0; }));
  const double n = static_cast<double>(starts);
  const double mean_end = end_y.mean();
  fv.entries = {{"lsearch.n_local_optima", n_clusters / n},
                {"lsearch.best2mean_contrast", mean_end != 0.0 ? finite_or_missing(end_y.minCoeff() / mean_end) : std::nullopt},
                {"lsearch.basin_size_max", *std::max_element(size.begin(), size.end()) / n},
                {"lsearch.fe_mean", fe_total / n}};
  return fv;
}

FeatureVector baseline_suite(const Observation& obs) {
  FeatureVector fv = fdc_features(obs);
  fv.append(dispersion_features(obs));
  fv.append(information_content(obs));
  fv.append(nbc_features(obs));
  fv.append(distribution_features(obs.y));
  return fv;
}

FeatureVector full_suite(const Observation& obs) {
  FeatureVector fv = baseline_suite(obs);
  fv.append(meta_model_features(obs));
  fv.append(level_set_features(obs));
  return fv;
}

std::vector<std::string> full_suite_names() {
  // Any observation yields the same names; a tiny fixed one keeps this cheap.
  Observation obs{Matrix(4, 1), Vector(4), Vector::Constant(1, 0.0), Vector::Constant(1, 1.0)};
  for (Eigen::Index i = 0; i < 4; ++i) {
    obs.X(i, 0) = 0.25 * static_cast<double>(i);
    obs.y[i] = static_cast<double>(i * i);
  }
  return full_suite(obs).names();
}

std::size_t baseline_width() { return 6 + 2 * kDefaultQuantiles.size() + 5 + 3 + 3; }

std::string to_csv(const std::vector<FeatureVector>& rows) {
  std::ostringstream os;
  if (rows.empty()) return {};
  const auto names = rows.front().names();
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
  os << '\n';
  char buf[32];
  for (const auto& row : rows) {
    if (row.names() != names) throw Error("feature rows disagree on their columns");
    for (std::size_t i = 0; i < row.entries.size(); ++i) {
      if (i) os << ',';
      if (row.entries[i].value) {
        std::snprintf(buf, sizeof buf, "%.17g", *row.entries[i].value);
        os << buf;
      } else {
        os << "NA";
      }
    }
    os << '\n';
  }
  return os.str();
}

Vector handcrafted_state(const RunContext& ctx) {
  const Observation& obs = ctx.population;
  obs.validate();
  if (ctx.horizon < 1) throw ConfigError("handcrafted_state needs a positive horizon");
  if (ctx.best_history.empty()) throw ConfigError("handcrafted_state needs the initial best value");
  const Eigen::Index m = obs.population();
  const double diag = box_diagonal(obs);
  const double T = static_cast<double>(ctx.horizon);
  const auto& hist = ctx.best_history;
  const double best0 = hist.front(), best_t = hist.back();

  Vector s(8);
  s[0] = std::clamp(static_cast<double>(ctx.step) / T, 0.0, 1.0);
  s[1] = std::clamp((best0 - best_t) / std::max(std::abs(best0), 1e-12), -1.0, 1.0);

  const Vector yn = minmax_normalized(obs.y);
  s[2] = std::sqrt((yn.array() - yn.mean()).square().mean());

  const Eigen::Index best = argmin_first(obs.y);
  double to_best = 0.0, pairwise = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    to_best += distance(obs.X, i, best);
    for (Eigen::Index j = i + 1; j < m; ++j) pairwise += distance(obs.X, i, j);
  }
  s[3] = to_best / static_cast<double>(m) / diag;
  s[4] = pairwise / (static_cast<double>(m * (m - 1)) / 2.0) / diag;

  std::size_t since = 0;
  for (std::size_t k = hist.size() - 1; k > 0 && !(hist[k] < hist[k - 1]); --k) ++since;
  s[5] = std::clamp(static_cast<double>(since) / T, 0.0, 1.0);

  double last_gain = 0.0;
  if (hist.size() >= 2) {
    const double prev = hist[hist.size() - 2];
    last_gain = (prev - best_t) / std::max(std::abs(prev), 1e-12);
  }
  s[6] = std::clamp(last_gain, 0.0, 1.0);
  s[7] = (obs.X.colwise().mean() - obs.X.row(best)).norm() / diag;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (!std::isfinite(s[k])) s[k] = 0.0;
  }
  return s;
}

std::vector<std::string> handcrafted_names() {
  return {"hc.budget", "hc.progress", "hc.y_std", "hc.dist_best", "hc.dist_pairwise",
          "hc.stagnation", "hc.last_gain", "hc.centroid_best"};
}

}  // namespace ltk::ela

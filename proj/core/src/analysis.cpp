#include "ltk/analysis.hpp"

#include "ltk/ela.hpp"
#include "ltk/error.hpp"
#include "ltk/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace ltk::analysis {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Contiguous row ranges sharing one trajectory id; the whole series when ids are absent.
std::vector<std::pair<Eigen::Index, Eigen::Index>> segments(const FeatureSeries& s) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  const Eigen::Index n = s.rows.rows();
  if (s.trajectory.empty()) {
    out.emplace_back(0, n);
    return out;
  }
  Eigen::Index start = 0;
  for (Eigen::Index i = 1; i <= n; ++i) {
    if (i == n || s.trajectory[i] != s.trajectory[i - 1]) {
      out.emplace_back(start, i);
      start = i;
    }
  }
  return out;
}

}  // namespace

PcaResult pca(const Matrix& rows, int out_dim) {
  const Eigen::Index n = rows.rows(), k = rows.cols();
  if (out_dim < 1 || out_dim > k) throw ConfigError("PCA output dimension must lie in [1, " + std::to_string(k) + "]");
  if (n <= out_dim) throw ConfigError("PCA needs more rows than output dimensions");
  PcaResult res;
  res.mean = rows.colwise().mean().transpose();
  const Matrix centred = rows.rowwise() - res.mean.transpose();
  const Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(n - 1);
  if (cov.trace() <= 0.0) throw ConfigError("PCA input has zero variance");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  res.components.resize(k, out_dim);
  res.variances.resize(out_dim);
  for (int c = 0; c < out_dim; ++c) {
    // Eigen returns ascending eigenvalues.
    const Eigen::Index src = k - 1 - c;
    Vector v = eig.eigenvectors().col(src);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    res.components.col(c) = v;
    res.variances[c] = std::max(0.0, eig.eigenvalues()[src]);
  }
  res.projected = centred * res.components;
  return res;
}

Matrix pca_project(const Matrix& rows, int out_dim) { return pca(rows, out_dim).projected; }

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) return std::nullopt;
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  if (*amin == *amax || *bmin == *bmax) return std::nullopt;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::size_t CorrelationMatrix::strong_count(double threshold) const {
  std::size_t n = 0;
  for (const auto& row : r) {
    for (const auto& v : row) n += v && std::abs(*v) >= threshold;
  }
  return n;
}

std::string CorrelationMatrix::to_csv() const {
  std::ostringstream os;
  os << "feature";
  for (const auto& c : col_names) os << ',' << c;
  os << '\n';
  for (std::size_t j = 0; j < row_names.size(); ++j) {
    os << row_names[j];
    for (const auto& v : r[j]) os << ',' << (v ? fmt(*v) : "NA");
    os << '\n';
  }
  return os.str();
}

CorrelationMatrix pearson_matrix(const FeatureSeries& a, const FeatureSeries& b) {
  if (a.rows.rows() != b.rows.rows()) throw ConfigError("correlated series must have equal row counts");
  if (!a.trajectory.empty() && !b.trajectory.empty() && a.trajectory != b.trajectory) {
    throw ConfigError("correlated series disagree on trajectory ids");
  }
  const FeatureSeries& seg_src = a.trajectory.empty() ? b : a;
  const auto segs = segments(seg_src);
  CorrelationMatrix cm;
  cm.row_names = a.names;
  cm.col_names = b.names;
  const auto ka = static_cast<std::size_t>(a.rows.cols()), kb = static_cast<std::size_t>(b.rows.cols());
  cm.r.assign(ka, std::vector<std::optional<double>>(kb));
  cm.samples.assign(ka, std::vector<int>(kb, 0));
  // Column-major copies make per-segment column spans contiguous.
  const Eigen::MatrixXd A = a.rows, B = b.rows;
  const Eigen::Index n = A.rows();
  for (std::size_t j = 0; j < ka; ++j) {
    for (std::size_t i = 0; i < kb; ++i) {
      double sum = 0.0;
      int count = 0;
      for (const auto& [lo, hi] : segs) {
        const std::span<const double> ca(A.data() + static_cast<Eigen::Index>(j) * n + lo, static_cast<std::size_t>(hi - lo));
        const std::span<const double> cb(B.data() + static_cast<Eigen::Index>(i) * n + lo, static_cast<std::size_t>(hi - lo));
        if (const auto r = pearson(ca, cb)) {
          sum += *r;
          ++count;
        }
      }
      cm.samples[j][i] = count;
      if (count > 0) cm.r[j][i] = sum / count;
    }
  }
  return cm;
}

std::string_view bench_name(BenchExtractor e) {
  switch (e) {
    case BenchExtractor::neural: return "neural";
    case BenchExtractor::ela: return "ela";
    case BenchExtractor::handcrafted: return "handcrafted";
  }
  return "?";
}

BenchExtractor parse_bench(std::string_view name) {
  if (name == "neural" || name == "neurela") return BenchExtractor::neural;
  if (name == "ela") return BenchExtractor::ela;
  if (name == "handcrafted") return BenchExtractor::handcrafted;
  throw ConfigError("unknown extractor '" + std::string(name) + "'");
}

BenchResult bench_walltime(BenchExtractor extractor, Eigen::Index m, Eigen::Index d, int runs, std::uint64_t seed,
                           const analyzer::AnalyzerConfig& cfg, const BenchHook& hook) {
  if (runs < 10) throw ConfigError("bench_walltime needs at least 10 runs");
  Rng rng(seed);
  const auto emit = [&](std::string_view e) {
    if (hook) hook(e);
  };

  std::optional<analyzer::Network> net;
  if (extractor == BenchExtractor::neural) net = analyzer::random_network(cfg, rng);
  emit("construct");

  std::vector<double> times;
  volatile double sink = 0.0;
  for (int r = 0; r < runs; ++r) {
    Observation obs{Matrix(m, d), Vector(m), Vector::Constant(d, -5.0), Vector::Constant(d, 5.0)};
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index k = 0; k < d; ++k) obs.X(i, k) = rng.uniform(-5.0, 5.0);
      obs.y[i] = rng.uniform(0.0, 100.0);
    }
    const std::vector<double> history{obs.y.minCoeff()};
    emit("begin");
    const auto t0 = std::chrono::steady_clock::now();
    switch (extractor) {
      case BenchExtractor::neural:
        sink = sink + analyzer::analyze(*net, obs).pop[0];
        break;
      case BenchExtractor::ela:
        sink = sink + static_cast<double>(ela::full_suite(obs).size());
        break;
      case BenchExtractor::handcrafted:
        sink = sink + ela::handcrafted_state({0, 1, history, obs})[0];
        break;
    }
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    emit("end");
  }
  BenchResult res;
  res.runs = runs;
  double total = 0.0;
  for (double t : times) total += t;
  res.mean = total / static_cast<double>(runs);
  std::sort(times.begin(), times.end());
  res.p50 = quantile_sorted(times, 0.5);
  res.p95 = quantile_sorted(times, 0.95);
  return res;
}

std::string bench_table_csv(const std::vector<BenchExtractor>& extractors, const std::vector<BenchCell>& cells,
                            const std::vector<std::vector<BenchResult>>& results) {
  std::ostringstream os;
  os << "extractor";
  for (const auto& c : cells) os << ",m=" << c.m << " d=" << c.d;
  os << '\n';
  for (std::size_t e = 0; e < extractors.size(); ++e) {
    os << bench_name(extractors[e]);
    for (const auto& r : results[e]) os << ',' << fmt(r.mean);
    os << '\n';
  }
  return os.str();
}

std::string_view step_label(double mean_F) { return mean_F > kExplorationThreshold ? "exploration" : "exploitation"; }

Rq3Result rq3_pipeline(const metabbo::TaskSpec& task, const metabbo::FeatureExtractor& policy_extractor,
                       const metabbo::MetaPolicy& policy, const analyzer::Network& net,
                       const std::vector<problems::ProblemSpec>& problems, int runs, std::uint64_t seed) {
  if (task.optimizer != optimizers::Kind::de) throw ConfigError("the exploration study needs a DE task");
  Rq3Result res;
  res.neural.source = "neural";
  res.ela.source = "ela";
  std::vector<Vector> neural_rows, ela_rows;
  const int trajectories = static_cast<int>(problems.size()) * runs;
  for (int trajectory = 0; trajectory < trajectories; ++trajectory) {
    const auto p = static_cast<std::size_t>(trajectory / runs);
    const auto run = static_cast<std::uint64_t>(trajectory % runs);
    const auto observer = [&](int, const Observation& obs, const Matrix& config) {
      const double mean_F = config.col(0).mean();
      const std::string label(step_label(mean_F));
      (label == "exploration" ? res.exploration : res.exploitation) += 1;
      neural_rows.push_back(analyzer::analyze(net, obs).pop);
      const auto fv = ela::baseline_suite(obs);
      if (res.ela.names.empty()) res.ela.names = fv.names();
      res.ela.imputed += fv.missing_count();
      ela_rows.push_back(fv.imputed(0.0));
      for (auto* s : {&res.neural, &res.ela}) {
        s->labels.push_back(label);
        s->trajectory.push_back(trajectory);
      }
    };
    metabbo::run_episode(task, policy_extractor, policy, problems[p], mix_seed({seed, p, run}), observer);
  }
  for (int k = 0; k < net.config.hidden_dim; ++k) res.neural.names.push_back("neural." + std::to_string(k));
  const auto stack = [](const std::vector<Vector>& rows) {
    Matrix M(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) M.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return M;
  };
  res.neural.rows = stack(neural_rows);
  res.ela.rows = stack(ela_rows);
  res.neural_2d = pca_project(res.neural.rows, 2);
  res.ela_2d = pca_project(res.ela.rows, 2);
  return res;
}

std::string point_cloud_csv(const Matrix& points, const FeatureSeries& series) {
  std::ostringstream os;
  os << "x,y,label,run,step\n";
  std::map<int, int> step_in_run;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const int run = series.trajectory.empty() ? 0 : series.trajectory[i];
    os << fmt(points(i, 0)) << ',' << fmt(points.cols() > 1 ? points(i, 1) : 0.0) << ','
       << (series.labels.empty() ? "" : series.labels[i]) << ',' << run << ',' << step_in_run[run]++ << '\n';
  }
  return os.str();
}

}  // namespace ltk::analysis

#pragma once

// Scalar-loop reference for the analyser forward pass. Plain nested vectors
// and explicit index loops only; shares nothing with the implementation
// except the parameter containers it reads weights from.

#include "ltk/analyzer.hpp"

#include <cmath>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const ltk::Matrix& m) {
  Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  }
  return out;
}

/// x (n x a) times w (a x b), w read element by element.
inline Mat mul(const Mat& x, const ltk::Matrix& w) {
  const std::size_t n = x.size(), a = static_cast<std::size_t>(w.rows()), b = static_cast<std::size_t>(w.cols());
  Mat out(n, std::vector<double>(b, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < b; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < a; ++j) s += x[i][j] * w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
      out[i][k] = s;
    }
  }
  return out;
}

inline Mat layer_norm(const Mat& x, const ltk::Vector& gain, const ltk::Vector& bias, double eps = 1e-5) {
  Mat out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t h = x[i].size();
    double mean = 0.0;
    for (double v : x[i]) mean += v;
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (double v : x[i]) var += (v - mean) * (v - mean);
    var /= static_cast<double>(h);
    for (std::size_t k = 0; k < h; ++k) {
      out[i][k] = (x[i][k] - mean) / std::sqrt(var + eps) * gain[static_cast<Eigen::Index>(k)] +
                  bias[static_cast<Eigen::Index>(k)];
    }
  }
  return out;
}

inline Mat self_attention(const Mat& x, const ltk::analyzer::AttnParams& p, int heads) {
  const std::size_t n = x.size(), h = x[0].size(), hd = h / static_cast<std::size_t>(heads);
  const Mat q = mul(x, p.wq), k = mul(x, p.wk), v = mul(x, p.wv);
  Mat concat(n, std::vector<double>(h, 0.0));
  for (std::size_t head = 0; head < static_cast<std::size_t>(heads); ++head) {
    const std::size_t c0 = head * hd;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> score(n);
      double top = -INFINITY;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += q[i][c0 + c] * k[j][c0 + c];
        score[j] = s / std::sqrt(static_cast<double>(hd));
        top = std::max(top, score[j]);
      }
      double z = 0.0;
      for (auto& s : score) {
        s = std::exp(s - top);
        z += s;
      }
      for (std::size_t c = 0; c < hd; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += score[j] / z * v[j][c0 + c];
        concat[i][c0 + c] = acc;
      }
    }
  }
  return mul(concat, p.wo);
}

inline Mat attn_block(const Mat& x, const ltk::analyzer::AttnParams& p, int heads) {
  const Mat a = self_attention(x, p, heads);
  Mat r = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t k = 0; k < x[i].size(); ++k) r[i][k] += a[i][k];
  }
  const Mat g = layer_norm(r, p.ln1_gain, p.ln1_bias);
  Mat hid = mul(g, p.ff1_w);
  for (auto& row : hid) {
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = std::max(0.0, row[k] + p.ff1_b[static_cast<Eigen::Index>(k)]);
  }
  Mat o = mul(hid, p.ff2_w);
  for (std::size_t i = 0; i < o.size(); ++i) {
    for (std::size_t k = 0; k < o[i].size(); ++k) o[i][k] += p.ff2_b[static_cast<Eigen::Index>(k)] + g[i][k];
  }
  return layer_norm(o, p.ln2_gain, p.ln2_bias);
}

struct Features {
  Mat indiv;                // m x h
  std::vector<double> pop;  // h
};

/// emb[j][i][c]: dimension j, candidate i, channel c.
inline Features ts_attn(std::vector<Mat> emb, const ltk::analyzer::Network& net) {
  const std::size_t d = emb.size(), m = emb[0].size(), h = emb[0][0].size();
  const int heads = net.config.num_heads;
  std::vector<Mat> cand(m, Mat(d, std::vector<double>(h)));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (l > 0) {
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < m; ++i) emb[j][i] = cand[i][j];
      }
    }
    for (std::size_t j = 0; j < d; ++j) emb[j] = attn_block(emb[j], net.layers[l].inter, heads);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t c = 0; c < h; ++c) {
          const double freq = std::pow(10000.0, static_cast<double>(c - c % 2) / static_cast<double>(h));
          const double angle = static_cast<double>(j) / freq;
          cand[i][j][c] = emb[j][i][c] + (c % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
      }
      cand[i] = attn_block(cand[i], net.layers[l].intra, heads);
    }
  }
  Features f;
  f.indiv.assign(m, std::vector<double>(h, 0.0));
  f.pop.assign(h, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < h; ++c) {
      for (std::size_t j = 0; j < d; ++j) f.indiv[i][c] += cand[i][j][c];
      f.indiv[i][c] /= static_cast<double>(d);
      f.pop[c] += f.indiv[i][c] / static_cast<double>(m);
    }
  }
  return f;
}

/// PIE plus embedding: channel 0 is x scaled to the box, channel 1 is min-max y
/// (0.5 when y is constant), both projected by w_emb.
inline std::vector<Mat> embed(const ltk::Observation& obs, const ltk::Matrix& w_emb) {
  const auto m = static_cast<std::size_t>(obs.X.rows()), d = static_cast<std::size_t>(obs.X.cols());
  const auto h = static_cast<std::size_t>(w_emb.cols());
  double lo = obs.y[0], hi = obs.y[0];
  for (std::size_t i = 0; i < m; ++i) {
    lo = std::min(lo, obs.y[static_cast<Eigen::Index>(i)]);
    hi = std::max(hi, obs.y[static_cast<Eigen::Index>(i)]);
  }
  std::vector<Mat> out(d, Mat(m, std::vector<double>(h)));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      const double xn = (obs.X(ii, jj) - obs.lb[jj]) / (obs.ub[jj] - obs.lb[jj]);
      const double yn = hi > lo ? (obs.y[ii] - lo) / (hi - lo) : 0.5;
      for (std::size_t c = 0; c < h; ++c) {
        out[j][i][c] = xn * w_emb(0, static_cast<Eigen::Index>(c)) + yn * w_emb(1, static_cast<Eigen::Index>(c));
      }
    }
  }
  return out;
}

}  // namespace oracle

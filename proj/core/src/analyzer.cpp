#include "ltk/analyzer.hpp"

#include "ltk/error.hpp"

#include <cmath>
#include <numeric>

namespace ltk::analyzer {

void AnalyzerConfig::validate() const {
  if (hidden_dim < 2 || num_heads < 1 || num_layers < 1 || ff_inner_dim < 1) {
    throw ConfigError("analyzer sizes must be positive (hidden_dim >= 2)");
  }
  if (hidden_dim % 2 != 0) throw ConfigError("hidden_dim must be even for the positional encoding");
  if (hidden_dim % num_heads != 0) {
    throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
}

Tensor3 Tensor3::swap_leading() const {
  Tensor3 out(n1_, n0_, n2_);
  for (Eigen::Index a = 0; a < n0_; ++a) {
    for (Eigen::Index b = 0; b < n1_; ++b) {
      const double* src = data_.data() + idx(a, b, 0);
      std::copy(src, src + n2_, &out(b, a, 0));
    }
  }
  return out;
}

std::size_t LayoutEntry::size() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t acc, Eigen::Index s) { return acc * static_cast<std::size_t>(s); });
}

std::vector<LayoutEntry> parameter_layout(const AnalyzerConfig& cfg) {
  cfg.validate();
  const Eigen::Index h = cfg.hidden_dim;
  const Eigen::Index ff = cfg.ff_inner_dim;
  std::vector<LayoutEntry> layout;
  layout.push_back({"w_emb", {2, h}});
  for (int l = 0; l < cfg.num_layers; ++l) {
    for (const char* block : {"inter", "intra"}) {
      const std::string prefix = "layer" + std::to_string(l) + "." + block + ".";
      layout.push_back({prefix + "wq", {h, h}});
      layout.push_back({prefix + "wk", {h, h}});
      layout.push_back({prefix + "wv", {h, h}});
      layout.push_back({prefix + "wo", {h, h}});
      layout.push_back({prefix + "ln1.gain", {h}});
      layout.push_back({prefix + "ln1.bias", {h}});
      layout.push_back({prefix + "ff1.weight", {h, ff}});
      layout.push_back({prefix + "ff1.bias", {ff}});
      layout.push_back({prefix + "ff2.weight", {ff, h}});
      layout.push_back({prefix + "ff2.bias", {h}});
      layout.push_back({prefix + "ln2.gain", {h}});
      layout.push_back({prefix + "ln2.bias", {h}});
    }
  }
  return layout;
}

std::size_t parameter_count(const AnalyzerConfig& cfg) {
  cfg.validate();
  const std::size_t h = static_cast<std::size_t>(cfg.hidden_dim);
  const std::size_t ff = static_cast<std::size_t>(cfg.ff_inner_dim);
  const std::size_t l = static_cast<std::size_t>(cfg.num_layers);
  return 2 * h + 2 * l * (4 * h * h + 2 * h * ff + ff + 5 * h);
}

namespace {

// Sequential reader/writer over the flat parameter vector in layout order.
class Cursor {
 public:
  explicit Cursor(std::span<const double> v) : v_(v) {}

  Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    std::copy_n(v_.data() + pos_, rows * cols, m.data());
    pos_ += static_cast<std::size_t>(rows * cols);
    return m;
  }
  Vector vector(Eigen::Index n) {
    Vector out(n);
    std::copy_n(v_.data() + pos_, n, out.data());
    pos_ += static_cast<std::size_t>(n);
    return out;
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const double> v_;
  std::size_t pos_ = 0;
};

void append(std::vector<double>& out, const Matrix& m) { out.insert(out.end(), m.data(), m.data() + m.size()); }
void append(std::vector<double>& out, const Vector& v) { out.insert(out.end(), v.data(), v.data() + v.size()); }

AttnParams read_block(Cursor& c, Eigen::Index h, Eigen::Index ff) {
  AttnParams p;
  p.wq = c.matrix(h, h);
  p.wk = c.matrix(h, h);
  p.wv = c.matrix(h, h);
  p.wo = c.matrix(h, h);
  p.ln1_gain = c.vector(h);
  p.ln1_bias = c.vector(h);
  p.ff1_w = c.matrix(h, ff);
  p.ff1_b = c.vector(ff);
  p.ff2_w = c.matrix(ff, h);
  p.ff2_b = c.vector(h);
  p.ln2_gain = c.vector(h);
  p.ln2_bias = c.vector(h);
  return p;
}

void write_block(std::vector<double>& out, const AttnParams& p) {
  append(out, p.wq);
  append(out, p.wk);
  append(out, p.wv);
  append(out, p.wo);
  append(out, p.ln1_gain);
  append(out, p.ln1_bias);
  append(out, p.ff1_w);
  append(out, p.ff1_b);
  append(out, p.ff2_w);
  append(out, p.ff2_b);
  append(out, p.ln2_gain);
  append(out, p.ln2_bias);
}

}  // namespace

ParamVector encode_params(const Network& net) {
  ParamVector pv;
  pv.layout = parameter_layout(net.config);
  pv.values.reserve(parameter_count(net.config));
  append(pv.values, net.w_emb);
  for (const auto& layer : net.layers) {
    write_block(pv.values, layer.inter);
    write_block(pv.values, layer.intra);
  }
  if (pv.values.size() != parameter_count(net.config)) {
    throw ConfigError("network tensors do not match its configuration");
  }
  return pv;
}

Network decode_params(std::span<const double> values, const AnalyzerConfig& cfg) {
  const std::size_t expected = parameter_count(cfg);
  if (values.size() != expected) {
    throw ConfigError("parameter vector length mismatch: expected " + std::to_string(expected) + ", got " +
                      std::to_string(values.size()));
  }
  const Eigen::Index h = cfg.hidden_dim;
  const Eigen::Index ff = cfg.ff_inner_dim;
  Cursor c(values);
  Network net;
  net.config = cfg;
  net.w_emb = c.matrix(2, h);
  net.layers.reserve(static_cast<std::size_t>(cfg.num_layers));
  for (int l = 0; l < cfg.num_layers; ++l) {
    TsAttnLayer layer;
    layer.inter = read_block(c, h, ff);
    layer.intra = read_block(c, h, ff);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Network random_network(const AnalyzerConfig& cfg, Rng& rng, double scale) {
  std::vector<double> values(parameter_count(cfg));
  for (double& v : values) v = scale * rng.normal();
  Network net = decode_params(values, cfg);
  for (auto& layer : net.layers) {
    for (AttnParams* p : {&layer.inter, &layer.intra}) {
      p->ln1_gain.array() += 1.0;
      p->ln2_gain.array() += 1.0;
    }
  }
  return net;
}

Tensor3 pie_normalize(const Observation& obs) {
  obs.validate();
  const Eigen::Index m = obs.population();
  const Eigen::Index d = obs.dimension();
  const double y_min = obs.y.minCoeff();
  const double y_max = obs.y.maxCoeff();
  const double y_range = y_max - y_min;
  Tensor3 out(d, m, 2);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double yn = y_range > 0.0 ? (obs.y[i] - y_min) / y_range : 0.5;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double xn = (obs.X(i, j) - obs.lb[j]) / (obs.ub[j] - obs.lb[j]);
      out(j, i, 0) = std::clamp(xn, 0.0, 1.0);
      out(j, i, 1) = std::clamp(yn, 0.0, 1.0);
    }
  }
  return out;
}

Tensor3 embed(const Tensor3& normalized, const Matrix& w_emb) {
  if (normalized.dim2() != 2 || w_emb.rows() != 2) throw ConfigError("embedding expects 2 input channels");
  const Eigen::Index d = normalized.dim0();
  const Eigen::Index m = normalized.dim1();
  Tensor3 out(d, m, w_emb.cols());
  for (Eigen::Index j = 0; j < d; ++j) out.slice(j).noalias() = normalized.slice(j) * w_emb;
  return out;
}

Matrix positional_encoding(Eigen::Index d, Eigen::Index h) {
  if (h % 2 != 0) throw ConfigError("positional encoding needs an even hidden dimension");
  Matrix pe(d, h);
  for (Eigen::Index pos = 0; pos < d; ++pos) {
    for (Eigen::Index i = 0; i < h / 2; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(h));
      pe(pos, 2 * i) = std::sin(angle);
      pe(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Matrix layer_norm(const Matrix& x, const Vector& gain, const Vector& bias) {
  Matrix out(x.rows(), x.cols());
  const double inv_h = 1.0 / static_cast<double>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() * inv_h;
    const double var = (x.row(r).array() - mean).square().sum() * inv_h;
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    out.row(r) = ((x.row(r).array() - mean) * inv_std) * gain.transpose().array() + bias.transpose().array();
  }
  return out;
}

Matrix multi_head_self_attention(const Matrix& x, const AttnParams& p, int num_heads) {
  const Eigen::Index h = x.cols();
  const Eigen::Index hd = h / num_heads;
  const Matrix q = x * p.wq;
  const Matrix k = x * p.wk;
  const Matrix v = x * p.wv;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Matrix heads(x.rows(), h);
  Matrix scores;
  for (int head = 0; head < num_heads; ++head) {
    const Eigen::Index c0 = head * hd;
    scores.noalias() = q.middleCols(c0, hd) * k.middleCols(c0, hd).transpose();
    scores *= scale;
    // row-wise softmax, shifted by the row maximum
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      auto row = scores.row(r).array();
      row = (row - row.maxCoeff()).exp();
      row /= row.sum();
    }
    heads.middleCols(c0, hd).noalias() = scores * v.middleCols(c0, hd);
  }
  return heads * p.wo;
}

Matrix attn_block(const Matrix& x, const AttnParams& p, int num_heads) {
  const Matrix g = layer_norm(x + multi_head_self_attention(x, p, num_heads), p.ln1_gain, p.ln1_bias);
  Matrix hidden = g * p.ff1_w;
  hidden.rowwise() += p.ff1_b.transpose();
  hidden = hidden.cwiseMax(0.0);
  Matrix v = hidden * p.ff2_w;
  v.rowwise() += p.ff2_b.transpose();
  return layer_norm(g + v, p.ln2_gain, p.ln2_bias);
}

FeatureSet ts_attn_forward(const Tensor3& embedded, const Network& net) {
  const int heads = net.config.num_heads;
  const Eigen::Index d = embedded.dim0();
  const Eigen::Index m = embedded.dim1();
  const Eigen::Index h = embedded.dim2();
  if (h != net.config.hidden_dim) throw ConfigError("embedding width does not match hidden_dim");
  const Matrix pe = positional_encoding(d, h);

  Tensor3 by_dim = embedded;  // d x m x h
  Tensor3 by_cand;            // m x d x h
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    if (l > 0) by_dim = by_cand.swap_leading();
    for (Eigen::Index j = 0; j < d; ++j) by_dim.slice(j) = attn_block(by_dim.slice(j), layer.inter, heads);
    by_cand = by_dim.swap_leading();
    for (Eigen::Index i = 0; i < m; ++i) {
      auto s = by_cand.slice(i);
      s += pe;
      s = attn_block(s, layer.intra, heads);
    }
  }

  FeatureSet out;
  out.indiv.resize(m, h);
  for (Eigen::Index i = 0; i < m; ++i) out.indiv.row(i) = by_cand.slice(i).colwise().mean();
  out.pop = out.indiv.colwise().mean().transpose();
  return out;
}

FeatureSet analyze(const Network& net, const Observation& obs) {
  return ts_attn_forward(embed(pie_normalize(obs), net.w_emb), net);
}

}  // namespace ltk::analyzer

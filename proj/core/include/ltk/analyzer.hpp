#pragma once

// Neural landscape analyser: population embedding followed by a two-stage
// attention encoder (cross-solution, then cross-dimension) and mean pooling.
//
// Data flow for one observation with m candidates in d dimensions:
//
//   pie_normalize   (X, y)         -> d x m x 2   positions by the box, y by step extrema
//   embed           d x m x 2      -> d x m x h   linear map, no bias
//   per layer:      attn over m inside each of the d slices
//                   transpose to m x d x h, add sin/cos encoding over d
//                   attn over d inside each of the m slices
//   pooling         F_indiv = mean over d (m x h), F_pop = mean over m (h)
//
// Parameters are stored in a flat vector so an evolution strategy can search
// over them; see parameter_layout() for the exact order.

#include "ltk/rng.hpp"
#include "ltk/types.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ltk::analyzer {

inline constexpr double kLayerNormEps = 1e-5;

struct AnalyzerConfig {
  int hidden_dim = 16;
  int num_heads = 1;
  int num_layers = 1;
  int ff_inner_dim = 16;

  /// Throws ConfigError on non-positive sizes, odd hidden_dim or heads not dividing h.
  void validate() const;
  bool operator==(const AnalyzerConfig&) const = default;
};

/// Dense rank-3 tensor, row-major, index (a, b, c) -> (a * n1 + b) * n2 + c.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(Eigen::Index n0, Eigen::Index n1, Eigen::Index n2) : n0_(n0), n1_(n1), n2_(n2), data_(n0 * n1 * n2, 0.0) {}

  Eigen::Index dim0() const { return n0_; }
  Eigen::Index dim1() const { return n1_; }
  Eigen::Index dim2() const { return n2_; }

  double& operator()(Eigen::Index a, Eigen::Index b, Eigen::Index c) { return data_[idx(a, b, c)]; }
  double operator()(Eigen::Index a, Eigen::Index b, Eigen::Index c) const { return data_[idx(a, b, c)]; }

  /// Slice `a` viewed as an n1 x n2 row-major matrix.
  Eigen::Map<Matrix> slice(Eigen::Index a) { return {data_.data() + a * n1_ * n2_, n1_, n2_}; }
  Eigen::Map<const Matrix> slice(Eigen::Index a) const { return {data_.data() + a * n1_ * n2_, n1_, n2_}; }

  /// Swaps the first two axes: (a, b, c) -> (b, a, c).
  Tensor3 swap_leading() const;

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t idx(Eigen::Index a, Eigen::Index b, Eigen::Index c) const {
    return static_cast<std::size_t>((a * n1_ + b) * n2_ + c);
  }

  Eigen::Index n0_ = 0, n1_ = 0, n2_ = 0;
  std::vector<double> data_;
};

/// Weights of one attention block. Matrices act on row vectors (x * W).
struct AttnParams {
  Matrix wq, wk, wv, wo;  // h x h, no bias
  Vector ln1_gain, ln1_bias;
  Matrix ff1_w;  // h x ff
  Vector ff1_b;
  Matrix ff2_w;  // ff x h
  Vector ff2_b;
  Vector ln2_gain, ln2_bias;
};

struct TsAttnLayer {
  AttnParams inter;  // across candidates, within one dimension
  AttnParams intra;  // across dimensions, within one candidate
};

struct Network {
  AnalyzerConfig config;
  Matrix w_emb;  // 2 x h
  std::vector<TsAttnLayer> layers;
};

struct FeatureSet {
  Matrix indiv;  // m x h
  Vector pop;    // h
};

struct LayoutEntry {
  std::string name;
  std::vector<Eigen::Index> shape;
  std::size_t size() const;
};

struct ParamVector {
  std::vector<double> values;
  std::vector<LayoutEntry> layout;
};

/// Fixed tensor order: w_emb, then for each layer the inter block and the
/// intra block, each as wq, wk, wv, wo, ln1.gain, ln1.bias, ff1.weight,
/// ff1.bias, ff2.weight, ff2.bias, ln2.gain, ln2.bias.
std::vector<LayoutEntry> parameter_layout(const AnalyzerConfig& cfg);

/// Closed form of the layout size: 2h + 2l(4h^2 + 2h*ff + ff + 5h).
/// 3296 for h = 16, ff = 16, l = 1.
std::size_t parameter_count(const AnalyzerConfig& cfg);

ParamVector encode_params(const Network& net);
/// Throws ConfigError naming expected and actual length on mismatch.
Network decode_params(std::span<const double> values, const AnalyzerConfig& cfg);

/// Gaussian weights with unit layer-norm gains; handy for tests and benchmarks.
Network random_network(const AnalyzerConfig& cfg, Rng& rng, double scale = 0.5);

Tensor3 pie_normalize(const Observation& obs);
Tensor3 embed(const Tensor3& normalized, const Matrix& w_emb);
Matrix positional_encoding(Eigen::Index d, Eigen::Index h);
Matrix layer_norm(const Matrix& x, const Vector& gain, const Vector& bias);
Matrix multi_head_self_attention(const Matrix& x, const AttnParams& p, int num_heads);
Matrix attn_block(const Matrix& x, const AttnParams& p, int num_heads);
FeatureSet ts_attn_forward(const Tensor3& embedded, const Network& net);

/// Full pass: normalize, embed, encode, pool. Pure function of (net, obs).
FeatureSet analyze(const Network& net, const Observation& obs);

}  // namespace ltk::analyzer

#pragma once

// Landscape analysers as seen by a meta-policy: each one turns the current
// population into a population-level state and, when it has them natively,
// per-candidate states.

#include "ltk/analyzer.hpp"
#include "ltk/types.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ltk::metabbo {

enum class AnalyzerSlot { neural, ela, handcrafted };

std::string_view slot_name(AnalyzerSlot slot);
/// Accepts "neural" and its alias "neurela", "ela" and "handcrafted".
AnalyzerSlot parse_slot(std::string_view name);

struct StepContext {
  const Observation& obs;
  int step;
  int horizon;
  const std::vector<double>& best_history;  // best-so-far, index 0 = initial population
};

struct Features {
  Matrix indiv;  // m x width when per_candidate(), empty otherwise
  Vector pop;    // width
};

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual AnalyzerSlot slot() const = 0;
  virtual Eigen::Index width() const = 0;
  virtual bool per_candidate() const = 0;
  virtual Features extract(const StepContext& ctx) const = 0;
  virtual std::vector<std::string> feature_names() const = 0;
};

/// The trained network; per-candidate rows are F_indiv, population state F_pop.
class NeuralExtractor final : public FeatureExtractor {
 public:
  explicit NeuralExtractor(analyzer::Network net) : net_(std::move(net)) {}
  AnalyzerSlot slot() const override { return AnalyzerSlot::neural; }
  Eigen::Index width() const override { return net_.config.hidden_dim; }
  bool per_candidate() const override { return true; }
  Features extract(const StepContext& ctx) const override;
  std::vector<std::string> feature_names() const override;
  const analyzer::Network& network() const { return net_; }

 private:
  analyzer::Network net_;
};

/// The concatenated classical suite with missing values imputed as 0. Values
/// pass through asinh so that raw objective-scale features stay in a range a
/// tanh layer can use.
class ElaExtractor final : public FeatureExtractor {
 public:
  AnalyzerSlot slot() const override { return AnalyzerSlot::ela; }
  Eigen::Index width() const override;
  bool per_candidate() const override { return false; }
  Features extract(const StepContext& ctx) const override;
  std::vector<std::string> feature_names() const override;
};

/// The eight-feature hand-crafted state.
class HandcraftedExtractor final : public FeatureExtractor {
 public:
  AnalyzerSlot slot() const override { return AnalyzerSlot::handcrafted; }
  Eigen::Index width() const override;
  bool per_candidate() const override { return false; }
  Features extract(const StepContext& ctx) const override;
  std::vector<std::string> feature_names() const override;
};

/// `net` is required for the neural slot and ignored otherwise.
std::unique_ptr<FeatureExtractor> make_extractor(AnalyzerSlot slot, const std::optional<analyzer::Network>& net = {});

}  // namespace ltk::metabbo

#include "ltk/extractors.hpp"

#include "ltk/ela.hpp"
#include "ltk/error.hpp"

namespace ltk::metabbo {

std::string_view slot_name(AnalyzerSlot slot) {
  switch (slot) {
    case AnalyzerSlot::neural: return "neural";
    case AnalyzerSlot::ela: return "ela";
    case AnalyzerSlot::handcrafted: return "handcrafted";
  }
  return "?";
}

AnalyzerSlot parse_slot(std::string_view name) {
  if (name == "neural" || name == "neurela") return AnalyzerSlot::neural;
  if (name == "ela") return AnalyzerSlot::ela;
  if (name == "handcrafted") return AnalyzerSlot::handcrafted;
  throw ConfigError("unknown analyzer '" + std::string(name) + "' (expected neural, ela or handcrafted)");
}

Features NeuralExtractor::extract(const StepContext& ctx) const {
  auto fs = analyzer::analyze(net_, ctx.obs);
  return {std::move(fs.indiv), std::move(fs.pop)};
}

std::vector<std::string> NeuralExtractor::feature_names() const {
  std::vector<std::string> names;
  for (int k = 0; k < net_.config.hidden_dim; ++k) names.push_back("neural." + std::to_string(k));
  return names;
}

Eigen::Index ElaExtractor::width() const { return static_cast<Eigen::Index>(ela::baseline_width()); }

Features ElaExtractor::extract(const StepContext& ctx) const {
  const Vector raw = ela::baseline_suite(ctx.obs).imputed(0.0);
  return {Matrix(), raw.array().asinh().matrix()};
}

std::vector<std::string> ElaExtractor::feature_names() const {
  // Names do not depend on the data; any valid observation will do.
  Observation probe{Matrix::Zero(2, 1), Vector::Zero(2), Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  probe.X(1, 0) = 0.5;
  return ela::baseline_suite(probe).names();
}

Eigen::Index HandcraftedExtractor::width() const { return static_cast<Eigen::Index>(ela::kHandcraftedWidth); }

Features HandcraftedExtractor::extract(const StepContext& ctx) const {
  ela::RunContext rc{ctx.step, ctx.horizon, ctx.best_history, ctx.obs};
  return {Matrix(), ela::handcrafted_state(rc)};
}

std::vector<std::string> HandcraftedExtractor::feature_names() const { return ela::handcrafted_names(); }

std::unique_ptr<FeatureExtractor> make_extractor(AnalyzerSlot slot, const std::optional<analyzer::Network>& net) {
  switch (slot) {
    case AnalyzerSlot::neural:
      if (!net) throw ConfigError("the neural analyzer slot needs network weights");
      return std::make_unique<NeuralExtractor>(*net);
    case AnalyzerSlot::ela:
      return std::make_unique<ElaExtractor>();
    case AnalyzerSlot::handcrafted:
      return std::make_unique<HandcraftedExtractor>();
  }
  throw ConfigError("unknown analyzer slot");
}

}  // namespace ltk::metabbo

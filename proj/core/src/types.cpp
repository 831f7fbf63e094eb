#include "ltk/types.hpp"

#include "ltk/error.hpp"

#include <string>

namespace ltk {

void Observation::validate() const {
  if (X.rows() < 2) throw ConfigError("observation needs at least 2 candidates, got " + std::to_string(X.rows()));
  if (X.cols() < 1) throw ConfigError("observation has zero dimensions");
  if (y.size() != X.rows()) throw ConfigError("observation y has " + std::to_string(y.size()) + " entries for " +
                                              std::to_string(X.rows()) + " candidates");
  if (lb.size() != X.cols() || ub.size() != X.cols()) throw ConfigError("observation bounds do not match dimension");
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (!(lb[j] < ub[j])) throw ConfigError("observation bound " + std::to_string(j) + " has lb >= ub");
  }
}

}  // namespace ltk

#ifndef LSTMVIZ_SEQUENCE_HPP
#define LSTMVIZ_SEQUENCE_HPP

#include <string>
#include <vector>

#include "lstmviz/numerics.hpp"

namespace lstmviz {

/// One input series. `values` is T x d_in: row t holds the d_in features at
/// timestep t.
struct LabeledSequence {
  Matrix values;
  int label = 0;
  std::string patient_id;

  Eigen::Index length() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

using Dataset = std::vector<LabeledSequence>;

}  // namespace lstmviz

#endif  // LSTMVIZ_SEQUENCE_HPP

#ifndef LSTMVIZ_NUMERICS_HPP
#define LSTMVIZ_NUMERICS_HPP

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace lstmviz {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Adam hyperparameters. Only the learning rate is a tuned value; the moment
/// decay rates and epsilon are the usual published defaults.
struct AdamHyper {
  Scalar lr = 0.001;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(Eigen::Index n) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}
};

/// One bias-corrected Adam update of `params` in place. Throws
/// std::invalid_argument on shape mismatch and std::domain_error naming the
/// first non-finite gradient index.
void adam_step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grads,
               AdamState& state, const AdamHyper& hyper = {});

/// Max-shifted softmax. Throws on empty input.
Vector softmax(const Eigen::Ref<const Vector>& logits);

/// Column-wise softmax of a C x B logit matrix.
Matrix softmax_columns(const Eigen::Ref<const Matrix>& logits);

/// -ln(probs[c]).
Scalar cross_entropy(const Eigen::Ref<const Vector>& probs, Eigen::Index c);

/// Index of the largest element; ties resolve to the lowest index.
Eigen::Index argmax(const Eigen::Ref<const Vector>& v);

/// Central-difference gradient check. Returns the maximum over coordinates of
/// |a - n| / max(|a|, |n|, 1e-8) where a is the analytic and n the numeric
/// derivative.
Scalar check_gradient(const std::function<Scalar(const Vector&)>& f, const Vector& x,
                      const Vector& analytic_grad, Scalar h = 1e-5);

/// Generator for an independent stream derived from (seed, stream).
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

/// Shortest decimal text that reads back to exactly `v` (CSV output).
std::string format_real(Scalar v);

inline Scalar sigmoid(Scalar z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Min-max rescale to [0,1]; a constant input maps to all zeros.
template <typename Derived>
Matrix minmax_scale(const Eigen::MatrixBase<Derived>& values) {
  Matrix out = values;
  if (out.size() == 0) return out;
  const Scalar lo = out.minCoeff();
  const Scalar hi = out.maxCoeff();
  if (!(hi > lo)) {
    out.setZero();
    return out;
  }
  out = ((out.array() - lo) / (hi - lo)).matrix();
  return out;
}

}  // namespace lstmviz

#endif  // LSTMVIZ_NUMERICS_HPP

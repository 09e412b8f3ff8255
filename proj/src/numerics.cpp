#include "lstmviz/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lstmviz {

void adam_step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grads,
               AdamState& state, const AdamHyper& hyper) {
  const Eigen::Index n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw std::invalid_argument("adam_step: shape mismatch (params " + std::to_string(n) +
                                ", grads " + std::to_string(grads.size()) + ", moments " +
                                std::to_string(state.m.size()) + "/" +
                                std::to_string(state.v.size()) + ")");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::domain_error("adam_step: non-finite gradient at index " + std::to_string(i));
    }
  }

  state.step += 1;
  const auto t = static_cast<Scalar>(state.step);
  const Scalar bc1 = 1.0 - std::pow(hyper.beta1, t);
  const Scalar bc2 = 1.0 - std::pow(hyper.beta2, t);

  state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grads;
  state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * grads.cwiseAbs2();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar m_hat = state.m[i] / bc1;
    const Scalar v_hat = state.v[i] / bc2;
    params[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

Vector softmax(const Eigen::Ref<const Vector>& logits) {
  if (logits.size() == 0) throw std::invalid_argument("softmax: empty input");
  const Scalar shift = logits.maxCoeff();
  Vector e = (logits.array() - shift).exp().matrix();
  return e / e.sum();
}

Matrix softmax_columns(const Eigen::Ref<const Matrix>& logits) {
  if (logits.rows() == 0) throw std::invalid_argument("softmax: empty input");
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) out.col(j) = softmax(logits.col(j));
  return out;
}

Scalar cross_entropy(const Eigen::Ref<const Vector>& probs, Eigen::Index c) {
  if (c < 0 || c >= probs.size()) {
    throw std::out_of_range("cross_entropy: class " + std::to_string(c) + " out of range [0," +
                            std::to_string(probs.size()) + ")");
  }
  return -std::log(probs[c]);
}

Eigen::Index argmax(const Eigen::Ref<const Vector>& v) {
  if (v.size() == 0) throw std::invalid_argument("argmax: empty input");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Scalar check_gradient(const std::function<Scalar(const Vector&)>& f, const Vector& x,
                      const Vector& analytic_grad, Scalar h) {
  if (analytic_grad.size() != x.size()) {
    throw std::invalid_argument("check_gradient: gradient length does not match x");
  }
  Vector probe = x;
  Scalar worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const Scalar up = f(probe);
    probe[i] = x[i] - h;
    const Scalar down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("check_gradient: non-finite function value at coordinate " +
                              std::to_string(i));
    }
    const Scalar numeric = (up - down) / (2.0 * h);
    const Scalar a = analytic_grad[i];
    const Scalar denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

std::string format_real(Scalar v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace lstmviz

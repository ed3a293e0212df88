#include "seqdispatch/adam.hpp"

#include <cmath>

#include "seqdispatch/error.hpp"

namespace seqdispatch {

void AdamState::step(std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam: parameter/gradient list lengths differ");
  }
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  }
  if (m_.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "adam: parameter count changed");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(*grads[k]) || !params[k]->same_shape(m_[k])) {
      throw Error(ErrorCode::ShapeMismatch, "adam: shape mismatch at parameter " + std::to_string(k));
    }
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = *grads[k];
    Matrix& m = m_[k];
    Matrix& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

double global_norm(std::span<const Matrix* const> grads) {
  double s = 0.0;
  for (const Matrix* g : grads) {
    for (double v : g->values()) s += v * v;
  }
  return std::sqrt(s);
}

double clip_global_norm(std::span<Matrix* const> grads, double max_norm) {
  std::vector<const Matrix*> view(grads.begin(), grads.end());
  const double norm = global_norm(view);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Matrix* g : grads) {
      for (double& v : g->values()) v *= s;
    }
  }
  return norm;
}

}  // namespace seqdispatch

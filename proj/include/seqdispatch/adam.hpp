#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "seqdispatch/matrix.hpp"

namespace seqdispatch {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are created on the first step
/// and must shape-match the parameters thereafter.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig config) : config_(config) {}

  void step(std::span<Matrix* const> params, std::span<const Matrix* const> grads);

  std::size_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }
  void set_lr(double lr) noexcept { config_.lr = lr; }

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

double global_norm(std::span<const Matrix* const> grads);

/// Scales grads in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::span<Matrix* const> grads, double max_norm);

/// Flat pointer list over every parameter matrix of a visitable struct.
template <typename P>
std::vector<Matrix*> param_list(P& p) {
  std::vector<Matrix*> out;
  P::visit(p, "", [&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

template <typename P>
std::vector<const Matrix*> param_list(const P& p) {
  std::vector<const Matrix*> out;
  P::visit(p, "", [&](const std::string&, const Matrix& m) { out.push_back(&m); });
  return out;
}

template <typename P>
P zeros_like(const P& p) {
  P out = p;
  P::visit(out, "", [](const std::string&, Matrix& m) { m.fill(0.0); });
  return out;
}

}  // namespace seqdispatch

#pragma once

#include <span>
#include <vector>

#include "srender/autograd.hpp"

namespace srender {

/// Adam with bias correction. Moment buffers are positional: the same
/// parameter list, in the same order, must be passed to every step.
class Adam {
 public:
  Adam() = default;
  Adam(double beta1, double beta2, double eps = 1e-8) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<Parameter* const> params, double lr);

  double beta1() const noexcept { return beta1_; }
  double beta2() const noexcept { return beta2_; }
  long steps() const noexcept { return steps_; }

  // Exposed for checkpointing.
  std::vector<Tensor>& first_moments() noexcept { return m_; }
  std::vector<Tensor>& second_moments() noexcept { return v_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }
  void set_steps(long s) noexcept { steps_ = s; }

 private:
  double beta1_ = 0.5;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

void zero_grads(std::span<Parameter* const> params);

}  // namespace srender

#include "srender/optim.hpp"

#include <cmath>

#include "srender/error.hpp"

namespace srender {

void Adam::step(std::span<Parameter* const> params, double lr) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.dims());
      v_.emplace_back(p->value.dims());
    }
  }
  if (m_.size() != params.size()) throw Error(Errc::ShapeMismatch, "Adam parameter list changed size");
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    if (!m.same_shape(p.value)) throw Error(Errc::ShapeMismatch, "Adam state does not match " + p.name);
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      p.value[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace srender

#include "v2g/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace v2g::nn {

void AdamW::step(ParamStore& params) {
  const auto& names = params.names();
  if (m_.size() != names.size()) {
    m_.resize(names.size());
    v_.resize(names.size());
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t p = 0; p < names.size(); ++p) {
    TensorData& t = *params.get(names[p]);
    auto& m = m_[p];
    auto& v = v_[p];
    if (m.size() != t.data.size()) {
      m.assign(t.data.size(), 0.0);
      v.assign(t.data.size(), 0.0);
    }
    const bool has_grad = t.grad.size() == t.data.size();
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const double g = has_grad ? t.grad[i] : 0.0;
      if (!std::isfinite(g))
        throw std::runtime_error("optimizer: non-finite gradient in parameter '" + names[p] + "'");
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      t.data[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * t.data[i]);
    }
  }
}

}  // namespace v2g::nn

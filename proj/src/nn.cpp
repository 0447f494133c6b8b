#include "hlob/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace hlob::nn {

Mlp::Mlp(std::vector<int> sizes, bool tanh_output) : sizes_(std::move(sizes)), tanh_output_(tanh_output) {
  if (sizes_.size() < 2) throw std::invalid_argument("mlp needs at least input and output sizes");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw std::invalid_argument("mlp layer sizes must be positive");
    param_count_ += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }
}

void Mlp::forward(const double* params, const double* input, Cache& cache) const {
  const std::size_t layers = sizes_.size() - 1;
  cache.acts.resize(sizes_.size());
  cache.acts[0].assign(input, input + sizes_[0]);
  std::size_t off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double* w = params + off;
    const double* b = w + static_cast<std::size_t>(in) * out;
    const auto& x = cache.acts[l];
    auto& y = cache.acts[l + 1];
    y.resize(out);
    const bool squash = l + 1 < layers || tanh_output_;
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) s += row[i] * x[i];
      y[o] = squash ? std::tanh(s) : s;
    }
    off += static_cast<std::size_t>(in) * out + out;
  }
}

void Mlp::backward(const double* params, const Cache& cache, const double* grad_output, double* grad,
                   double* grad_input) const {
  const std::size_t layers = sizes_.size() - 1;
  std::vector<std::size_t> offsets(layers);
  std::size_t off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = off;
    off += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }
  std::vector<double> delta(grad_output, grad_output + sizes_.back());
  std::vector<double> next;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const bool squash = l + 1 < layers || tanh_output_;
    const auto& y = cache.acts[l + 1];
    if (squash) {
      for (int o = 0; o < out; ++o) delta[o] *= 1.0 - y[o] * y[o];
    }
    const double* w = params + offsets[l];
    double* gw = grad + offsets[l];
    double* gb = gw + static_cast<std::size_t>(in) * out;
    const auto& x = cache.acts[l];
    next.assign(in, 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      gb[o] += d;
      double* grow = gw + static_cast<std::size_t>(o) * in;
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        grow[i] += d * x[i];
        next[i] += d * row[i];
      }
    }
    delta.swap(next);
  }
  if (grad_input) {
    for (int i = 0; i < sizes_[0]; ++i) grad_input[i] += delta[i];
  }
}

}  // namespace hlob::nn

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace hlob::nn {

/// Fully connected network over an external flat parameter array.
///
/// Layer l stores W_l (out x in, row-major) followed by b_l. Hidden layers use
/// tanh; the last layer is linear unless `tanh_output` is set.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> sizes, bool tanh_output = false);

  std::size_t param_count() const { return param_count_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  bool tanh_output() const { return tanh_output_; }

  /// acts[0] is the input; acts[l] the output of layer l (after its nonlinearity).
  struct Cache {
    std::vector<std::vector<double>> acts;
  };

  void forward(const double* params, const double* input, Cache& cache) const;
  const std::vector<double>& output(const Cache& cache) const { return cache.acts.back(); }

  /// Accumulates d(loss)/d(params) into grad given d(loss)/d(output). If
  /// grad_input is non-null, d(loss)/d(input) is added to it.
  void backward(const double* params, const Cache& cache, const double* grad_output, double* grad,
                double* grad_input = nullptr) const;

  /// Scaled-uniform initialization (bound sqrt(6/(in+out)) times gain); biases zero.
  template <typename Rng>
  void initialize(double* params, Rng& rng, double output_gain) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const int in = sizes_[l];
      const int out = sizes_[l + 1];
      const bool last = l + 2 == sizes_.size();
      const double bound = std::sqrt(6.0 / (in + out)) * (last ? output_gain : 1.0);
      for (int i = 0; i < in * out; ++i) params[off++] = (2.0 * rng.uniform() - 1.0) * bound;
      for (int i = 0; i < out; ++i) params[off++] = 0.0;
    }
  }

 private:
  std::vector<int> sizes_;
  bool tanh_output_ = false;
  std::size_t param_count_ = 0;
};

}  // namespace hlob::nn

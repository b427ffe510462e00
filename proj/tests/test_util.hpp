#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "talkface/nn.hpp"
#include "talkface/ops.hpp"
#include "talkface/tensor.hpp"

namespace talkface::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0, bool requires_grad = true) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Random projection of a tensor to a scalar, so every output coordinate
// contributes a distinct weight to the checked gradient.
inline Tensor random_readout(const Tensor& y, Rng& rng) {
  Tensor w = random_tensor(y.shape(), rng, -1.0, 1.0, false);
  return ops::sum(ops::mul(y, w));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Plain-loop convolution over raw values, zero padding. Returns (C_out, OH, OW)
// values row-major; used as an oracle independent of the im2col path.
inline std::vector<double> naive_conv(const std::vector<double>& x, std::size_t c_in,
                                      std::size_t h, std::size_t w, const Tensor& weight,
                                      const Tensor& bias, std::size_t stride,
                                      std::size_t pad, std::size_t* out_h,
                                      std::size_t* out_w) {
  const std::size_t c_out = weight.dim(0), k = weight.dim(2);
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
  std::vector<double> y(c_out * oh * ow);
  for (std::size_t co = 0; co < c_out; ++co)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = bias.data()[co];
        for (std::size_t ci = 0; ci < c_in; ++ci)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long iy = long(oy * stride + ky) - long(pad);
              const long ix = long(ox * stride + kx) - long(pad);
              if (iy < 0 || ix < 0 || iy >= long(h) || ix >= long(w)) continue;
              acc += weight.data()[((co * c_in + ci) * k + ky) * k + kx] *
                     x[(ci * h + std::size_t(iy)) * w + std::size_t(ix)];
            }
        y[(co * oh + oy) * ow + ox] = acc;
      }
  *out_h = oh;
  *out_w = ow;
  return y;
}

inline void naive_lrelu(std::vector<double>& v, double slope = 0.2) {
  for (double& x : v) x = x > 0.0 ? x : slope * x;
}

}  // namespace talkface::testing

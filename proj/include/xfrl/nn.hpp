#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "xfrl/tensor.hpp"

namespace xfrl::nn {

// Valid (no padding) cross-correlation. in [C,H,W], w [Co,Ci,kh,kw], b [Co].
// Output spatial size: (H - kh) / stride + 1. Summation order per output
// element is fixed: input channel, then kernel row, then kernel column.
Tensor conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b, std::size_t stride = 1);

// gw/gb are accumulated into (callers zero them per step); gin, when
// requested, is overwritten.
void conv2d_backward(const Tensor& in, const Tensor& w, const Tensor& gout, std::size_t stride,
                     Tensor* gin, Tensor& gw, Tensor& gb);

Tensor relu_forward(const Tensor& x);
// y is the forward output; gradient passes exactly where y > 0.
Tensor relu_backward(const Tensor& y, const Tensor& gy);

// 2x2 max pooling, stride 2, H and W must be even. argmax records the flat
// input index of each window maximum; ties go to the first occurrence in
// row-major window order.
Tensor maxpool2_forward(const Tensor& x, std::vector<std::uint32_t>& argmax);
Tensor maxpool2_backward(const std::vector<std::uint32_t>& argmax, const Tensor& gy,
                         const std::vector<std::size_t>& in_shape);

// x [Din], w [Dout,Din], b [Dout].
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);
void dense_backward(const Tensor& x, const Tensor& w, const Tensor& gy, Tensor* gx, Tensor& gw,
                    Tensor& gb);

struct LossGrad {
    double loss = 0.0;
    Tensor grad;  // same shape as the prediction input
};

// Cross-entropy over softmax of the logits, stabilized by max subtraction.
LossGrad softmax_xent(const Tensor& logits, std::size_t label);

// Mean squared error over all elements; grad is 2 (pred - target) / N.
LossGrad mse(const Tensor& pred, const Tensor& target);

// Nearest-neighbor doubling of H and W; backward sums each replica group.
Tensor upsample2_forward(const Tensor& x);
Tensor upsample2_backward(const Tensor& gy);

// value -= base_lr * lr_multiplier * grad for trainable parameters; frozen
// parameters (and lr 0) are left untouched, bit-identical.
void sgd_step(const std::vector<Parameter*>& params, double base_lr);

// Central-difference check of an analytic gradient of a scalar function.
// Returns the max over coordinates of |a - n| / max(1e-8, |a| + |n|).
double grad_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                  const Tensor& analytic, double step = 1e-5);

}  // namespace xfrl::nn

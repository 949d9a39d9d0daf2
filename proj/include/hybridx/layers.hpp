#pragma once

#include <vector>

#include "hybridx/tensor.hpp"

namespace hybridx {

// Forward/backward passes for every layer the networks use. All functions are
// pure; backward passes take the cached forward inputs. Convolution uses the
// cross-correlation convention (no kernel flip), matching the test oracle.

/// input [C_in,H,W], kernels [C_out,C_in,kH,kW], bias [C_out] -> [C_out,H',W']
/// H' = (H + 2*pad - kH)/stride + 1, likewise W'.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      int stride, int pad);

struct Conv2dGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& kernels,
                            int stride, int pad);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

/// 2x2 average pooling, stride 2; spatial extents must be even.
Tensor avgpool2x2_forward(const Tensor& input);
Tensor avgpool2x2_backward(const Tensor& grad_out, const std::vector<std::size_t>& input_shape);

/// [C,H,W] -> [C], per-channel spatial mean.
Tensor global_avg_pool_forward(const Tensor& input);
Tensor global_avg_pool_backward(const Tensor& grad_out, const std::vector<std::size_t>& input_shape);

/// input [n], weights [m,n], bias [m] -> [m]
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights);

/// Stacks [C_i,H,W] parts along the channel axis, preserving order.
Tensor concat_channels_forward(const std::vector<Tensor>& parts);
/// Splits grad_out back into per-part gradients; the exact inverse of concat.
std::vector<Tensor> concat_channels_backward(const Tensor& grad_out,
                                             const std::vector<std::vector<std::size_t>>& part_shapes);

Tensor softmax(const Tensor& logits);

struct SoftmaxCeResult {
    double loss;
    Tensor grad_logits;
};

/// Two-class cross entropy with max-subtraction for stability.
/// loss = -log softmax(logits)[label]; grad = softmax - onehot.
SoftmaxCeResult softmax_crossentropy(const Tensor& logits, int label);

/// p <- p - lr * g, elementwise over pairwise shape-equal lists.
void sgd_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, double lr);

}  // namespace hybridx

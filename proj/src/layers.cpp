#include "hybridx/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hybridx {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    require(t.rank() == rank, std::string(what) + ": expected rank " + std::to_string(rank) +
                                  " tensor, got shape " + t.shape_str());
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      int stride, int pad) {
    require_rank(input, 3, "conv2d");
    require_rank(kernels, 4, "conv2d");
    require_rank(bias, 1, "conv2d");
    require(stride >= 1, "conv2d: stride must be >= 1");
    require(pad >= 0, "conv2d: pad must be >= 0");

    const std::size_t c_in = input.extent(0), h = input.extent(1), w = input.extent(2);
    const std::size_t c_out = kernels.extent(0), kh = kernels.extent(2), kw = kernels.extent(3);
    require(kernels.extent(1) == c_in,
            "conv2d: kernel shape " + kernels.shape_str() + " does not match input shape " +
                input.shape_str());
    require(bias.extent(0) == c_out,
            "conv2d: bias shape " + bias.shape_str() + " does not match kernel shape " +
                kernels.shape_str());
    require(kh <= h + 2 * static_cast<std::size_t>(pad) && kw <= w + 2 * static_cast<std::size_t>(pad),
            "conv2d: kernel " + kernels.shape_str() + " larger than padded input " + input.shape_str());

    const std::size_t h_out = (h + 2 * pad - kh) / stride + 1;
    const std::size_t w_out = (w + 2 * pad - kw) / stride + 1;

    Tensor out({c_out, h_out, w_out});
    for (std::size_t oc = 0; oc < c_out; ++oc) {
        for (std::size_t oh = 0; oh < h_out; ++oh) {
            for (std::size_t ow = 0; ow < w_out; ++ow) {
                double acc = bias[oc];
                const long h0 = static_cast<long>(oh) * stride - pad;
                const long w0 = static_cast<long>(ow) * stride - pad;
                for (std::size_t ic = 0; ic < c_in; ++ic) {
                    for (std::size_t r = 0; r < kh; ++r) {
                        const long ih = h0 + static_cast<long>(r);
                        if (ih < 0 || ih >= static_cast<long>(h)) continue;
                        for (std::size_t c = 0; c < kw; ++c) {
                            const long iw = w0 + static_cast<long>(c);
                            if (iw < 0 || iw >= static_cast<long>(w)) continue;
                            acc += input.at3(ic, ih, iw) * kernels.at4(oc, ic, r, c);
                        }
                    }
                }
                out.at3(oc, oh, ow) = acc;
            }
        }
    }
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& kernels,
                            int stride, int pad) {
    require_rank(grad_out, 3, "conv2d_backward");
    require_rank(input, 3, "conv2d_backward");
    require_rank(kernels, 4, "conv2d_backward");

    const std::size_t c_in = input.extent(0), h = input.extent(1), w = input.extent(2);
    const std::size_t c_out = kernels.extent(0), kh = kernels.extent(2), kw = kernels.extent(3);
    require(kernels.extent(1) == c_in,
            "conv2d_backward: kernel shape " + kernels.shape_str() + " does not match input shape " +
                input.shape_str());
    const std::size_t h_out = (h + 2 * pad - kh) / stride + 1;
    const std::size_t w_out = (w + 2 * pad - kw) / stride + 1;
    require(grad_out.shape() == std::vector<std::size_t>{c_out, h_out, w_out},
            "conv2d_backward: grad shape " + grad_out.shape_str() + " does not match expected " +
                shape_to_string({c_out, h_out, w_out}));

    Conv2dGrads g{Tensor(input.shape()), Tensor(kernels.shape()), Tensor({c_out})};
    for (std::size_t oc = 0; oc < c_out; ++oc) {
        for (std::size_t oh = 0; oh < h_out; ++oh) {
            for (std::size_t ow = 0; ow < w_out; ++ow) {
                const double go = grad_out.at3(oc, oh, ow);
                g.bias[oc] += go;
                const long h0 = static_cast<long>(oh) * stride - pad;
                const long w0 = static_cast<long>(ow) * stride - pad;
                for (std::size_t ic = 0; ic < c_in; ++ic) {
                    for (std::size_t r = 0; r < kh; ++r) {
                        const long ih = h0 + static_cast<long>(r);
                        if (ih < 0 || ih >= static_cast<long>(h)) continue;
                        for (std::size_t c = 0; c < kw; ++c) {
                            const long iw = w0 + static_cast<long>(c);
                            if (iw < 0 || iw >= static_cast<long>(w)) continue;
                            g.kernels.at4(oc, ic, r, c) += go * input.at3(ic, ih, iw);
                            g.input.at3(ic, ih, iw) += go * kernels.at4(oc, ic, r, c);
                        }
                    }
                }
            }
        }
    }
    return g;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
    require(grad_out.same_shape(input), "relu_backward: grad shape " + grad_out.shape_str() +
                                            " does not match input shape " + input.shape_str());
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
    return out;
}

Tensor avgpool2x2_forward(const Tensor& input) {
    require_rank(input, 3, "avgpool2x2");
    const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
    require(h % 2 == 0 && w % 2 == 0,
            "avgpool2x2: spatial extents must be even, got " + input.shape_str());
    Tensor out({c, h / 2, w / 2});
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t oh = 0; oh < h / 2; ++oh) {
            for (std::size_t ow = 0; ow < w / 2; ++ow) {
                out.at3(ch, oh, ow) = 0.25 * (input.at3(ch, 2 * oh, 2 * ow) +
                                              input.at3(ch, 2 * oh, 2 * ow + 1) +
                                              input.at3(ch, 2 * oh + 1, 2 * ow) +
                                              input.at3(ch, 2 * oh + 1, 2 * ow + 1));
            }
        }
    }
    return out;
}

Tensor avgpool2x2_backward(const Tensor& grad_out, const std::vector<std::size_t>& input_shape) {
    require(input_shape.size() == 3, "avgpool2x2_backward: input shape must be rank 3");
    const std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
    require(grad_out.shape() == std::vector<std::size_t>{c, h / 2, w / 2},
            "avgpool2x2_backward: grad shape " + grad_out.shape_str() +
                " does not match pooled input shape " + shape_to_string(input_shape));
    Tensor out(input_shape);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t oh = 0; oh < h / 2; ++oh) {
            for (std::size_t ow = 0; ow < w / 2; ++ow) {
                const double g = 0.25 * grad_out.at3(ch, oh, ow);
                out.at3(ch, 2 * oh, 2 * ow) = g;
                out.at3(ch, 2 * oh, 2 * ow + 1) = g;
                out.at3(ch, 2 * oh + 1, 2 * ow) = g;
                out.at3(ch, 2 * oh + 1, 2 * ow + 1) = g;
            }
        }
    }
    return out;
}

Tensor global_avg_pool_forward(const Tensor& input) {
    require_rank(input, 3, "global_avg_pool");
    const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
    Tensor out({c});
    const double inv = 1.0 / static_cast<double>(h * w);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) acc += input.at3(ch, i, j);
        out[ch] = acc * inv;
    }
    return out;
}

Tensor global_avg_pool_backward(const Tensor& grad_out, const std::vector<std::size_t>& input_shape) {
    require(input_shape.size() == 3, "global_avg_pool_backward: input shape must be rank 3");
    const std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
    require(grad_out.shape() == std::vector<std::size_t>{c},
            "global_avg_pool_backward: grad shape " + grad_out.shape_str() +
                " does not match input shape " + shape_to_string(input_shape));
    Tensor out(input_shape);
    const double inv = 1.0 / static_cast<double>(h * w);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double g = grad_out[ch] * inv;
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) out.at3(ch, i, j) = g;
    }
    return out;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    require_rank(input, 1, "dense");
    require_rank(weights, 2, "dense");
    require_rank(bias, 1, "dense");
    const std::size_t n = input.extent(0), m = weights.extent(0);
    require(weights.extent(1) == n, "dense: weight shape " + weights.shape_str() +
                                        " does not match input shape " + input.shape_str());
    require(bias.extent(0) == m, "dense: bias shape " + bias.shape_str() +
                                     " does not match weight shape " + weights.shape_str());
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double acc = bias[i];
        for (std::size_t j = 0; j < n; ++j) acc += weights.at2(i, j) * input[j];
        out[i] = acc;
    }
    return out;
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights) {
    require_rank(grad_out, 1, "dense_backward");
    const std::size_t n = input.extent(0), m = weights.extent(0);
    require(weights.extent(1) == n, "dense_backward: weight shape " + weights.shape_str() +
                                        " does not match input shape " + input.shape_str());
    require(grad_out.extent(0) == m, "dense_backward: grad shape " + grad_out.shape_str() +
                                         " does not match weight shape " + weights.shape_str());
    DenseGrads g{Tensor({n}), Tensor({m, n}), Tensor({m})};
    for (std::size_t i = 0; i < m; ++i) {
        const double go = grad_out[i];
        g.bias[i] = go;
        for (std::size_t j = 0; j < n; ++j) {
            g.weights.at2(i, j) = go * input[j];
            g.input[j] += go * weights.at2(i, j);
        }
    }
    return g;
}

Tensor concat_channels_forward(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_channels: no inputs");
    for (const Tensor& p : parts) require_rank(p, 3, "concat_channels");
    const std::size_t h = parts[0].extent(1), w = parts[0].extent(2);
    std::size_t c_total = 0;
    for (const Tensor& p : parts) {
        require(p.extent(1) == h && p.extent(2) == w,
                "concat_channels: spatial mismatch between " + parts[0].shape_str() + " and " +
                    p.shape_str());
        c_total += p.extent(0);
    }
    Tensor out({c_total, h, w});
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        std::copy(p.data(), p.data() + p.size(), out.data() + offset);
        offset += p.size();
    }
    return out;
}

std::vector<Tensor> concat_channels_backward(const Tensor& grad_out,
                                             const std::vector<std::vector<std::size_t>>& part_shapes) {
    require_rank(grad_out, 3, "concat_channels_backward");
    std::size_t c_total = 0;
    for (const auto& s : part_shapes) {
        require(s.size() == 3, "concat_channels_backward: part shapes must be rank 3");
        require(s[1] == grad_out.extent(1) && s[2] == grad_out.extent(2),
                "concat_channels_backward: spatial mismatch between grad " + grad_out.shape_str() +
                    " and part " + shape_to_string(s));
        c_total += s[0];
    }
    require(c_total == grad_out.extent(0),
            "concat_channels_backward: parts cover " + std::to_string(c_total) +
                " channels but grad has " + std::to_string(grad_out.extent(0)));
    std::vector<Tensor> grads;
    grads.reserve(part_shapes.size());
    std::size_t offset = 0;
    for (const auto& s : part_shapes) {
        Tensor g(s);
        std::copy(grad_out.data() + offset, grad_out.data() + offset + g.size(), g.data());
        offset += g.size();
        grads.push_back(std::move(g));
    }
    return grads;
}

Tensor softmax(const Tensor& logits) {
    require_rank(logits, 1, "softmax");
    double m = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) m = std::max(m, logits[i]);
    Tensor out(logits.shape());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        z += out[i];
    }
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= z;
    return out;
}

SoftmaxCeResult softmax_crossentropy(const Tensor& logits, int label) {
    require_rank(logits, 1, "softmax_crossentropy");
    require(logits.extent(0) == 2, "softmax_crossentropy: expected 2 logits, got " + logits.shape_str());
    require(label == 0 || label == 1,
            "softmax_crossentropy: label " + std::to_string(label) + " outside {0,1}");
    require(logits.all_finite(), "softmax_crossentropy: non-finite logits");

    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
    const double z = e0 + e1;
    const double log_z = std::log(z);

    SoftmaxCeResult r;
    r.loss = -(logits[label] - m - log_z);
    r.grad_logits = Tensor({2}, {e0 / z, e1 / z});
    r.grad_logits[label] -= 1.0;
    return r;
}

void sgd_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, double lr) {
    require(lr > 0.0, "sgd_step: lr must be positive");
    require(params.size() == grads.size(), "sgd_step: params/grads list length mismatch (" +
                                               std::to_string(params.size()) + " vs " +
                                               std::to_string(grads.size()) + ")");
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = *grads[k];
        require(p.same_shape(g), "sgd_step: shape mismatch between param " + p.shape_str() +
                                     " and grad " + g.shape_str());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    }
}

}  // namespace hybridx

#pragma once

// Independent reference implementations used only by tests. These are written
// against the operation definitions, not the library code, so they catch
// indexing and accumulation mistakes in the main path.

#include <cmath>
#include <vector>

#include "hybridx/densenet.hpp"
#include "hybridx/tensor.hpp"
#include "hybridx/types.hpp"

namespace oracle {

// Plain seven-loop cross-correlation, zero padding, no reuse of library
// indexing helpers beyond flat data access.
inline hybridx::Tensor naive_conv2d(const hybridx::Tensor& input, const hybridx::Tensor& kernels,
                                    const hybridx::Tensor& bias, int stride, int pad) {
    const int c_in = static_cast<int>(input.shape()[0]);
    const int h = static_cast<int>(input.shape()[1]);
    const int w = static_cast<int>(input.shape()[2]);
    const int c_out = static_cast<int>(kernels.shape()[0]);
    const int kh = static_cast<int>(kernels.shape()[2]);
    const int kw = static_cast<int>(kernels.shape()[3]);
    const int h_out = (h + 2 * pad - kh) / stride + 1;
    const int w_out = (w + 2 * pad - kw) / stride + 1;

    const double* in = input.data();
    const double* ker = kernels.data();
    std::vector<double> out(static_cast<std::size_t>(c_out) * h_out * w_out, 0.0);
    for (int oc = 0; oc < c_out; ++oc)
        for (int oh = 0; oh < h_out; ++oh)
            for (int ow = 0; ow < w_out; ++ow) {
                double acc = bias.data()[oc];
                for (int ic = 0; ic < c_in; ++ic)
                    for (int r = 0; r < kh; ++r)
                        for (int c = 0; c < kw; ++c) {
                            const int ih = oh * stride - pad + r;
                            const int iw = ow * stride - pad + c;
                            if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                            acc += in[(ic * h + ih) * w + iw] *
                                   ker[((oc * c_in + ic) * kh + r) * kw + c];
                        }
                out[(static_cast<std::size_t>(oc) * h_out + oh) * w_out + ow] = acc;
            }
    return hybridx::Tensor({static_cast<std::size_t>(c_out), static_cast<std::size_t>(h_out),
                            static_cast<std::size_t>(w_out)},
                           std::move(out));
}

// Confusion counts via a different control flow (per-cell scans).
struct Counts {
    int tp, fp, fn, tn;
};

inline Counts count_confusion(const std::vector<hybridx::Label>& preds,
                              const std::vector<hybridx::Label>& truth) {
    using hybridx::Label;
    Counts c{0, 0, 0, 0};
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == Label::Asd && truth[i] == Label::Asd) ++c.tp;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == Label::Asd && truth[i] == Label::NonAsd) ++c.fp;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == Label::NonAsd && truth[i] == Label::Asd) ++c.fn;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == Label::NonAsd && truth[i] == Label::NonAsd) ++c.tn;
    return c;
}

// Second DenseNet forward pass composed from the naive pieces above and
// scalar loops; follows the architecture definition, not the library walk.
inline hybridx::Tensor naive_relu(const hybridx::Tensor& t) {
    hybridx::Tensor out = t;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i] < 0.0) out[i] = 0.0;
    return out;
}

inline hybridx::Tensor naive_concat(const hybridx::Tensor& a, const hybridx::Tensor& b) {
    std::vector<double> data(a.data(), a.data() + a.size());
    data.insert(data.end(), b.data(), b.data() + b.size());
    return hybridx::Tensor({a.shape()[0] + b.shape()[0], a.shape()[1], a.shape()[2]},
                           std::move(data));
}

inline hybridx::Tensor naive_avgpool(const hybridx::Tensor& t) {
    const std::size_t c = t.shape()[0], h = t.shape()[1], w = t.shape()[2];
    hybridx::Tensor out({c, h / 2, w / 2});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i + 1 < h; i += 2)
            for (std::size_t j = 0; j + 1 < w; j += 2) {
                const double s = t.at3(ch, i, j) + t.at3(ch, i, j + 1) + t.at3(ch, i + 1, j) +
                                 t.at3(ch, i + 1, j + 1);
                out.at3(ch, i / 2, j / 2) = s / 4.0;
            }
    return out;
}

inline hybridx::Tensor densenet_forward_oracle(const hybridx::DenseNetModel& model,
                                               const hybridx::Tensor& image) {
    const auto& cfg = model.config;
    hybridx::Tensor x = naive_conv2d(image, model.initial.kernels, model.initial.bias, 1, 1);
    for (int b = 0; b < cfg.blocks; ++b) {
        for (int l = 0; l < cfg.layers_per_block; ++l) {
            const hybridx::Tensor h = naive_conv2d(naive_relu(x), model.blocks[b][l].kernels,
                                                   model.blocks[b][l].bias, 1, 1);
            x = naive_concat(x, h);
        }
        if (b < cfg.blocks - 1) {
            x = naive_avgpool(
                naive_conv2d(x, model.transitions[b].kernels, model.transitions[b].bias, 1, 0));
        }
    }
    // global average pool + dense, in scalar form
    const std::size_t c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
    std::vector<double> pooled(c, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t i = 0; i < hw; ++i) acc += x.data()[ch * hw + i];
        pooled[ch] = acc / static_cast<double>(hw);
    }
    hybridx::Tensor logits({2});
    for (std::size_t o = 0; o < 2; ++o) {
        double acc = model.fc_bias[o];
        for (std::size_t ch = 0; ch < c; ++ch) acc += model.fc_weights.at2(o, ch) * pooled[ch];
        logits[o] = acc;
    }
    return logits;
}

}  // namespace oracle

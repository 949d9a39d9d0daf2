#include "hybridx/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "hybridx/layers.hpp"

namespace hybridx {

const std::vector<LayerKind>& all_layer_kinds() {
    static const std::vector<LayerKind> kinds = {
        LayerKind::Conv2d,        LayerKind::Dense,
        LayerKind::Relu,          LayerKind::AvgPool2x2,
        LayerKind::GlobalAvgPool, LayerKind::ConcatChannels,
        LayerKind::SoftmaxCrossEntropy,
    };
    return kinds;
}

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::Dense: return "dense";
        case LayerKind::Relu: return "relu";
        case LayerKind::AvgPool2x2: return "avgpool2x2";
        case LayerKind::GlobalAvgPool: return "global_avg_pool";
        case LayerKind::ConcatChannels: return "concat_channels";
        case LayerKind::SoftmaxCrossEntropy: return "softmax_crossentropy";
    }
    return "?";
}

double fd_max_rel_error(const LossFn& loss, const std::vector<Tensor>& points,
                        const std::vector<Tensor>& analytic, double step) {
    if (points.size() != analytic.size())
        throw std::invalid_argument("fd_max_rel_error: points/analytic length mismatch");
    std::vector<Tensor> work = points;
    double worst = 0.0;
    for (std::size_t t = 0; t < work.size(); ++t) {
        if (!work[t].same_shape(analytic[t]))
            throw std::invalid_argument("fd_max_rel_error: analytic gradient shape mismatch");
        for (std::size_t i = 0; i < work[t].size(); ++i) {
            const double kept = work[t][i];
            work[t][i] = kept + step;
            const double f_plus = loss(work);
            work[t][i] = kept - step;
            const double f_minus = loss(work);
            work[t][i] = kept;
            const double numeric = (f_plus - f_minus) / (2.0 * step);
            const double a = analytic[t][i];
            const double rel = std::fabs(a - numeric) /
                               std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

namespace {

struct Scenario {
    LossFn loss;
    std::vector<Tensor> points;
    std::vector<Tensor> analytic;
};

// Loss = sum(weights * output); its gradient w.r.t. the output is `weights`,
// which the layer backward turns into gradients for every point.
Tensor random_tensor(RngState& rng, std::vector<std::size_t> shape) {
    return rng.gaussian_tensor(std::move(shape), 1.0);
}

double dot_all(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Scenario conv2d_scenario(RngState& rng) {
    const std::size_t c_in = 1 + rng.uniform_below(3);
    const std::size_t c_out = 1 + rng.uniform_below(3);
    const std::size_t k = rng.uniform_below(2) == 0 ? 1 : 3;
    const std::size_t side = 4 + rng.uniform_below(4);
    const int stride = 1 + static_cast<int>(rng.uniform_below(2));
    const int pad = k == 3 ? static_cast<int>(rng.uniform_below(2)) : 0;

    Tensor input = random_tensor(rng, {c_in, side, side});
    Tensor kernels = random_tensor(rng, {c_out, c_in, k, k});
    Tensor bias = random_tensor(rng, {c_out});
    Tensor w = random_tensor(rng, conv2d_forward(input, kernels, bias, stride, pad).shape());

    Scenario s;
    s.loss = [w, stride, pad](const std::vector<Tensor>& p) {
        return dot_all(w, conv2d_forward(p[0], p[1], p[2], stride, pad));
    };
    Conv2dGrads g = conv2d_backward(w, input, kernels, stride, pad);
    s.points = {input, kernels, bias};
    s.analytic = {g.input, g.kernels, g.bias};
    return s;
}

Scenario dense_scenario(RngState& rng) {
    const std::size_t n = 2 + rng.uniform_below(7);
    const std::size_t m = 2 + rng.uniform_below(4);
    Tensor input = random_tensor(rng, {n});
    Tensor weights = random_tensor(rng, {m, n});
    Tensor bias = random_tensor(rng, {m});
    Tensor w = random_tensor(rng, {m});

    Scenario s;
    s.loss = [w](const std::vector<Tensor>& p) { return dot_all(w, dense_forward(p[0], p[1], p[2])); };
    DenseGrads g = dense_backward(w, input, weights);
    s.points = {input, weights, bias};
    s.analytic = {g.input, g.weights, g.bias};
    return s;
}

Scenario relu_scenario(RngState& rng) {
    const std::size_t n = 4 + rng.uniform_below(13);
    // Keep inputs at least 1e-2 from the kink so the central difference
    // never straddles it.
    Tensor input({n});
    for (std::size_t i = 0; i < n; ++i) {
        const double mag = 1e-2 + std::fabs(rng.gaussian());
        input[i] = rng.uniform_below(2) == 0 ? mag : -mag;
    }
    Tensor w = random_tensor(rng, {n});

    Scenario s;
    s.loss = [w](const std::vector<Tensor>& p) { return dot_all(w, relu_forward(p[0])); };
    s.points = {input};
    s.analytic = {relu_backward(w, input)};
    return s;
}

Scenario avgpool_scenario(RngState& rng) {
    const std::size_t c = 1 + rng.uniform_below(3);
    const std::size_t side = 2 * (1 + rng.uniform_below(4));
    Tensor input = random_tensor(rng, {c, side, side});
    Tensor w = random_tensor(rng, {c, side / 2, side / 2});

    Scenario s;
    s.loss = [w](const std::vector<Tensor>& p) { return dot_all(w, avgpool2x2_forward(p[0])); };
    s.points = {input};
    s.analytic = {avgpool2x2_backward(w, input.shape())};
    return s;
}

Scenario gap_scenario(RngState& rng) {
    const std::size_t c = 1 + rng.uniform_below(4);
    const std::size_t side = 2 + rng.uniform_below(6);
    Tensor input = random_tensor(rng, {c, side, side});
    Tensor w = random_tensor(rng, {c});

    Scenario s;
    s.loss = [w](const std::vector<Tensor>& p) { return dot_all(w, global_avg_pool_forward(p[0])); };
    s.points = {input};
    s.analytic = {global_avg_pool_backward(w, input.shape())};
    return s;
}

Scenario concat_scenario(RngState& rng) {
    const std::size_t side = 2 + rng.uniform_below(4);
    const std::size_t c0 = 1 + rng.uniform_below(3);
    const std::size_t c1 = 1 + rng.uniform_below(3);
    Tensor a = random_tensor(rng, {c0, side, side});
    Tensor b = random_tensor(rng, {c1, side, side});
    Tensor w = random_tensor(rng, {c0 + c1, side, side});

    Scenario s;
    s.loss = [w](const std::vector<Tensor>& p) {
        return dot_all(w, concat_channels_forward({p[0], p[1]}));
    };
    auto grads = concat_channels_backward(w, {a.shape(), b.shape()});
    s.points = {a, b};
    s.analytic = {grads[0], grads[1]};
    return s;
}

Scenario softmax_ce_scenario(RngState& rng) {
    Tensor logits = random_tensor(rng, {2});
    const int label = static_cast<int>(rng.uniform_below(2));

    Scenario s;
    s.loss = [label](const std::vector<Tensor>& p) { return softmax_crossentropy(p[0], label).loss; };
    s.points = {logits};
    s.analytic = {softmax_crossentropy(logits, label).grad_logits};
    return s;
}

}  // namespace

double gradcheck_layer(LayerKind kind, std::uint64_t seed) {
    RngState rng(seed);
    Scenario s;
    switch (kind) {
        case LayerKind::Conv2d: s = conv2d_scenario(rng); break;
        case LayerKind::Dense: s = dense_scenario(rng); break;
        case LayerKind::Relu: s = relu_scenario(rng); break;
        case LayerKind::AvgPool2x2: s = avgpool_scenario(rng); break;
        case LayerKind::GlobalAvgPool: s = gap_scenario(rng); break;
        case LayerKind::ConcatChannels: s = concat_scenario(rng); break;
        case LayerKind::SoftmaxCrossEntropy: s = softmax_ce_scenario(rng); break;
    }
    return fd_max_rel_error(s.loss, s.points, s.analytic);
}

std::vector<GradCheckEntry> run_gradcheck_suite(int configs_per_layer, std::uint64_t base_seed,
                                                double tolerance) {
    std::vector<GradCheckEntry> entries;
    for (LayerKind kind : all_layer_kinds()) {
        double worst = 0.0;
        for (int i = 0; i < configs_per_layer; ++i) {
            worst = std::max(worst, gradcheck_layer(kind, base_seed + static_cast<std::uint64_t>(i)));
        }
        entries.push_back({kind, worst, worst < tolerance});
    }
    return entries;
}

}  // namespace hybridx

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hybridx/tensor.hpp"

namespace hybridx {

enum class LayerKind {
    Conv2d,
    Dense,
    Relu,
    AvgPool2x2,
    GlobalAvgPool,
    ConcatChannels,
    SoftmaxCrossEntropy,
};

const std::vector<LayerKind>& all_layer_kinds();
const char* to_string(LayerKind kind);

using LossFn = std::function<double(const std::vector<Tensor>&)>;

/// Max over all elements of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
/// where numeric is the central difference of `loss` at `points`.
double fd_max_rel_error(const LossFn& loss, const std::vector<Tensor>& points,
                        const std::vector<Tensor>& analytic, double step = 1e-5);

/// Builds a small seeded configuration of the given layer and checks its
/// backward pass against central differences. ReLU inputs are kept at least
/// 1e-2 away from the kink.
double gradcheck_layer(LayerKind kind, std::uint64_t seed);

struct GradCheckEntry {
    LayerKind kind;
    double max_rel_error;
    bool pass;
};

/// One entry per layer kind; max error over `configs_per_layer` seeded runs.
std::vector<GradCheckEntry> run_gradcheck_suite(int configs_per_layer, std::uint64_t base_seed,
                                                double tolerance = 1e-4);

}  // namespace hybridx

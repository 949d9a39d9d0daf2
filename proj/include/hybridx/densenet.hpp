#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hybridx/samples.hpp"
#include "hybridx/tensor.hpp"
#include "hybridx/types.hpp"

namespace hybridx {

struct DenseNetConfig {
    int side = 16;
    int input_channels = 3;
    int initial_channels = 8;
    int blocks = 2;
    int layers_per_block = 2;
    int growth = 4;
    double compression = 0.5;
    double lr = 0.05;
    int epochs = 30;
    int patience = 3;
    double decay = 0.5;
    int batch_size = 16;
    std::uint64_t seed = 0;
};

void validate(const DenseNetConfig& config);

struct ConvParams {
    Tensor kernels;  // [C_out,C_in,kH,kW]
    Tensor bias;     // [C_out]
};

/// Miniature DenseNet: initial 3x3 conv, then dense blocks (each layer
/// ReLU -> 3x3 conv producing `growth` channels, concatenated onto the running
/// stack) separated by transitions (1x1 compression conv + 2x2 average pool),
/// ending in global average pooling and a 2-logit classifier.
struct DenseNetModel {
    DenseNetConfig config;
    ConvParams initial;
    std::vector<std::vector<ConvParams>> blocks;  // [block][layer]
    std::vector<ConvParams> transitions;          // blocks-1 entries
    Tensor fc_weights;                            // [2, channels entering GAP]
    Tensor fc_bias;                               // [2]
    DatasetStats train_stats;

    /// Parameter tensors in serialization order: initial conv, then per block
    /// its layers followed by its transition, then the classifier.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::size_t parameter_count() const;
    bool all_finite() const;
};

/// Channels entering block `b` (0-based); b == blocks yields the GAP input width.
int channels_into_block(const DenseNetConfig& config, int b);
int channels_entering_gap(const DenseNetConfig& config);

/// He-style seeded Gaussian kernels, zero biases.
DenseNetModel build_model(const DenseNetConfig& config);

struct ForwardCache {
    Tensor input;
    std::vector<std::vector<Tensor>> stacks;  // [block][0..layers]; [b][0] is the block input
    std::vector<std::vector<Tensor>> relu_out;
    std::vector<Tensor> transition_conv;  // post-1x1-conv, pre-pool
    Tensor gap_out;
    Tensor logits;
};

Tensor forward_logits(const DenseNetModel& model, const Tensor& image);
Tensor forward_logits_cached(const DenseNetModel& model, const Tensor& image, ForwardCache& cache);

/// Logits for a whole batch, row per sample: Tensor[batch,2].
Tensor forward_batch(const DenseNetModel& model, const std::vector<ImageSample>& batch);

struct BackwardResult {
    std::vector<Tensor> param_grads;  // aligned with DenseNetModel::parameters()
    Tensor input_grad;
};

BackwardResult backward_from_logits(const DenseNetModel& model, const ForwardCache& cache,
                                    const Tensor& grad_logits);

double predict_proba(const DenseNetModel& model, const Tensor& image);  // p(ASD)
Label densenet_predict(const DenseNetModel& model, const Tensor& image);
double densenet_accuracy(const DenseNetModel& model, const std::vector<ImageSample>& samples);

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;
};

struct FitResult {
    DenseNetModel best;
    std::vector<EpochStats> history;
};

/// Seeded-shuffle minibatch SGD with the plateau callback: snapshot the
/// parameters whenever validation accuracy exceeds the best seen; after
/// `patience` epochs without improvement multiply lr by `decay`. Returns the
/// snapshotted best model, never the final epoch's parameters.
FitResult fit_with_callback(const DenseNetModel& init, const std::vector<ImageSample>& train,
                            const std::vector<ImageSample>& validation);

/// End-to-end finite-difference check over all parameters and the input of a
/// one-sample batch. Seeds whose pre-activations sit too close to a ReLU kink
/// for the difference step are skipped deterministically.
double gradcheck_densenet(const DenseNetConfig& config, std::uint64_t seed);

// HYBRIDX-DENSENET v1: textual config header, then parameter tensors as
// little-endian 64-bit floats with a per-tensor shape prefix. Bit-exact
// round trip.
std::string densenet_to_bytes(const DenseNetModel& model);
DenseNetModel densenet_from_bytes(const std::string& bytes);

}  // namespace hybridx

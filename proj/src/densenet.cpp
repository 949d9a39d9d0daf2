#include "hybridx/densenet.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hybridx/gradcheck.hpp"
#include "hybridx/layers.hpp"

namespace hybridx {

void validate(const DenseNetConfig& config) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("DenseNetConfig: " + msg); };
    if (config.side < 1) fail("side must be >= 1");
    if (config.input_channels < 1) fail("input_channels must be >= 1");
    if (config.initial_channels < 1) fail("initial_channels must be >= 1");
    if (config.blocks < 1) fail("blocks must be >= 1");
    if (config.layers_per_block < 1) fail("layers_per_block must be >= 1");
    if (config.growth < 1) fail("growth must be >= 1");
    if (!(config.compression > 0.0 && config.compression <= 1.0)) fail("compression must be in (0,1]");
    if (!(config.lr > 0.0)) fail("lr must be positive");
    if (config.epochs < 1) fail("epochs must be >= 1");
    if (config.patience < 1) fail("patience must be >= 1");
    if (!(config.decay > 0.0 && config.decay < 1.0)) fail("decay must be in (0,1)");
    if (config.batch_size < 1) fail("batch_size must be >= 1");
    const int divisor = 1 << (config.blocks - 1);
    if (config.side % divisor != 0)
        fail("side " + std::to_string(config.side) + " not divisible by 2^(blocks-1) = " +
             std::to_string(divisor));
}

int channels_into_block(const DenseNetConfig& config, int b) {
    int ch = config.initial_channels;
    for (int i = 0; i < b; ++i) {
        ch += config.layers_per_block * config.growth;
        if (i < config.blocks - 1) ch = std::max(1, static_cast<int>(std::floor(ch * config.compression)));
    }
    return ch;
}

int channels_entering_gap(const DenseNetConfig& config) {
    return channels_into_block(config, config.blocks - 1) + config.layers_per_block * config.growth;
}

std::vector<Tensor*> DenseNetModel::parameters() {
    std::vector<Tensor*> out;
    out.push_back(&initial.kernels);
    out.push_back(&initial.bias);
    for (int b = 0; b < config.blocks; ++b) {
        for (auto& layer : blocks[b]) {
            out.push_back(&layer.kernels);
            out.push_back(&layer.bias);
        }
        if (b < config.blocks - 1) {
            out.push_back(&transitions[b].kernels);
            out.push_back(&transitions[b].bias);
        }
    }
    out.push_back(&fc_weights);
    out.push_back(&fc_bias);
    return out;
}

std::vector<const Tensor*> DenseNetModel::parameters() const {
    auto mutable_params = const_cast<DenseNetModel*>(this)->parameters();
    return std::vector<const Tensor*>(mutable_params.begin(), mutable_params.end());
}

std::size_t DenseNetModel::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : parameters()) n += t->size();
    return n;
}

bool DenseNetModel::all_finite() const {
    for (const Tensor* t : parameters())
        if (!t->all_finite()) return false;
    return true;
}

namespace {

ConvParams he_conv(RngState& rng, int c_out, int c_in, int k) {
    const double stddev = std::sqrt(2.0 / (c_in * k * k));
    return ConvParams{
        rng.gaussian_tensor({static_cast<std::size_t>(c_out), static_cast<std::size_t>(c_in),
                             static_cast<std::size_t>(k), static_cast<std::size_t>(k)},
                            stddev),
        Tensor({static_cast<std::size_t>(c_out)})};
}

}  // namespace

DenseNetModel build_model(const DenseNetConfig& config) {
    validate(config);
    DenseNetModel model;
    model.config = config;
    RngState rng = RngState(config.seed).split(11);

    model.initial = he_conv(rng, config.initial_channels, config.input_channels, 3);
    model.blocks.resize(config.blocks);
    for (int b = 0; b < config.blocks; ++b) {
        int ch = channels_into_block(config, b);
        for (int l = 0; l < config.layers_per_block; ++l) {
            model.blocks[b].push_back(he_conv(rng, config.growth, ch, 3));
            ch += config.growth;
        }
        if (b < config.blocks - 1) {
            const int compressed = std::max(1, static_cast<int>(std::floor(ch * config.compression)));
            model.transitions.push_back(he_conv(rng, compressed, ch, 1));
        }
    }
    const int gap_ch = channels_entering_gap(config);
    const double fc_std = std::sqrt(2.0 / gap_ch);
    model.fc_weights = rng.gaussian_tensor({2, static_cast<std::size_t>(gap_ch)}, fc_std);
    model.fc_bias = Tensor({2});
    return model;
}

Tensor forward_logits_cached(const DenseNetModel& model, const Tensor& image, ForwardCache& cache) {
    const DenseNetConfig& cfg = model.config;
    if (image.rank() != 3 || image.extent(0) != static_cast<std::size_t>(cfg.input_channels) ||
        image.extent(1) != static_cast<std::size_t>(cfg.side) ||
        image.extent(2) != static_cast<std::size_t>(cfg.side)) {
        throw std::invalid_argument("densenet forward: image shape " + image.shape_str() +
                                    " does not match configured input " +
                                    shape_to_string({static_cast<std::size_t>(cfg.input_channels),
                                                     static_cast<std::size_t>(cfg.side),
                                                     static_cast<std::size_t>(cfg.side)}));
    }

    cache.input = image;
    cache.stacks.assign(cfg.blocks, {});
    cache.relu_out.assign(cfg.blocks, {});
    cache.transition_conv.clear();

    Tensor x = conv2d_forward(image, model.initial.kernels, model.initial.bias, 1, 1);
    for (int b = 0; b < cfg.blocks; ++b) {
        cache.stacks[b].push_back(x);
        for (int l = 0; l < cfg.layers_per_block; ++l) {
            Tensor r = relu_forward(cache.stacks[b][l]);
            Tensor h = conv2d_forward(r, model.blocks[b][l].kernels, model.blocks[b][l].bias, 1, 1);
            cache.relu_out[b].push_back(std::move(r));
            cache.stacks[b].push_back(concat_channels_forward({cache.stacks[b][l], h}));
        }
        x = cache.stacks[b].back();
        if (b < cfg.blocks - 1) {
            Tensor t = conv2d_forward(x, model.transitions[b].kernels, model.transitions[b].bias, 1, 0);
            cache.transition_conv.push_back(t);
            x = avgpool2x2_forward(t);
        }
    }
    cache.gap_out = global_avg_pool_forward(x);
    cache.logits = dense_forward(cache.gap_out, model.fc_weights, model.fc_bias);
    return cache.logits;
}

Tensor forward_logits(const DenseNetModel& model, const Tensor& image) {
    ForwardCache cache;
    return forward_logits_cached(model, image, cache);
}

Tensor forward_batch(const DenseNetModel& model, const std::vector<ImageSample>& batch) {
    if (batch.empty()) throw std::invalid_argument("forward_batch: empty batch");
    Tensor out({batch.size(), 2});
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Tensor logits = forward_logits(model, batch[i].pixels);
        out.at2(i, 0) = logits[0];
        out.at2(i, 1) = logits[1];
    }
    return out;
}

BackwardResult backward_from_logits(const DenseNetModel& model, const ForwardCache& cache,
                                    const Tensor& grad_logits) {
    const DenseNetConfig& cfg = model.config;
    BackwardResult result;

    // Gradient tensors mirror the parameters() order; build aligned storage.
    DenseNetModel grads = model;  // same shapes; values overwritten below
    for (Tensor* t : grads.parameters()) *t = Tensor(t->shape());

    DenseGrads fc = dense_backward(grad_logits, cache.gap_out, model.fc_weights);
    grads.fc_weights = std::move(fc.weights);
    grads.fc_bias = std::move(fc.bias);

    Tensor grad_stack =
        global_avg_pool_backward(fc.input, cache.stacks[cfg.blocks - 1].back().shape());

    for (int b = cfg.blocks - 1; b >= 0; --b) {
        for (int l = cfg.layers_per_block - 1; l >= 0; --l) {
            const Tensor& stack_in = cache.stacks[b][l];
            const std::size_t growth = static_cast<std::size_t>(cfg.growth);
            auto parts = concat_channels_backward(
                grad_stack, {stack_in.shape(),
                             {growth, stack_in.extent(1), stack_in.extent(2)}});
            Conv2dGrads cg =
                conv2d_backward(parts[1], cache.relu_out[b][l], model.blocks[b][l].kernels, 1, 1);
            grads.blocks[b][l].kernels = std::move(cg.kernels);
            grads.blocks[b][l].bias = std::move(cg.bias);
            Tensor through_relu = relu_backward(cg.input, stack_in);
            grad_stack = std::move(parts[0]);
            for (std::size_t i = 0; i < grad_stack.size(); ++i) grad_stack[i] += through_relu[i];
        }
        if (b > 0) {
            Tensor pooled = avgpool2x2_backward(grad_stack, cache.transition_conv[b - 1].shape());
            Conv2dGrads tg = conv2d_backward(pooled, cache.stacks[b - 1].back(),
                                             model.transitions[b - 1].kernels, 1, 0);
            grads.transitions[b - 1].kernels = std::move(tg.kernels);
            grads.transitions[b - 1].bias = std::move(tg.bias);
            grad_stack = std::move(tg.input);
        } else {
            Conv2dGrads ig = conv2d_backward(grad_stack, cache.input, model.initial.kernels, 1, 1);
            grads.initial.kernels = std::move(ig.kernels);
            grads.initial.bias = std::move(ig.bias);
            result.input_grad = std::move(ig.input);
        }
    }

    for (Tensor* t : grads.parameters()) result.param_grads.push_back(std::move(*t));
    return result;
}

double predict_proba(const DenseNetModel& model, const Tensor& image) {
    return softmax(forward_logits(model, image))[static_cast<int>(Label::Asd)];
}

Label densenet_predict(const DenseNetModel& model, const Tensor& image) {
    return predict_proba(model, image) >= 0.5 ? Label::Asd : Label::NonAsd;
}

double densenet_accuracy(const DenseNetModel& model, const std::vector<ImageSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("densenet_accuracy: empty dataset");
    int correct = 0;
    for (const ImageSample& s : samples)
        if (densenet_predict(model, s.pixels) == s.label) ++correct;
    return static_cast<double>(correct) / samples.size();
}

FitResult fit_with_callback(const DenseNetModel& init, const std::vector<ImageSample>& train,
                            const std::vector<ImageSample>& validation) {
    if (train.empty()) throw std::invalid_argument("fit_with_callback: empty training set");
    if (validation.empty()) throw std::invalid_argument("fit_with_callback: empty validation set");
    {
        const DatasetStats vs = count_stats(validation);
        if (vs.n_asd == 0 || vs.n_non_asd == 0)
            throw std::invalid_argument("fit_with_callback: validation set contains a single class");
    }

    const DenseNetConfig& cfg = init.config;
    DenseNetModel model = init;
    model.train_stats = count_stats(train);

    RngState rng = RngState(cfg.seed).split(12);
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    FitResult result;
    result.best = model;
    double best_acc = -std::numeric_limits<double>::infinity();
    double lr = cfg.lr;
    int bad_epochs = 0;

    ForwardCache cache;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<Tensor> batch_grads;
            for (std::size_t i = start; i < end; ++i) {
                const ImageSample& sample = train[order[i]];
                forward_logits_cached(model, sample.pixels, cache);
                const SoftmaxCeResult ce =
                    softmax_crossentropy(cache.logits, static_cast<int>(sample.label));
                loss_sum += ce.loss;
                BackwardResult bw = backward_from_logits(model, cache, ce.grad_logits);
                if (batch_grads.empty()) {
                    batch_grads = std::move(bw.param_grads);
                } else {
                    for (std::size_t k = 0; k < batch_grads.size(); ++k)
                        for (std::size_t j = 0; j < batch_grads[k].size(); ++j)
                            batch_grads[k][j] += bw.param_grads[k][j];
                }
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            std::vector<Tensor*> params = model.parameters();
            std::vector<const Tensor*> grad_ptrs;
            for (Tensor& g : batch_grads) {
                for (std::size_t j = 0; j < g.size(); ++j) g[j] *= inv;
                grad_ptrs.push_back(&g);
            }
            sgd_step(params, grad_ptrs, lr);
        }
        const double train_loss = loss_sum / static_cast<double>(train.size());
        if (!std::isfinite(train_loss))
            throw std::runtime_error("fit_with_callback: non-finite training loss at epoch " +
                                     std::to_string(epoch));

        const double val_acc = densenet_accuracy(model, validation);
        result.history.push_back({epoch, train_loss, val_acc, lr});

        if (val_acc > best_acc) {
            best_acc = val_acc;
            result.best = model;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs >= cfg.patience) {
                lr *= cfg.decay;
                bad_epochs = 0;
            }
        }
    }
    return result;
}

double gradcheck_densenet(const DenseNetConfig& config, std::uint64_t seed) {
    // A pre-activation within reach of the difference step would straddle the
    // ReLU kink; skip such seeds (deterministically) rather than loosen the
    // tolerance.
    constexpr double kStep = 1e-5;
    constexpr double kMinGap = 2e-4;
    constexpr int kMaxTrials = 200;

    for (int trial = 0; trial < kMaxTrials; ++trial) {
        DenseNetConfig cfg = config;
        cfg.seed = seed + static_cast<std::uint64_t>(trial);
        DenseNetModel model = build_model(cfg);

        RngState rng = RngState(cfg.seed).split(13);
        Tensor image({static_cast<std::size_t>(cfg.input_channels), static_cast<std::size_t>(cfg.side),
                      static_cast<std::size_t>(cfg.side)});
        for (std::size_t i = 0; i < image.size(); ++i) image[i] = rng.uniform();
        const int label = static_cast<int>(rng.uniform_below(2));

        ForwardCache cache;
        forward_logits_cached(model, image, cache);
        double min_gap = std::numeric_limits<double>::infinity();
        for (int b = 0; b < cfg.blocks; ++b)
            for (int l = 0; l < cfg.layers_per_block; ++l)
                for (std::size_t i = 0; i < cache.stacks[b][l].size(); ++i)
                    min_gap = std::min(min_gap, std::fabs(cache.stacks[b][l][i]));
        if (min_gap < kMinGap) continue;

        const SoftmaxCeResult ce = softmax_crossentropy(cache.logits, label);
        BackwardResult bw = backward_from_logits(model, cache, ce.grad_logits);

        std::vector<Tensor> points;
        points.push_back(image);
        for (const Tensor* t : model.parameters()) points.push_back(*t);
        std::vector<Tensor> analytic;
        analytic.push_back(std::move(bw.input_grad));
        for (Tensor& g : bw.param_grads) analytic.push_back(std::move(g));

        DenseNetModel scratch = model;
        auto loss = [&scratch, label](const std::vector<Tensor>& p) {
            std::vector<Tensor*> params = scratch.parameters();
            for (std::size_t k = 0; k < params.size(); ++k) *params[k] = p[k + 1];
            return softmax_crossentropy(forward_logits(scratch, p[0]), label).loss;
        };
        return fd_max_rel_error(loss, points, analytic, kStep);
    }
    throw std::runtime_error("gradcheck_densenet: no kink-safe seed found");
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

struct Cursor {
    const std::string& buf;
    std::size_t pos = 0;

    std::uint32_t u32() {
        if (pos + 4 > buf.size()) throw std::runtime_error("densenet_from_bytes: truncated payload");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        if (pos + 8 > buf.size()) throw std::runtime_error("densenet_from_bytes: truncated payload");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
};

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string densenet_to_bytes(const DenseNetModel& model) {
    if (!model.all_finite())
        throw std::invalid_argument("densenet_to_bytes: model has non-finite parameters");
    std::ostringstream head;
    const DenseNetConfig& c = model.config;
    head << "HYBRIDX-DENSENET v1\n";
    head << "side = " << c.side << "\n";
    head << "input_channels = " << c.input_channels << "\n";
    head << "initial_channels = " << c.initial_channels << "\n";
    head << "blocks = " << c.blocks << "\n";
    head << "layers_per_block = " << c.layers_per_block << "\n";
    head << "growth = " << c.growth << "\n";
    head << "compression = " << fmt_double(c.compression) << "\n";
    head << "lr = " << fmt_double(c.lr) << "\n";
    head << "epochs = " << c.epochs << "\n";
    head << "patience = " << c.patience << "\n";
    head << "decay = " << fmt_double(c.decay) << "\n";
    head << "batch_size = " << c.batch_size << "\n";
    head << "seed = " << c.seed << "\n";
    head << "n_asd = " << model.train_stats.n_asd << "\n";
    head << "n_non_asd = " << model.train_stats.n_non_asd << "\n";
    head << "params\n";

    std::string out = head.str();
    for (const Tensor* t : model.parameters()) {
        put_u32(out, static_cast<std::uint32_t>(t->rank()));
        for (std::size_t e : t->shape()) put_u64(out, e);
        for (std::size_t i = 0; i < t->size(); ++i) put_f64(out, (*t)[i]);
    }
    return out;
}

DenseNetModel densenet_from_bytes(const std::string& bytes) {
    std::size_t pos = 0;
    auto next_line = [&]() {
        const std::size_t nl = bytes.find('\n', pos);
        if (nl == std::string::npos) throw std::runtime_error("densenet_from_bytes: truncated header");
        std::string line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };

    if (next_line() != "HYBRIDX-DENSENET v1")
        throw std::runtime_error("densenet_from_bytes: missing HYBRIDX-DENSENET v1 header");

    DenseNetConfig cfg;
    int n_asd = 0, n_non_asd = 0;
    for (;;) {
        const std::string line = next_line();
        if (line == "params") break;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("densenet_from_bytes: malformed header line '" + line + "'");
        std::string key = line.substr(0, eq);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        std::istringstream value(line.substr(eq + 1));
        if (key == "side") value >> cfg.side;
        else if (key == "input_channels") value >> cfg.input_channels;
        else if (key == "initial_channels") value >> cfg.initial_channels;
        else if (key == "blocks") value >> cfg.blocks;
        else if (key == "layers_per_block") value >> cfg.layers_per_block;
        else if (key == "growth") value >> cfg.growth;
        else if (key == "compression") value >> cfg.compression;
        else if (key == "lr") value >> cfg.lr;
        else if (key == "epochs") value >> cfg.epochs;
        else if (key == "patience") value >> cfg.patience;
        else if (key == "decay") value >> cfg.decay;
        else if (key == "batch_size") value >> cfg.batch_size;
        else if (key == "seed") value >> cfg.seed;
        else if (key == "n_asd") value >> n_asd;
        else if (key == "n_non_asd") value >> n_non_asd;
        else throw std::runtime_error("densenet_from_bytes: unknown key '" + key + "'");
        if (value.fail())
            throw std::runtime_error("densenet_from_bytes: bad value for key '" + key + "'");
    }

    DenseNetModel model = build_model(cfg);
    model.train_stats = make_stats(n_asd, n_non_asd);

    Cursor cur{bytes, pos};
    for (Tensor* t : model.parameters()) {
        const std::uint32_t rank = cur.u32();
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<std::size_t>(cur.u64());
        if (shape != t->shape())
            throw std::runtime_error("densenet_from_bytes: tensor shape " + shape_to_string(shape) +
                                     " does not match configured " + t->shape_str());
        for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = cur.f64();
    }
    if (cur.pos != bytes.size())
        throw std::runtime_error("densenet_from_bytes: trailing bytes after parameters");
    return model;
}

}  // namespace hybridx

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hybridx/data_io.hpp"
#include "hybridx/densenet.hpp"
#include "hybridx/layers.hpp"
#include "support/oracles.hpp"

using namespace hybridx;

namespace {

DenseNetConfig small_config() {
    DenseNetConfig cfg;
    cfg.side = 8;
    cfg.initial_channels = 4;
    cfg.blocks = 2;
    cfg.layers_per_block = 1;
    cfg.growth = 2;
    cfg.seed = 5;
    return cfg;
}

std::vector<ImageSample> tiny_images(int per_class, int side, std::uint64_t seed,
                                     double sigma = 0.08, double contrast = 0.7) {
    ImageSynthSpec spec;
    spec.stats = make_stats(per_class, per_class);
    spec.side = side;
    spec.contrast = contrast;
    spec.noise_sigma = sigma;
    spec.seed = seed;
    return synth_image_data(spec);
}

// Independent parameter count from the architecture arithmetic.
std::size_t expected_parameter_count(const DenseNetConfig& c) {
    std::size_t total = 0;
    auto conv = [&](int c_out, int c_in, int k) {
        total += static_cast<std::size_t>(c_out) * c_in * k * k + c_out;
    };
    conv(c.initial_channels, c.input_channels, 3);
    int ch = c.initial_channels;
    for (int b = 0; b < c.blocks; ++b) {
        for (int l = 0; l < c.layers_per_block; ++l) {
            conv(c.growth, ch, 3);
            ch += c.growth;
        }
        if (b < c.blocks - 1) {
            const int compressed = static_cast<int>(std::floor(ch * c.compression));
            conv(compressed, ch, 1);
            ch = compressed;
        }
    }
    total += static_cast<std::size_t>(2) * ch + 2;  // classifier
    return total;
}

}  // namespace

TEST_CASE("config validation enforces the architectural invariants") {
    CHECK_NOTHROW(validate(DenseNetConfig{}));

    DenseNetConfig bad = small_config();
    bad.side = 9;  // not divisible by 2^(blocks-1)
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    CHECK_THROWS_AS(build_model(bad), std::invalid_argument);

    bad = small_config();
    bad.decay = 1.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = small_config();
    bad.compression = 0.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = small_config();
    bad.blocks = 0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("dense-block concatenation arithmetic") {
    DenseNetConfig cfg;
    cfg.side = 8;
    cfg.blocks = 1;
    cfg.layers_per_block = 1;
    cfg.growth = 4;
    cfg.initial_channels = 8;
    CHECK(channels_entering_gap(cfg) == 12);  // 8 + 4

    // each extra layer adds exactly k channels
    DenseNetConfig more = cfg;
    more.layers_per_block = 3;
    CHECK(channels_entering_gap(more) == channels_entering_gap(cfg) + 2 * cfg.growth);
}

TEST_CASE("parameter count matches the closed-form hand count") {
    for (DenseNetConfig cfg : {small_config(), DenseNetConfig{}}) {
        const DenseNetModel model = build_model(cfg);
        CHECK(model.parameter_count() == expected_parameter_count(cfg));
    }
    // spot value for the default desk config, derived once by hand:
    // initial 3->8 (216+8), block layers 4x8x9+4 and 4x12x9+4, transition
    // 16->8 (128+8), same block again, classifier 2x16+2
    const DenseNetModel desk = build_model(DenseNetConfig{});
    CHECK(desk.parameter_count() == 224 + 292 + 436 + 136 + 292 + 436 + 34);
}

TEST_CASE("zeroed classifier maps any image to zero logits") {
    DenseNetModel model = build_model(small_config());
    model.fc_weights = Tensor(model.fc_weights.shape());
    model.fc_bias = Tensor(model.fc_bias.shape());
    const Tensor image({3, 8, 8});
    const Tensor logits = forward_logits(model, image);
    CHECK(logits[0] == 0.0);
    CHECK(logits[1] == 0.0);
    CHECK(predict_proba(model, image) == 0.5);
}

TEST_CASE("forward rejects images that do not match the configured side") {
    const DenseNetModel model = build_model(small_config());
    CHECK_THROWS_AS(forward_logits(model, Tensor({3, 16, 16})), std::invalid_argument);
    CHECK_THROWS_AS(forward_logits(model, Tensor({1, 8, 8})), std::invalid_argument);
}

TEST_CASE("permuting a batch permutes the logits identically") {
    const DenseNetModel model = build_model(small_config());
    auto images = tiny_images(3, 8, 9);
    const Tensor straight = forward_batch(model, images);
    std::vector<ImageSample> reversed(images.rbegin(), images.rend());
    const Tensor flipped = forward_batch(model, reversed);
    const std::size_t n = images.size();
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(straight.at2(i, 0) == flipped.at2(n - 1 - i, 0));
        CHECK(straight.at2(i, 1) == flipped.at2(n - 1 - i, 1));
    }
}

TEST_CASE("forward pass matches the independently coded oracle") {
    RngState rng(123);
    for (const DenseNetConfig& cfg : {small_config(), DenseNetConfig{}}) {
        const DenseNetModel model = build_model(cfg);
        Tensor image({3, static_cast<std::size_t>(cfg.side), static_cast<std::size_t>(cfg.side)});
        for (std::size_t i = 0; i < image.size(); ++i) image[i] = rng.uniform();
        const Tensor got = forward_logits(model, image);
        const Tensor want = oracle::densenet_forward_oracle(model, image);
        CHECK(std::fabs(got[0] - want[0]) < 1e-10);
        CHECK(std::fabs(got[1] - want[1]) < 1e-10);
    }
}

TEST_CASE("predict_proba is the softmax of the forward logits") {
    const DenseNetModel model = build_model(small_config());
    const auto images = tiny_images(2, 8, 31);
    for (const ImageSample& s : images) {
        const Tensor logits = forward_logits(model, s.pixels);
        const Tensor sm = softmax(logits);
        CHECK(predict_proba(model, s.pixels) == sm[1]);
        CHECK(sm[0] + sm[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("end-to-end gradient passes the finite-difference check") {
    DenseNetConfig cfg = small_config();
    CHECK(gradcheck_densenet(cfg, 1) < 1e-4);
}

TEST_CASE("plateau callback halves the lr every epoch once accuracy freezes") {
    DenseNetConfig cfg = small_config();
    cfg.lr = 1e-12;  // decisions cannot move, so validation accuracy is frozen
    cfg.epochs = 6;
    cfg.patience = 1;
    cfg.decay = 0.5;
    const DenseNetModel init = build_model(cfg);
    const auto images = tiny_images(6, 8, 17);
    const FitResult fit = fit_with_callback(init, images, images);

    REQUIRE(fit.history.size() == 6);
    CHECK(fit.history[0].lr == 1e-12);
    CHECK(fit.history[1].lr == 1e-12);  // first epoch snapshots, second starts the plateau
    for (std::size_t e = 2; e < fit.history.size(); ++e)
        CHECK(fit.history[e].lr == doctest::Approx(fit.history[e - 1].lr * 0.5).epsilon(1e-15));
    for (std::size_t e = 1; e < fit.history.size(); ++e)
        CHECK(fit.history[e].val_accuracy == fit.history[0].val_accuracy);
}

TEST_CASE("callback returns the snapshotted best model") {
    DenseNetConfig cfg = small_config();
    cfg.epochs = 8;
    cfg.lr = 0.05;
    cfg.batch_size = 8;
    const auto images = tiny_images(20, 8, 55);
    const auto parts = stratified_split(images, SplitSpec{{0.7, 0.3}, true, 2});
    const FitResult fit = fit_with_callback(build_model(cfg), parts[0], parts[1]);

    const double best_acc = densenet_accuracy(fit.best, parts[1]);
    double max_hist = 0.0;
    for (const EpochStats& e : fit.history) {
        max_hist = std::max(max_hist, e.val_accuracy);
        CHECK(e.val_accuracy <= best_acc + 1e-12);
    }
    CHECK(best_acc == doctest::Approx(max_hist).epsilon(1e-12));

    // lr never increases and every decrease is exactly the decay factor
    for (std::size_t e = 1; e < fit.history.size(); ++e) {
        const double prev = fit.history[e - 1].lr, cur = fit.history[e].lr;
        CHECK(cur <= prev);
        if (cur < prev) CHECK(cur == doctest::Approx(prev * cfg.decay).epsilon(1e-15));
    }
}

TEST_CASE("training is bitwise reproducible given equal seeds") {
    DenseNetConfig cfg = small_config();
    cfg.epochs = 3;
    const auto images = tiny_images(8, 8, 77);
    const auto parts = stratified_split(images, SplitSpec{{0.75, 0.25}, true, 4});

    const FitResult a = fit_with_callback(build_model(cfg), parts[0], parts[1]);
    const FitResult b = fit_with_callback(build_model(cfg), parts[0], parts[1]);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        CHECK(a.history[e].train_loss == b.history[e].train_loss);
        CHECK(a.history[e].val_accuracy == b.history[e].val_accuracy);
    }
    const auto pa = a.best.parameters();
    const auto pb = b.best.parameters();
    for (std::size_t k = 0; k < pa.size(); ++k) CHECK(*pa[k] == *pb[k]);
}

TEST_CASE("desk-scale separable image task trains to high accuracy") {
    DenseNetConfig cfg;  // default desk config
    cfg.epochs = 12;
    cfg.seed = 3;
    const auto images = tiny_images(60, 16, 99, 0.02, 0.9);
    const auto parts = stratified_split(images, SplitSpec{{0.67, 0.33}, true, 6});
    const FitResult fit = fit_with_callback(build_model(cfg), parts[0], parts[1]);
    CHECK(densenet_accuracy(fit.best, parts[1]) >= 0.95);
}

TEST_CASE("model bytes round-trip bit-exactly") {
    DenseNetConfig cfg = small_config();
    cfg.epochs = 2;
    const auto images = tiny_images(6, 8, 13);
    FitResult fit = fit_with_callback(build_model(cfg), images, images);

    const std::string bytes = densenet_to_bytes(fit.best);
    const DenseNetModel back = densenet_from_bytes(bytes);
    CHECK(back.config.side == cfg.side);
    CHECK(back.config.growth == cfg.growth);
    CHECK(back.train_stats.n_asd == fit.best.train_stats.n_asd);
    const auto pa = fit.best.parameters();
    const auto pb = back.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) CHECK(*pa[k] == *pb[k]);
    CHECK(densenet_to_bytes(back) == bytes);

    CHECK_THROWS_AS(densenet_from_bytes("HYBRIDX-DENSENET v2\n"), std::runtime_error);
    CHECK_THROWS_AS(densenet_from_bytes(bytes.substr(0, bytes.size() - 4)), std::runtime_error);
}

TEST_CASE("fit rejects empty and single-class validation sets") {
    const DenseNetModel model = build_model(small_config());
    const auto images = tiny_images(4, 8, 3);
    CHECK_THROWS_AS(fit_with_callback(model, {}, images), std::invalid_argument);
    CHECK_THROWS_AS(fit_with_callback(model, images, {}), std::invalid_argument);
    std::vector<ImageSample> one_class(images.begin(), images.begin() + 4);  // all ASD
    CHECK_THROWS_AS(fit_with_callback(model, images, one_class), std::invalid_argument);
}

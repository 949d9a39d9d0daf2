#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hybridx/samples.hpp"
#include "hybridx/types.hpp"

namespace hybridx {

/// Behavior scores after recoding: severity codes 0-3 pass through, the
/// non-severity codes 7/8/9 map to 0.
struct EncodedFeatures {
    std::array<double, kFeatureCount> values{};
};

EncodedFeatures encode_record(const AdosRecord& record);

enum class SvmMode {
    Stochastic,  // seeded-shuffle per-sample subgradient steps (default)
    FullBatch,   // one averaged subgradient step per epoch
};

struct SvmTrainOptions {
    double lr = 1e-2;
    double lambda = 1e-3;
    int epochs = 200;
    std::uint64_t seed = 0;
    SvmMode mode = SvmMode::Stochastic;
    // When set, receives the full-dataset hinge objective after every epoch.
    std::vector<double>* loss_history = nullptr;
};

struct LinearSvmModel {
    std::array<double, kFeatureCount> weights{};
    double bias = 0.0;
    double lr = 0.0;
    double lambda = 0.0;
    int epochs = 0;
    std::uint64_t seed = 0;
    int n_asd = 0;
    int n_non_asd = 0;

    bool all_finite() const;
};

/// Minimizes (1/n) sum max(0, 1 - y(w.x + b)) + lambda*|w|^2 with labels
/// y = +1 for ASD, -1 for non-ASD. Deterministic given the seed.
LinearSvmModel fit_svm(const std::vector<AdosRecord>& train, const SvmTrainOptions& options);

double predict_margin(const LinearSvmModel& model, const EncodedFeatures& features);
double predict_margin(const LinearSvmModel& model, const std::array<double, kFeatureCount>& x);

/// Platt-style squashing of a margin into (0,1).
double margin_to_probability(double margin, double scale = 1.0);

Label svm_predict(const LinearSvmModel& model, const AdosRecord& record);

double svm_accuracy(const LinearSvmModel& model, const std::vector<AdosRecord>& records);

/// Hinge objective of the model on a dataset (the quantity fit_svm minimizes).
double svm_objective(const LinearSvmModel& model, const std::vector<AdosRecord>& records);

struct LrSweepResult {
    double best_lr = 0.0;
    std::vector<double> accuracies;  // one per grid entry, same order
};

/// Trains one model per grid value (same seed each) and picks the lr with the
/// highest validation accuracy; ties go to the smaller lr.
LrSweepResult lr_sweep(const std::vector<AdosRecord>& train, const std::vector<AdosRecord>& validation,
                       const std::vector<double>& grid, const SvmTrainOptions& base_options);

inline std::vector<double> default_lr_grid() { return {1e-4, 1e-3, 1e-2, 1e-1}; }

// Versioned textual format, weights as 17-significant-digit decimals;
// round-trips bit-exactly.
std::string svm_to_text(const LinearSvmModel& model);
LinearSvmModel svm_from_text(const std::string& text);

}  // namespace hybridx

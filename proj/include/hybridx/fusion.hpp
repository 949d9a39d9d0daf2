#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hybridx/densenet.hpp"
#include "hybridx/metrics.hpp"
#include "hybridx/samples.hpp"
#include "hybridx/svm.hpp"

namespace hybridx {

struct PredictionVector {
    double p_social = 0.5;
    double p_facial = 0.5;
    int n_images_used = 0;
};

/// Normalized pair of module weights; rejects anything that is not a convex
/// combination (both >= 0, summing to 1 within 1e-12).
struct FusionWeights {
    FusionWeights(double social_weight, double facial_weight);

    double social;
    double facial;
};

/// Weights proportional to each module's count of ASD training patients.
FusionWeights compute_prevalence_weights(int n_asd_social, int n_asd_facial);

/// Arithmetic mean of the per-image probabilities.
double aggregate_image_predictions(const std::vector<double>& per_image_probs);

double fuse(const PredictionVector& pred, const FusionWeights& weights);

/// ASD iff p >= threshold; the tie goes to ASD (screening favors sensitivity).
Label decide(double p, double threshold = 0.5);

struct PatientTrace {
    std::string patient_id;
    double p_social = 0.0;
    double p_facial = 0.0;
    int n_images = 0;
    double w_social = 0.0;
    double w_facial = 0.0;
    double p_hybrid = 0.0;
    Label decision = Label::NonAsd;
    Label label = Label::NonAsd;
};

std::string trace_to_csv(const std::vector<PatientTrace>& trace);

struct HybridResult {
    EvalReport report;
    std::vector<PatientTrace> trace;
};

/// Per bundle: encode behavior scores -> margin -> probability; average the
/// per-image network probabilities; fuse; decide. Scores the decisions and
/// keeps every intermediate in the trace.
HybridResult run_hybrid_pipeline(const std::vector<PatientBundle>& bundles,
                                 const LinearSvmModel& svm, const DenseNetModel& net,
                                 const FusionWeights& weights, double threshold = 0.5,
                                 std::uint64_t seed = 0);

// Single-module decisions on a bundle, used for the degenerate-weight
// equivalence checks and the comparison table.
double social_probability(const LinearSvmModel& svm, const PatientBundle& bundle);
double facial_probability(const DenseNetModel& net, const PatientBundle& bundle);

}  // namespace hybridx

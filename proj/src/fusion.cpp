#include "hybridx/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace hybridx {

namespace {

// Keep probabilities inside the open interval; the decision threshold is
// unaffected.
constexpr double kProbEps = 1e-12;

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

}  // namespace

FusionWeights::FusionWeights(double social_weight, double facial_weight)
    : social(social_weight), facial(facial_weight) {
    if (!(social >= 0.0) || !(facial >= 0.0))
        throw std::invalid_argument("FusionWeights: weights must be non-negative");
    if (std::fabs(social + facial - 1.0) > 1e-12)
        throw std::invalid_argument("FusionWeights: weights sum to " +
                                    std::to_string(social + facial) + ", expected 1");
}

FusionWeights compute_prevalence_weights(int n_asd_social, int n_asd_facial) {
    if (n_asd_social <= 0 || n_asd_facial <= 0)
        throw std::invalid_argument("compute_prevalence_weights: ASD counts must be positive");
    const double total = static_cast<double>(n_asd_social) + static_cast<double>(n_asd_facial);
    const double w_social = n_asd_social / total;
    return FusionWeights(w_social, 1.0 - w_social);
}

double aggregate_image_predictions(const std::vector<double>& per_image_probs) {
    if (per_image_probs.empty())
        throw std::invalid_argument("aggregate_image_predictions: empty probability list");
    double sum = 0.0;
    for (double p : per_image_probs) {
        if (!(p > 0.0 && p < 1.0))
            throw std::invalid_argument("aggregate_image_predictions: probability " +
                                        std::to_string(p) + " outside (0,1)");
        sum += p;
    }
    return sum / static_cast<double>(per_image_probs.size());
}

double fuse(const PredictionVector& pred, const FusionWeights& weights) {
    return weights.social * pred.p_social + weights.facial * pred.p_facial;
}

Label decide(double p, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("decide: threshold must lie in (0,1)");
    return p >= threshold ? Label::Asd : Label::NonAsd;
}

double social_probability(const LinearSvmModel& svm, const PatientBundle& bundle) {
    return clamp_prob(margin_to_probability(predict_margin(svm, encode_record(bundle.ados))));
}

double facial_probability(const DenseNetModel& net, const PatientBundle& bundle) {
    std::vector<double> probs;
    probs.reserve(bundle.images.size());
    for (const ImageSample& img : bundle.images)
        probs.push_back(clamp_prob(predict_proba(net, img.pixels)));
    return aggregate_image_predictions(probs);
}

HybridResult run_hybrid_pipeline(const std::vector<PatientBundle>& bundles,
                                 const LinearSvmModel& svm, const DenseNetModel& net,
                                 const FusionWeights& weights, double threshold,
                                 std::uint64_t seed) {
    if (bundles.empty()) throw std::invalid_argument("run_hybrid_pipeline: no bundles");

    HybridResult result;
    std::vector<Label> decisions, truth;
    decisions.reserve(bundles.size());
    truth.reserve(bundles.size());

    for (const PatientBundle& bundle : bundles) {
        try {
            validate(bundle);
            PredictionVector pred;
            pred.p_social = social_probability(svm, bundle);
            pred.p_facial = facial_probability(net, bundle);
            pred.n_images_used = static_cast<int>(bundle.images.size());

            const double p_hybrid = fuse(pred, weights);
            const Label decision = decide(p_hybrid, threshold);

            result.trace.push_back({bundle.patient_id, pred.p_social, pred.p_facial,
                                    pred.n_images_used, weights.social, weights.facial, p_hybrid,
                                    decision, bundle.label});
            decisions.push_back(decision);
            truth.push_back(bundle.label);
        } catch (const std::exception& e) {
            throw std::runtime_error("hybrid pipeline failed for patient " + bundle.patient_id +
                                     ": " + e.what());
        }
    }

    result.report = make_report("hybrid", seed, decisions, truth);
    return result;
}

std::string trace_to_csv(const std::vector<PatientTrace>& trace) {
    std::ostringstream out;
    out << "patient_id,p_social,p_facial,n_images,w_social,w_facial,p_hybrid,decision,label\n";
    char buf[64];
    auto fmt = [&buf](double v) -> std::string {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    };
    for (const PatientTrace& t : trace) {
        out << t.patient_id << "," << fmt(t.p_social) << "," << fmt(t.p_facial) << "," << t.n_images
            << "," << fmt(t.w_social) << "," << fmt(t.w_facial) << "," << fmt(t.p_hybrid) << ","
            << to_string(t.decision) << "," << to_string(t.label) << "\n";
    }
    return out.str();
}

}  // namespace hybridx

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hybridx/types.hpp"

namespace hybridx {

/// Counts with ASD as the positive class.
struct ConfusionMatrix {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    int tn = 0;

    int total() const { return tp + fp + fn + tn; }
};

ConfusionMatrix confusion(const std::vector<Label>& preds, const std::vector<Label>& truth);

// Denominator-free slices yield nullopt rather than a silent 0 or NaN.
std::optional<double> accuracy(const ConfusionMatrix& cm);
std::optional<double> sensitivity(const ConfusionMatrix& cm);  // tp / (tp + fn)
std::optional<double> precision(const ConfusionMatrix& cm);    // tp / (tp + fp)

struct EvalReport {
    std::string model;
    std::uint64_t seed = 0;
    DatasetStats stats;
    ConfusionMatrix cm;
    std::optional<double> accuracy;
    std::optional<double> sensitivity;
    std::optional<double> precision;
};

EvalReport make_report(std::string model, std::uint64_t seed, const std::vector<Label>& preds,
                       const std::vector<Label>& truth);
EvalReport make_report(std::string model, std::uint64_t seed, const ConfusionMatrix& cm);

/// Fixed-width comparison table: a Statistic column, then one column per
/// report with Accuracy/Sensitivity/Precision as whole percentages (rounded
/// half-up), Dataset Size, and the N_ASD/N_non-ASD row.
std::string render_table(const std::vector<EvalReport>& reports);

std::string render_percent(std::optional<double> value);

/// CSV export, one row per report.
std::string reports_to_csv(const std::vector<EvalReport>& reports);

// key = value text form; floats round-trip at 17 significant digits.
std::string report_to_text(const EvalReport& report);
EvalReport report_from_text(const std::string& text);

/// All confusion matrices over `total` samples whose accuracy/sensitivity/
/// precision match the given values within `tol`. Used to check that a
/// reported metric triple is self-consistent.
std::vector<ConfusionMatrix> consistent_confusions(int total, double target_accuracy,
                                                   double target_sensitivity,
                                                   double target_precision, double tol);

}  // namespace hybridx

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hybridx/data_io.hpp"
#include "hybridx/densenet.hpp"
#include "hybridx/metrics.hpp"
#include "hybridx/svm.hpp"

namespace hybridx {

// Per-stage seeds derive from the global seed by fixed offsets, so each stage
// reproduces independently.
enum SeedOffset : std::uint64_t {
    kSeedSocialSplit = 101,
    kSeedSvmTrain = 102,
    kSeedSweepSplit = 103,
    kSeedImageSplit = 201,
    kSeedNetTrain = 202,
    kSeedSynth = 301,
    kSeedEval = 401,
};

struct FusionSettings {
    std::string weight_mode = "prevalence";  // prevalence | explicit
    double w_social = 0.5;                   // used by explicit mode
    double w_facial = 0.5;
    double threshold = 0.5;
};

struct ExperimentConfig {
    std::uint64_t seed = 42;

    std::string social_csv;
    std::string image_dir;
    std::string validation_dir;  // optional injected validation set
    std::string paired_dir;
    std::string out_dir = "out";

    std::vector<double> social_fractions = {0.8, 0.2};
    std::vector<double> image_fractions = {0.8, 0.1, 0.1};  // train/test/validation
    bool stratified = true;

    double svm_lambda = 1e-3;
    int svm_epochs = 200;
    std::vector<double> lr_grid = default_lr_grid();

    DenseNetConfig densenet;

    FusionSettings fusion;
};

/// Flat `key = value` sections in brackets; unknown keys are rejected.
ExperimentConfig parse_config_text(const std::string& text, const std::string& context);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_text(const ExperimentConfig& config);

struct SynthArgs {
    std::string kind;  // social | images | paired
    int n_asd = 0;
    int n_non_asd = 0;
    int side = 16;
    double contrast = 0.5;
    double noise_sigma = 0.1;
    double missing_fraction = 0.0;
    double agreement = 1.0;
    int total_images = 0;  // paired only; 0 draws 1-4 per bundle
    bool separable = false;
    std::uint64_t seed = 42;
    std::string out_dir;
};

// Each command writes its artifacts under the output directory and returns
// the primary report (where one exists). Errors propagate as exceptions; the
// CLI turns them into a nonzero exit.
DatasetStats cmd_synth(const SynthArgs& args, std::ostream& log);
EvalReport cmd_train_social(const ExperimentConfig& config, std::ostream& log);
EvalReport cmd_train_facial(const ExperimentConfig& config, std::ostream& log);

struct FuseArgs {
    std::string svm_path;
    std::string densenet_path;
    std::string paired_dir;
    std::string social_report;  // optional, for the comparison table
    std::string facial_report;  // optional
};

EvalReport cmd_fuse_eval(const ExperimentConfig& config, const FuseArgs& args, std::ostream& log);

/// Runs the per-layer finite-difference suite; returns false if any layer fails.
bool cmd_gradcheck(std::ostream& log);

}  // namespace hybridx

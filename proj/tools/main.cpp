#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hybridx/experiment.hpp"

namespace {

hybridx::ExperimentConfig resolve_config(const std::string& config_path, std::uint64_t* seed,
                                         const std::string& out_dir) {
    hybridx::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = hybridx::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybridx: multimodal ASD screening experiments (SVM + DenseNet + late fusion)"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "experiment config file")->capture_default_str();
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t s) { seed = s; seed_set = true; },
           "global seed (overrides config)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    hybridx::SynthArgs synth_args;
    synth->add_option("--kind", synth_args.kind, "social | images | paired")->required();
    synth->add_option("--n-asd", synth_args.n_asd, "ASD count")->required();
    synth->add_option("--n-non", synth_args.n_non_asd, "non-ASD count")->required();
    synth->add_option("--side", synth_args.side, "image side length");
    synth->add_option("--contrast", synth_args.contrast, "pattern contrast");
    synth->add_option("--sigma", synth_args.noise_sigma, "pixel noise sigma");
    synth->add_option("--missing-fraction", synth_args.missing_fraction,
                      "fraction of scores recorded as code 8");
    synth->add_option("--agreement", synth_args.agreement,
                      "paired modality/label agreement rho in [0,1]");
    synth->add_option("--total-images", synth_args.total_images,
                      "paired: exact image total (0 draws 1-4 per bundle)");
    synth->add_flag("--separable", synth_args.separable,
                    "fully separated per-class score distributions");

    auto* train_social = app.add_subcommand("train-social", "split, sweep lr, train and test the SVM");
    auto* train_facial = app.add_subcommand("train-facial", "train the DenseNet with the callback");

    auto* fuse = app.add_subcommand("fuse-eval", "run the hybrid pipeline on paired data");
    hybridx::FuseArgs fuse_args;
    fuse->add_option("--svm", fuse_args.svm_path, "trained SVM model file")->required();
    fuse->add_option("--densenet", fuse_args.densenet_path, "trained DenseNet model file")->required();
    fuse->add_option("--paired", fuse_args.paired_dir, "paired data directory")->required();
    fuse->add_option("--social-report", fuse_args.social_report,
                     "social module report for the comparison table");
    fuse->add_option("--facial-report", fuse_args.facial_report,
                     "facial module report for the comparison table");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every layer type");

    CLI11_PARSE(app, argc, argv);

    try {
        hybridx::ExperimentConfig cfg =
            resolve_config(config_path, seed_set ? &seed : nullptr, out_dir);
        if (synth->parsed()) {
            if (synth_args.out_dir.empty()) synth_args.out_dir = cfg.out_dir;
            synth_args.seed = cfg.seed + hybridx::kSeedSynth;
            hybridx::cmd_synth(synth_args, std::cout);
        } else if (train_social->parsed()) {
            hybridx::cmd_train_social(cfg, std::cout);
        } else if (train_facial->parsed()) {
            hybridx::cmd_train_facial(cfg, std::cout);
        } else if (fuse->parsed()) {
            hybridx::cmd_fuse_eval(cfg, fuse_args, std::cout);
        } else if (gradcheck->parsed()) {
            if (!hybridx::cmd_gradcheck(std::cout)) return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "hybridx/experiment.hpp"

#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "hybridx/fusion.hpp"
#include "hybridx/gradcheck.hpp"

namespace fs = std::filesystem;

namespace hybridx {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join_doubles(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ",";
        out += fmt_double(values[i]);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::string cur;
    std::istringstream in(text);
    while (std::getline(in, cur, ',')) {
        if (cur.empty()) continue;
        out.push_back(std::stod(cur));
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config: bad boolean '" + v + "' for " + key);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& context) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(context + ":" + std::to_string(line_no) +
                                     ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qualified = section.empty() ? key : section + "." + key;
        try {
            if (qualified == "experiment.seed") cfg.seed = std::stoull(value);
            else if (qualified == "paths.social_csv") cfg.social_csv = value;
            else if (qualified == "paths.image_dir") cfg.image_dir = value;
            else if (qualified == "paths.validation_dir") cfg.validation_dir = value;
            else if (qualified == "paths.paired_dir") cfg.paired_dir = value;
            else if (qualified == "paths.out_dir") cfg.out_dir = value;
            else if (qualified == "split.social_fractions") cfg.social_fractions = parse_double_list(value);
            else if (qualified == "split.image_fractions") cfg.image_fractions = parse_double_list(value);
            else if (qualified == "split.stratified") cfg.stratified = parse_bool(value, qualified);
            else if (qualified == "svm.lambda") cfg.svm_lambda = std::stod(value);
            else if (qualified == "svm.epochs") cfg.svm_epochs = std::stoi(value);
            else if (qualified == "svm.lr_grid") cfg.lr_grid = parse_double_list(value);
            else if (qualified == "densenet.side") cfg.densenet.side = std::stoi(value);
            else if (qualified == "densenet.initial_channels") cfg.densenet.initial_channels = std::stoi(value);
            else if (qualified == "densenet.blocks") cfg.densenet.blocks = std::stoi(value);
            else if (qualified == "densenet.layers_per_block") cfg.densenet.layers_per_block = std::stoi(value);
            else if (qualified == "densenet.growth") cfg.densenet.growth = std::stoi(value);
            else if (qualified == "densenet.compression") cfg.densenet.compression = std::stod(value);
            else if (qualified == "densenet.lr") cfg.densenet.lr = std::stod(value);
            else if (qualified == "densenet.epochs") cfg.densenet.epochs = std::stoi(value);
            else if (qualified == "densenet.patience") cfg.densenet.patience = std::stoi(value);
            else if (qualified == "densenet.decay") cfg.densenet.decay = std::stod(value);
            else if (qualified == "densenet.batch_size") cfg.densenet.batch_size = std::stoi(value);
            else if (qualified == "fusion.weight_mode") cfg.fusion.weight_mode = value;
            else if (qualified == "fusion.w_social") cfg.fusion.w_social = std::stod(value);
            else if (qualified == "fusion.w_facial") cfg.fusion.w_facial = std::stod(value);
            else if (qualified == "fusion.threshold") cfg.fusion.threshold = std::stod(value);
            else throw std::runtime_error("unknown key");
        } catch (const std::exception& e) {
            throw std::runtime_error(context + ":" + std::to_string(line_no) + ": key '" + qualified +
                                     "': " + e.what());
        }
    }
    if (cfg.fusion.weight_mode != "prevalence" && cfg.fusion.weight_mode != "explicit")
        throw std::runtime_error(context + ": fusion.weight_mode must be 'prevalence' or 'explicit'");
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    return parse_config_text(read_file(path), path.string());
}

std::string config_to_text(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "[experiment]\n";
    out << "seed = " << c.seed << "\n\n";
    out << "[paths]\n";
    out << "social_csv = " << c.social_csv << "\n";
    out << "image_dir = " << c.image_dir << "\n";
    out << "validation_dir = " << c.validation_dir << "\n";
    out << "paired_dir = " << c.paired_dir << "\n";
    out << "out_dir = " << c.out_dir << "\n\n";
    out << "[split]\n";
    out << "social_fractions = " << join_doubles(c.social_fractions) << "\n";
    out << "image_fractions = " << join_doubles(c.image_fractions) << "\n";
    out << "stratified = " << (c.stratified ? "true" : "false") << "\n\n";
    out << "[svm]\n";
    out << "lambda = " << fmt_double(c.svm_lambda) << "\n";
    out << "epochs = " << c.svm_epochs << "\n";
    out << "lr_grid = " << join_doubles(c.lr_grid) << "\n\n";
    out << "[densenet]\n";
    out << "side = " << c.densenet.side << "\n";
    out << "initial_channels = " << c.densenet.initial_channels << "\n";
    out << "blocks = " << c.densenet.blocks << "\n";
    out << "layers_per_block = " << c.densenet.layers_per_block << "\n";
    out << "growth = " << c.densenet.growth << "\n";
    out << "compression = " << fmt_double(c.densenet.compression) << "\n";
    out << "lr = " << fmt_double(c.densenet.lr) << "\n";
    out << "epochs = " << c.densenet.epochs << "\n";
    out << "patience = " << c.densenet.patience << "\n";
    out << "decay = " << fmt_double(c.densenet.decay) << "\n";
    out << "batch_size = " << c.densenet.batch_size << "\n\n";
    out << "[fusion]\n";
    out << "weight_mode = " << c.fusion.weight_mode << "\n";
    out << "w_social = " << fmt_double(c.fusion.w_social) << "\n";
    out << "w_facial = " << fmt_double(c.fusion.w_facial) << "\n";
    out << "threshold = " << fmt_double(c.fusion.threshold) << "\n";
    return out.str();
}

namespace {

void echo_resolved_config(const ExperimentConfig& config) {
    write_file_atomic(fs::path(config.out_dir) / "resolved-config.txt", config_to_text(config));
}

void require_path(const std::string& path, const char* what) {
    if (path.empty()) throw std::runtime_error(std::string(what) + " path not configured");
    if (!fs::exists(path))
        throw std::runtime_error(std::string(what) + " path does not exist: " + path);
}

}  // namespace

DatasetStats cmd_synth(const SynthArgs& args, std::ostream& log) {
    if (args.out_dir.empty()) throw std::runtime_error("synth: --out is required");
    const DatasetStats stats = make_stats(args.n_asd, args.n_non_asd);
    if (stats.n_asd <= 0 || stats.n_non_asd <= 0)
        throw std::runtime_error("synth: both class counts must be positive");
    const fs::path out(args.out_dir);

    if (args.kind == "social") {
        SocialSynthSpec spec = args.separable
                                   ? separable_social_spec(args.n_asd, args.n_non_asd, args.seed)
                                   : SocialSynthSpec{};
        spec.stats = stats;
        spec.missing_fraction = args.missing_fraction;
        spec.seed = args.seed;
        write_social_csv(out / "social.csv", synth_social_data(spec));
    } else if (args.kind == "images") {
        ImageSynthSpec spec;
        spec.stats = stats;
        spec.side = args.side;
        spec.contrast = args.contrast;
        spec.noise_sigma = args.noise_sigma;
        spec.seed = args.seed;
        write_image_dir(out / "images", synth_image_data(spec));
    } else if (args.kind == "paired") {
        PairedSynthSpec spec;
        spec.stats = stats;
        spec.total_images = args.total_images;
        spec.agreement = args.agreement;
        if (args.separable) spec.social = separable_social_spec(args.n_asd, args.n_non_asd, args.seed);
        spec.social.missing_fraction = args.missing_fraction;
        spec.image.side = args.side;
        spec.image.contrast = args.contrast;
        spec.image.noise_sigma = args.noise_sigma;
        spec.seed = args.seed;
        write_paired_dir(out, synth_paired_data(spec));
    } else {
        throw std::runtime_error("synth: unknown kind '" + args.kind + "' (social|images|paired)");
    }
    log << "synth " << args.kind << ": n_total=" << stats.n_total << " n_asd=" << stats.n_asd
        << " n_non_asd=" << stats.n_non_asd << "\n";
    return stats;
}

EvalReport cmd_train_social(const ExperimentConfig& config, std::ostream& log) {
    require_path(config.social_csv, "social_csv");
    const auto records = load_social_csv(config.social_csv);
    const DatasetStats input_stats = count_stats(records);

    SplitSpec split{config.social_fractions, config.stratified, config.seed + kSeedSocialSplit};
    if (split.fractions.size() != 2)
        throw std::runtime_error("train-social: social_fractions must have 2 parts (train,test)");
    auto parts = stratified_split(records, split);
    const auto& train = parts[0];
    const auto& test = parts[1];

    // The sweep validates on an inner slice of the training part so the test
    // set never leaks into model selection.
    SplitSpec inner{{0.75, 0.25}, config.stratified, config.seed + kSeedSweepSplit};
    auto inner_parts = stratified_split(train, inner);

    SvmTrainOptions options;
    options.lambda = config.svm_lambda;
    options.epochs = config.svm_epochs;
    options.seed = config.seed + kSeedSvmTrain;

    const LrSweepResult sweep = lr_sweep(inner_parts[0], inner_parts[1], config.lr_grid, options);
    log << "train-social: lr sweep chose " << fmt_double(sweep.best_lr) << "\n";

    options.lr = sweep.best_lr;
    const LinearSvmModel model = fit_svm(train, options);

    std::vector<Label> preds, truth;
    for (const AdosRecord& r : test) {
        preds.push_back(svm_predict(model, r));
        truth.push_back(r.label);
    }
    EvalReport report = make_report("social-svm", config.seed, preds, truth);
    // Report the whole input file's population, matching the run protocol.
    report.stats = input_stats;

    const fs::path out(config.out_dir);
    echo_resolved_config(config);
    write_file_atomic(out / "svm_model.txt", svm_to_text(model));
    write_file_atomic(out / "svm_report.txt", report_to_text(report));
    {
        std::ostringstream sweep_csv;
        sweep_csv << "lr,validation_accuracy\n";
        for (std::size_t i = 0; i < config.lr_grid.size(); ++i)
            sweep_csv << fmt_double(config.lr_grid[i]) << "," << fmt_double(sweep.accuracies[i])
                      << "\n";
        write_file_atomic(out / "svm_sweep.csv", sweep_csv.str());
    }
    log << "train-social: test accuracy " << fmt_double(*report.accuracy) << "\n";
    return report;
}

EvalReport cmd_train_facial(const ExperimentConfig& config, std::ostream& log) {
    require_path(config.image_dir, "image_dir");
    const auto images = load_image_dir(config.image_dir);

    std::vector<ImageSample> train, test, validation;
    if (!config.validation_dir.empty()) {
        require_path(config.validation_dir, "validation_dir");
        validation = load_image_dir(config.validation_dir);
        SplitSpec split{{config.image_fractions[0], config.image_fractions[1]}, config.stratified,
                        config.seed + kSeedImageSplit};
        if (config.image_fractions.size() != 2)
            throw std::runtime_error(
                "train-facial: with validation_dir, image_fractions must have 2 parts");
        auto parts = stratified_split(images, split);
        train = std::move(parts[0]);
        test = std::move(parts[1]);
    } else {
        if (config.image_fractions.size() != 3)
            throw std::runtime_error(
                "train-facial: image_fractions must have 3 parts (train,test,validation)");
        SplitSpec split{config.image_fractions, config.stratified, config.seed + kSeedImageSplit};
        auto parts = stratified_split(images, split);
        train = std::move(parts[0]);
        test = std::move(parts[1]);
        validation = std::move(parts[2]);
    }

    DenseNetConfig net_config = config.densenet;
    net_config.seed = config.seed + kSeedNetTrain;
    if (!train.empty() && train.front().side() != static_cast<std::size_t>(net_config.side))
        throw std::runtime_error("train-facial: image side " + std::to_string(train.front().side()) +
                                 " does not match configured side " + std::to_string(net_config.side));

    const DenseNetModel init = build_model(net_config);
    const FitResult fit = fit_with_callback(init, train, validation);

    std::vector<Label> preds, truth;
    for (const ImageSample& s : test) {
        preds.push_back(densenet_predict(fit.best, s.pixels));
        truth.push_back(s.label);
    }
    EvalReport report = make_report("facial-densenet", config.seed, preds, truth);
    report.stats = count_stats(images);

    const fs::path out(config.out_dir);
    echo_resolved_config(config);
    write_file_atomic(out / "densenet_model.bin", densenet_to_bytes(fit.best));
    write_file_atomic(out / "densenet_report.txt", report_to_text(report));
    {
        std::ostringstream history;
        history << "epoch,train_loss,val_accuracy,lr\n";
        for (const EpochStats& e : fit.history)
            history << e.epoch << "," << fmt_double(e.train_loss) << ","
                    << fmt_double(e.val_accuracy) << "," << fmt_double(e.lr) << "\n";
        write_file_atomic(out / "densenet_history.csv", history.str());
    }
    log << "train-facial: test accuracy " << fmt_double(*report.accuracy) << "\n";
    return report;
}

EvalReport cmd_fuse_eval(const ExperimentConfig& config, const FuseArgs& args, std::ostream& log) {
    require_path(args.svm_path, "svm model");
    require_path(args.densenet_path, "densenet model");
    require_path(args.paired_dir, "paired data");

    const LinearSvmModel svm = svm_from_text(read_file(args.svm_path));
    const DenseNetModel net = densenet_from_bytes(read_file(args.densenet_path));
    const auto bundles = load_paired_dir(args.paired_dir);

    // Reject incompatible inputs before spending time on evaluation.
    for (const PatientBundle& b : bundles) {
        for (const ImageSample& img : b.images) {
            if (img.side() != static_cast<std::size_t>(net.config.side))
                throw std::runtime_error("fuse-eval: patient " + b.patient_id + " image side " +
                                         std::to_string(img.side()) +
                                         " does not match model side " +
                                         std::to_string(net.config.side));
        }
    }

    FusionWeights weights = [&]() {
        if (config.fusion.weight_mode == "explicit")
            return FusionWeights(config.fusion.w_social, config.fusion.w_facial);
        return compute_prevalence_weights(svm.n_asd, net.train_stats.n_asd);
    }();

    const HybridResult result = run_hybrid_pipeline(bundles, svm, net, weights,
                                                    config.fusion.threshold,
                                                    config.seed + kSeedEval);

    std::vector<EvalReport> table_reports;
    if (!args.social_report.empty()) {
        require_path(args.social_report, "social report");
        table_reports.push_back(report_from_text(read_file(args.social_report)));
    }
    if (!args.facial_report.empty()) {
        require_path(args.facial_report, "facial report");
        table_reports.push_back(report_from_text(read_file(args.facial_report)));
    }
    table_reports.push_back(result.report);
    const std::string table = render_table(table_reports);

    const fs::path out(config.out_dir);
    echo_resolved_config(config);
    write_file_atomic(out / "hybrid_report.txt", report_to_text(result.report));
    write_file_atomic(out / "hybrid_trace.csv", trace_to_csv(result.trace));
    write_file_atomic(out / "comparison_table.txt", table);
    log << table;
    return result.report;
}

bool cmd_gradcheck(std::ostream& log) {
    const auto entries = run_gradcheck_suite(20, 1);
    bool all_pass = true;
    for (const GradCheckEntry& e : entries) {
        log << (e.pass ? "PASS" : "FAIL") << "  " << to_string(e.kind)
            << "  max_rel_error=" << fmt_double(e.max_rel_error) << "\n";
        all_pass = all_pass && e.pass;
    }
    return all_pass;
}

}  // namespace hybridx

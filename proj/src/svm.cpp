#include "hybridx/svm.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "hybridx/tensor.hpp"

namespace hybridx {

EncodedFeatures encode_record(const AdosRecord& record) {
    validate(record);
    EncodedFeatures f;
    for (int i = 0; i < kFeatureCount; ++i) {
        const int s = record.scores[i];
        f.values[i] = s >= 7 ? 0.0 : static_cast<double>(s);
    }
    return f;
}

bool LinearSvmModel::all_finite() const {
    for (double w : weights)
        if (!std::isfinite(w)) return false;
    return std::isfinite(bias);
}

double predict_margin(const LinearSvmModel& model, const std::array<double, kFeatureCount>& x) {
    double m = model.bias;
    for (int i = 0; i < kFeatureCount; ++i) m += model.weights[i] * x[i];
    return m;
}

double predict_margin(const LinearSvmModel& model, const EncodedFeatures& features) {
    return predict_margin(model, features.values);
}

double margin_to_probability(double margin, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("margin_to_probability: scale must be positive");
    return 1.0 / (1.0 + std::exp(-scale * margin));
}

Label svm_predict(const LinearSvmModel& model, const AdosRecord& record) {
    return predict_margin(model, encode_record(record)) >= 0.0 ? Label::Asd : Label::NonAsd;
}

double svm_accuracy(const LinearSvmModel& model, const std::vector<AdosRecord>& records) {
    if (records.empty()) throw std::invalid_argument("svm_accuracy: empty dataset");
    int correct = 0;
    for (const AdosRecord& r : records)
        if (svm_predict(model, r) == r.label) ++correct;
    return static_cast<double>(correct) / records.size();
}

double svm_objective(const LinearSvmModel& model, const std::vector<AdosRecord>& records) {
    if (records.empty()) throw std::invalid_argument("svm_objective: empty dataset");
    double hinge = 0.0;
    for (const AdosRecord& r : records) {
        const double y = r.label == Label::Asd ? 1.0 : -1.0;
        const double m = predict_margin(model, encode_record(r));
        hinge += std::max(0.0, 1.0 - y * m);
    }
    double reg = 0.0;
    for (double w : model.weights) reg += w * w;
    return hinge / records.size() + model.lambda * reg;
}

namespace {

struct EncodedSample {
    std::array<double, kFeatureCount> x;
    double y;
};

}  // namespace

LinearSvmModel fit_svm(const std::vector<AdosRecord>& train, const SvmTrainOptions& options) {
    if (train.empty()) throw std::invalid_argument("fit_svm: empty training set");
    if (!(options.lr > 0.0)) throw std::invalid_argument("fit_svm: lr must be positive");
    if (options.lambda < 0.0) throw std::invalid_argument("fit_svm: lambda must be non-negative");

    LinearSvmModel model;
    model.lr = options.lr;
    model.lambda = options.lambda;
    model.epochs = options.epochs;
    model.seed = options.seed;

    std::vector<EncodedSample> samples;
    samples.reserve(train.size());
    for (const AdosRecord& r : train) {
        EncodedSample s;
        s.x = encode_record(r).values;
        s.y = r.label == Label::Asd ? 1.0 : -1.0;
        samples.push_back(s);
        if (r.label == Label::Asd)
            ++model.n_asd;
        else
            ++model.n_non_asd;
    }
    if (model.n_asd == 0 || model.n_non_asd == 0)
        throw std::invalid_argument("fit_svm: training set contains a single class");

    const double n = static_cast<double>(samples.size());
    RngState rng = RngState(options.seed).split(1);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    auto record_loss = [&]() {
        if (options.loss_history) options.loss_history->push_back(svm_objective(model, train));
    };

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        if (options.mode == SvmMode::FullBatch) {
            // Encoded features are small integers, so these sums are exact and
            // the averaged step is invariant under uniform sample duplication.
            std::array<double, kFeatureCount> active_sum{};
            double active_y_sum = 0.0;
            for (const EncodedSample& s : samples) {
                double m = model.bias;
                for (int i = 0; i < kFeatureCount; ++i) m += model.weights[i] * s.x[i];
                if (s.y * m < 1.0) {
                    for (int i = 0; i < kFeatureCount; ++i) active_sum[i] += s.y * s.x[i];
                    active_y_sum += s.y;
                }
            }
            for (int i = 0; i < kFeatureCount; ++i) {
                const double g = 2.0 * options.lambda * model.weights[i] - active_sum[i] / n;
                model.weights[i] -= options.lr * g;
            }
            model.bias -= options.lr * (-active_y_sum / n);
        } else {
            rng.shuffle(order);
            for (std::size_t idx : order) {
                const EncodedSample& s = samples[idx];
                double m = model.bias;
                for (int i = 0; i < kFeatureCount; ++i) m += model.weights[i] * s.x[i];
                const bool active = s.y * m < 1.0;
                for (int i = 0; i < kFeatureCount; ++i) {
                    double g = 2.0 * options.lambda * model.weights[i];
                    if (active) g -= s.y * s.x[i];
                    model.weights[i] -= options.lr * g;
                }
                if (active) model.bias += options.lr * s.y;
            }
        }
        record_loss();
    }
    return model;
}

LrSweepResult lr_sweep(const std::vector<AdosRecord>& train, const std::vector<AdosRecord>& validation,
                       const std::vector<double>& grid, const SvmTrainOptions& base_options) {
    if (grid.empty()) throw std::invalid_argument("lr_sweep: empty grid");
    if (validation.empty()) throw std::invalid_argument("lr_sweep: empty validation set");

    LrSweepResult result;
    result.accuracies.reserve(grid.size());
    double best_acc = -1.0;
    for (double lr : grid) {
        SvmTrainOptions opts = base_options;
        opts.lr = lr;
        opts.loss_history = nullptr;
        const LinearSvmModel model = fit_svm(train, opts);
        const double acc = svm_accuracy(model, validation);
        result.accuracies.push_back(acc);
        // ties go to the smaller lr, so only a strictly better accuracy wins
        if (acc > best_acc || (acc == best_acc && lr < result.best_lr)) {
            best_acc = acc;
            result.best_lr = lr;
        }
    }
    return result;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string svm_to_text(const LinearSvmModel& model) {
    if (!model.all_finite())
        throw std::invalid_argument("svm_to_text: model has non-finite parameters");
    std::ostringstream out;
    out << "HYBRIDX-SVM v1\n";
    out << "weights =";
    for (double w : model.weights) out << " " << fmt_double(w);
    out << "\n";
    out << "bias = " << fmt_double(model.bias) << "\n";
    out << "lr = " << fmt_double(model.lr) << "\n";
    out << "lambda = " << fmt_double(model.lambda) << "\n";
    out << "epochs = " << model.epochs << "\n";
    out << "seed = " << model.seed << "\n";
    out << "n_asd = " << model.n_asd << "\n";
    out << "n_non_asd = " << model.n_non_asd << "\n";
    return out.str();
}

LinearSvmModel svm_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "HYBRIDX-SVM v1")
        throw std::runtime_error("svm_from_text: missing HYBRIDX-SVM v1 header");

    LinearSvmModel model;
    bool saw_weights = false, saw_bias = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("svm_from_text: malformed line '" + line + "'");
        std::string key = line.substr(0, eq);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        std::istringstream value(line.substr(eq + 1));
        if (key == "weights") {
            for (int i = 0; i < kFeatureCount; ++i)
                if (!(value >> model.weights[i]))
                    throw std::runtime_error("svm_from_text: expected 5 weights");
            saw_weights = true;
        } else if (key == "bias") {
            value >> model.bias;
            saw_bias = true;
        } else if (key == "lr") {
            value >> model.lr;
        } else if (key == "lambda") {
            value >> model.lambda;
        } else if (key == "epochs") {
            value >> model.epochs;
        } else if (key == "seed") {
            value >> model.seed;
        } else if (key == "n_asd") {
            value >> model.n_asd;
        } else if (key == "n_non_asd") {
            value >> model.n_non_asd;
        } else {
            throw std::runtime_error("svm_from_text: unknown key '" + key + "'");
        }
        if (value.fail()) throw std::runtime_error("svm_from_text: bad value for key '" + key + "'");
    }
    if (!saw_weights || !saw_bias)
        throw std::runtime_error("svm_from_text: incomplete model (weights/bias missing)");
    return model;
}

}  // namespace hybridx

#include "hybridx/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace hybridx {

ConfusionMatrix confusion(const std::vector<Label>& preds, const std::vector<Label>& truth) {
    if (preds.size() != truth.size())
        throw std::invalid_argument("confusion: " + std::to_string(preds.size()) +
                                    " predictions vs " + std::to_string(truth.size()) + " labels");
    if (preds.empty()) throw std::invalid_argument("confusion: empty input");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool pred_pos = preds[i] == Label::Asd;
        const bool true_pos = truth[i] == Label::Asd;
        if (pred_pos && true_pos)
            ++cm.tp;
        else if (pred_pos && !true_pos)
            ++cm.fp;
        else if (!pred_pos && true_pos)
            ++cm.fn;
        else
            ++cm.tn;
    }
    return cm;
}

std::optional<double> accuracy(const ConfusionMatrix& cm) {
    const int total = cm.total();
    if (total == 0) return std::nullopt;
    return static_cast<double>(cm.tp + cm.tn) / total;
}

std::optional<double> sensitivity(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fn == 0) return std::nullopt;
    return static_cast<double>(cm.tp) / (cm.tp + cm.fn);
}

std::optional<double> precision(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fp == 0) return std::nullopt;
    return static_cast<double>(cm.tp) / (cm.tp + cm.fp);
}

EvalReport make_report(std::string model, std::uint64_t seed, const ConfusionMatrix& cm) {
    EvalReport r;
    r.model = std::move(model);
    r.seed = seed;
    r.cm = cm;
    r.stats = make_stats(cm.tp + cm.fn, cm.fp + cm.tn);
    r.accuracy = accuracy(cm);
    r.sensitivity = sensitivity(cm);
    r.precision = precision(cm);
    return r;
}

EvalReport make_report(std::string model, std::uint64_t seed, const std::vector<Label>& preds,
                       const std::vector<Label>& truth) {
    return make_report(std::move(model), seed, confusion(preds, truth));
}

std::string render_percent(std::optional<double> value) {
    if (!value) return "n/a";
    // round half-up: 0.866 -> 87%
    const long pct = static_cast<long>(std::floor(*value * 100.0 + 0.5));
    return std::to_string(pct) + "%";
}

namespace {

std::string pad_to(const std::string& s, std::size_t width) {
    std::string out = s;
    while (out.size() < width) out.push_back(' ');
    return out;
}

}  // namespace

std::string render_table(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("render_table: no reports");

    const std::vector<std::string> row_names = {"Accuracy", "Sensitivity", "Precision",
                                                "Dataset Size", "N_ASD/N_non-ASD"};
    // cells[row][col]; column 0 is the statistic name
    std::vector<std::vector<std::string>> cells(1 + row_names.size());
    cells[0].push_back("Statistic");
    for (std::size_t r = 0; r < row_names.size(); ++r) cells[r + 1].push_back(row_names[r]);
    for (const EvalReport& rep : reports) {
        cells[0].push_back(rep.model);
        cells[1].push_back(render_percent(rep.accuracy));
        cells[2].push_back(render_percent(rep.sensitivity));
        cells[3].push_back(render_percent(rep.precision));
        cells[4].push_back(std::to_string(rep.stats.n_total));
        cells[5].push_back(std::to_string(rep.stats.n_asd) + "/" + std::to_string(rep.stats.n_non_asd));
    }

    std::vector<std::size_t> widths(cells[0].size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());

    std::ostringstream out;
    for (const auto& row : cells) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) line += "  ";
            line += pad_to(row[c], widths[c]);
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << "\n";
    }
    return out.str();
}

std::string reports_to_csv(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    out << "model,seed,n_total,n_asd,n_non_asd,tp,fp,fn,tn,accuracy,sensitivity,precision\n";
    char buf[64];
    auto fmt = [&buf](std::optional<double> v) -> std::string {
        if (!v) return "n/a";
        std::snprintf(buf, sizeof buf, "%.17g", *v);
        return buf;
    };
    for (const EvalReport& r : reports) {
        out << r.model << "," << r.seed << "," << r.stats.n_total << "," << r.stats.n_asd << ","
            << r.stats.n_non_asd << "," << r.cm.tp << "," << r.cm.fp << "," << r.cm.fn << ","
            << r.cm.tn << "," << fmt(r.accuracy) << "," << fmt(r.sensitivity) << ","
            << fmt(r.precision) << "\n";
    }
    return out.str();
}

namespace {

std::string fmt_opt(std::optional<double> v) {
    if (!v) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
}

}  // namespace

std::string report_to_text(const EvalReport& r) {
    std::ostringstream out;
    out << "HYBRIDX-REPORT v1\n";
    out << "model = " << r.model << "\n";
    out << "seed = " << r.seed << "\n";
    out << "n_total = " << r.stats.n_total << "\n";
    out << "n_asd = " << r.stats.n_asd << "\n";
    out << "n_non_asd = " << r.stats.n_non_asd << "\n";
    out << "tp = " << r.cm.tp << "\n";
    out << "fp = " << r.cm.fp << "\n";
    out << "fn = " << r.cm.fn << "\n";
    out << "tn = " << r.cm.tn << "\n";
    out << "accuracy = " << fmt_opt(r.accuracy) << "\n";
    out << "sensitivity = " << fmt_opt(r.sensitivity) << "\n";
    out << "precision = " << fmt_opt(r.precision) << "\n";
    return out.str();
}

EvalReport report_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "HYBRIDX-REPORT v1")
        throw std::runtime_error("report_from_text: missing HYBRIDX-REPORT v1 header");
    EvalReport r;
    auto parse_opt = [](const std::string& v) -> std::optional<double> {
        if (v == "n/a") return std::nullopt;
        return std::stod(v);
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("report_from_text: malformed line '" + line + "'");
        std::string key = line.substr(0, eq);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        std::string value = line.substr(eq + 1);
        if (!value.empty() && value.front() == ' ') value.erase(0, 1);
        if (key == "model") r.model = value;
        else if (key == "seed") r.seed = std::stoull(value);
        else if (key == "n_total") r.stats.n_total = std::stoi(value);
        else if (key == "n_asd") r.stats.n_asd = std::stoi(value);
        else if (key == "n_non_asd") r.stats.n_non_asd = std::stoi(value);
        else if (key == "tp") r.cm.tp = std::stoi(value);
        else if (key == "fp") r.cm.fp = std::stoi(value);
        else if (key == "fn") r.cm.fn = std::stoi(value);
        else if (key == "tn") r.cm.tn = std::stoi(value);
        else if (key == "accuracy") r.accuracy = parse_opt(value);
        else if (key == "sensitivity") r.sensitivity = parse_opt(value);
        else if (key == "precision") r.precision = parse_opt(value);
        else throw std::runtime_error("report_from_text: unknown key '" + key + "'");
    }
    r.stats.validate();
    return r;
}

std::vector<ConfusionMatrix> consistent_confusions(int total, double target_accuracy,
                                                   double target_sensitivity,
                                                   double target_precision, double tol) {
    std::vector<ConfusionMatrix> found;
    for (int tp = 0; tp <= total; ++tp) {
        for (int fp = 0; tp + fp <= total; ++fp) {
            for (int fn = 0; tp + fp + fn <= total; ++fn) {
                ConfusionMatrix cm{tp, fp, fn, total - tp - fp - fn};
                const auto acc = accuracy(cm);
                const auto sen = sensitivity(cm);
                const auto pre = precision(cm);
                if (!acc || !sen || !pre) continue;
                if (std::fabs(*acc - target_accuracy) <= tol &&
                    std::fabs(*sen - target_sensitivity) <= tol &&
                    std::fabs(*pre - target_precision) <= tol) {
                    found.push_back(cm);
                }
            }
        }
    }
    return found;
}

}  // namespace hybridx

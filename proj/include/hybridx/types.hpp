#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hybridx {

// ASD is the positive class throughout (sensitivity = recall of ASD).
enum class Label : int { NonAsd = 0, Asd = 1 };

inline const char* to_string(Label l) { return l == Label::Asd ? "ASD" : "non-ASD"; }

inline Label parse_label(const std::string& s) {
    if (s == "ASD") return Label::Asd;
    if (s == "non-ASD") return Label::NonAsd;
    throw std::invalid_argument("unknown label '" + s + "' (expected ASD or non-ASD)");
}

struct DatasetStats {
    int n_total = 0;
    int n_asd = 0;
    int n_non_asd = 0;

    void validate() const {
        if (n_asd < 0 || n_non_asd < 0)
            throw std::invalid_argument("DatasetStats: class counts must be non-negative");
        if (n_asd + n_non_asd != n_total)
            throw std::invalid_argument("DatasetStats: n_asd + n_non_asd must equal n_total");
    }
};

inline DatasetStats make_stats(int n_asd, int n_non_asd) {
    DatasetStats s{n_asd + n_non_asd, n_asd, n_non_asd};
    s.validate();
    return s;
}

}  // namespace hybridx

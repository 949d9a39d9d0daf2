#pragma once

#include <array>
#include <string>
#include <vector>

#include "hybridx/tensor.hpp"
#include "hybridx/types.hpp"

namespace hybridx {

// The five analyzed behavior features, in fixed order.
inline constexpr std::array<const char*, 5> kFeatureNames = {
    "echolalia", "conversation", "eye_contact", "facial_expression", "social_response"};

inline constexpr int kFeatureCount = 5;

/// One patient's coded behavior scores. Legal codes are the severity scale
/// 0-3 plus the non-severity codes 7-9 (8 = unknown/missing).
struct AdosRecord {
    std::string patient_id;
    std::array<int, kFeatureCount> scores{};
    Label label = Label::NonAsd;
};

inline bool is_legal_score(int s) { return (s >= 0 && s <= 3) || (s >= 7 && s <= 9); }

void validate(const AdosRecord& record);

/// Square RGB image with pixel values in [0,1]. patient_id may be empty for
/// unpaired data.
struct ImageSample {
    std::string patient_id;
    Tensor pixels;  // [3,H,W]
    Label label = Label::NonAsd;

    std::size_t side() const { return pixels.rank() == 3 ? pixels.extent(1) : 0; }
};

void validate(const ImageSample& sample);

/// Paired sample: one behavior record plus at least one image, all for the
/// same patient and carrying the same label.
struct PatientBundle {
    std::string patient_id;
    AdosRecord ados;
    std::vector<ImageSample> images;
    Label label = Label::NonAsd;
};

void validate(const PatientBundle& bundle);

inline Label label_of(const AdosRecord& r) { return r.label; }
inline Label label_of(const ImageSample& s) { return s.label; }
inline Label label_of(const PatientBundle& b) { return b.label; }

template <typename T>
DatasetStats count_stats(const std::vector<T>& items) {
    DatasetStats s;
    for (const T& item : items) {
        ++s.n_total;
        if (label_of(item) == Label::Asd)
            ++s.n_asd;
        else
            ++s.n_non_asd;
    }
    return s;
}

}  // namespace hybridx

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hybridx/samples.hpp"
#include "hybridx/tensor.hpp"
#include "hybridx/types.hpp"

namespace hybridx {

// ---------------------------------------------------------------------------
// Files

/// Write via a .tmp sibling and rename, so failures leave no partial artifact.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

inline constexpr const char* kSocialCsvHeader =
    "patient_id,echolalia,conversation,eye_contact,facial_expression,social_response,label";

std::vector<AdosRecord> parse_social_csv(const std::string& text, const std::string& context);
std::vector<AdosRecord> load_social_csv(const std::filesystem::path& path);
std::string social_csv_text(const std::vector<AdosRecord>& records);
void write_social_csv(const std::filesystem::path& path, const std::vector<AdosRecord>& records);

/// Binary PPM (P6), maxval 255. Pixels come back as [3,H,W] scaled to [0,1].
Tensor read_ppm(const std::filesystem::path& path);
std::string ppm_bytes(const Tensor& pixels);
void write_ppm(const std::filesystem::path& path, const Tensor& pixels);

/// Directory with ASD/ and non-ASD/ subdirectories of .ppm files; the
/// filename stem before the first '_' is the patient id. Deterministic
/// (sorted) order.
std::vector<ImageSample> load_image_dir(const std::filesystem::path& path);
void write_image_dir(const std::filesystem::path& path, const std::vector<ImageSample>& samples);

/// Paired layout: <dir>/social.csv plus <dir>/images/{ASD,non-ASD}/*.ppm,
/// joined on patient id.
std::vector<PatientBundle> load_paired_dir(const std::filesystem::path& path);
void write_paired_dir(const std::filesystem::path& path, const std::vector<PatientBundle>& bundles);

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
    std::vector<double> fractions;  // positive, sum to 1 (within 1e-9)
    bool stratified = true;
    std::uint64_t seed = 0;
};

void validate(const SplitSpec& spec);

/// floor(n * f) per part, leftovers distributed by largest fractional
/// remainder (ties toward the earlier part).
std::vector<int> largest_remainder_sizes(int n, const std::vector<double>& fractions);

namespace detail {
std::vector<std::vector<std::size_t>> split_indices(const std::vector<Label>& labels,
                                                    const SplitSpec& spec);
}

/// Seeded per-class shuffle, then contiguous slices sized by largest
/// remainder. Parts partition the input; per-part class ratios stay within
/// one sample of the global ratio.
template <typename T>
std::vector<std::vector<T>> stratified_split(const std::vector<T>& records, const SplitSpec& spec) {
    std::vector<Label> labels;
    labels.reserve(records.size());
    for (const T& r : records) labels.push_back(label_of(r));
    const auto index_parts = detail::split_indices(labels, spec);
    std::vector<std::vector<T>> parts(index_parts.size());
    for (std::size_t p = 0; p < index_parts.size(); ++p) {
        parts[p].reserve(index_parts[p].size());
        for (std::size_t i : index_parts[p]) parts[p].push_back(records[i]);
    }
    return parts;
}

// ---------------------------------------------------------------------------
// Synthetic generators (desk-scale stand-ins for the private datasets)

struct SocialSynthSpec {
    DatasetStats stats;
    // P(score = 0..3) per class; ASD mass sits on the severe end.
    std::array<double, 4> asd_scores = {0.05, 0.15, 0.35, 0.45};
    std::array<double, 4> non_asd_scores = {0.45, 0.35, 0.15, 0.05};
    double missing_fraction = 0.0;  // chance a score is replaced by code 8
    std::uint64_t seed = 0;
};

/// Fully separated per-class distributions (ASD on {2,3}, non-ASD on {0,1}).
SocialSynthSpec separable_social_spec(int n_asd, int n_non_asd, std::uint64_t seed);

std::vector<AdosRecord> synth_social_data(const SocialSynthSpec& spec);

struct ImageSynthSpec {
    DatasetStats stats;
    int side = 16;
    double contrast = 0.5;     // brightness gap between pattern and background
    double noise_sigma = 0.1;  // Gaussian pixel noise, clamped to [0,1]
    std::uint64_t seed = 0;
};

/// Centered bright disk for ASD, bright ring for non-ASD, plus seeded noise.
/// Pixels are quantized to the 1/255 grid so PPM round trips are exact.
std::vector<ImageSample> synth_image_data(const ImageSynthSpec& spec);

struct PairedSynthSpec {
    DatasetStats stats;     // bundles per class
    int total_images = 0;   // 0: draw 1-4 per bundle; else distribute exactly
    double agreement = 1.0; // rho: 1 = modalities always reflect the label,
                            // 0 = independent coin flips
    SocialSynthSpec social; // per-class score distributions (stats ignored)
    ImageSynthSpec image;   // side/contrast/sigma (stats ignored)
    std::uint64_t seed = 0;
};

std::vector<PatientBundle> synth_paired_data(const PairedSynthSpec& spec);

}  // namespace hybridx

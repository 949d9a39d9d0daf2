#include "hybridx/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace hybridx {

void write_file_atomic(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---------------------------------------------------------------------------
// Social CSV

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

[[noreturn]] void csv_error(const std::string& context, std::size_t line_no, const std::string& msg) {
    throw std::runtime_error(context + ":" + std::to_string(line_no) + ": " + msg);
}

}  // namespace

std::vector<AdosRecord> parse_social_csv(const std::string& text, const std::string& context) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) csv_error(context, 1, "empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kSocialCsvHeader)
        csv_error(context, line_no, "bad header (expected '" + std::string(kSocialCsvHeader) + "')");

    std::vector<AdosRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != 7)
            csv_error(context, line_no,
                      "expected 7 fields, got " + std::to_string(fields.size()));
        AdosRecord r;
        r.patient_id = fields[0];
        if (r.patient_id.empty()) csv_error(context, line_no, "empty patient_id");
        for (int i = 0; i < kFeatureCount; ++i) {
            int score = 0;
            try {
                std::size_t used = 0;
                score = std::stoi(fields[i + 1], &used);
                if (used != fields[i + 1].size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                csv_error(context, line_no, "bad score '" + fields[i + 1] + "' for feature " +
                                                kFeatureNames[i]);
            }
            if (!is_legal_score(score))
                csv_error(context, line_no,
                          "score " + std::to_string(score) + " for feature " + kFeatureNames[i] +
                              " outside {0,1,2,3,7,8,9}");
            r.scores[i] = score;
        }
        try {
            r.label = parse_label(fields[6]);
        } catch (const std::exception& e) {
            csv_error(context, line_no, e.what());
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<AdosRecord> load_social_csv(const fs::path& path) {
    return parse_social_csv(read_file(path), path.string());
}

std::string social_csv_text(const std::vector<AdosRecord>& records) {
    std::ostringstream out;
    out << kSocialCsvHeader << "\n";
    for (const AdosRecord& r : records) {
        validate(r);
        out << r.patient_id;
        for (int s : r.scores) out << "," << s;
        out << "," << to_string(r.label) << "\n";
    }
    return out.str();
}

void write_social_csv(const fs::path& path, const std::vector<AdosRecord>& records) {
    write_file_atomic(path, social_csv_text(records));
}

// ---------------------------------------------------------------------------
// PPM

namespace {

// Skips whitespace and '#' comments between header tokens.
int next_ppm_token(const std::string& bytes, std::size_t& pos, const fs::path& path) {
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') ++pos;
    if (start == pos) throw std::runtime_error(path.string() + ": malformed PPM header");
    return std::stoi(bytes.substr(start, pos - start));
}

}  // namespace

Tensor read_ppm(const fs::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
        throw std::runtime_error(path.string() + ": not a binary PPM (P6) file");
    std::size_t pos = 2;
    const int width = next_ppm_token(bytes, pos, path);
    const int height = next_ppm_token(bytes, pos, path);
    const int maxval = next_ppm_token(bytes, pos, path);
    if (width < 1 || height < 1) throw std::runtime_error(path.string() + ": bad PPM dimensions");
    if (maxval != 255) throw std::runtime_error(path.string() + ": PPM maxval must be 255");
    ++pos;  // single whitespace after maxval
    const std::size_t need = static_cast<std::size_t>(width) * height * 3;
    if (pos + need > bytes.size())
        throw std::runtime_error(path.string() + ": truncated PPM pixel data");

    Tensor pixels({3, static_cast<std::size_t>(height), static_cast<std::size_t>(width)});
    for (int h = 0; h < height; ++h) {
        for (int w = 0; w < width; ++w) {
            for (int c = 0; c < 3; ++c) {
                const unsigned char v = static_cast<unsigned char>(bytes[pos++]);
                pixels.at3(c, h, w) = static_cast<double>(v) / 255.0;
            }
        }
    }
    return pixels;
}

std::string ppm_bytes(const Tensor& pixels) {
    if (pixels.rank() != 3 || pixels.extent(0) != 3)
        throw std::invalid_argument("ppm_bytes: pixels must be [3,H,W], got " + pixels.shape_str());
    const std::size_t h = pixels.extent(1), w = pixels.extent(2);
    std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + h * w * 3);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::clamp(pixels.at3(c, i, j), 0.0, 1.0);
                out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
            }
        }
    }
    return out;
}

void write_ppm(const fs::path& path, const Tensor& pixels) {
    write_file_atomic(path, ppm_bytes(pixels));
}

namespace {

std::string patient_id_from_stem(const std::string& stem) {
    const auto us = stem.find('_');
    return us == std::string::npos ? stem : stem.substr(0, us);
}

std::vector<fs::path> sorted_ppm_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ppm")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

std::vector<ImageSample> load_image_dir(const fs::path& path) {
    std::vector<ImageSample> samples;
    for (const auto& [sub, label] :
         {std::pair<const char*, Label>{"ASD", Label::Asd}, {"non-ASD", Label::NonAsd}}) {
        const fs::path dir = path / sub;
        if (!fs::is_directory(dir))
            throw std::runtime_error("image directory " + path.string() + " is missing the " +
                                     std::string(sub) + "/ subdirectory");
        const auto files = sorted_ppm_files(dir);
        if (files.empty())
            throw std::runtime_error("image class directory " + dir.string() + " is empty");
        for (const fs::path& file : files) {
            ImageSample s;
            s.patient_id = patient_id_from_stem(file.stem().string());
            s.pixels = read_ppm(file);
            s.label = label;
            if (s.pixels.extent(1) != s.pixels.extent(2))
                throw std::runtime_error(file.string() + ": image must be square, got " +
                                         s.pixels.shape_str());
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

void write_image_dir(const fs::path& path, const std::vector<ImageSample>& samples) {
    fs::create_directories(path / "ASD");
    fs::create_directories(path / "non-ASD");
    std::map<std::string, int> next_index;
    for (const ImageSample& s : samples) {
        validate(s);
        const std::string id = s.patient_id.empty() ? "anon" : s.patient_id;
        const int idx = next_index[id]++;
        const fs::path file =
            path / to_string(s.label) / (id + "_" + std::to_string(idx) + ".ppm");
        write_ppm(file, s.pixels);
    }
}

std::vector<PatientBundle> load_paired_dir(const fs::path& path) {
    const auto records = load_social_csv(path / "social.csv");
    const auto images = load_image_dir(path / "images");

    std::map<std::string, std::vector<ImageSample>> by_patient;
    for (const ImageSample& img : images) by_patient[img.patient_id].push_back(img);

    std::vector<PatientBundle> bundles;
    bundles.reserve(records.size());
    std::size_t matched_images = 0;
    for (const AdosRecord& r : records) {
        const auto it = by_patient.find(r.patient_id);
        if (it == by_patient.end())
            throw std::runtime_error("paired data " + path.string() + ": patient " + r.patient_id +
                                     " has no images");
        PatientBundle b;
        b.patient_id = r.patient_id;
        b.ados = r;
        b.images = it->second;
        b.label = r.label;
        validate(b);
        matched_images += b.images.size();
        bundles.push_back(std::move(b));
    }
    if (matched_images != images.size())
        throw std::runtime_error("paired data " + path.string() +
                                 ": images present for patients missing from social.csv");
    return bundles;
}

void write_paired_dir(const fs::path& path, const std::vector<PatientBundle>& bundles) {
    std::vector<AdosRecord> records;
    std::vector<ImageSample> images;
    for (const PatientBundle& b : bundles) {
        validate(b);
        records.push_back(b.ados);
        images.insert(images.end(), b.images.begin(), b.images.end());
    }
    write_social_csv(path / "social.csv", records);
    write_image_dir(path / "images", images);
}

// ---------------------------------------------------------------------------
// Splits

void validate(const SplitSpec& spec) {
    if (spec.fractions.empty()) throw std::invalid_argument("SplitSpec: no fractions");
    double sum = 0.0;
    for (double f : spec.fractions) {
        if (!(f > 0.0)) throw std::invalid_argument("SplitSpec: fractions must be positive");
        sum += f;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("SplitSpec: fractions sum to " + std::to_string(sum) +
                                    ", expected 1");
}

std::vector<int> largest_remainder_sizes(int n, const std::vector<double>& fractions) {
    std::vector<int> sizes(fractions.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    int assigned = 0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        const double ideal = n * fractions[i];
        sizes[i] = static_cast<int>(std::floor(ideal));
        assigned += sizes[i];
        remainders.emplace_back(ideal - sizes[i], i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < n - assigned; ++k) ++sizes[remainders[static_cast<std::size_t>(k)].second];
    return sizes;
}

namespace detail {

std::vector<std::vector<std::size_t>> split_indices(const std::vector<Label>& labels,
                                                    const SplitSpec& spec) {
    validate(spec);
    const std::size_t parts = spec.fractions.size();
    std::vector<std::vector<std::size_t>> out(parts);

    auto slice_class = [&](std::vector<std::size_t>& idx, std::uint64_t stream) {
        RngState rng = RngState(spec.seed).split(stream);
        rng.shuffle(idx);
        const auto sizes = largest_remainder_sizes(static_cast<int>(idx.size()), spec.fractions);
        std::size_t pos = 0;
        for (std::size_t p = 0; p < parts; ++p) {
            if (sizes[p] == 0)
                throw std::invalid_argument(
                    "stratified_split: fractions leave part " + std::to_string(p) +
                    " empty for a class of " + std::to_string(idx.size()) + " records");
            for (int k = 0; k < sizes[p]; ++k) out[p].push_back(idx[pos++]);
        }
    };

    if (spec.stratified) {
        std::vector<std::size_t> asd, non;
        for (std::size_t i = 0; i < labels.size(); ++i)
            (labels[i] == Label::Asd ? asd : non).push_back(i);
        slice_class(asd, 21);
        slice_class(non, 22);
    } else {
        std::vector<std::size_t> all(labels.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        slice_class(all, 23);
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generators

namespace {

int sample_categorical(RngState& rng, const std::array<double, 4>& probs) {
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw std::invalid_argument("synth: negative probability in score distribution");
        sum += p;
    }
    if (!(sum > 0.0)) throw std::invalid_argument("synth: score distribution sums to zero");
    const double u = rng.uniform() * sum;
    double acc = 0.0;
    for (int s = 0; s < 4; ++s) {
        acc += probs[s];
        if (u < acc) return s;
    }
    return 3;
}

std::string padded_id(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%05d", prefix, i);
    return buf;
}

AdosRecord synth_record(RngState& rng, const SocialSynthSpec& spec, std::string id, Label label,
                        Label feature_class) {
    AdosRecord r;
    r.patient_id = std::move(id);
    r.label = label;
    const auto& dist = feature_class == Label::Asd ? spec.asd_scores : spec.non_asd_scores;
    for (int f = 0; f < kFeatureCount; ++f) {
        const int score = sample_categorical(rng, dist);
        const bool missing = spec.missing_fraction > 0.0 && rng.uniform() < spec.missing_fraction;
        r.scores[f] = missing ? 8 : score;
    }
    return r;
}

double quantize_pixel(double v) {
    return static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0;
}

Tensor synth_image_pixels(RngState& rng, const ImageSynthSpec& spec, Label pattern_class) {
    const int side = spec.side;
    const double high = std::clamp(0.5 + spec.contrast / 2.0, 0.0, 1.0);
    const double low = std::clamp(0.5 - spec.contrast / 2.0, 0.0, 1.0);
    const double cx = (side - 1) / 2.0;

    Tensor pixels({3, static_cast<std::size_t>(side), static_cast<std::size_t>(side)});
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            const double r = std::hypot(i - cx, j - cx) / (side / 2.0);
            bool bright;
            if (pattern_class == Label::Asd) {
                bright = r <= 0.5;  // centered disk
            } else {
                bright = r >= 0.55 && r <= 0.9;  // ring
            }
            const double base = bright ? high : low;
            for (int c = 0; c < 3; ++c) {
                const double noise = spec.noise_sigma > 0.0 ? rng.gaussian() * spec.noise_sigma : 0.0;
                pixels.at3(c, i, j) = quantize_pixel(base + noise);
            }
        }
    }
    return pixels;
}

}  // namespace

SocialSynthSpec separable_social_spec(int n_asd, int n_non_asd, std::uint64_t seed) {
    SocialSynthSpec spec;
    spec.stats = make_stats(n_asd, n_non_asd);
    spec.asd_scores = {0.0, 0.0, 0.5, 0.5};
    spec.non_asd_scores = {0.5, 0.5, 0.0, 0.0};
    spec.seed = seed;
    return spec;
}

std::vector<AdosRecord> synth_social_data(const SocialSynthSpec& spec) {
    spec.stats.validate();
    RngState rng = RngState(spec.seed).split(31);
    std::vector<AdosRecord> records;
    records.reserve(spec.stats.n_total);
    for (int i = 0; i < spec.stats.n_total; ++i) {
        const Label label = i < spec.stats.n_asd ? Label::Asd : Label::NonAsd;
        records.push_back(synth_record(rng, spec, padded_id("p", i + 1), label, label));
    }
    return records;
}

std::vector<ImageSample> synth_image_data(const ImageSynthSpec& spec) {
    spec.stats.validate();
    if (spec.side < 1) throw std::invalid_argument("ImageSynthSpec: side must be >= 1");
    if (spec.noise_sigma < 0.0) throw std::invalid_argument("ImageSynthSpec: negative noise sigma");
    RngState rng = RngState(spec.seed).split(32);
    std::vector<ImageSample> samples;
    samples.reserve(spec.stats.n_total);
    for (int i = 0; i < spec.stats.n_total; ++i) {
        const Label label = i < spec.stats.n_asd ? Label::Asd : Label::NonAsd;
        ImageSample s;
        s.patient_id = padded_id("i", i + 1);
        s.label = label;
        s.pixels = synth_image_pixels(rng, spec, label);
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<PatientBundle> synth_paired_data(const PairedSynthSpec& spec) {
    spec.stats.validate();
    if (spec.agreement < 0.0 || spec.agreement > 1.0)
        throw std::invalid_argument("PairedSynthSpec: agreement must lie in [0,1]");
    const int n = spec.stats.n_total;
    if (spec.total_images != 0 && (spec.total_images < n || spec.total_images > 4 * n))
        throw std::invalid_argument("PairedSynthSpec: total_images must lie in [bundles, 4*bundles]");

    RngState rng = RngState(spec.seed).split(33);

    std::vector<int> image_counts(static_cast<std::size_t>(n), 1);
    if (spec.total_images == 0) {
        for (int& c : image_counts) c = 1 + static_cast<int>(rng.uniform_below(4));
    } else {
        int remaining = spec.total_images - n;
        while (remaining > 0) {
            const std::size_t k = static_cast<std::size_t>(rng.uniform_below(n));
            if (image_counts[k] < 4) {
                ++image_counts[k];
                --remaining;
            }
        }
    }

    // Modality reflects the true label with probability (1+rho)/2, so rho=1
    // is always faithful and rho=0 an independent coin flip.
    const double p_reflect = (1.0 + spec.agreement) / 2.0;
    auto effective = [&](Label truth) {
        if (rng.uniform() < p_reflect) return truth;
        return truth == Label::Asd ? Label::NonAsd : Label::Asd;
    };

    std::vector<PatientBundle> bundles;
    bundles.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Label truth = i < spec.stats.n_asd ? Label::Asd : Label::NonAsd;
        const std::string id = padded_id("p", i + 1);
        const Label social_class = effective(truth);
        const Label facial_class = effective(truth);

        PatientBundle b;
        b.patient_id = id;
        b.label = truth;
        b.ados = synth_record(rng, spec.social, id, truth, social_class);
        for (int k = 0; k < image_counts[static_cast<std::size_t>(i)]; ++k) {
            ImageSample img;
            img.patient_id = id;
            img.label = truth;
            img.pixels = synth_image_pixels(rng, spec.image, facial_class);
            b.images.push_back(std::move(img));
        }
        bundles.push_back(std::move(b));
    }
    return bundles;
}

}  // namespace hybridx

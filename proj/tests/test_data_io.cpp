#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "hybridx/data_io.hpp"
#include "hybridx/svm.hpp"

using namespace hybridx;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "hybridx_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("social csv round-trips byte-identically") {
    const std::string text =
        std::string(kSocialCsvHeader) + "\n" + "p001,3,2,1,0,8,ASD\n" + "p002,0,0,7,9,1,non-ASD\n";
    const auto records = parse_social_csv(text, "mem");
    REQUIRE(records.size() == 2);
    CHECK(records[0].patient_id == "p001");
    CHECK(records[0].scores == std::array<int, 5>{3, 2, 1, 0, 8});
    CHECK(records[0].label == Label::Asd);
    CHECK(records[1].label == Label::NonAsd);
    CHECK(social_csv_text(records) == text);
}

TEST_CASE("csv errors carry line numbers") {
    const std::string head = std::string(kSocialCsvHeader) + "\n";

    try {
        parse_social_csv(head + "p1,0,0,0,0,0,ASD\np2,0,0,5,0,0,ASD\n", "mem");
        FAIL("expected rejection");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("mem:3") != std::string::npos);
        CHECK(msg.find("eye_contact") != std::string::npos);
    }

    CHECK_THROWS_WITH_AS(parse_social_csv("bogus\n", "mem"),
                         doctest::Contains("mem:1"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_social_csv(head + "p1,0,0,0,0,0,maybe\n", "mem"),
                         doctest::Contains("mem:2"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_social_csv(head + "p1,0,0,0,0,ASD\n", "mem"),
                         doctest::Contains("7 fields"), std::runtime_error);
}

TEST_CASE("synthetic social file reproduces the published class balance") {
    SocialSynthSpec spec;
    spec.stats = make_stats(1046, 273);
    spec.seed = 4;
    const auto records = synth_social_data(spec);
    REQUIRE(records.size() == 1319);
    const DatasetStats stats = count_stats(records);
    CHECK(stats.n_asd == 1046);
    CHECK(stats.n_non_asd == 273);

    const fs::path dir = fresh_dir("social_roundtrip");
    write_social_csv(dir / "social.csv", records);
    const auto loaded = load_social_csv(dir / "social.csv");
    REQUIRE(loaded.size() == records.size());
    CHECK(social_csv_text(loaded) == social_csv_text(records));

    // regenerating with the same seed is byte-identical
    CHECK(social_csv_text(synth_social_data(spec)) == social_csv_text(records));
}

TEST_CASE("missing-fraction zero leaves no non-severity codes") {
    SocialSynthSpec spec;
    spec.stats = make_stats(200, 200);
    spec.missing_fraction = 0.0;
    const auto records = synth_social_data(spec);
    for (const AdosRecord& r : records)
        for (int s : r.scores) CHECK(s <= 3);

    spec.missing_fraction = 0.5;
    spec.seed = 9;
    int eights = 0;
    for (const AdosRecord& r : synth_social_data(spec))
        for (int s : r.scores)
            if (s == 8) ++eights;
    CHECK(eights > 600);  // roughly half of 2000 scores
}

TEST_CASE("separable social data trains to near-perfect accuracy") {
    const auto records = synth_social_data(separable_social_spec(100, 100, 21));
    SvmTrainOptions opts;
    opts.epochs = 200;
    const LinearSvmModel model = fit_svm(records, opts);
    CHECK(svm_accuracy(model, records) >= 0.99);
}

TEST_CASE("ppm: all-white image scales to ones") {
    const fs::path dir = fresh_dir("ppm_white");
    write_file_atomic(dir / "white.ppm", "P6\n2 2\n255\n" + std::string(12, '\xff'));
    const Tensor t = read_ppm(dir / "white.ppm");
    REQUIRE(t.shape() == std::vector<std::size_t>{3, 2, 2});
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 1.0);
}

TEST_CASE("image loader rejects non-square images and empty class dirs") {
    const fs::path dir = fresh_dir("ppm_bad");
    fs::create_directories(dir / "ASD");
    fs::create_directories(dir / "non-ASD");
    write_file_atomic(dir / "ASD" / "p1_0.ppm", "P6\n3 2\n255\n" + std::string(18, '\x00'));
    write_file_atomic(dir / "non-ASD" / "p2_0.ppm", "P6\n2 2\n255\n" + std::string(12, '\x00'));
    CHECK_THROWS_WITH_AS(load_image_dir(dir), doctest::Contains("square"), std::runtime_error);

    const fs::path dir2 = fresh_dir("ppm_empty");
    fs::create_directories(dir2 / "ASD");
    fs::create_directories(dir2 / "non-ASD");
    write_file_atomic(dir2 / "ASD" / "p1_0.ppm", "P6\n2 2\n255\n" + std::string(12, '\x00'));
    CHECK_THROWS_WITH_AS(load_image_dir(dir2), doctest::Contains("empty"), std::runtime_error);

    CHECK_THROWS_AS(read_ppm(dir / "non-ASD" / "missing.ppm"), std::runtime_error);
    write_file_atomic(dir / "trunc.ppm", "P6\n4 4\n255\nabc");
    CHECK_THROWS_WITH_AS(read_ppm(dir / "trunc.ppm"), doctest::Contains("truncated"),
                         std::runtime_error);
}

TEST_CASE("synthetic images write and load back with identical pixels") {
    ImageSynthSpec spec;
    spec.stats = make_stats(6, 5);
    spec.side = 8;
    spec.noise_sigma = 0.1;
    spec.seed = 31;
    const auto samples = synth_image_data(spec);
    REQUIRE(samples.size() == 11);

    const fs::path dir = fresh_dir("image_roundtrip");
    write_image_dir(dir, samples);
    const auto loaded = load_image_dir(dir);
    REQUIRE(loaded.size() == samples.size());

    // loader returns ASD block then non-ASD block, sorted by filename, which
    // matches generation order here
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded[i].patient_id == samples[i].patient_id);
        CHECK(loaded[i].label == samples[i].label);
        CHECK(loaded[i].pixels == samples[i].pixels);  // bit-exact
    }
}

TEST_CASE("noise-free synthetic images are identical within a class") {
    ImageSynthSpec spec;
    spec.stats = make_stats(3, 3);
    spec.side = 8;
    spec.noise_sigma = 0.0;
    const auto samples = synth_image_data(spec);
    CHECK(samples[0].pixels == samples[1].pixels);
    CHECK(samples[0].pixels == samples[2].pixels);
    CHECK(samples[3].pixels == samples[4].pixels);
    CHECK_FALSE(samples[0].pixels == samples[3].pixels);  // classes differ
}

TEST_CASE("balanced facial set mirrors the published proportions") {
    ImageSynthSpec spec;
    spec.stats = make_stats(1418, 1418);
    spec.side = 4;
    const auto samples = synth_image_data(spec);
    const DatasetStats stats = count_stats(samples);
    CHECK(stats.n_total == 2836);
    CHECK(stats.n_asd == 1418);
    CHECK(stats.n_non_asd == 1418);
}

TEST_CASE("largest-remainder split sizes") {
    CHECK(largest_remainder_sizes(10, {0.8, 0.2}) == std::vector<int>{8, 2});
    CHECK(largest_remainder_sizes(1319, {0.8, 0.2}) == std::vector<int>{1055, 264});
    CHECK(largest_remainder_sizes(5, {0.5, 0.5}) == std::vector<int>{3, 2});  // tie to earlier part
    CHECK(largest_remainder_sizes(7, {1.0 / 3, 1.0 / 3, 1.0 / 3}) == std::vector<int>{3, 2, 2});
}

TEST_CASE("stratified split: exact fractions split evenly per class") {
    std::vector<AdosRecord> records;
    for (int i = 0; i < 10; ++i) {
        AdosRecord r;
        r.patient_id = "p" + std::to_string(i);
        r.label = i < 5 ? Label::Asd : Label::NonAsd;
        records.push_back(r);
    }
    const auto parts = stratified_split(records, SplitSpec{{0.8, 0.2}, true, 3});
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].size() == 8);
    CHECK(parts[1].size() == 2);
    CHECK(count_stats(parts[0]).n_asd == 4);
    CHECK(count_stats(parts[1]).n_asd == 1);
}

TEST_CASE("stratified split partitions the input deterministically") {
    SocialSynthSpec spec;
    spec.stats = make_stats(1046, 273);
    spec.seed = 8;
    const auto records = synth_social_data(spec);

    const SplitSpec split{{0.8, 0.2}, true, 17};
    const auto parts = stratified_split(records, split);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].size() == 1055);
    CHECK(parts[1].size() == 264);

    // per-part class ratio within one sample of the global ratio
    const double global_ratio = 1046.0 / 1319.0;
    for (const auto& part : parts) {
        const DatasetStats s = count_stats(part);
        CHECK(std::fabs(s.n_asd - part.size() * global_ratio) <= 1.0);
    }

    // partition: no loss, no duplication
    std::multiset<std::string> seen;
    for (const auto& part : parts)
        for (const AdosRecord& r : part) seen.insert(r.patient_id);
    std::multiset<std::string> all;
    for (const AdosRecord& r : records) all.insert(r.patient_id);
    CHECK(seen == all);

    // same seed identical, different seed different order with same sizes
    const auto again = stratified_split(records, split);
    CHECK(social_csv_text(again[0]) == social_csv_text(parts[0]));
    const auto other = stratified_split(records, SplitSpec{{0.8, 0.2}, true, 18});
    CHECK(other[0].size() == parts[0].size());
    CHECK_FALSE(social_csv_text(other[0]) == social_csv_text(parts[0]));
}

TEST_CASE("split rejects bad fractions and starved parts") {
    CHECK_THROWS_AS(validate(SplitSpec{{0.5, 0.4}, true, 0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(SplitSpec{{-0.2, 1.2}, true, 0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(SplitSpec{{}, true, 0}), std::invalid_argument);

    std::vector<AdosRecord> tiny;
    for (int i = 0; i < 4; ++i) {
        AdosRecord r;
        r.patient_id = "p" + std::to_string(i);
        r.label = i < 2 ? Label::Asd : Label::NonAsd;
        tiny.push_back(r);
    }
    // 2 records per class cannot fill 3 non-empty parts
    CHECK_THROWS_AS(stratified_split(tiny, SplitSpec{{0.4, 0.3, 0.3}, true, 0}),
                    std::invalid_argument);
}

TEST_CASE("social generator reproduces the paired-set proportions") {
    SocialSynthSpec spec;
    spec.stats = make_stats(130, 105);
    spec.seed = 5;
    const auto records = synth_social_data(spec);
    CHECK(records.size() == 235);
    const DatasetStats stats = count_stats(records);
    CHECK(stats.n_asd == 130);
    CHECK(stats.n_non_asd == 105);
}

TEST_CASE("paired generator: 125 bundles, 235 images, counts within [1,4]") {
    PairedSynthSpec spec;
    spec.stats = make_stats(65, 60);  // 125 bundles
    spec.total_images = 235;
    spec.image.side = 8;
    spec.seed = 6;
    const auto bundles = synth_paired_data(spec);
    REQUIRE(bundles.size() == 125);
    std::size_t images = 0;
    for (const PatientBundle& b : bundles) {
        REQUIRE(b.images.size() >= 1);
        REQUIRE(b.images.size() <= 4);
        images += b.images.size();
        CHECK_NOTHROW(validate(b));
    }
    CHECK(images == 235);
}

TEST_CASE("paired data round-trips through the directory layout") {
    PairedSynthSpec spec;
    spec.stats = make_stats(8, 7);
    spec.total_images = 30;
    spec.agreement = 0.6;
    spec.image.side = 8;
    spec.social.missing_fraction = 0.1;
    spec.seed = 77;
    const auto bundles = synth_paired_data(spec);

    const fs::path dir = fresh_dir("paired_roundtrip");
    write_paired_dir(dir, bundles);
    const auto loaded = load_paired_dir(dir);
    REQUIRE(loaded.size() == bundles.size());
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        CHECK(loaded[i].patient_id == bundles[i].patient_id);
        CHECK(loaded[i].label == bundles[i].label);
        CHECK(loaded[i].ados.scores == bundles[i].ados.scores);
        REQUIRE(loaded[i].images.size() == bundles[i].images.size());
        for (std::size_t k = 0; k < loaded[i].images.size(); ++k)
            CHECK(loaded[i].images[k].pixels == bundles[i].images[k].pixels);
    }
}

TEST_CASE("perfect-agreement noise-free paired data is trivially consistent") {
    PairedSynthSpec spec;
    spec.stats = make_stats(10, 10);
    spec.agreement = 1.0;
    spec.image.noise_sigma = 0.0;
    spec.image.side = 8;
    spec.social = separable_social_spec(0, 0, 0);  // stats unused here
    spec.social.stats = spec.stats;
    spec.seed = 3;
    const auto bundles = synth_paired_data(spec);
    for (const PatientBundle& b : bundles) {
        // behavior scores reflect the true label exactly
        const bool severe = b.ados.scores[0] >= 2;
        CHECK(severe == (b.label == Label::Asd));
    }
}

TEST_CASE("atomic writes leave neither temp files nor partial outputs") {
    const fs::path dir = fresh_dir("atomic");
    write_file_atomic(dir / "ok.txt", "payload");
    CHECK(read_file(dir / "ok.txt") == "payload");
    CHECK_FALSE(fs::exists(dir / "ok.txt.tmp"));

    // parent path blocked by a regular file: nothing gets created
    write_file_atomic(dir / "blocker", "x");
    CHECK_THROWS(write_file_atomic(dir / "blocker" / "child.txt", "y"));
    CHECK_FALSE(fs::exists(dir / "blocker" / "child.txt"));
}

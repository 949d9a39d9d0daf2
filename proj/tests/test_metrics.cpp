#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "hybridx/metrics.hpp"
#include "hybridx/tensor.hpp"
#include "support/oracles.hpp"

using namespace hybridx;

namespace {

std::vector<Label> random_labels(RngState& rng, std::size_t n) {
    std::vector<Label> out(n);
    for (Label& l : out) l = rng.uniform_below(2) == 0 ? Label::NonAsd : Label::Asd;
    return out;
}

std::string read_golden(const char* name) {
    std::ifstream in(std::string(GOLDEN_DIR) + "/" + name, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("confusion counts the four cells with ASD positive") {
    const std::vector<Label> truth{Label::Asd, Label::Asd, Label::NonAsd, Label::NonAsd};

    SUBCASE("perfect agreement has no false cells") {
        const ConfusionMatrix cm = confusion(truth, truth);
        CHECK(cm.tp == 2);
        CHECK(cm.tn == 2);
        CHECK(cm.fp == 0);
        CHECK(cm.fn == 0);
    }

    SUBCASE("perfect disagreement has no true cells") {
        std::vector<Label> preds;
        for (Label l : truth) preds.push_back(l == Label::Asd ? Label::NonAsd : Label::Asd);
        const ConfusionMatrix cm = confusion(preds, truth);
        CHECK(cm.tp == 0);
        CHECK(cm.tn == 0);
        CHECK(cm.fp == 2);
        CHECK(cm.fn == 2);
    }

    SUBCASE("length mismatch and empty input are rejected") {
        CHECK_THROWS_AS(confusion({Label::Asd}, truth), std::invalid_argument);
        CHECK_THROWS_AS(confusion({}, {}), std::invalid_argument);
    }
}

TEST_CASE("confusion matches an independently written counting loop") {
    RngState rng(2024);
    for (int round = 0; round < 5; ++round) {
        const auto preds = random_labels(rng, 50);
        const auto truth = random_labels(rng, 50);
        const ConfusionMatrix cm = confusion(preds, truth);
        const oracle::Counts want = oracle::count_confusion(preds, truth);
        CHECK(cm.tp == want.tp);
        CHECK(cm.fp == want.fp);
        CHECK(cm.fn == want.fn);
        CHECK(cm.tn == want.tn);
        CHECK(cm.total() == 50);
    }
}

TEST_CASE("metric formulas on a worked example") {
    const ConfusionMatrix cm{3, 1, 2, 4};
    CHECK(*accuracy(cm) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(*sensitivity(cm) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(*precision(cm) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("perfect classifier scores 1.0 everywhere") {
    const ConfusionMatrix cm{5, 0, 0, 7};
    CHECK(*accuracy(cm) == 1.0);
    CHECK(*sensitivity(cm) == 1.0);
    CHECK(*precision(cm) == 1.0);
}

TEST_CASE("zero denominators surface as undefined, never 0 or NaN") {
    CHECK_FALSE(sensitivity(ConfusionMatrix{0, 3, 0, 7}).has_value());
    CHECK_FALSE(precision(ConfusionMatrix{0, 0, 2, 8}).has_value());
    CHECK_FALSE(accuracy(ConfusionMatrix{0, 0, 0, 0}).has_value());
    CHECK(render_percent(std::nullopt) == "n/a");
}

TEST_CASE("swapping the positive class turns sensitivity into specificity") {
    RngState rng(5);
    const auto preds = random_labels(rng, 40);
    const auto truth = random_labels(rng, 40);
    auto flip = [](std::vector<Label> v) {
        for (Label& l : v) l = l == Label::Asd ? Label::NonAsd : Label::Asd;
        return v;
    };
    const ConfusionMatrix cm = confusion(preds, truth);
    const ConfusionMatrix swapped = confusion(flip(preds), flip(truth));
    if (cm.tn + cm.fp > 0) {
        CHECK(*sensitivity(swapped) ==
              doctest::Approx(static_cast<double>(cm.tn) / (cm.tn + cm.fp)).epsilon(1e-12));
    }
}

TEST_CASE("confusion is equivariant under joint permutation") {
    RngState rng(6);
    auto preds = random_labels(rng, 30);
    auto truth = random_labels(rng, 30);
    const ConfusionMatrix before = confusion(preds, truth);
    std::vector<std::size_t> perm(30);
    for (std::size_t i = 0; i < 30; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<Label> p2(30), t2(30);
    for (std::size_t i = 0; i < 30; ++i) {
        p2[i] = preds[perm[i]];
        t2[i] = truth[perm[i]];
    }
    const ConfusionMatrix after = confusion(p2, t2);
    CHECK(before.tp == after.tp);
    CHECK(before.fp == after.fp);
    CHECK(before.fn == after.fn);
    CHECK(before.tn == after.tn);
}

TEST_CASE("report metrics stay recomputable from the confusion matrix") {
    RngState rng(7);
    const auto preds = random_labels(rng, 64);
    const auto truth = random_labels(rng, 64);
    const EvalReport r = make_report("m", 1, preds, truth);
    CHECK(*r.accuracy == doctest::Approx(*accuracy(r.cm)).epsilon(1e-12));
    CHECK(*r.sensitivity == doctest::Approx(*sensitivity(r.cm)).epsilon(1e-12));
    CHECK(*r.precision == doctest::Approx(*precision(r.cm)).epsilon(1e-12));
    CHECK(r.stats.n_total == 64);
}

TEST_CASE("percent rendering rounds half-up to whole percents") {
    CHECK(render_percent(0.866) == "87%");
    CHECK(render_percent(0.864) == "86%");
    CHECK(render_percent(0.005) == "1%");
    CHECK(render_percent(1.0) == "100%");
    CHECK(render_percent(0.0) == "0%");
}

TEST_CASE("single-report table is two columns with the five statistic rows") {
    const EvalReport r = make_report("social-svm", 3, ConfusionMatrix{48, 14, 2, 41});
    const std::string table = render_table({r});
    std::istringstream lines(table);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) rows.push_back(line);
    REQUIRE(rows.size() == 6);  // header + 5 statistics
    CHECK(rows[0].rfind("Statistic", 0) == 0);
    CHECK(rows[0].find("social-svm") != std::string::npos);
    CHECK(rows[1].rfind("Accuracy", 0) == 0);
    CHECK(rows[2].rfind("Sensitivity", 0) == 0);
    CHECK(rows[3].rfind("Precision", 0) == 0);
    CHECK(rows[4].rfind("Dataset Size", 0) == 0);
    CHECK(rows[5].rfind("N_ASD/N_non-ASD", 0) == 0);
}

TEST_CASE("three-module table matches the reviewed golden file byte for byte") {
    const std::vector<EvalReport> reports = {
        make_report("social-svm", 1, ConfusionMatrix{48, 14, 2, 41}),
        make_report("facial-densenet", 2, ConfusionMatrix{91, 11, 9, 89}),
        make_report("hybrid", 3, ConfusionMatrix{101, 12, 19, 103}),
    };
    CHECK(render_table(reports) == read_golden("comparison_table.txt"));
}

TEST_CASE("reported metric triples can be checked for self-consistency") {
    // the headline hybrid triple over 235 samples admits a confusion matrix
    const auto found = consistent_confusions(235, 0.87, 0.84, 0.89, 0.005);
    CHECK_FALSE(found.empty());
    for (const ConfusionMatrix& cm : found) {
        CHECK(cm.total() == 235);
        CHECK(std::fabs(*accuracy(cm) - 0.87) <= 0.005);
        CHECK(std::fabs(*sensitivity(cm) - 0.84) <= 0.005);
        CHECK(std::fabs(*precision(cm) - 0.89) <= 0.005);
    }

    // perfect accuracy with half sensitivity cannot exist
    CHECK(consistent_confusions(4, 1.0, 0.5, 1.0, 0.01).empty());
}

TEST_CASE("report text serialization round-trips") {
    const EvalReport r = make_report("hybrid", 17, ConfusionMatrix{10, 2, 3, 25});
    const EvalReport back = report_from_text(report_to_text(r));
    CHECK(back.model == r.model);
    CHECK(back.seed == r.seed);
    CHECK(back.cm.tp == r.cm.tp);
    CHECK(back.cm.tn == r.cm.tn);
    CHECK(*back.accuracy == *r.accuracy);
    CHECK(report_to_text(back) == report_to_text(r));
    CHECK_THROWS_AS(report_from_text("bogus"), std::runtime_error);
}

TEST_CASE("csv export carries one row per report") {
    const std::string csv = reports_to_csv({make_report("a", 1, ConfusionMatrix{1, 2, 3, 4}),
                                            make_report("b", 2, ConfusionMatrix{4, 3, 2, 1})});
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.rfind("model,seed,", 0) == 0);
}

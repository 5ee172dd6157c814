#include <catch2/catch_amalgamated.hpp>

#include "segprop/metrics.hpp"

using namespace segprop;

namespace {
LabelMap random_labels(int w, int h, int classes, uint64_t seed) {
    LabelMap m(w, h, classes);
    Rng rng(seed);
    for (auto& v : m.data) v = static_cast<uint8_t>(rng.uniform_int(0, classes - 1));
    return m;
}
}  // namespace

TEST_CASE("confusion is an exact per-pixel tally") {
    LabelMap gt = random_labels(8, 8, 3, 1);
    ConfusionMatrix diag = confusion(gt, gt);
    CHECK(diag.total() == 64);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            if (a != b) CHECK(diag.at(a, b) == 0);

    LabelMap pred(4, 2, 2, 0);          // constant class 0
    LabelMap half(4, 2, 2, 0);
    for (int x = 0; x < 4; ++x) half.at(x, 1) = 1;
    ConfusionMatrix cm = confusion(pred, half);
    CHECK(cm.at(1, 0) == 4);
    CHECK(cm.at(1, 1) == 0);
    CHECK(cm.at(0, 0) == 4);
}

TEST_CASE("confusion matches a brute-force counting loop") {
    LabelMap pred = random_labels(64, 64, 5, 2);
    LabelMap gt = random_labels(64, 64, 5, 3);
    ConfusionMatrix cm = confusion(pred, gt);
    std::vector<uint64_t> expect(25, 0);
    for (int i = 0; i < 64 * 64; ++i) ++expect[gt.data[i] * 5 + pred.data[i]];
    CHECK(cm.counts == expect);
}

TEST_CASE("confusion is additive over image partitions") {
    LabelMap pred = random_labels(16, 16, 4, 4);
    LabelMap gt = random_labels(16, 16, 4, 5);
    ConfusionMatrix whole = confusion(pred, gt);
    ConfusionMatrix merged(4);
    for (int half = 0; half < 2; ++half) {
        LabelMap p(16, 8, 4), g(16, 8, 4);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 16; ++x) {
                p.at(x, y) = pred.at(x, y + 8 * half);
                g.at(x, y) = gt.at(x, y + 8 * half);
            }
        merged.add(confusion(p, g));
    }
    CHECK(merged.counts == whole.counts);
}

TEST_CASE("class_scores evaluates the F1 and IoU formulas") {
    SECTION("perfect prediction") {
        LabelMap gt = random_labels(10, 10, 3, 6);
        ClassScores s = class_scores(confusion(gt, gt));
        for (int c = 0; c < 3; ++c) {
            CHECK(s.f1[c] == 1.0);
            CHECK(s.iou[c] == 1.0);
        }
        CHECK(s.mean_f1 == 1.0);
        CHECK(s.mean_iou == 1.0);
    }

    SECTION("TP=50 FP=50 FN=0 gives F1=2/3, IoU=1/2") {
        ConfusionMatrix cm(2);
        cm.at(1, 1) = 50;  // TP for class 1
        cm.at(0, 1) = 50;  // FP for class 1
        cm.at(0, 0) = 900;
        ClassScores s = class_scores(cm);
        CHECK(s.f1[1] == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(s.iou[1] == Catch::Approx(0.5).epsilon(1e-12));
    }

    SECTION("classes absent from both maps are excluded from the means") {
        ConfusionMatrix cm(3);
        cm.at(0, 0) = 10;
        cm.at(1, 1) = 10;
        ClassScores s = class_scores(cm);
        CHECK_FALSE(s.in_mean[2]);
        CHECK(s.mean_f1 == 1.0);
    }

    SECTION("a class predicted but absent from ground truth scores 0") {
        ConfusionMatrix cm(2);
        cm.at(0, 0) = 50;
        cm.at(0, 1) = 50;  // class 1 predicted, never true
        ClassScores s = class_scores(cm);
        CHECK(s.in_mean[1]);
        CHECK(s.f1[1] == 0.0);
    }
}

TEST_CASE("IoU = F1/(2-F1) holds on random confusion matrices") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        int C = rng.uniform_int(2, 6);
        ConfusionMatrix cm(C);
        for (auto& v : cm.counts) v = static_cast<uint64_t>(rng.uniform_int(0, 50));
        ClassScores s = class_scores(cm);
        for (int c = 0; c < C; ++c) {
            if (!s.in_mean[c]) continue;
            REQUIRE(s.iou[c] == Catch::Approx(s.f1[c] / (2.0 - s.f1[c])).margin(1e-12));
            REQUIRE(s.iou[c] <= s.f1[c] + 1e-15);
        }
    }
}

TEST_CASE("metrics are invariant under consistent class permutation") {
    LabelMap pred = random_labels(20, 20, 4, 8);
    LabelMap gt = random_labels(20, 20, 4, 9);
    ClassScores base = class_scores(confusion(pred, gt));
    const uint8_t perm[4] = {2, 0, 3, 1};
    LabelMap pred2 = pred, gt2 = gt;
    for (auto& v : pred2.data) v = perm[v];
    for (auto& v : gt2.data) v = perm[v];
    ClassScores permuted = class_scores(confusion(pred2, gt2));
    CHECK(permuted.mean_f1 == Catch::Approx(base.mean_f1).margin(1e-12));
    CHECK(permuted.mean_iou == Catch::Approx(base.mean_iou).margin(1e-12));
    for (int c = 0; c < 4; ++c) CHECK(permuted.f1[perm[c]] == Catch::Approx(base.f1[c]));
}

TEST_CASE("ignore index excludes pixels from the tally") {
    LabelMap pred(2, 2, 3, 1);
    LabelMap gt(2, 2, 3, 1);
    gt.data[3] = kIgnoreLabel;
    ConfusionMatrix cm = confusion(pred, gt, true);
    CHECK(cm.total() == 3);
}

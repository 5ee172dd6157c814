// Segmentation scoring: confusion matrices, per-class F1/IoU, class means.
#pragma once

#include <cstdint>
#include <vector>

#include "segprop/common.hpp"
#include "segprop/core.hpp"

namespace segprop {

/// C x C pixel tallies; rows index ground truth, columns prediction.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<uint64_t> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int classes)
        : num_classes(classes), counts(static_cast<size_t>(classes) * classes, 0) {}

    uint64_t at(int gt, int pred) const {
        return counts[static_cast<size_t>(gt) * num_classes + pred];
    }
    uint64_t& at(int gt, int pred) {
        return counts[static_cast<size_t>(gt) * num_classes + pred];
    }

    uint64_t total() const {
        uint64_t s = 0;
        for (uint64_t v : counts) s += v;
        return s;
    }

    void add(const ConfusionMatrix& o) {
        if (o.num_classes != num_classes) throw DimensionMismatch("ConfusionMatrix::add");
        for (size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    }
};

constexpr uint8_t kIgnoreLabel = 255;

/// Exact per-pixel tally. Pixels whose ground truth equals the ignore index
/// are skipped when `use_ignore` is set.
inline ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt,
                                 bool use_ignore = false) {
    if (pred.width != gt.width || pred.height != gt.height ||
        pred.num_classes != gt.num_classes)
        throw DimensionMismatch("confusion: map shape mismatch");
    ConfusionMatrix cm(gt.num_classes);
    const int n = gt.pixels();
    for (int i = 0; i < n; ++i) {
        if (use_ignore && gt.data[i] == kIgnoreLabel) continue;
        ++cm.at(gt.data[i], pred.data[i]);
    }
    return cm;
}

struct ClassScores {
    std::vector<double> f1;        // per class; 0 when undefined
    std::vector<double> iou;
    std::vector<bool> in_mean;     // false for classes absent from both maps
    double mean_f1 = 0.0;
    double mean_iou = 0.0;
};

/// F1_c = 2TP/(2TP+FP+FN), IoU_c = TP/(TP+FP+FN). Classes absent from both
/// ground truth and prediction are left out of the means; classes absent from
/// ground truth but predicted score 0.
inline ClassScores class_scores(const ConfusionMatrix& cm) {
    const int C = cm.num_classes;
    ClassScores s;
    s.f1.assign(C, 0.0);
    s.iou.assign(C, 0.0);
    s.in_mean.assign(C, false);
    int counted = 0;
    for (int c = 0; c < C; ++c) {
        uint64_t tp = cm.at(c, c), fp = 0, fn = 0;
        for (int o = 0; o < C; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        if (tp + fp + fn == 0) continue;  // absent everywhere
        s.in_mean[c] = true;
        ++counted;
        s.f1[c] = 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
        s.iou[c] = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
        s.mean_f1 += s.f1[c];
        s.mean_iou += s.iou[c];
    }
    if (counted > 0) {
        s.mean_f1 /= counted;
        s.mean_iou /= counted;
    }
    return s;
}

}  // namespace segprop

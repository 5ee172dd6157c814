// Core value types: hard label maps, soft per-class vote volumes, class palettes,
// and the sequence/propagation parameter block shared by every stage.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segprop/common.hpp"

namespace segprop {

/// Hard per-pixel class indices, row-major. Indices must stay below num_classes.
struct LabelMap {
    int width = 0;
    int height = 0;
    int num_classes = 0;
    std::vector<uint8_t> data;

    LabelMap() = default;
    LabelMap(int w, int h, int classes, uint8_t fill = 0)
        : width(w), height(h), num_classes(classes),
          data(static_cast<size_t>(w) * h, fill) {}

    int pixels() const { return width * height; }
    uint8_t at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
    uint8_t& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }

    void validate() const {
        if (width < 0 || height < 0 || num_classes <= 0) throw Error("LabelMap: bad dimensions");
        if (data.size() != static_cast<size_t>(width) * height)
            throw DimensionMismatch("LabelMap: data length != width*height");
        for (uint8_t v : data)
            if (v >= num_classes) throw Error("LabelMap: class index out of range");
    }
};

/// Soft per-class vote mass, one row-major plane per class (data[c*W*H + y*W + x]).
struct VoteVolume {
    int width = 0;
    int height = 0;
    int num_classes = 0;
    std::vector<float> data;

    VoteVolume() = default;
    VoteVolume(int w, int h, int classes)
        : width(w), height(h), num_classes(classes),
          data(static_cast<size_t>(w) * h * classes, 0.0f) {}

    int pixels() const { return width * height; }
    float at(int x, int y, int c) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    float& at(int x, int y, int c) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    const float* plane(int c) const { return data.data() + static_cast<size_t>(c) * pixels(); }
    float* plane(int c) { return data.data() + static_cast<size_t>(c) * pixels(); }

    double pixel_sum(int idx) const {
        double s = 0.0;
        for (int c = 0; c < num_classes; ++c)
            s += data[static_cast<size_t>(c) * pixels() + idx];
        return s;
    }

    bool same_shape(const VoteVolume& o) const {
        return width == o.width && height == o.height && num_classes == o.num_classes;
    }
};

struct PaletteEntry {
    int index = 0;
    std::string name;
    uint8_t r = 0, g = 0, b = 0;
};

/// Ordered class palette; indices dense from 0, colors unique.
struct ClassPalette {
    std::vector<PaletteEntry> entries;

    void validate() const {
        for (size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].index != static_cast<int>(i))
                throw Error("ClassPalette: indices must be dense from 0");
            for (size_t j = 0; j < i; ++j) {
                if (entries[j].r == entries[i].r && entries[j].g == entries[i].g &&
                    entries[j].b == entries[i].b)
                    throw Error("ClassPalette: duplicate color");
            }
        }
    }
};

/// Everything the propagation engine needs to know about one sequence.
/// Neighborhood offsets are {±stride, ±2·stride, ..., ±f·stride}.
struct SequenceSpec {
    int num_frames = 0;
    int width = 0;
    int height = 0;
    int num_classes = 0;
    std::vector<int> keyframes;   // sorted, strictly increasing, in [0, num_frames)
    double lambda = 0.05;         // vote decay per frame of distance
    int f = 2;                    // half-neighborhood size (count of offsets per side)
    int stride = 5;               // spacing between neighbor offsets, in frames
    int max_iters = 7;
    double total_vote_mass = 1.0;

    std::vector<int> offsets() const {
        std::vector<int> out;
        for (int m = f; m >= 1; --m) out.push_back(-m * stride);
        for (int m = 1; m <= f; ++m) out.push_back(m * stride);
        return out;
    }

    void validate() const {
        if (num_frames <= 0 || width <= 0 || height <= 0 || num_classes <= 0)
            throw Error("SequenceSpec: bad dimensions");
        if (lambda < 0) throw Error("SequenceSpec: lambda must be >= 0");
        if (f < 1 || stride < 1) throw Error("SequenceSpec: f and stride must be >= 1");
        for (size_t i = 0; i < keyframes.size(); ++i) {
            if (keyframes[i] < 0 || keyframes[i] >= num_frames)
                throw Error("SequenceSpec: keyframe out of range");
            if (i > 0 && keyframes[i] <= keyframes[i - 1])
                throw Error("SequenceSpec: keyframes must be strictly increasing");
        }
    }
};

/// Spread a hard labeling into a one-hot vote volume carrying `mass` per pixel.
inline VoteVolume one_hot(const LabelMap& labels, float mass = 1.0f) {
    VoteVolume v(labels.width, labels.height, labels.num_classes);
    const int n = labels.pixels();
    for (int i = 0; i < n; ++i)
        v.data[static_cast<size_t>(labels.data[i]) * n + i] = mass;
    return v;
}

/// Majority class per pixel; ties resolved to the lowest class index.
inline LabelMap argmax_labels(const VoteVolume& votes) {
    LabelMap out(votes.width, votes.height, votes.num_classes);
    const int n = votes.pixels();
    for (int i = 0; i < n; ++i) {
        int best = 0;
        float best_v = votes.data[i];
        for (int c = 1; c < votes.num_classes; ++c) {
            float v = votes.data[static_cast<size_t>(c) * n + i];
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        out.data[i] = static_cast<uint8_t>(best);
    }
    return out;
}

/// Fraction of pixels whose winning vote mass is shared by two or more classes
/// (equality within 1e-9).
inline double tie_fraction(const VoteVolume& votes) {
    const int n = votes.pixels();
    if (n == 0) return 0.0;
    int tied = 0;
    for (int i = 0; i < n; ++i) {
        float best_v = votes.data[i];
        for (int c = 1; c < votes.num_classes; ++c)
            best_v = std::max(best_v, votes.data[static_cast<size_t>(c) * n + i]);
        int winners = 0;
        for (int c = 0; c < votes.num_classes; ++c)
            if (std::abs(static_cast<double>(votes.data[static_cast<size_t>(c) * n + i]) - best_v) <= 1e-9)
                ++winners;
        if (winners >= 2) ++tied;
    }
    return static_cast<double>(tied) / n;
}

}  // namespace segprop

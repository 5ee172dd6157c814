// Structure-preserving homography voting: connected same-class components of a
// labeled frame are registered onto the target frame by a robust least-median
// homography fit over their flow correspondences, then projected as an extra
// vote source.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "segprop/common.hpp"
#include "segprop/config.hpp"
#include "segprop/core.hpp"
#include "segprop/flow.hpp"
#include "segprop/geometry.hpp"
#include "segprop/propagate.hpp"

namespace segprop {

/// Maximal 4-connected region of one class.
struct Component {
    uint8_t cls = 0;
    std::vector<int> pixels;  // row-major indices, discovery order
    int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
};

/// 3x3 projective transform, normalized so m[2][2] == 1 when nonzero.
struct Homography {
    Mat3 m;
};

/// Scanline flood fill, 4-connectivity; components appear in discovery order.
inline std::vector<Component> connected_components(const LabelMap& labels) {
    const int W = labels.width, H = labels.height;
    std::vector<Component> out;
    std::vector<int> comp_of(static_cast<size_t>(W) * H, -1);
    std::vector<int> stack;
    for (int start = 0; start < W * H; ++start) {
        if (comp_of[start] >= 0) continue;
        Component c;
        c.cls = labels.data[start];
        c.min_x = c.max_x = start % W;
        c.min_y = c.max_y = start / W;
        int id = static_cast<int>(out.size());
        comp_of[start] = id;
        stack.assign(1, start);
        while (!stack.empty()) {
            int idx = stack.back();
            stack.pop_back();
            c.pixels.push_back(idx);
            int x = idx % W, y = idx / W;
            c.min_x = std::min(c.min_x, x);
            c.max_x = std::max(c.max_x, x);
            c.min_y = std::min(c.min_y, y);
            c.max_y = std::max(c.max_y, y);
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int i = 0; i < 4; ++i) {
                if (nx[i] < 0 || nx[i] >= W || ny[i] < 0 || ny[i] >= H) continue;
                int nidx = ny[i] * W + nx[i];
                if (comp_of[nidx] >= 0 || labels.data[nidx] != c.cls) continue;
                comp_of[nidx] = id;
                stack.push_back(nidx);
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

namespace detail {

struct Pt {
    double x, y;
};

// Cyclic Jacobi eigen decomposition of a symmetric 9x9 matrix; returns the
// eigenvector of the smallest eigenvalue.
inline void smallest_eigenvector_9(double a[9][9], double out[9]) {
    double v[9][9] = {};
    for (int i = 0; i < 9; ++i) v[i][i] = 1.0;
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < 9; ++p)
            for (int q = p + 1; q < 9; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-24) break;
        for (int p = 0; p < 9; ++p) {
            for (int q = p + 1; q < 9; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < 9; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 9; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < 9; ++k) {
                    double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    int best = 0;
    for (int i = 1; i < 9; ++i)
        if (a[i][i] < a[best][best]) best = i;
    for (int i = 0; i < 9; ++i) out[i] = v[i][best];
}

// Hartley normalization: centroid to origin, mean distance sqrt(2).
inline Mat3 normalizing_transform(const std::vector<Pt>& pts) {
    double cx = 0, cy = 0;
    for (const Pt& p : pts) {
        cx += p.x;
        cy += p.y;
    }
    cx /= pts.size();
    cy /= pts.size();
    double mean_dist = 0;
    for (const Pt& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
    mean_dist /= pts.size();
    double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    Mat3 t;
    t.m[0][0] = s;
    t.m[1][1] = s;
    t.m[0][2] = -s * cx;
    t.m[1][2] = -s * cy;
    return t;
}

// Direct linear transform on >= 4 correspondences, Hartley-normalized.
inline std::optional<Mat3> fit_dlt(const std::vector<Pt>& src, const std::vector<Pt>& dst) {
    Mat3 ts = normalizing_transform(src);
    Mat3 td = normalizing_transform(dst);
    double a[9][9] = {};
    for (size_t i = 0; i < src.size(); ++i) {
        double x, y, u, vv;
        ts.apply(src[i].x, src[i].y, x, y);
        td.apply(dst[i].x, dst[i].y, u, vv);
        const double r1[9] = {-x, -y, -1, 0, 0, 0, u * x, u * y, u};
        const double r2[9] = {0, 0, 0, -x, -y, -1, vv * x, vv * y, vv};
        for (int p = 0; p < 9; ++p)
            for (int q = 0; q < 9; ++q) a[p][q] += r1[p] * r1[q] + r2[p] * r2[q];
    }
    double h[9];
    smallest_eigenvector_9(a, h);
    Mat3 hn;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) hn.m[i][j] = h[3 * i + j];
    if (std::abs(hn.det()) < 1e-12) return std::nullopt;
    Mat3 full = td.inverse() * hn * ts;
    if (std::abs(full.m[2][2]) > 1e-12) {
        double inv = 1.0 / full.m[2][2];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) full.m[i][j] *= inv;
    }
    if (std::abs(full.det()) < 1e-12) return std::nullopt;
    return full;
}

inline bool three_collinear(const Pt& a, const Pt& b, const Pt& c) {
    double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    double scale = std::hypot(b.x - a.x, b.y - a.y) * std::hypot(c.x - a.x, c.y - a.y);
    return std::abs(cross) <= 1e-9 * std::max(scale, 1.0);
}

inline bool degenerate_quad(const std::vector<Pt>& p) {
    for (int skip = 0; skip < 4; ++skip) {
        Pt q[3];
        int n = 0;
        for (int i = 0; i < 4; ++i)
            if (i != skip) q[n++] = p[i];
        if (three_collinear(q[0], q[1], q[2])) return true;
    }
    return false;
}

inline double symmetric_transfer_error(const Mat3& h, const Mat3& h_inv, const Pt& s,
                                       const Pt& d) {
    double fx, fy, bx, by;
    h.apply(s.x, s.y, fx, fy);
    h_inv.apply(d.x, d.y, bx, by);
    double e1 = (fx - d.x) * (fx - d.x) + (fy - d.y) * (fy - d.y);
    double e2 = (bx - s.x) * (bx - s.x) + (by - s.y) * (by - s.y);
    return e1 + e2;
}

}  // namespace detail

/// Least-median-of-squares homography fit. Samples 4-point minimal sets,
/// scores by the median squared symmetric transfer error, refits the best
/// model on its inliers (2.5x the LMedS robust scale), and rejects when the
/// best median exceeds `reject_px2` or every sample was degenerate.
inline std::optional<Homography> estimate_homography_lmeds(
    const std::vector<std::pair<double, double>>& src_pts,
    const std::vector<std::pair<double, double>>& dst_pts, int iterations = 500,
    uint64_t seed = 17, double reject_px2 = 4.0) {
    if (src_pts.size() != dst_pts.size())
        throw DimensionMismatch("estimate_homography_lmeds: point count mismatch");
    const int n = static_cast<int>(src_pts.size());
    if (n < 4) throw TooFewPoints("estimate_homography_lmeds: need >= 4 correspondences");

    std::vector<detail::Pt> src(n), dst(n);
    for (int i = 0; i < n; ++i) {
        src[i] = {src_pts[i].first, src_pts[i].second};
        dst[i] = {dst_pts[i].first, dst_pts[i].second};
    }

    Rng rng(seed);
    double best_med = std::numeric_limits<double>::infinity();
    Mat3 best_h;
    std::vector<double> errs(n);
    for (int it = 0; it < iterations; ++it) {
        int pick[4];
        for (int i = 0; i < 4; ++i) {
            bool fresh;
            do {
                pick[i] = rng.uniform_int(0, n - 1);
                fresh = true;
                for (int j = 0; j < i; ++j) fresh = fresh && pick[j] != pick[i];
            } while (!fresh);
        }
        std::vector<detail::Pt> s4, d4;
        for (int i : pick) {
            s4.push_back(src[i]);
            d4.push_back(dst[i]);
        }
        if (detail::degenerate_quad(s4) || detail::degenerate_quad(d4)) continue;
        auto h = detail::fit_dlt(s4, d4);
        if (!h) continue;
        Mat3 h_inv = h->inverse();
        for (int i = 0; i < n; ++i)
            errs[i] = detail::symmetric_transfer_error(*h, h_inv, src[i], dst[i]);
        std::vector<double> sorted = errs;
        std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
        double med = sorted[n / 2];
        if (med < best_med) {
            best_med = med;
            best_h = *h;
        }
    }
    if (!std::isfinite(best_med) || best_med > reject_px2) return std::nullopt;

    // refit on the inliers of the best model
    double sigma = 1.4826 * (1.0 + 5.0 / (n - 4)) * std::sqrt(best_med);
    double cutoff = 2.5 * sigma;
    Mat3 h_inv = best_h.inverse();
    std::vector<detail::Pt> si, di;
    for (int i = 0; i < n; ++i) {
        if (std::sqrt(detail::symmetric_transfer_error(best_h, h_inv, src[i], dst[i])) <=
            cutoff) {
            si.push_back(src[i]);
            di.push_back(dst[i]);
        }
    }
    if (si.size() >= 4) {
        if (auto refit = detail::fit_dlt(si, di)) best_h = *refit;
    }
    if (std::abs(best_h.det()) < 1e-12) return std::nullopt;
    return Homography{best_h};
}

/// Per-component homography votes: each 4-connected same-class region of the
/// labeled frame is fit from its (pixel, pixel + flow) correspondences and
/// projected whole onto the target frame, depositing unit class mass with
/// bilinear splatting. Rejected components contribute nothing.
inline VoteVolume homography_votes(const LabelMap& labels_src, const FlowField& flow_src_to_k,
                                   const HomographyConfig& cfg = {}) {
    if (labels_src.width != flow_src_to_k.width || labels_src.height != flow_src_to_k.height)
        throw DimensionMismatch("homography_votes: label/flow size mismatch");
    const int W = labels_src.width, H = labels_src.height;
    const int n = W * H;
    VoteVolume out(W, H, labels_src.num_classes);
    std::vector<double> acc(out.data.size(), 0.0);

    std::vector<Component> comps = connected_components(labels_src);
    for (size_t ci = 0; ci < comps.size(); ++ci) {
        const Component& comp = comps[ci];
        std::vector<int> usable;
        for (int idx : comp.pixels)
            if (flow_src_to_k.is_valid(idx)) usable.push_back(idx);
        if (usable.size() < 4) continue;
        // large components are fit from a deterministic subsample; the
        // projection below still covers every pixel
        constexpr size_t kMaxCorrespondences = 400;
        if (usable.size() > kMaxCorrespondences) {
            std::vector<int> picked;
            picked.reserve(kMaxCorrespondences);
            double step = static_cast<double>(usable.size()) / kMaxCorrespondences;
            for (size_t i = 0; i < kMaxCorrespondences; ++i)
                picked.push_back(usable[static_cast<size_t>(i * step)]);
            usable = std::move(picked);
        }
        std::vector<std::pair<double, double>> src, dst;
        for (int idx : usable) {
            int x = idx % W, y = idx / W;
            src.emplace_back(x, y);
            dst.emplace_back(x + flow_src_to_k.data[static_cast<size_t>(idx) * 2],
                             y + flow_src_to_k.data[static_cast<size_t>(idx) * 2 + 1]);
        }
        auto h = estimate_homography_lmeds(src, dst, cfg.samples,
                                           splitmix64(cfg.seed ^ (ci * 0x9e3779b9ULL)),
                                           cfg.reject_px2);
        if (!h) continue;
        for (int idx : comp.pixels) {
            double px, py;
            h->m.apply(idx % W, idx / W, px, py);
            BilinearTaps t = bilinear_taps(px, py, W, H);
            for (int i = 0; i < t.count; ++i)
                acc[static_cast<size_t>(comp.cls) * n + t.idx[i]] += t.w[i];
        }
    }
    for (size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<float>(acc[i]);
    return out;
}

/// Wraps homography voting from both flanking keyframes into the plugin
/// interface; per-frame volumes are computed once and cached across
/// iterations (the inputs never change).
inline VoteSource make_homography_source(const SequenceSpec& spec,
                                         const std::map<int, LabelMap>& keyframe_labels,
                                         const SequenceFlows& flows,
                                         const HomographyConfig& cfg, double weight) {
    struct Cache {
        std::mutex mu;
        std::map<int, VoteVolume> votes;
    };
    auto cache = std::make_shared<Cache>();
    auto labels = std::make_shared<std::map<int, LabelMap>>(keyframe_labels);
    const SequenceFlows* flows_p = &flows;
    double lambda = spec.lambda;

    VoteSource src;
    src.id = "homography";
    src.weight = weight;
    src.generate = [cache, labels, flows_p, lambda, cfg](const PropagationState& st,
                                                         int k) -> VoteVolume {
        {
            std::lock_guard<std::mutex> lk(cache->mu);
            auto it = cache->votes.find(k);
            if (it != cache->votes.end()) return it->second;
        }
        // flanking keyframes (one-sided outside the span)
        int before = -1, after = -1;
        for (const auto& [kf, _] : *labels) {
            if (kf <= k) before = kf;
            if (kf >= k) {
                after = kf;
                break;
            }
        }
        const VoteVolume& ref = st.volumes[k];
        VoteVolume out(ref.width, ref.height, ref.num_classes);
        std::vector<double> acc(out.data.size(), 0.0);
        for (int kf : {before, after}) {
            if (kf < 0 || kf == k) continue;
            HomographyConfig comp_cfg = cfg;
            comp_cfg.seed = splitmix64(cfg.seed ^ (static_cast<uint64_t>(kf) << 20) ^
                                       static_cast<uint64_t>(k));
            // correspondence noise variance grows with the composed distance,
            // so the rejection threshold scales with it
            comp_cfg.reject_px2 = cfg.reject_px2 * std::max(1, std::abs(k - kf));
            VoteVolume part =
                homography_votes(labels->at(kf), flows_p->composed(kf, k), comp_cfg);
            double w = std::exp(-lambda * std::abs(k - kf));
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += w * part.data[i];
        }
        for (size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<float>(acc[i]);
        std::lock_guard<std::mutex> lk(cache->mu);
        return cache->votes.emplace(k, std::move(out)).first->second;
    };
    return src;
}

}  // namespace segprop

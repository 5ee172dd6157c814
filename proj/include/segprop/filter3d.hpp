// Final space-time smoothing: align each frame's neighbors along flow
// trajectories into a per-class 3D stack, convolve with a separable Gaussian
// (x, then y, then time), and re-decide hard classes from the filtered votes.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "segprop/common.hpp"
#include "segprop/config.hpp"
#include "segprop/core.hpp"
#include "segprop/flow.hpp"
#include "segprop/propagate.hpp"

namespace segprop {

/// Flow-aligned vote planes around one center frame. planes[i] holds frame
/// k + offsets[i] warped into frame k's coordinates; the t0 plane is the
/// center frame's own votes, untouched.
struct TrajectoryStack {
    int radius = 0;
    std::vector<int> offsets;        // ascending, contains 0
    std::vector<VoteVolume> planes;
    std::vector<std::vector<uint8_t>> valid;  // per plane, per pixel
    int t0 = 0;                      // index of offset 0
};

/// Gathers frames k-r..k+r (clipped at the sequence ends) along composed flow
/// into frame k's coordinates. Pixels whose trajectory leaves the image, or
/// that sample nothing, are invalid in that plane; valid pixels are scaled
/// back to the full vote mass.
inline TrajectoryStack build_stack(const PropagationState& state, const SequenceFlows& flows,
                                   int k, int r) {
    if (!state.initialized) throw NotInitialized("build_stack: state not initialized");
    if (k < 0 || k >= state.num_frames()) throw Error("build_stack: frame out of range");
    const VoteVolume& center = state.volumes[k];
    const int n = center.pixels();
    const double mass = state.total_mass;

    TrajectoryStack st;
    st.radius = r;
    for (int d = -r; d <= r; ++d) {
        int q = k + d;
        if (q < 0 || q >= state.num_frames()) continue;
        if (d == 0) st.t0 = static_cast<int>(st.planes.size());
        st.offsets.push_back(d);
        if (d == 0) {
            st.planes.push_back(center);
            st.valid.emplace_back(n, 1);
            continue;
        }
        FlowField composed = flows.composed(k, q);
        VoteVolume plane(center.width, center.height, center.num_classes);
        std::vector<uint8_t> valid(n, 0);
        const VoteVolume& src = state.volumes[q];
        for (int y = 0; y < center.height; ++y) {
            for (int x = 0; x < center.width; ++x) {
                int idx = y * center.width + x;
                if (!composed.is_valid(idx)) continue;
                double px = x + composed.data[static_cast<size_t>(idx) * 2];
                double py = y + composed.data[static_cast<size_t>(idx) * 2 + 1];
                BilinearTaps t = bilinear_taps(px, py, center.width, center.height);
                if (t.count == 0) continue;
                double sum = 0.0;
                std::vector<double> acc(center.num_classes, 0.0);
                for (int c = 0; c < center.num_classes; ++c) {
                    const float* p = src.plane(c);
                    for (int i = 0; i < t.count; ++i) acc[c] += t.w[i] * p[t.idx[i]];
                    sum += acc[c];
                }
                if (sum <= detail::kMassEps * mass) continue;
                double scale = mass / sum;
                for (int c = 0; c < center.num_classes; ++c)
                    plane.plane(c)[idx] = static_cast<float>(acc[c] * scale);
                valid[idx] = 1;
            }
        }
        st.planes.push_back(std::move(plane));
        st.valid.push_back(std::move(valid));
    }
    return st;
}

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
    if (sigma <= 0.0) return {1.0};
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i)
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    return k;
}

}  // namespace detail

/// Separable truncated-Gaussian convolution of the stack (x, then y, then
/// time), kernels renormalized over in-bounds valid taps; returns the filtered
/// center (t = 0) slice. Invalid pixels inside a plane are excluded rather
/// than zero-padded, so vote mass per pixel is preserved.
inline VoteVolume gaussian_filter_3d(const TrajectoryStack& stack, double sigma_s,
                                     double sigma_t) {
    const VoteVolume& center = stack.planes[stack.t0];
    const int W = center.width, H = center.height, C = center.num_classes;
    const int n = W * H;
    std::vector<double> kernel_s = detail::gaussian_kernel(sigma_s);
    std::vector<double> kernel_t = detail::gaussian_kernel(sigma_t);
    const int rs = static_cast<int>(kernel_s.size()) / 2;
    const int rt = static_cast<int>(kernel_t.size()) / 2;

    // spatially filter each plane the temporal kernel can reach
    std::vector<std::vector<double>> smoothed(stack.planes.size());
    std::vector<std::vector<uint8_t>> svalid(stack.planes.size());
    for (size_t pi = 0; pi < stack.planes.size(); ++pi) {
        if (std::abs(stack.offsets[pi]) > rt) continue;
        const VoteVolume& plane = stack.planes[pi];
        const std::vector<uint8_t>& valid = stack.valid[pi];
        // x pass
        std::vector<double> tmp(static_cast<size_t>(n) * C, 0.0);
        std::vector<uint8_t> tvalid(n, 0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                int idx = y * W + x;
                double wsum = 0.0;
                for (int dx = -rs; dx <= rs; ++dx) {
                    int xx = x + dx;
                    if (xx < 0 || xx >= W || !valid[y * W + xx]) continue;
                    wsum += kernel_s[dx + rs];
                }
                if (wsum <= 0) continue;
                tvalid[idx] = 1;
                for (int c = 0; c < C; ++c) {
                    double acc = 0.0;
                    const float* p = plane.plane(c);
                    for (int dx = -rs; dx <= rs; ++dx) {
                        int xx = x + dx;
                        if (xx < 0 || xx >= W || !valid[y * W + xx]) continue;
                        acc += kernel_s[dx + rs] * p[y * W + xx];
                    }
                    tmp[static_cast<size_t>(c) * n + idx] = acc / wsum;
                }
            }
        // y pass
        smoothed[pi].assign(static_cast<size_t>(n) * C, 0.0);
        svalid[pi].assign(n, 0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                int idx = y * W + x;
                double wsum = 0.0;
                for (int dy = -rs; dy <= rs; ++dy) {
                    int yy = y + dy;
                    if (yy < 0 || yy >= H || !tvalid[yy * W + x]) continue;
                    wsum += kernel_s[dy + rs];
                }
                if (wsum <= 0) continue;
                svalid[pi][idx] = 1;
                for (int c = 0; c < C; ++c) {
                    double acc = 0.0;
                    for (int dy = -rs; dy <= rs; ++dy) {
                        int yy = y + dy;
                        if (yy < 0 || yy >= H || !tvalid[yy * W + x]) continue;
                        acc += kernel_s[dy + rs] * tmp[static_cast<size_t>(c) * n + yy * W + x];
                    }
                    smoothed[pi][static_cast<size_t>(c) * n + idx] = acc / wsum;
                }
            }
    }

    // temporal pass at t = 0
    VoteVolume out(W, H, C);
    for (int idx = 0; idx < n; ++idx) {
        double wsum = 0.0;
        for (size_t pi = 0; pi < stack.planes.size(); ++pi) {
            int d = stack.offsets[pi];
            if (std::abs(d) > rt || !svalid[pi].size() || !svalid[pi][idx]) continue;
            wsum += kernel_t[d + rt];
        }
        if (wsum <= 0) {  // center plane is always valid, but keep a fallback
            for (int c = 0; c < C; ++c)
                out.plane(c)[idx] = center.plane(c)[idx];
            continue;
        }
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            for (size_t pi = 0; pi < stack.planes.size(); ++pi) {
                int d = stack.offsets[pi];
                if (std::abs(d) > rt || !svalid[pi].size() || !svalid[pi][idx]) continue;
                acc += kernel_t[d + rt] * smoothed[pi][static_cast<size_t>(c) * n + idx];
            }
            out.plane(c)[idx] = static_cast<float>(acc / wsum);
        }
    }
    return out;
}

/// Filtered hard labels for frame k.
inline LabelMap filter_labels(const PropagationState& state, const SequenceFlows& flows, int k,
                              const FilterConfig& cfg = {}) {
    TrajectoryStack stack = build_stack(state, flows, k, cfg.radius);
    return argmax_labels(gaussian_filter_3d(stack, cfg.sigma_s, cfg.sigma_t));
}

/// Filtered labels for every frame; keyframes keep their clamped labeling.
inline std::vector<LabelMap> filter_all_labels(const PropagationState& state,
                                               const SequenceFlows& flows,
                                               const FilterConfig& cfg, int threads = 1) {
    std::vector<LabelMap> out(state.num_frames());
    parallel_for(state.num_frames(), threads, [&](int k) {
        if (state.is_keyframe[k])
            out[k] = state.labels[k];
        else
            out[k] = filter_labels(state, flows, k, cfg);
    });
    return out;
}

}  // namespace segprop

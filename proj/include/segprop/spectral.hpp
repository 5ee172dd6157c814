// Explicit space-time adjacency matrix over (pixel, class) nodes, power
// iteration with keyframe clamping, the quadratic segmentation score, and the
// equivalence verifier binding the matrix update to the propagation engine.
//
// Edges couple equal classes only, so the matrix is stored once at pixel-node
// level in coordinate form (sorted by row then column, duplicates merged) and
// applied per class plane. Entry values are exp(-lambda*dist) times the
// bilinear coupling weight of the flow link (capped by the splat route's
// over-deposition); on integer-flow links the entry equals exp(-lambda*dist).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "segprop/common.hpp"
#include "segprop/core.hpp"
#include "segprop/flow.hpp"
#include "segprop/propagate.hpp"

namespace segprop {

/// Dense state over all (pixel, class) nodes; entry (frame*W*H + pixel)*C + c.
struct StateVector {
    int num_nodes = 0;    // pixel-level nodes (frames * W * H)
    int num_classes = 0;
    std::vector<float> v;

    size_t size() const { return v.size(); }
};

struct SpaceTimeGraph {
    int num_frames = 0, width = 0, height = 0, num_classes = 0;

    struct Edge {
        int dst = 0;   // pixel-node index: frame * W*H + pixel
        int src = 0;
        double w = 0;  // exp(-lambda*dist) * bilinear coupling
    };
    std::vector<Edge> edges;           // sorted by (dst, src), merged
    std::vector<uint8_t> clamped;      // per pixel-node; keyframe pixels

    int pixel_nodes() const { return num_frames * width * height; }
};

inline StateVector flatten_state(const std::vector<VoteVolume>& volumes) {
    StateVector sv;
    if (volumes.empty()) return sv;
    const int n = volumes[0].pixels();
    const int C = volumes[0].num_classes;
    sv.num_nodes = static_cast<int>(volumes.size()) * n;
    sv.num_classes = C;
    sv.v.resize(static_cast<size_t>(sv.num_nodes) * C);
    for (size_t f = 0; f < volumes.size(); ++f)
        for (int p = 0; p < n; ++p)
            for (int c = 0; c < C; ++c)
                sv.v[(f * n + p) * C + c] = volumes[f].data[static_cast<size_t>(c) * n + p];
    return sv;
}

/// Materializes the voting links used by one engine pass: per non-keyframe
/// frame, a unit self edge plus gather and splat edges to each in-range
/// neighbor, weighted exp(-lambda*dist) times the bilinear tap weight.
/// Keyframe rows stay empty (clamped: they never accumulate votes).
inline SpaceTimeGraph build_graph(const SequenceSpec& spec, const SequenceFlows& flows,
                                  const std::map<int, LabelMap>& keyframe_labels) {
    spec.validate();
    flows.validate(spec.num_frames, spec.width, spec.height);
    const int n = spec.width * spec.height;
    if (static_cast<int64_t>(spec.num_frames) * n * spec.num_classes > 10'000'000)
        throw InstanceTooLarge("build_graph: instance exceeds the explicit-matrix guard");

    SpaceTimeGraph g;
    g.num_frames = spec.num_frames;
    g.width = spec.width;
    g.height = spec.height;
    g.num_classes = spec.num_classes;
    g.clamped.assign(static_cast<size_t>(g.pixel_nodes()), 0);
    for (int kf : spec.keyframes) {
        if (!keyframe_labels.count(kf))
            throw Error("build_graph: missing label map for keyframe " + std::to_string(kf));
        for (int p = 0; p < n; ++p) g.clamped[static_cast<size_t>(kf) * n + p] = 1;
    }

    std::vector<int> offsets = spec.offsets();
    for (int k = 0; k < spec.num_frames; ++k) {
        if (std::find(spec.keyframes.begin(), spec.keyframes.end(), k) != spec.keyframes.end())
            continue;  // clamped frame: no incoming edges
        for (int p = 0; p < n; ++p) g.edges.push_back({k * n + p, k * n + p, 1.0});
        for (int off : offsets) {
            int q = k + off;
            if (q < 0 || q >= spec.num_frames) continue;
            double wexp = std::exp(-spec.lambda * std::abs(off));
            FlowField outward = flows.composed(k, q);
            for (int y = 0; y < spec.height; ++y)
                for (int x = 0; x < spec.width; ++x) {
                    int idx = y * spec.width + x;
                    if (!outward.is_valid(idx)) continue;
                    double px = x + outward.data[static_cast<size_t>(idx) * 2];
                    double py = y + outward.data[static_cast<size_t>(idx) * 2 + 1];
                    BilinearTaps t = bilinear_taps(px, py, spec.width, spec.height);
                    for (int i = 0; i < t.count; ++i)
                        g.edges.push_back({k * n + idx, q * n + t.idx[i], wexp * t.w[i]});
                }
            FlowField inward = flows.composed(q, k);
            std::vector<double> dens = detail::splat_density(inward);
            for (int y = 0; y < spec.height; ++y)
                for (int x = 0; x < spec.width; ++x) {
                    int idx = y * spec.width + x;
                    if (!inward.is_valid(idx)) continue;
                    double px = x + inward.data[static_cast<size_t>(idx) * 2];
                    double py = y + inward.data[static_cast<size_t>(idx) * 2 + 1];
                    BilinearTaps t = bilinear_taps(px, py, spec.width, spec.height);
                    for (int i = 0; i < t.count; ++i)
                        g.edges.push_back({k * n + t.idx[i], q * n + idx,
                                           wexp * t.w[i] / std::max(1.0, dens[t.idx[i]])});
                }
        }
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const auto& a, const auto& b) {
        return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
    });
    // merge duplicates (a pixel pair can be linked by both routes)
    size_t out = 0;
    for (size_t i = 0; i < g.edges.size(); ++i) {
        if (out > 0 && g.edges[out - 1].dst == g.edges[i].dst &&
            g.edges[out - 1].src == g.edges[i].src)
            g.edges[out - 1].w += g.edges[i].w;
        else
            g.edges[out++] = g.edges[i];
    }
    g.edges.resize(out);
    return g;
}

namespace detail {

// One clamped power step, mirroring the engine's frame update arithmetic:
// double accumulation, per-node renormalization to `mass`, float storage,
// previous values kept where nothing arrived, clamped nodes untouched.
inline StateVector power_step(const SpaceTimeGraph& g, const StateVector& p, double mass) {
    const int C = g.num_classes;
    std::vector<double> y(p.size(), 0.0);
    for (const auto& e : g.edges) {
        const size_t di = static_cast<size_t>(e.dst) * C;
        const size_t si = static_cast<size_t>(e.src) * C;
        for (int c = 0; c < C; ++c) y[di + c] += e.w * p.v[si + c];
    }
    StateVector out;
    out.num_nodes = p.num_nodes;
    out.num_classes = C;
    out.v.resize(p.size());
    const double tiny = kMassEps * mass;
    for (int node = 0; node < p.num_nodes; ++node) {
        const size_t base = static_cast<size_t>(node) * C;
        if (g.clamped[node]) {
            for (int c = 0; c < C; ++c) out.v[base + c] = p.v[base + c];
            continue;
        }
        double s = 0.0;
        for (int c = 0; c < C; ++c) s += y[base + c];
        if (s > tiny) {
            double scale = mass / s;
            for (int c = 0; c < C; ++c)
                out.v[base + c] = static_cast<float>(y[base + c] * scale);
        } else {
            for (int c = 0; c < C; ++c) out.v[base + c] = p.v[base + c];
        }
    }
    return out;
}

}  // namespace detail

/// `iters` clamped power steps from p0 (clamped entries must hold the
/// keyframe one-hots; they are preserved exactly).
inline StateVector power_iterate(const SpaceTimeGraph& g, const StateVector& p0, int iters,
                                 double total_mass = 1.0) {
    if (p0.num_nodes != g.pixel_nodes() || p0.num_classes != g.num_classes)
        throw DimensionMismatch("power_iterate: state size mismatch");
    StateVector p = p0;
    for (int i = 0; i < iters; ++i) p = detail::power_step(g, p, total_mass);
    return p;
}

/// S_L(p) = p^T M p, in double.
inline double segmentation_score(const SpaceTimeGraph& g, const StateVector& p) {
    if (p.num_nodes != g.pixel_nodes() || p.num_classes != g.num_classes)
        throw DimensionMismatch("segmentation_score: state size mismatch");
    const int C = g.num_classes;
    double s = 0.0;
    for (const auto& e : g.edges) {
        const size_t di = static_cast<size_t>(e.dst) * C;
        const size_t si = static_cast<size_t>(e.src) * C;
        for (int c = 0; c < C; ++c)
            s += e.w * static_cast<double>(p.v[di + c]) * static_cast<double>(p.v[si + c]);
    }
    return s;
}

/// Plain (unclamped) power iteration with L2 normalization; ignores the
/// clamped set entirely. Use on graphs built with an empty keyframe list.
/// Runs in double internally so Rayleigh-quotient stabilization is not limited
/// by the float32 state storage. Optionally records the score (the Rayleigh
/// quotient of the normalized iterate) after each step.
inline StateVector power_iterate_l2(const SpaceTimeGraph& g, const StateVector& p0, int iters,
                                    std::vector<double>* scores = nullptr) {
    if (p0.num_nodes != g.pixel_nodes() || p0.num_classes != g.num_classes)
        throw DimensionMismatch("power_iterate_l2: state size mismatch");
    const int C = g.num_classes;
    std::vector<double> p(p0.v.begin(), p0.v.end());
    for (int it = 0; it < iters; ++it) {
        std::vector<double> y(p.size(), 0.0);
        for (const auto& e : g.edges) {
            const size_t di = static_cast<size_t>(e.dst) * C;
            const size_t si = static_cast<size_t>(e.src) * C;
            for (int c = 0; c < C; ++c) y[di + c] += e.w * p[si + c];
        }
        double norm = 0.0;
        for (double v : y) norm += v * v;
        norm = std::sqrt(norm);
        if (norm <= 0) throw Error("power_iterate_l2: zero iterate");
        for (size_t i = 0; i < y.size(); ++i) p[i] = y[i] / norm;
        if (scores) {
            double s = 0.0;
            for (const auto& e : g.edges) {
                const size_t di = static_cast<size_t>(e.dst) * C;
                const size_t si = static_cast<size_t>(e.src) * C;
                for (int c = 0; c < C; ++c) s += e.w * p[di + c] * p[si + c];
            }
            scores->push_back(s);
        }
    }
    StateVector out;
    out.num_nodes = p0.num_nodes;
    out.num_classes = C;
    out.v.assign(p.begin(), p.end());
    return out;
}

struct EquivalenceReport {
    std::vector<double> max_dev;       // per iteration, elementwise |engine - matrix|
    std::vector<double> argmax_agree;  // per iteration, fraction of pixels
    std::vector<double> score;         // matrix-route score trajectory
    double worst_dev = 0.0;

    bool pass(double tol) const { return worst_dev <= tol; }

    KvList to_kv() const {
        KvList kv;
        kv.emplace_back("iterations", std::to_string(max_dev.size()));
        kv.emplace_back("worst_deviation", format_double(worst_dev));
        for (size_t i = 0; i < max_dev.size(); ++i) {
            std::string p = "iter." + std::to_string(i + 1) + ".";
            kv.emplace_back(p + "max_deviation", format_double(max_dev[i]));
            kv.emplace_back(p + "argmax_agreement", format_double(argmax_agree[i]));
            kv.emplace_back(p + "score", format_double(score[i]));
        }
        return kv;
    }
};

/// Runs the engine and the explicit matrix side by side from the same
/// initialization and reports their per-iteration deviation. `lambda_fault`
/// perturbs the matrix route's lambda (negative control).
inline EquivalenceReport verify_equivalence(const SequenceSpec& spec,
                                            const SequenceFlows& flows,
                                            const std::map<int, LabelMap>& keyframe_labels,
                                            int iters, double lambda_fault = 0.0) {
    SequenceSpec graph_spec = spec;
    graph_spec.lambda = spec.lambda * (1.0 + lambda_fault);
    SpaceTimeGraph g = build_graph(graph_spec, flows, keyframe_labels);

    PropagationState st = init_state(spec, keyframe_labels, flows);
    StateVector p = flatten_state(st.volumes);

    EquivalenceReport rep;
    const int n = spec.width * spec.height;
    for (int it = 0; it < iters; ++it) {
        segprop_iterate(st, spec, flows);
        p = detail::power_step(g, p, spec.total_vote_mass);
        StateVector q = flatten_state(st.volumes);
        double dev = 0.0;
        int64_t agree = 0;
        for (int node = 0; node < p.num_nodes; ++node) {
            int best_p = 0, best_q = 0;
            for (int c = 0; c < spec.num_classes; ++c) {
                size_t i = static_cast<size_t>(node) * spec.num_classes + c;
                dev = std::max(dev, std::abs(static_cast<double>(p.v[i]) - q.v[i]));
                if (p.v[i] > p.v[static_cast<size_t>(node) * spec.num_classes + best_p]) best_p = c;
                if (q.v[i] > q.v[static_cast<size_t>(node) * spec.num_classes + best_q]) best_q = c;
            }
            agree += best_p == best_q;
        }
        rep.max_dev.push_back(dev);
        rep.argmax_agree.push_back(static_cast<double>(agree) / (spec.num_frames * n));
        rep.score.push_back(segmentation_score(g, p));
        rep.worst_dev = std::max(rep.worst_dev, dev);
    }
    return rep;
}

}  // namespace segprop

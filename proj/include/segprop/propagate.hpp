// The label propagation engine: pairwise keyframe-to-keyframe voting for
// initialization, then iterative neighborhood voting with keyframe clamping
// and pluggable extra vote sources.
//
// Every frame update is a pure function of the previous iteration's volumes
// (synchronous/Jacobi update): volumes accumulate in double, are renormalized
// per pixel to the configured total vote mass, and are stored as float32.
// The explicit space-time matrix in spectral.hpp reproduces this update
// exactly; any change to the arithmetic here must be mirrored there.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "segprop/common.hpp"
#include "segprop/core.hpp"
#include "segprop/flow.hpp"

namespace segprop {

/// An extra per-frame vote generator (homography voting, an external method's
/// labels, ...). `generate` is called once per frame per iteration, before the
/// frame updates of that iteration, and must be deterministic.
struct VoteSource {
    std::string id;
    double weight = 0.25;
    std::function<VoteVolume(const struct PropagationState&, int)> generate;
};

/// Composed trajectory fields linking each frame to its voting neighborhood,
/// built once per run.
struct NeighborFlows {
    std::vector<int> offsets;
    // [frame][offset index]; width==0 when the neighbor is out of range
    std::vector<std::vector<FlowField>> outward;  // k -> k+offset (gather)
    std::vector<std::vector<FlowField>> inward;   // k+offset -> k (splat)
};

struct PropagationState {
    std::vector<VoteVolume> volumes;
    std::vector<LabelMap> labels;      // argmax snapshot of volumes
    std::vector<uint8_t> is_keyframe;
    std::vector<uint8_t> one_sided;    // frames outside the keyframe span
    double total_mass = 1.0;           // per-pixel class-sum of every volume
    int iteration = 0;
    bool initialized = false;
    std::shared_ptr<const NeighborFlows> neighbor_flows;

    int num_frames() const { return static_cast<int>(volumes.size()); }
};

/// Record of one vote edge used by an iteration pass (instrumentation hook).
struct LinkRecord {
    int dst_frame, dst_pixel;
    int src_frame, src_pixel;
    double weight;
};
using LinkRecorder = std::vector<LinkRecord>;

/// w_n = exp(-lambda*dist_n), normalized to sum 1.
inline std::vector<double> vote_weights(const std::vector<double>& dists, double lambda) {
    if (dists.empty()) throw EmptyInput("vote_weights: no distances");
    std::vector<double> w(dists.size());
    double sum = 0.0;
    for (size_t i = 0; i < dists.size(); ++i) {
        if (dists[i] < 0) throw Error("vote_weights: negative distance");
        w[i] = std::exp(-lambda * dists[i]);
        sum += w[i];
    }
    for (double& x : w) x /= sum;
    return w;
}

namespace detail {

constexpr double kMassEps = 1e-12;

// Each flow route contributes one segmentation's worth of votes per pixel: a
// route may deliver at most one vote of weight wexp at a destination, however
// many source pixels its trajectories piled onto it (converging trajectories
// at swept occlusion regions would otherwise crush the other routes). Arrivals
// below one vote stay partial; the per-pixel renormalization at the end
// rebalances them. The cap depends on flow geometry alone, which keeps every
// route a fixed linear map; the explicit graph stores exactly the per-tap
// products used here.

// Unit deposition mass at each destination pixel of a splat route.
inline std::vector<double> splat_density(const FlowField& composed) {
    std::vector<double> dens(static_cast<size_t>(composed.pixels()), 0.0);
    for (int y = 0; y < composed.height; ++y) {
        for (int x = 0; x < composed.width; ++x) {
            int idx = y * composed.width + x;
            if (!composed.is_valid(idx)) continue;
            double px = x + composed.data[static_cast<size_t>(idx) * 2];
            double py = y + composed.data[static_cast<size_t>(idx) * 2 + 1];
            BilinearTaps t = bilinear_taps(px, py, composed.width, composed.height);
            for (int i = 0; i < t.count; ++i) dens[t.idx[i]] += t.w[i];
        }
    }
    return dens;
}

// Gather route: dst pixel p reads src votes at p + flow(p); the bilinear tap
// coverage never exceeds one vote, so gathers stay raw.
inline void accumulate_gather(std::vector<double>& acc, const VoteVolume& src,
                              const FlowField& composed, double wexp,
                              LinkRecorder* rec = nullptr, int dst_frame = 0,
                              int src_frame = 0) {
    const int n = src.pixels();
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            int idx = y * src.width + x;
            if (!composed.is_valid(idx)) continue;
            double px = x + composed.data[static_cast<size_t>(idx) * 2];
            double py = y + composed.data[static_cast<size_t>(idx) * 2 + 1];
            BilinearTaps t = bilinear_taps(px, py, src.width, src.height);
            for (int i = 0; i < t.count; ++i) {
                double w = wexp * t.w[i];
                for (int c = 0; c < src.num_classes; ++c)
                    acc[static_cast<size_t>(c) * n + idx] +=
                        w * src.data[static_cast<size_t>(c) * n + t.idx[i]];
                if (rec) rec->push_back({dst_frame, idx, src_frame, t.idx[i], w});
            }
        }
    }
}

// Splat route: src pixel s deposits its votes at s + flow(s) in the dst frame,
// capped to one vote where converging trajectories over-deposit.
inline void accumulate_splat(std::vector<double>& acc, const VoteVolume& src,
                             const FlowField& composed, double wexp,
                             LinkRecorder* rec = nullptr, int dst_frame = 0,
                             int src_frame = 0) {
    const int n = src.pixels();
    std::vector<double> dens = splat_density(composed);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            int idx = y * src.width + x;
            if (!composed.is_valid(idx)) continue;
            double px = x + composed.data[static_cast<size_t>(idx) * 2];
            double py = y + composed.data[static_cast<size_t>(idx) * 2 + 1];
            BilinearTaps t = bilinear_taps(px, py, src.width, src.height);
            for (int i = 0; i < t.count; ++i) {
                double w = wexp * t.w[i] / std::max(1.0, dens[t.idx[i]]);
                for (int c = 0; c < src.num_classes; ++c)
                    acc[static_cast<size_t>(c) * n + t.idx[i]] +=
                        w * src.data[static_cast<size_t>(c) * n + idx];
                if (rec) rec->push_back({dst_frame, t.idx[i], src_frame, idx, w});
            }
        }
    }
}

// Per-pixel renormalization to `mass`. Pixels that received (almost) nothing
// fall back to `fallback` when given, else to uniform mass/C.
inline VoteVolume normalize_votes(const std::vector<double>& acc, int width, int height,
                                  int num_classes, double mass,
                                  const VoteVolume* fallback) {
    VoteVolume out(width, height, num_classes);
    const int n = width * height;
    const double tiny = kMassEps * mass;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int c = 0; c < num_classes; ++c) s += acc[static_cast<size_t>(c) * n + i];
        if (s > tiny) {
            double scale = mass / s;
            for (int c = 0; c < num_classes; ++c)
                out.data[static_cast<size_t>(c) * n + i] =
                    static_cast<float>(acc[static_cast<size_t>(c) * n + i] * scale);
        } else if (fallback) {
            for (int c = 0; c < num_classes; ++c)
                out.data[static_cast<size_t>(c) * n + i] =
                    fallback->data[static_cast<size_t>(c) * n + i];
        } else {
            float u = static_cast<float>(mass / num_classes);
            for (int c = 0; c < num_classes; ++c)
                out.data[static_cast<size_t>(c) * n + i] = u;
        }
    }
    return out;
}

// Plugin votes: per-pixel L1-normalize to `mass`, scale by the source weight,
// add into the pool. Pixels where the source delivered nothing stay untouched.
inline void accumulate_source(std::vector<double>& acc, const VoteVolume& vol,
                              double weight, double mass) {
    const int n = vol.pixels();
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int c = 0; c < vol.num_classes; ++c)
            s += vol.data[static_cast<size_t>(c) * n + i];
        if (s <= kMassEps * mass) continue;
        double scale = weight * mass / s;
        for (int c = 0; c < vol.num_classes; ++c)
            acc[static_cast<size_t>(c) * n + i] += scale * vol.data[static_cast<size_t>(c) * n + i];
    }
}

}  // namespace detail

/// One-iteration pairwise propagation: frame k between labeled frames i and j
/// receives two gather votes (outward maps k->i, k->j) and two splat votes
/// (inward maps i->k, j->k), distance-weighted and renormalized per pixel.
inline VoteVolume propagate_pair(const LabelMap& label_i, const LabelMap& label_j,
                                 const SequenceFlows& flows, int i, int k, int j,
                                 double lambda, double total_mass = 1.0) {
    if (!(i < k && k < j)) throw BadOrdering("propagate_pair: need i < k < j");
    if (label_i.width != label_j.width || label_i.height != label_j.height ||
        label_i.num_classes != label_j.num_classes)
        throw DimensionMismatch("propagate_pair: label maps differ in shape");
    VoteVolume vol_i = one_hot(label_i, static_cast<float>(total_mass));
    VoteVolume vol_j = one_hot(label_j, static_cast<float>(total_mass));
    double wexp_i = std::exp(-lambda * (k - i));
    double wexp_j = std::exp(-lambda * (j - k));
    std::vector<double> acc(vol_i.data.size(), 0.0);
    detail::accumulate_gather(acc, vol_i, flows.composed(k, i), wexp_i);
    detail::accumulate_gather(acc, vol_j, flows.composed(k, j), wexp_j);
    detail::accumulate_splat(acc, vol_i, flows.composed(i, k), wexp_i);
    detail::accumulate_splat(acc, vol_j, flows.composed(j, k), wexp_j);
    return detail::normalize_votes(acc, label_i.width, label_i.height, label_i.num_classes,
                                   total_mass, nullptr);
}

inline std::shared_ptr<const NeighborFlows> build_neighbor_flows(const SequenceSpec& spec,
                                                                 const SequenceFlows& flows,
                                                                 int threads = 1) {
    auto nf = std::make_shared<NeighborFlows>();
    nf->offsets = spec.offsets();
    nf->outward.resize(spec.num_frames);
    nf->inward.resize(spec.num_frames);
    for (int k = 0; k < spec.num_frames; ++k) {
        nf->outward[k].resize(nf->offsets.size());
        nf->inward[k].resize(nf->offsets.size());
    }
    parallel_for(spec.num_frames, threads, [&](int k) {
        for (size_t oi = 0; oi < nf->offsets.size(); ++oi) {
            int q = k + nf->offsets[oi];
            if (q < 0 || q >= spec.num_frames) continue;
            nf->outward[k][oi] = flows.composed(k, q);
            nf->inward[k][oi] = flows.composed(q, k);
        }
    });
    return nf;
}

enum class InitMode { PairwiseVoting, Uniform, FromSource };

/// Builds the initial state: keyframes hold clamped one-hot volumes; other
/// frames hold Alg.-1 pairwise votes (default), uniform votes, or a plugin
/// source's votes.
inline PropagationState init_state(const SequenceSpec& spec,
                                   const std::map<int, LabelMap>& keyframe_labels,
                                   const SequenceFlows& flows,
                                   InitMode mode = InitMode::PairwiseVoting,
                                   const VoteSource* init_source = nullptr,
                                   int threads = 1) {
    spec.validate();
    if (spec.keyframes.size() < 2) throw TooFewKeyframes("init_state: need >= 2 keyframes");
    flows.validate(spec.num_frames, spec.width, spec.height);
    for (int kf : spec.keyframes)
        if (!keyframe_labels.count(kf))
            throw Error("init_state: missing label map for keyframe " + std::to_string(kf));
    if (mode == InitMode::FromSource && !init_source)
        throw Error("init_state: FromSource needs a source");

    const double V = spec.total_vote_mass;
    PropagationState st;
    st.total_mass = V;
    st.volumes.resize(spec.num_frames);
    st.labels.resize(spec.num_frames);
    st.is_keyframe.assign(spec.num_frames, 0);
    st.one_sided.assign(spec.num_frames, 0);

    for (int kf : spec.keyframes) {
        const LabelMap& lab = keyframe_labels.at(kf);
        if (lab.width != spec.width || lab.height != spec.height ||
            lab.num_classes != spec.num_classes)
            throw DimensionMismatch("init_state: keyframe label shape mismatch");
        st.volumes[kf] = one_hot(lab, static_cast<float>(V));
        st.is_keyframe[kf] = 1;
    }
    int first_kf = spec.keyframes.front(), last_kf = spec.keyframes.back();
    for (int k = 0; k < spec.num_frames; ++k)
        if (k < first_kf || k > last_kf) st.one_sided[k] = 1;

    if (mode == InitMode::PairwiseVoting) {
        // between consecutive keyframes: Alg.-1 votes
        for (size_t p = 0; p + 1 < spec.keyframes.size(); ++p) {
            int a = spec.keyframes[p], b = spec.keyframes[p + 1];
            parallel_for(b - a - 1, threads, [&](int off) {
                int k = a + 1 + off;
                st.volumes[k] = propagate_pair(keyframe_labels.at(a), keyframe_labels.at(b),
                                               flows, a, k, b, spec.lambda, V);
            });
        }
        // outside the keyframe span: one-sided votes from the nearest keyframe
        auto one_sided_init = [&](int k, int kf) {
            VoteVolume vol = one_hot(keyframe_labels.at(kf), static_cast<float>(V));
            std::vector<double> acc(vol.data.size(), 0.0);
            detail::accumulate_gather(acc, vol, flows.composed(k, kf), 1.0);
            detail::accumulate_splat(acc, vol, flows.composed(kf, k), 1.0);
            st.volumes[k] =
                detail::normalize_votes(acc, spec.width, spec.height, spec.num_classes, V, nullptr);
        };
        for (int k = 0; k < first_kf; ++k) one_sided_init(k, first_kf);
        for (int k = last_kf + 1; k < spec.num_frames; ++k) one_sided_init(k, last_kf);
    } else if (mode == InitMode::Uniform) {
        for (int k = 0; k < spec.num_frames; ++k) {
            if (st.is_keyframe[k]) continue;
            VoteVolume vol(spec.width, spec.height, spec.num_classes);
            float u = static_cast<float>(V / spec.num_classes);
            std::fill(vol.data.begin(), vol.data.end(), u);
            st.volumes[k] = std::move(vol);
        }
    } else {
        for (int k = 0; k < spec.num_frames; ++k) {
            if (st.is_keyframe[k]) continue;
            VoteVolume vol = init_source->generate(st, k);
            if (!vol.same_shape(st.volumes[spec.keyframes.front()]))
                throw DimensionMismatch("init_state: source volume shape mismatch");
            std::vector<double> acc(vol.data.begin(), vol.data.end());
            st.volumes[k] =
                detail::normalize_votes(acc, spec.width, spec.height, spec.num_classes, V, nullptr);
        }
    }

    for (int k = 0; k < spec.num_frames; ++k) st.labels[k] = argmax_labels(st.volumes[k]);
    st.neighbor_flows = build_neighbor_flows(spec, flows, threads);
    st.iteration = 0;
    st.initialized = true;
    return st;
}

/// One synchronous pass over all non-keyframe frames. Each frame k gathers
/// votes from its 2f in-range neighbors (gather + splat per neighbor), its own
/// previous volume (distance 0), and any plugin sources, then renormalizes per
/// pixel. Keyframe volumes are never touched. `flow_votes` off replaces the
/// neighbor flow voting with the plugin sources alone (the self vote stays).
inline void segprop_iterate(PropagationState& state, const SequenceSpec& spec,
                            const SequenceFlows& flows,
                            const std::vector<VoteSource>& sources = {}, int threads = 1,
                            LinkRecorder* recorder = nullptr, bool flow_votes = true) {
    if (!state.initialized) throw NotInitialized("segprop_iterate: state not initialized");
    if (state.num_frames() != spec.num_frames)
        throw DimensionMismatch("segprop_iterate: state/spec frame count mismatch");
    if (!state.neighbor_flows || state.neighbor_flows->offsets != spec.offsets())
        state.neighbor_flows = build_neighbor_flows(spec, flows, threads);
    const NeighborFlows& nf = *state.neighbor_flows;
    const double V = spec.total_vote_mass;
    const int n = spec.width * spec.height;

    // plugin votes for this iteration, from the pre-update state
    std::vector<std::vector<VoteVolume>> source_votes(sources.size());
    for (size_t s = 0; s < sources.size(); ++s) {
        source_votes[s].resize(spec.num_frames);
        for (int k = 0; k < spec.num_frames; ++k) {
            if (state.is_keyframe[k]) continue;
            source_votes[s][k] = sources[s].generate(state, k);
            if (!source_votes[s][k].same_shape(state.volumes[k]))
                throw DimensionMismatch("segprop_iterate: source volume shape mismatch");
        }
    }

    if (recorder) threads = 1;
    std::vector<VoteVolume> next(spec.num_frames);
    parallel_for(spec.num_frames, threads, [&](int k) {
        if (state.is_keyframe[k]) {
            next[k] = state.volumes[k];
            return;
        }
        std::vector<double> acc(static_cast<size_t>(n) * spec.num_classes, 0.0);
        // self vote, distance 0
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += state.volumes[k].data[i];
        if (recorder)
            for (int p = 0; p < n; ++p) recorder->push_back({k, p, k, p, 1.0});
        for (size_t oi = 0; flow_votes && oi < nf.offsets.size(); ++oi) {
            int q = k + nf.offsets[oi];
            if (q < 0 || q >= spec.num_frames) continue;
            double wexp = std::exp(-spec.lambda * std::abs(nf.offsets[oi]));
            detail::accumulate_gather(acc, state.volumes[q], nf.outward[k][oi], wexp,
                                      recorder, k, q);
            detail::accumulate_splat(acc, state.volumes[q], nf.inward[k][oi], wexp,
                                     recorder, k, q);
        }
        for (size_t s = 0; s < sources.size(); ++s)
            detail::accumulate_source(acc, source_votes[s][k], sources[s].weight, V);
        next[k] = detail::normalize_votes(acc, spec.width, spec.height, spec.num_classes, V,
                                          &state.volumes[k]);
    });
    state.volumes = std::move(next);
    parallel_for(spec.num_frames, threads, [&](int k) {
        if (!state.is_keyframe[k]) state.labels[k] = argmax_labels(state.volumes[k]);
    });
    ++state.iteration;
}

struct ConvergenceResult {
    int iterations_used = 0;
    std::vector<double> changed_fraction;  // per iteration, over non-keyframe pixels
};

/// Iterates until the fraction of non-keyframe pixels whose argmax changed
/// drops below epsilon, or max_iters passes run.
inline ConvergenceResult run_to_convergence(PropagationState& state, const SequenceSpec& spec,
                                            const SequenceFlows& flows,
                                            const std::vector<VoteSource>& sources = {},
                                            double epsilon = 1e-4, int threads = 1,
                                            bool flow_votes = true) {
    if (!state.initialized) throw NotInitialized("run_to_convergence: state not initialized");
    ConvergenceResult res;
    int64_t total = 0;
    for (int k = 0; k < spec.num_frames; ++k)
        if (!state.is_keyframe[k]) total += spec.width * spec.height;
    for (int it = 0; it < spec.max_iters; ++it) {
        std::vector<LabelMap> before = state.labels;
        segprop_iterate(state, spec, flows, sources, threads, nullptr, flow_votes);
        int64_t changed = 0;
        for (int k = 0; k < spec.num_frames; ++k) {
            if (state.is_keyframe[k]) continue;
            const auto& a = before[k].data;
            const auto& b = state.labels[k].data;
            for (size_t i = 0; i < a.size(); ++i) changed += a[i] != b[i];
        }
        double frac = total > 0 ? static_cast<double>(changed) / total : 0.0;
        res.changed_fraction.push_back(frac);
        ++res.iterations_used;
        if (frac < epsilon) break;
    }
    return res;
}

}  // namespace segprop

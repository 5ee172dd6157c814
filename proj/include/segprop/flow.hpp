// Dense optical flow fields: .flo file I/O, trajectory composition, backward
// (gather) and forward (splat) warping of vote volumes, and a crude block-matching
// estimator for self-contained tests.
//
// The bilinear tap helper below is the single source of interpolation weights for
// the propagation engine, the explicit graph builder, and the 3D filter; all three
// must agree on these weights exactly.
#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "segprop/common.hpp"
#include "segprop/core.hpp"
#include "segprop/image_io.hpp"

namespace segprop {

/// Per-pixel (u, v) displacement in pixels, interleaved row-major.
/// `valid` is empty for raw fields; composition attaches a per-pixel plane.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<float> data;     // u, v interleaved
    std::vector<uint8_t> valid;  // empty => all valid

    FlowField() = default;
    FlowField(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 2, 0.0f) {}

    int pixels() const { return width * height; }
    float u(int x, int y) const { return data[(static_cast<size_t>(y) * width + x) * 2]; }
    float v(int x, int y) const { return data[(static_cast<size_t>(y) * width + x) * 2 + 1]; }
    void set(int x, int y, float du, float dv) {
        data[(static_cast<size_t>(y) * width + x) * 2] = du;
        data[(static_cast<size_t>(y) * width + x) * 2 + 1] = dv;
    }
    bool is_valid(int idx) const { return valid.empty() || valid[idx] != 0; }
};

/// Consecutive-frame fields covering one temporal direction; step i maps the
/// current frame to the next one in the chain.
struct FlowChain {
    std::vector<const FlowField*> fields;
};

// ---------------------------------------------------------------------------
// .flo interchange format: float 202021.25, int32 width, int32 height, then
// width*height interleaved (u, v) float32 pairs, all little-endian.
// ---------------------------------------------------------------------------

constexpr float kFlowMagic = 202021.25f;

inline std::vector<uint8_t> write_flow(const FlowField& field) {
    std::vector<uint8_t> out(12 + field.data.size() * 4);
    float magic = kFlowMagic;
    int32_t w = field.width, h = field.height;
    std::memcpy(out.data(), &magic, 4);
    std::memcpy(out.data() + 4, &w, 4);
    std::memcpy(out.data() + 8, &h, 4);
    if (!field.data.empty())
        std::memcpy(out.data() + 12, field.data.data(), field.data.size() * 4);
    return out;
}

inline FlowField read_flow(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 12) throw TruncatedFile("flow file shorter than header");
    float magic;
    int32_t w, h;
    std::memcpy(&magic, bytes.data(), 4);
    std::memcpy(&w, bytes.data() + 4, 4);
    std::memcpy(&h, bytes.data() + 8, 4);
    if (magic != kFlowMagic) throw BadMagic("flow magic mismatch");
    if (w < 0 || h < 0 || w > 100000 || h > 100000)
        throw TruncatedFile("implausible flow dimensions");
    size_t expect = 12 + static_cast<size_t>(w) * h * 8;
    if (bytes.size() != expect)
        throw TruncatedFile("flow payload size mismatch");
    FlowField f(w, h);
    if (!f.data.empty()) std::memcpy(f.data.data(), bytes.data() + 12, f.data.size() * 4);
    for (float v : f.data)
        if (!std::isfinite(v)) throw NonFiniteValue("non-finite flow value");
    return f;
}

inline FlowField read_flow_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return read_flow(bytes);
}

inline void write_flow_file(const std::string& path, const FlowField& field) {
    std::vector<uint8_t> bytes = write_flow(field);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Bilinear taps
// ---------------------------------------------------------------------------

/// In-bounds integer taps and weights for position (x, y). Taps with zero
/// weight are dropped, so `coverage` (the weight sum) is 1 for positions inside
/// [0, w-1] x [0, h-1] and falls toward 0 as the position leaves the image.
struct BilinearTaps {
    int idx[4];
    double w[4];
    int count = 0;
    double coverage = 0.0;
};

inline BilinearTaps bilinear_taps(double x, double y, int width, int height) {
    BilinearTaps t;
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    double fx = x - x0;
    double fy = y - y0;
    const double wgt[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int i = 0; i < 4; ++i) {
        if (wgt[i] <= 0.0) continue;
        if (xs[i] < 0 || xs[i] >= width || ys[i] < 0 || ys[i] >= height) continue;
        t.idx[t.count] = ys[i] * width + xs[i];
        t.w[t.count] = wgt[i];
        t.coverage += wgt[i];
        ++t.count;
    }
    return t;
}

inline bool in_sample_rect(double x, double y, int width, int height) {
    return x >= 0.0 && y >= 0.0 && x <= width - 1.0 && y <= height - 1.0;
}

/// Bilinear flow sample; call only with (x, y) inside the sample rect.
inline void sample_flow(const FlowField& f, double x, double y, double& du, double& dv) {
    BilinearTaps t = bilinear_taps(x, y, f.width, f.height);
    du = 0.0;
    dv = 0.0;
    for (int i = 0; i < t.count; ++i) {
        du += t.w[i] * f.data[static_cast<size_t>(t.idx[i]) * 2];
        dv += t.w[i] * f.data[static_cast<size_t>(t.idx[i]) * 2 + 1];
    }
}

// ---------------------------------------------------------------------------
// Composition and warping
// ---------------------------------------------------------------------------

/// Accumulates displacements along pixel trajectories, stepping through each
/// consecutive field with bilinear sampling at the current subpixel position.
/// A pixel whose trajectory leaves the image (after any step, final included)
/// is marked invalid; its stored displacement ends at the exit point.
inline FlowField compose_flow(const FlowChain& chain) {
    if (chain.fields.empty()) throw EmptyInput("compose_flow: empty chain");
    const FlowField& first = *chain.fields[0];
    for (const FlowField* f : chain.fields)
        if (f->width != first.width || f->height != first.height)
            throw DimensionMismatch("compose_flow: field dimensions differ");
    FlowField out(first.width, first.height);
    out.valid.assign(out.pixels(), 1);
    for (int y = 0; y < first.height; ++y) {
        for (int x = 0; x < first.width; ++x) {
            double cx = x, cy = y;
            bool ok = true;
            for (const FlowField* f : chain.fields) {
                if (!in_sample_rect(cx, cy, f->width, f->height)) {
                    ok = false;
                    break;
                }
                double du, dv;
                sample_flow(*f, cx, cy, du, dv);
                cx += du;
                cy += dv;
            }
            if (ok && !in_sample_rect(cx, cy, first.width, first.height)) ok = false;
            int idx = y * first.width + x;
            out.data[static_cast<size_t>(idx) * 2] = static_cast<float>(cx - x);
            out.data[static_cast<size_t>(idx) * 2 + 1] = static_cast<float>(cy - y);
            out.valid[idx] = ok ? 1 : 0;
        }
    }
    return out;
}

/// Backward warp: output(p) samples the source votes at p + flow(p).
/// Out-of-image samples (and invalid trajectories) contribute no mass.
inline VoteVolume warp_gather(const VoteVolume& votes, const FlowField& flow) {
    if (votes.width != flow.width || votes.height != flow.height)
        throw DimensionMismatch("warp_gather: size mismatch");
    VoteVolume out(votes.width, votes.height, votes.num_classes);
    const int n = votes.pixels();
    for (int y = 0; y < votes.height; ++y) {
        for (int x = 0; x < votes.width; ++x) {
            int idx = y * votes.width + x;
            if (!flow.is_valid(idx)) continue;
            double px = x + flow.data[static_cast<size_t>(idx) * 2];
            double py = y + flow.data[static_cast<size_t>(idx) * 2 + 1];
            BilinearTaps t = bilinear_taps(px, py, votes.width, votes.height);
            for (int c = 0; c < votes.num_classes; ++c) {
                double acc = 0.0;
                const float* plane = votes.data.data() + static_cast<size_t>(c) * n;
                for (int i = 0; i < t.count; ++i) acc += t.w[i] * plane[t.idx[i]];
                out.data[static_cast<size_t>(c) * n + idx] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

/// Forward warp: each source pixel deposits its vote mass at p + flow(p),
/// bilinearly split over the four surrounding pixels. Out-of-image
/// destinations drop their mass.
inline VoteVolume warp_splat(const VoteVolume& votes, const FlowField& flow) {
    if (votes.width != flow.width || votes.height != flow.height)
        throw DimensionMismatch("warp_splat: size mismatch");
    const int n = votes.pixels();
    std::vector<double> acc(votes.data.size(), 0.0);
    for (int y = 0; y < votes.height; ++y) {
        for (int x = 0; x < votes.width; ++x) {
            int idx = y * votes.width + x;
            if (!flow.is_valid(idx)) continue;
            double px = x + flow.data[static_cast<size_t>(idx) * 2];
            double py = y + flow.data[static_cast<size_t>(idx) * 2 + 1];
            BilinearTaps t = bilinear_taps(px, py, votes.width, votes.height);
            for (int c = 0; c < votes.num_classes; ++c) {
                double mass = votes.data[static_cast<size_t>(c) * n + idx];
                if (mass == 0.0) continue;
                for (int i = 0; i < t.count; ++i)
                    acc[static_cast<size_t>(c) * n + t.idx[i]] += t.w[i] * mass;
            }
        }
    }
    VoteVolume out(votes.width, votes.height, votes.num_classes);
    for (size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<float>(acc[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Block-matching estimator (tests only; real runs read precomputed flow)
// ---------------------------------------------------------------------------

/// Per block, the integer displacement in [-radius, radius]^2 minimizing mean
/// absolute difference, broadcast to the block's pixels. Ties break toward the
/// smallest displacement magnitude, then lexicographically on (u, v).
inline FlowField estimate_flow_translational(const Image8& frame_a, const Image8& frame_b,
                                             int block, int radius) {
    if (frame_a.width != frame_b.width || frame_a.height != frame_b.height ||
        frame_a.channels != frame_b.channels)
        throw DimensionMismatch("estimate_flow_translational: frame size mismatch");
    if (block < 1 || radius < 0) throw Error("estimate_flow_translational: bad parameters");
    FlowField out(frame_a.width, frame_a.height);
    for (int by = 0; by < frame_a.height; by += block) {
        for (int bx = 0; bx < frame_a.width; bx += block) {
            int x1 = std::min(bx + block, frame_a.width);
            int y1 = std::min(by + block, frame_a.height);
            double best_cost = 0.0;
            int best_du = 0, best_dv = 0;
            bool have_best = false;
            for (int dv = -radius; dv <= radius; ++dv) {
                for (int du = -radius; du <= radius; ++du) {
                    int64_t sad = 0;
                    int count = 0;
                    for (int y = by; y < y1; ++y) {
                        int yy = y + dv;
                        if (yy < 0 || yy >= frame_a.height) continue;
                        for (int x = bx; x < x1; ++x) {
                            int xx = x + du;
                            if (xx < 0 || xx >= frame_a.width) continue;
                            for (int c = 0; c < frame_a.channels; ++c)
                                sad += std::abs(static_cast<int>(frame_a.at(x, y, c)) -
                                                static_cast<int>(frame_b.at(xx, yy, c)));
                            ++count;
                        }
                    }
                    if (count == 0) continue;
                    double cost = static_cast<double>(sad) / count;
                    bool better = false;
                    if (!have_best || cost < best_cost) {
                        better = true;
                    } else if (cost == best_cost) {
                        int mag_new = du * du + dv * dv;
                        int mag_old = best_du * best_du + best_dv * best_dv;
                        if (mag_new < mag_old ||
                            (mag_new == mag_old &&
                             (du < best_du || (du == best_du && dv < best_dv))))
                            better = true;
                    }
                    if (better) {
                        best_cost = cost;
                        best_du = du;
                        best_dv = dv;
                        have_best = true;
                    }
                }
            }
            for (int y = by; y < y1; ++y)
                for (int x = bx; x < x1; ++x)
                    out.set(x, y, static_cast<float>(best_du), static_cast<float>(best_dv));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Per-sequence flow store
// ---------------------------------------------------------------------------

/// Consecutive-frame flow for a whole sequence: fw[t] links t -> t+1,
/// bw[t] links t+1 -> t.
struct SequenceFlows {
    std::vector<FlowField> fw;
    std::vector<FlowField> bw;

    int num_frames() const { return static_cast<int>(fw.size()) + 1; }

    void validate(int frames, int width, int height) const {
        if (static_cast<int>(fw.size()) != frames - 1 ||
            static_cast<int>(bw.size()) != frames - 1)
            throw MissingFlow("SequenceFlows: need num_frames-1 fields per direction");
        for (const auto* dir : {&fw, &bw})
            for (const FlowField& f : *dir)
                if (f.width != width || f.height != height)
                    throw DimensionMismatch("SequenceFlows: field size mismatch");
    }

    /// Consecutive fields oriented from -> to. Empty when from == to.
    FlowChain chain(int from, int to) const {
        FlowChain c;
        if (to > from) {
            for (int t = from; t < to; ++t) c.fields.push_back(&fw[t]);
        } else {
            for (int t = from; t > to; --t) c.fields.push_back(&bw[t - 1]);
        }
        return c;
    }

    /// Composed trajectory field from -> to (identity, all-valid when equal).
    FlowField composed(int from, int to) const {
        if (from == to) {
            const FlowField& ref = fw.empty() ? bw.front() : fw.front();
            FlowField id(ref.width, ref.height);
            id.valid.assign(id.pixels(), 1);
            return id;
        }
        return compose_flow(chain(from, to));
    }
};

}  // namespace segprop

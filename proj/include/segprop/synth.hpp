// Deterministic synthetic sequences: analytic shapes under scripted planar
// motion, rendered to frames, exact per-frame labels, and exact consecutive
// flow in both directions. Labels and flow come from the same transforms, so
// there is no rasterization drift between them.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "segprop/common.hpp"
#include "segprop/core.hpp"
#include "segprop/flow.hpp"
#include "segprop/geometry.hpp"
#include "segprop/image_io.hpp"

namespace segprop {

enum class ShapeKind { Rect, Disk, Polygon };

/// One moving object. Shape lives in object coordinates around the anchor
/// (origin); the frame-t transform is
///   T_t = translate(pos_t) * perspective(persp*t) * rotate(theta0 + omega*t)
///         * scale((1+scale_rate)^t)
/// with pos_t integrated from vel, reflecting inside the bounce box if set.
struct ObjectSpec {
    ShapeKind shape = ShapeKind::Rect;
    uint8_t cls = 1;
    double half_w = 5, half_h = 5;  // rect half-extents
    double radius = 5;              // disk
    std::vector<double> poly;       // polygon x0,y0,x1,y1,... (object coords)
    double pos_x = 0, pos_y = 0;
    double vel_x = 0, vel_y = 0;
    bool bounce = false;
    double bounce_lo_x = 0, bounce_lo_y = 0, bounce_hi_x = 0, bounce_hi_y = 0;
    double theta0 = 0, omega = 0;
    double scale_rate = 0;
    double persp_x = 0, persp_y = 0;
};

/// A full scene: canvas, background class, objects (later objects occlude
/// earlier ones) plus the stress knobs used by benchmark harnesses.
struct SceneScript {
    std::string id;
    int width = 64, height = 48;
    int num_frames = 151;
    uint8_t background_class = 0;
    uint64_t seed = 1;
    double flow_noise_sigma = 0.0;
    double label_noise_rate = 0.0;
    std::vector<ObjectSpec> objects;

    int num_classes() const {
        int c = background_class;
        for (const auto& o : objects) c = std::max(c, static_cast<int>(o.cls));
        return c + 1;
    }

    void validate() const {
        if (width <= 0 || height <= 0) throw InvalidScript("bad canvas size");
        if (num_frames < 1) throw InvalidScript("need at least one frame");
        if (flow_noise_sigma < 0) throw InvalidScript("negative flow noise");
        if (label_noise_rate < 0 || label_noise_rate > 1)
            throw InvalidScript("label noise rate out of [0,1]");
        for (const auto& o : objects) {
            if (o.shape == ShapeKind::Polygon &&
                (o.poly.size() < 6 || o.poly.size() % 2 != 0))
                throw InvalidScript("polygon needs >= 3 (x,y) pairs");
            if (o.bounce && (o.bounce_hi_x < o.bounce_lo_x || o.bounce_hi_y < o.bounce_lo_y))
                throw InvalidScript("empty bounce box");
        }
    }
};

struct RenderedSequence {
    std::vector<Image8> frames;
    std::vector<LabelMap> labels;
    std::vector<FlowField> flow_fw;  // t -> t+1
    std::vector<FlowField> flow_bw;  // t+1 -> t
};

namespace detail {

inline bool shape_contains(const ObjectSpec& o, double x, double y) {
    switch (o.shape) {
        case ShapeKind::Rect:
            return std::abs(x) <= o.half_w && std::abs(y) <= o.half_h;
        case ShapeKind::Disk:
            return x * x + y * y <= o.radius * o.radius;
        case ShapeKind::Polygon: {
            bool inside = false;
            size_t n = o.poly.size() / 2;
            for (size_t i = 0, j = n - 1; i < n; j = i++) {
                double xi = o.poly[2 * i], yi = o.poly[2 * i + 1];
                double xj = o.poly[2 * j], yj = o.poly[2 * j + 1];
                if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi)
                    inside = !inside;
            }
            return inside;
        }
    }
    return false;
}

inline void reflect(double& p, double& v, double lo, double hi) {
    if (hi <= lo) {
        p = lo;
        return;
    }
    // unfold the reflected coordinate on a cycle of length 2*(hi-lo)
    double span = hi - lo;
    double q = std::fmod(p - lo, 2 * span);
    if (q < 0) q += 2 * span;
    if (q > span) {
        p = hi - (q - span);
        v = -v;
    } else {
        p = lo + q;
    }
}

struct CompiledObject {
    const ObjectSpec* spec;
    std::vector<Mat3> to_frame;    // object -> image, per frame
    std::vector<Mat3> from_frame;  // image -> object, per frame
};

inline std::vector<CompiledObject> compile_objects(const SceneScript& script) {
    std::vector<CompiledObject> out;
    for (const ObjectSpec& o : script.objects) {
        CompiledObject c;
        c.spec = &o;
        double px = o.pos_x, py = o.pos_y;
        double vx = o.vel_x, vy = o.vel_y;
        for (int t = 0; t < script.num_frames; ++t) {
            double s = std::pow(1.0 + o.scale_rate, t);
            Mat3 T = Mat3::translation(px, py) *
                     Mat3::perspective(o.persp_x * t, o.persp_y * t) *
                     Mat3::rotation(o.theta0 + o.omega * t) * Mat3::scale(s, s);
            c.to_frame.push_back(T);
            c.from_frame.push_back(T.inverse());
            px += vx;
            py += vy;
            if (o.bounce) {
                reflect(px, vx, o.bounce_lo_x, o.bounce_hi_x);
                reflect(py, vy, o.bounce_lo_y, o.bounce_hi_y);
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

// Topmost object containing image point (x, y) at frame t; -1 for background.
inline int owner_at(const std::vector<CompiledObject>& objs, int t, double x, double y) {
    for (int i = static_cast<int>(objs.size()) - 1; i >= 0; --i) {
        double ox, oy;
        objs[i].from_frame[t].apply(x, y, ox, oy);
        if (shape_contains(*objs[i].spec, ox, oy)) return i;
    }
    return -1;
}

inline uint8_t texture_gray(uint64_t base, int cell_x, int cell_y) {
    uint64_t h = splitmix64(base ^ splitmix64(static_cast<uint64_t>(cell_x + 40000)) ^
                            (splitmix64(static_cast<uint64_t>(cell_y + 40000)) << 1));
    return static_cast<uint8_t>(40 + h % 176);
}

}  // namespace detail

/// Renders frames, exact labels, and exact bidirectional consecutive flow.
/// Flow at a pixel follows its owning surface point; disoccluded pixels carry
/// the motion of whatever owns them in the source frame (background is static).
inline RenderedSequence render(const SceneScript& script) {
    script.validate();
    auto objs = detail::compile_objects(script);
    RenderedSequence seq;
    const int W = script.width, H = script.height;
    const int C = script.num_classes();

    // ownership per frame, then labels/frames/flows from it
    std::vector<std::vector<int>> owner(script.num_frames);
    for (int t = 0; t < script.num_frames; ++t) {
        owner[t].resize(static_cast<size_t>(W) * H);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                owner[t][static_cast<size_t>(y) * W + x] = detail::owner_at(objs, t, x, y);
    }

    for (int t = 0; t < script.num_frames; ++t) {
        LabelMap lab(W, H, C, script.background_class);
        Image8 img(W, H, 1);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                int own = owner[t][static_cast<size_t>(y) * W + x];
                if (own >= 0) {
                    lab.at(x, y) = objs[own].spec->cls;
                    double ox, oy;
                    objs[own].from_frame[t].apply(x, y, ox, oy);
                    img.at(x, y) = detail::texture_gray(
                        script.seed + own + 1, static_cast<int>(std::floor(ox / 3.0)),
                        static_cast<int>(std::floor(oy / 3.0)));
                } else {
                    img.at(x, y) = detail::texture_gray(script.seed, x / 3, y / 3);
                }
            }
        }
        seq.labels.push_back(std::move(lab));
        seq.frames.push_back(std::move(img));
    }

    auto motion_flow = [&](int t_from, int t_to) {
        FlowField f(W, H);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                int own = owner[t_from][static_cast<size_t>(y) * W + x];
                if (own < 0) continue;  // static background
                double ox, oy, nx, ny;
                objs[own].from_frame[t_from].apply(x, y, ox, oy);
                objs[own].to_frame[t_to].apply(ox, oy, nx, ny);
                f.set(x, y, static_cast<float>(nx - x), static_cast<float>(ny - y));
            }
        }
        return f;
    };

    for (int t = 0; t + 1 < script.num_frames; ++t) {
        seq.flow_fw.push_back(motion_flow(t, t + 1));
        seq.flow_bw.push_back(motion_flow(t + 1, t));
    }
    return seq;
}

/// Adds i.i.d. zero-mean Gaussian noise (std sigma) to both components;
/// bit-identical output per seed, untouched copy when sigma == 0.
inline FlowField perturb_flow(const FlowField& flow, double sigma, uint64_t seed) {
    FlowField out = flow;
    if (sigma <= 0.0) return out;
    Rng rng(seed);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = static_cast<float>(out.data[i] + sigma * rng.normal());
    return out;
}

/// Applies perturb_flow to every field of both directions, with per-field seeds
/// derived from `seed` so fields are independent.
inline void perturb_sequence_flows(SequenceFlows& flows, double sigma, uint64_t seed) {
    if (sigma <= 0.0) return;
    for (size_t t = 0; t < flows.fw.size(); ++t)
        flows.fw[t] = perturb_flow(flows.fw[t], sigma, splitmix64(seed ^ (2 * t + 1)));
    for (size_t t = 0; t < flows.bw.size(); ++t)
        flows.bw[t] = perturb_flow(flows.bw[t], sigma, splitmix64(seed ^ (2 * t + 2)));
}

/// Replaces roughly `rate` of the pixels' votes with a one-hot on a different
/// random class (salt-and-pepper label noise at the vote level).
inline void plant_label_noise(VoteVolume& votes, double rate, uint64_t seed) {
    if (rate <= 0.0) return;
    Rng rng(seed);
    const int n = votes.pixels();
    for (int i = 0; i < n; ++i) {
        if (rng.uniform() >= rate) continue;
        double mass = votes.pixel_sum(i);
        int cur = 0;
        float best = votes.data[i];
        for (int c = 1; c < votes.num_classes; ++c)
            if (votes.data[static_cast<size_t>(c) * n + i] > best) {
                best = votes.data[static_cast<size_t>(c) * n + i];
                cur = c;
            }
        int pick = rng.uniform_int(0, votes.num_classes - 2);
        if (pick >= cur) ++pick;
        for (int c = 0; c < votes.num_classes; ++c)
            votes.data[static_cast<size_t>(c) * n + i] = (c == pick) ? static_cast<float>(mass) : 0.0f;
    }
}

// ---------------------------------------------------------------------------
// Pinned benchmark suite
// ---------------------------------------------------------------------------

inline const std::vector<double>& benchmark_noise_levels() {
    static const std::vector<double> levels = {0.0, 0.35, 0.8};
    return levels;
}

namespace detail {

inline SceneScript benchmark_base(const std::string& kind) {
    SceneScript s;
    s.width = 64;
    s.height = 48;
    s.num_frames = 151;
    s.seed = 7;
    if (kind == "static") {
        ObjectSpec rect;
        rect.shape = ShapeKind::Rect;
        rect.cls = 1;
        rect.half_w = 9;
        rect.half_h = 7;
        rect.pos_x = 20;
        rect.pos_y = 24;
        ObjectSpec disk;
        disk.shape = ShapeKind::Disk;
        disk.cls = 2;
        disk.radius = 6;
        disk.pos_x = 45;
        disk.pos_y = 17;
        s.objects = {rect, disk};
    } else if (kind == "translate") {
        // camera pan: ground plate and rectangle share one integer translation,
        // so the scene is rigid and flow is uniform (aerial-footage style)
        ObjectSpec plate;
        plate.shape = ShapeKind::Rect;
        plate.cls = 0;
        plate.half_w = 400;
        plate.half_h = 400;
        plate.pos_x = 28;
        plate.pos_y = 24;
        plate.vel_x = 1;
        plate.bounce = true;
        plate.bounce_lo_x = 22;
        plate.bounce_hi_x = 41;
        plate.bounce_lo_y = 24;
        plate.bounce_hi_y = 24;
        ObjectSpec rect = plate;
        rect.cls = 1;
        rect.half_w = 10;
        rect.half_h = 8;
        s.objects = {plate, rect};
    } else if (kind == "projective") {
        // rigid scene under slow projective camera drift
        ObjectSpec plate;
        plate.shape = ShapeKind::Rect;
        plate.cls = 0;
        plate.half_w = 400;
        plate.half_h = 400;
        plate.pos_x = 32;
        plate.pos_y = 24;
        plate.omega = 0.002;
        plate.scale_rate = 0.0008;
        plate.persp_x = 2e-5;
        plate.persp_y = 1e-5;
        plate.vel_x = 0.15;
        plate.bounce = true;
        plate.bounce_lo_x = 27;
        plate.bounce_hi_x = 37;
        plate.bounce_lo_y = 24;
        plate.bounce_hi_y = 24;
        ObjectSpec quad = plate;
        quad.cls = 1;
        quad.half_w = 12;
        quad.half_h = 9;
        s.objects = {plate, quad};
    } else if (kind == "crossing") {
        ObjectSpec rect;
        rect.shape = ShapeKind::Rect;
        rect.cls = 1;
        rect.half_w = 8;
        rect.half_h = 6;
        rect.pos_x = 18;
        rect.pos_y = 21;
        rect.vel_x = 0.6;
        rect.vel_y = 0.07;
        rect.bounce = true;
        rect.bounce_lo_x = 12;
        rect.bounce_hi_x = 51;
        rect.bounce_lo_y = 14;
        rect.bounce_hi_y = 30;
        ObjectSpec disk;
        disk.shape = ShapeKind::Disk;
        disk.cls = 2;
        disk.radius = 7;
        disk.pos_x = 46;
        disk.pos_y = 27;
        disk.vel_x = -0.6;
        disk.vel_y = -0.05;
        disk.bounce = true;
        disk.bounce_lo_x = 11;
        disk.bounce_hi_x = 52;
        disk.bounce_lo_y = 15;
        disk.bounce_hi_y = 33;
        s.objects = {rect, disk};
    } else if (kind == "articulated") {
        ObjectSpec hub;
        hub.shape = ShapeKind::Disk;
        hub.cls = 1;
        hub.radius = 4;
        hub.pos_x = 33;
        hub.pos_y = 24;
        ObjectSpec arm_a;
        arm_a.shape = ShapeKind::Polygon;
        arm_a.cls = 1;
        arm_a.poly = {0, -3, 17, -3, 17, 3, 0, 3};
        arm_a.pos_x = 33;
        arm_a.pos_y = 24;
        arm_a.theta0 = 0.5;
        arm_a.omega = 0.006;
        ObjectSpec arm_b = arm_a;
        arm_b.theta0 = -2.3;
        arm_b.omega = -0.007;
        s.objects = {hub, arm_a, arm_b};
    } else {
        throw InvalidScript("unknown benchmark kind: " + kind);
    }
    return s;
}

// Same scene kinds shrunk to graph-friendly size.
inline SceneScript benchmark_base_small(const std::string& kind) {
    SceneScript s;
    s.width = 28;
    s.height = 20;
    s.num_frames = 7;
    s.seed = 7;
    if (kind == "static") {
        ObjectSpec rect;
        rect.cls = 1;
        rect.half_w = 4;
        rect.half_h = 3;
        rect.pos_x = 9;
        rect.pos_y = 10;
        ObjectSpec disk;
        disk.shape = ShapeKind::Disk;
        disk.cls = 2;
        disk.radius = 3;
        disk.pos_x = 20;
        disk.pos_y = 7;
        s.objects = {rect, disk};
    } else if (kind == "translate") {
        ObjectSpec plate;
        plate.cls = 0;
        plate.half_w = 100;
        plate.half_h = 100;
        plate.pos_x = 11;
        plate.pos_y = 10;
        plate.vel_x = 1;
        plate.bounce = true;
        plate.bounce_lo_x = 9;
        plate.bounce_hi_x = 18;
        plate.bounce_lo_y = 10;
        plate.bounce_hi_y = 10;
        ObjectSpec rect = plate;
        rect.cls = 1;
        rect.half_w = 5;
        rect.half_h = 4;
        s.objects = {plate, rect};
    } else if (kind == "projective") {
        ObjectSpec plate;
        plate.cls = 0;
        plate.half_w = 100;
        plate.half_h = 100;
        plate.pos_x = 14;
        plate.pos_y = 10;
        plate.omega = 0.02;
        plate.scale_rate = 0.004;
        plate.persp_x = 3e-4;
        plate.persp_y = 2e-4;
        ObjectSpec quad = plate;
        quad.cls = 1;
        quad.half_w = 6;
        quad.half_h = 4;
        s.objects = {plate, quad};
    } else if (kind == "crossing") {
        ObjectSpec rect;
        rect.cls = 1;
        rect.half_w = 4;
        rect.half_h = 3;
        rect.pos_x = 9;
        rect.pos_y = 9;
        rect.vel_x = 0.8;
        rect.vel_y = 0.2;
        ObjectSpec disk;
        disk.shape = ShapeKind::Disk;
        disk.cls = 2;
        disk.radius = 3.5;
        disk.pos_x = 19;
        disk.pos_y = 11;
        disk.vel_x = -0.8;
        disk.vel_y = -0.1;
        s.objects = {rect, disk};
    } else if (kind == "articulated") {
        ObjectSpec hub;
        hub.shape = ShapeKind::Disk;
        hub.cls = 1;
        hub.radius = 2;
        hub.pos_x = 14;
        hub.pos_y = 10;
        ObjectSpec arm_a;
        arm_a.shape = ShapeKind::Polygon;
        arm_a.cls = 1;
        arm_a.poly = {0, -1.5, 8, -1.5, 8, 1.5, 0, 1.5};
        arm_a.pos_x = 14;
        arm_a.pos_y = 10;
        arm_a.theta0 = 0.5;
        arm_a.omega = 0.05;
        ObjectSpec arm_b = arm_a;
        arm_b.theta0 = -2.3;
        arm_b.omega = -0.06;
        s.objects = {hub, arm_a, arm_b};
    } else {
        throw InvalidScript("unknown benchmark kind: " + kind);
    }
    return s;
}

}  // namespace detail

inline const std::vector<std::string>& benchmark_kinds() {
    static const std::vector<std::string> kinds = {"static", "translate", "projective",
                                                   "crossing", "articulated"};
    return kinds;
}

/// The pinned acceptance suite: 5 scene kinds x 3 flow-noise levels.
inline std::vector<SceneScript> standard_benchmark() {
    std::vector<SceneScript> out;
    for (const std::string& kind : benchmark_kinds()) {
        for (size_t lvl = 0; lvl < benchmark_noise_levels().size(); ++lvl) {
            SceneScript s = detail::benchmark_base(kind);
            s.flow_noise_sigma = benchmark_noise_levels()[lvl];
            s.id = kind + "/n" + std::to_string(lvl);
            out.push_back(std::move(s));
        }
    }
    return out;
}

/// Graph-sized variants of the same suite (28x20 canvas, 7 frames), used where
/// the explicit space-time matrix must be materialized.
inline std::vector<SceneScript> standard_benchmark_small() {
    std::vector<SceneScript> out;
    for (const std::string& kind : benchmark_kinds()) {
        for (size_t lvl = 0; lvl < benchmark_noise_levels().size(); ++lvl) {
            SceneScript s = detail::benchmark_base_small(kind);
            s.flow_noise_sigma = benchmark_noise_levels()[lvl];
            s.id = "small/" + kind + "/n" + std::to_string(lvl);
            out.push_back(std::move(s));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Script (de)serialization: flat key=value text
// ---------------------------------------------------------------------------

inline KvList script_kv(const SceneScript& s) {
    KvList kv;
    auto num = [](double v) { return format_double(v); };
    kv.emplace_back("id", s.id);
    kv.emplace_back("canvas.width", std::to_string(s.width));
    kv.emplace_back("canvas.height", std::to_string(s.height));
    kv.emplace_back("frames", std::to_string(s.num_frames));
    kv.emplace_back("background.class", std::to_string(int(s.background_class)));
    kv.emplace_back("seed", std::to_string(s.seed));
    kv.emplace_back("flow_noise.sigma", num(s.flow_noise_sigma));
    kv.emplace_back("label_noise.rate", num(s.label_noise_rate));
    kv.emplace_back("object.count", std::to_string(s.objects.size()));
    for (size_t i = 0; i < s.objects.size(); ++i) {
        const ObjectSpec& o = s.objects[i];
        std::string p = "object." + std::to_string(i) + ".";
        kv.emplace_back(p + "shape", o.shape == ShapeKind::Rect    ? "rect"
                                     : o.shape == ShapeKind::Disk ? "disk"
                                                                  : "polygon");
        kv.emplace_back(p + "class", std::to_string(int(o.cls)));
        if (o.shape == ShapeKind::Rect)
            kv.emplace_back(p + "rect", num(o.half_w) + "," + num(o.half_h));
        else if (o.shape == ShapeKind::Disk)
            kv.emplace_back(p + "disk", num(o.radius));
        else {
            std::string pts;
            for (size_t j = 0; j < o.poly.size(); ++j)
                pts += (j ? "," : "") + num(o.poly[j]);
            kv.emplace_back(p + "poly", pts);
        }
        kv.emplace_back(p + "pos", num(o.pos_x) + "," + num(o.pos_y));
        kv.emplace_back(p + "vel", num(o.vel_x) + "," + num(o.vel_y));
        if (o.bounce)
            kv.emplace_back(p + "bounce", num(o.bounce_lo_x) + "," + num(o.bounce_lo_y) + "," +
                                              num(o.bounce_hi_x) + "," + num(o.bounce_hi_y));
        kv.emplace_back(p + "theta0", num(o.theta0));
        kv.emplace_back(p + "omega", num(o.omega));
        kv.emplace_back(p + "scale_rate", num(o.scale_rate));
        kv.emplace_back(p + "persp", num(o.persp_x) + "," + num(o.persp_y));
    }
    return kv;
}

inline std::string script_text(const SceneScript& s) {
    std::string out;
    for (const auto& [k, v] : script_kv(s)) out += k + "=" + v + "\n";
    return out;
}

/// Stable identity for a pinned script: hash of its serialized parameters.
inline uint64_t script_hash(const SceneScript& s) { return fnv1a_hash(script_text(s)); }

inline SceneScript parse_script(const KvMap& kv) {
    SceneScript s;
    auto get = [&](const std::string& k) -> std::string {
        auto it = kv.find(k);
        return it == kv.end() ? std::string() : it->second;
    };
    s.id = get("id");
    s.width = kv_int(kv, "canvas.width", s.width);
    s.height = kv_int(kv, "canvas.height", s.height);
    s.num_frames = kv_int(kv, "frames", s.num_frames);
    s.background_class = static_cast<uint8_t>(kv_int(kv, "background.class", 0));
    s.seed = static_cast<uint64_t>(kv_double(kv, "seed", 1));
    s.flow_noise_sigma = kv_double(kv, "flow_noise.sigma", 0.0);
    s.label_noise_rate = kv_double(kv, "label_noise.rate", 0.0);
    int count = kv_int(kv, "object.count", 0);
    auto nums = [](const std::string& v) {
        std::vector<double> out;
        for (const std::string& part : split(v, ','))
            if (!trim(part).empty()) out.push_back(std::stod(trim(part)));
        return out;
    };
    for (int i = 0; i < count; ++i) {
        std::string p = "object." + std::to_string(i) + ".";
        ObjectSpec o;
        std::string shape = get(p + "shape");
        if (shape == "rect")
            o.shape = ShapeKind::Rect;
        else if (shape == "disk")
            o.shape = ShapeKind::Disk;
        else if (shape == "polygon")
            o.shape = ShapeKind::Polygon;
        else
            throw InvalidScript("bad shape for object " + std::to_string(i));
        o.cls = static_cast<uint8_t>(kv_int(kv, p + "class", 1));
        if (o.shape == ShapeKind::Rect) {
            auto v = nums(get(p + "rect"));
            if (v.size() != 2) throw InvalidScript("rect needs half_w,half_h");
            o.half_w = v[0];
            o.half_h = v[1];
        } else if (o.shape == ShapeKind::Disk) {
            auto v = nums(get(p + "disk"));
            if (v.size() != 1) throw InvalidScript("disk needs radius");
            o.radius = v[0];
        } else {
            o.poly = nums(get(p + "poly"));
        }
        auto pos = nums(get(p + "pos"));
        if (pos.size() == 2) {
            o.pos_x = pos[0];
            o.pos_y = pos[1];
        }
        auto vel = nums(get(p + "vel"));
        if (vel.size() == 2) {
            o.vel_x = vel[0];
            o.vel_y = vel[1];
        }
        std::string b = get(p + "bounce");
        if (!b.empty()) {
            auto v = nums(b);
            if (v.size() != 4) throw InvalidScript("bounce needs lo_x,lo_y,hi_x,hi_y");
            o.bounce = true;
            o.bounce_lo_x = v[0];
            o.bounce_lo_y = v[1];
            o.bounce_hi_x = v[2];
            o.bounce_hi_y = v[3];
        }
        o.theta0 = kv_double(kv, p + "theta0", 0.0);
        o.omega = kv_double(kv, p + "omega", 0.0);
        o.scale_rate = kv_double(kv, p + "scale_rate", 0.0);
        auto persp = nums(get(p + "persp"));
        if (persp.size() == 2) {
            o.persp_x = persp[0];
            o.persp_y = persp[1];
        }
        s.objects.push_back(std::move(o));
    }
    s.validate();
    return s;
}

/// Sequence flows straight from a rendered scene (exact, noise-free).
inline SequenceFlows exact_flows(const RenderedSequence& seq) {
    SequenceFlows flows;
    flows.fw = seq.flow_fw;
    flows.bw = seq.flow_bw;
    return flows;
}

}  // namespace segprop

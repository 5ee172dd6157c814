#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "segprop/homography.hpp"
#include "segprop/synth.hpp"

using namespace segprop;

namespace {
LabelMap random_labels(int w, int h, int classes, uint64_t seed) {
    LabelMap m(w, h, classes);
    Rng rng(seed);
    for (auto& v : m.data) v = static_cast<uint8_t>(rng.uniform_int(0, classes - 1));
    return m;
}

// independent recursive-style flood fill used as the oracle
std::vector<int> flood_fill_oracle(const LabelMap& m) {
    const int W = m.width, H = m.height;
    std::vector<int> comp(static_cast<size_t>(W) * H, -1);
    int next = 0;
    for (int s = 0; s < W * H; ++s) {
        if (comp[s] >= 0) continue;
        std::vector<int> frontier{s};
        comp[s] = next;
        while (!frontier.empty()) {
            int i = frontier.back();
            frontier.pop_back();
            int x = i % W, y = i / W;
            for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                int nx2 = x + dx, ny2 = y + dy;
                if (nx2 < 0 || ny2 < 0 || nx2 >= W || ny2 >= H) continue;
                int j = ny2 * W + nx2;
                if (comp[j] < 0 && m.data[j] == m.data[i]) {
                    comp[j] = next;
                    frontier.push_back(j);
                }
            }
        }
        ++next;
    }
    return comp;
}
}  // namespace

TEST_CASE("connected_components partitions by 4-connectivity") {
    SECTION("a uniform map is one component") {
        LabelMap m(7, 5, 2, 1);
        auto comps = connected_components(m);
        REQUIRE(comps.size() == 1);
        CHECK(comps[0].pixels.size() == 35);
        CHECK(comps[0].cls == 1);
    }

    SECTION("a checkerboard splits into one component per square") {
        LabelMap m(6, 6, 2);
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x) m.at(x, y) = static_cast<uint8_t>((x + y) % 2);
        auto comps = connected_components(m);
        CHECK(comps.size() == 36);
    }

    SECTION("random maps match an independent flood fill") {
        LabelMap m = random_labels(32, 32, 3, 5);
        auto comps = connected_components(m);
        auto oracle = flood_fill_oracle(m);
        // same partition: pixels share a component exactly when the oracle agrees
        std::vector<int> mine(32 * 32, -1);
        for (size_t c = 0; c < comps.size(); ++c)
            for (int idx : comps[c].pixels) {
                REQUIRE(mine[idx] == -1);  // partition: each pixel exactly once
                mine[idx] = static_cast<int>(c);
            }
        for (int i = 0; i < 32 * 32; ++i) REQUIRE(mine[i] >= 0);
        for (int a = 0; a < 32 * 32; ++a)
            for (int b : {a - 1, a - 32}) {
                if (b < 0) continue;
                CHECK((mine[a] == mine[b]) == (oracle[a] == oracle[b]));
            }
    }
}

TEST_CASE("LMEDS recovers exact transforms") {
    SECTION("pure translation") {
        std::vector<std::pair<double, double>> src, dst;
        Rng rng(3);
        for (int i = 0; i < 8; ++i) {
            double x = rng.uniform(0, 50), y = rng.uniform(0, 30);
            src.emplace_back(x, y);
            dst.emplace_back(x + 5, y + 3);
        }
        auto h = estimate_homography_lmeds(src, dst);
        REQUIRE(h.has_value());
        for (auto [x, y] : src) {
            double px, py;
            h->m.apply(x, y, px, py);
            CHECK(std::hypot(px - (x + 5), py - (y + 3)) < 1e-6);
        }
    }

    SECTION("projective warp with 40 percent gross outliers") {
        Mat3 true_h;
        true_h.m[0][0] = 1.05;
        true_h.m[0][1] = 0.08;
        true_h.m[0][2] = -3;
        true_h.m[1][0] = -0.06;
        true_h.m[1][1] = 0.97;
        true_h.m[1][2] = 4;
        true_h.m[2][0] = 4e-4;
        true_h.m[2][1] = -2e-4;
        Rng rng(11);
        std::vector<std::pair<double, double>> src, dst;
        for (int i = 0; i < 12; ++i) {  // inliers
            double x = rng.uniform(0, 60), y = rng.uniform(0, 40);
            double px, py;
            true_h.apply(x, y, px, py);
            src.emplace_back(x, y);
            dst.emplace_back(px, py);
        }
        for (int i = 0; i < 8; ++i) {  // gross outliers
            src.emplace_back(rng.uniform(0, 60), rng.uniform(0, 40));
            dst.emplace_back(rng.uniform(-40, 90), rng.uniform(-40, 70));
        }
        auto h = estimate_homography_lmeds(src, dst, 500, 7);
        REQUIRE(h.has_value());
        for (int i = 0; i < 12; ++i) {
            double px, py;
            h->m.apply(src[i].first, src[i].second, px, py);
            CHECK(std::hypot(px - dst[i].first, py - dst[i].second) < 1e-3);
        }
    }

    SECTION("degenerate and undersized inputs") {
        std::vector<std::pair<double, double>> src{{0, 0}, {1, 0}, {2, 0}, {1, 1}};
        std::vector<std::pair<double, double>> dst = src;
        CHECK_FALSE(estimate_homography_lmeds(src, dst).has_value());  // 3 collinear
        src.pop_back();
        dst.pop_back();
        CHECK_THROWS_AS(estimate_homography_lmeds(src, dst), TooFewPoints);
    }

    SECTION("deterministic for a fixed seed") {
        Rng rng(9);
        std::vector<std::pair<double, double>> src, dst;
        for (int i = 0; i < 20; ++i) {
            double x = rng.uniform(0, 50), y = rng.uniform(0, 50);
            src.emplace_back(x, y);
            dst.emplace_back(x * 1.02 + 1 + rng.uniform(-0.3, 0.3),
                             y * 0.98 - 2 + rng.uniform(-0.3, 0.3));
        }
        auto a = estimate_homography_lmeds(src, dst, 300, 42);
        auto b = estimate_homography_lmeds(src, dst, 300, 42);
        REQUIRE(a.has_value());
        REQUIRE(b.has_value());
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(a->m.m[i][j] == b->m.m[i][j]);
    }
}

TEST_CASE("homography_votes projects components through fitted transforms") {
    SECTION("zero flow reproduces the one-hot labeling") {
        LabelMap lab(16, 12, 3, 0);
        for (int y = 3; y < 9; ++y)
            for (int x = 4; x < 12; ++x) lab.at(x, y) = 1;
        FlowField zero(16, 12);
        VoteVolume votes = homography_votes(lab, zero);
        VoteVolume expect = one_hot(lab, 1.0f);
        for (size_t i = 0; i < votes.data.size(); ++i)
            CHECK(votes.data[i] == Catch::Approx(expect.data[i]).margin(1e-9));
    }

    SECTION("rigid translation with exact flow aligns to ground truth") {
        SceneScript s;
        s.width = 32;
        s.height = 24;
        s.num_frames = 11;
        ObjectSpec rect;
        rect.cls = 1;
        rect.half_w = 5;
        rect.half_h = 4;
        rect.pos_x = 10;
        rect.pos_y = 12;
        rect.vel_x = 1;
        s.objects = {rect};
        RenderedSequence seq = render(s);
        SequenceFlows fl = exact_flows(seq);
        VoteVolume votes = homography_votes(seq.labels[0], fl.composed(0, 10));
        // the projected square's class-1 support must align with the ground
        // truth object mask at frame 10, give or take one edge pixel
        auto near_object = [&](int x, int y, int pad) {
            for (int dy = -pad; dy <= pad; ++dy)
                for (int dx = -pad; dx <= pad; ++dx) {
                    int xx = x + dx, yy = y + dy;
                    if (xx >= 0 && yy >= 0 && xx < s.width && yy < s.height &&
                        seq.labels[10].at(xx, yy) == 1)
                        return true;
                }
            return false;
        };
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
                if (votes.at(x, y, 1) > 0.5f) REQUIRE(near_object(x, y, 1));
                if (seq.labels[10].at(x, y) == 1 && near_object(x, y, 0) &&
                    !(votes.at(x, y, 1) > 0.5f))
                    REQUIRE(near_object(x, y, 1));  // gap only allowed at edges
            }
        // interior of the ground-truth square carries full class-1 mass
        int interior_hit = 0, interior = 0;
        for (int y = 2; y < s.height - 2; ++y)
            for (int x = 2; x < s.width - 2; ++x) {
                bool inside = true;
                for (int dy = -1; dy <= 1 && inside; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        inside = inside && seq.labels[10].at(x + dx, y + dy) == 1;
                if (!inside) continue;
                ++interior;
                interior_hit += votes.at(x, y, 1) > 0.9f;
            }
        REQUIRE(interior > 0);
        CHECK(interior_hit == interior);
    }

    SECTION("components below 4 correspondences are skipped") {
        LabelMap lab(8, 8, 2, 0);
        lab.at(2, 2) = 1;
        lab.at(3, 2) = 1;
        lab.at(2, 3) = 1;  // 3-pixel component
        FlowField zero(8, 8);
        VoteVolume votes = homography_votes(lab, zero);
        for (int i = 0; i < votes.pixels(); ++i) CHECK(votes.plane(1)[i] == 0.0f);
        // the background component still votes
        CHECK(votes.at(0, 0, 0) == Catch::Approx(1.0));
    }

    SECTION("never writes mass to a class absent from the component") {
        LabelMap lab = random_labels(20, 16, 3, 8);
        FlowField noisy(20, 16);
        Rng rng(4);
        for (auto& v : noisy.data) v = static_cast<float>(rng.uniform(-0.5, 0.5));
        VoteVolume votes = homography_votes(lab, noisy);
        // class planes only receive mass where some component of that class exists
        std::set<int> present;
        for (auto v : lab.data) present.insert(v);
        for (int c = 0; c < 3; ++c) {
            if (present.count(c)) continue;
            for (int i = 0; i < votes.pixels(); ++i) CHECK(votes.plane(c)[i] == 0.0f);
        }
    }
}

TEST_CASE("the homography vote source respects weights and caching") {
    SceneScript s = detail::benchmark_base_small("translate");
    RenderedSequence seq = render(s);
    SequenceFlows fl = exact_flows(seq);
    SequenceSpec spec;
    spec.num_frames = 7;
    spec.width = s.width;
    spec.height = s.height;
    spec.num_classes = s.num_classes();
    spec.keyframes = {0, 6};
    spec.stride = 2;
    spec.f = 2;
    auto labels = std::map<int, LabelMap>{{0, seq.labels[0]}, {6, seq.labels[6]}};

    SECTION("zero weight leaves the flow-only result untouched") {
        HomographyConfig cfg;
        VoteSource h = make_homography_source(spec, labels, fl, cfg, 0.0);
        PropagationState a = init_state(spec, labels, fl);
        PropagationState b = init_state(spec, labels, fl);
        segprop_iterate(a, spec, fl, {});
        segprop_iterate(b, spec, fl, {h});
        for (int k = 0; k < 7; ++k) REQUIRE(a.labels[k].data == b.labels[k].data);
    }

    SECTION("repeated generation returns the cached volume") {
        HomographyConfig cfg;
        VoteSource h = make_homography_source(spec, labels, fl, cfg, 1.0);
        PropagationState st = init_state(spec, labels, fl);
        VoteVolume v1 = h.generate(st, 3);
        VoteVolume v2 = h.generate(st, 3);
        CHECK(v1.data == v2.data);
    }
}

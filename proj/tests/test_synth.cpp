#include <catch2/catch_amalgamated.hpp>

#include "segprop/synth.hpp"

using namespace segprop;

TEST_CASE("static scenes render constant labels and zero flow") {
    SceneScript s = detail::benchmark_base("static");
    s.num_frames = 5;
    RenderedSequence seq = render(s);
    REQUIRE(seq.labels.size() == 5);
    REQUIRE(seq.flow_fw.size() == 4);
    for (int t = 1; t < 5; ++t) CHECK(seq.labels[t].data == seq.labels[0].data);
    for (const auto& f : seq.flow_fw)
        for (float v : f.data) CHECK(v == 0.0f);
    for (const auto& f : seq.flow_bw)
        for (float v : f.data) CHECK(v == 0.0f);
}

TEST_CASE("a translating rectangle carries its exact velocity as flow") {
    SceneScript s;
    s.width = 32;
    s.height = 20;
    s.num_frames = 4;
    ObjectSpec rect;
    rect.cls = 1;
    rect.half_w = 4;
    rect.half_h = 3;
    rect.pos_x = 10;
    rect.pos_y = 10;
    rect.vel_x = 2;
    s.objects = {rect};
    RenderedSequence seq = render(s);
    for (int t = 0; t < 3; ++t) {
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 32; ++x) {
                if (seq.labels[t].at(x, y) == 1) {
                    REQUIRE(seq.flow_fw[t].u(x, y) == 2.0f);
                    REQUIRE(seq.flow_fw[t].v(x, y) == 0.0f);
                }
            }
    }
    // labels follow: object pixels shift right by 2 each frame
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 30; ++x)
            CHECK(static_cast<int>(seq.labels[1].at(x + 2, y)) ==
                  static_cast<int>(seq.labels[0].at(x, y)));
}

TEST_CASE("exact flow warps labels onto the next frame outside disocclusions") {
    for (const char* kind : {"translate", "projective", "crossing", "articulated"}) {
        SceneScript s = detail::benchmark_base(kind);
        s.num_frames = 12;
        RenderedSequence seq = render(s);
        for (int t = 0; t + 1 < s.num_frames; ++t) {
            int checked = 0, matched = 0;
            for (int y = 0; y < s.height; ++y)
                for (int x = 0; x < s.width; ++x) {
                    double nx = x + seq.flow_fw[t].u(x, y);
                    double ny = y + seq.flow_fw[t].v(x, y);
                    int rx = static_cast<int>(std::lround(nx));
                    int ry = static_cast<int>(std::lround(ny));
                    if (rx < 0 || ry < 0 || rx >= s.width || ry >= s.height) continue;
                    // skip pixels whose surface point lost the occlusion battle:
                    // the destination pixel then belongs to a different class
                    if (std::abs(nx - rx) > 1e-6 || std::abs(ny - ry) > 1e-6) continue;
                    ++checked;
                    matched += seq.labels[t].at(x, y) == seq.labels[t + 1].at(rx, ry);
                }
            if (checked > 0)
                REQUIRE(static_cast<double>(matched) / checked >= 0.97);
        }
    }
}

TEST_CASE("perturb_flow is deterministic and unbiased") {
    FlowField f(200, 250);
    FlowField a = perturb_flow(f, 0.5, 42);
    FlowField b = perturb_flow(f, 0.5, 42);
    CHECK(a.data == b.data);

    FlowField c = perturb_flow(f, 0.0, 42);
    CHECK(c.data == f.data);

    double mean = 0.0;
    for (float v : a.data) mean += v;
    mean /= a.data.size();
    double n = static_cast<double>(a.data.size());
    CHECK(std::abs(mean) <= 3.0 * 0.5 / std::sqrt(n));
}

TEST_CASE("plant_label_noise flips roughly the requested fraction") {
    VoteVolume v(50, 40, 4);
    for (int i = 0; i < v.pixels(); ++i) v.data[i] = 1.0f;  // all class 0
    VoteVolume noisy = v;
    plant_label_noise(noisy, 0.05, 9);
    LabelMap lab = argmax_labels(noisy);
    int flipped = 0;
    for (auto c : lab.data) flipped += c != 0;
    CHECK(flipped > 40);
    CHECK(flipped < 160);
    for (int i = 0; i < noisy.pixels(); ++i)
        CHECK(noisy.pixel_sum(i) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("the benchmark suite is pinned") {
    auto suite = standard_benchmark();
    REQUIRE(suite.size() == benchmark_kinds().size() * benchmark_noise_levels().size());
    REQUIRE(suite.size() == 15);

    SECTION("every script renders at its full frame count") {
        for (const auto& s : suite) {
            REQUIRE(s.num_frames == 151);
            if (s.flow_noise_sigma == 0.0) {
                RenderedSequence seq = render(s);
                REQUIRE(static_cast<int>(seq.labels.size()) == s.num_frames);
            }
        }
    }

    SECTION("script round-trips through its key=value form") {
        for (const auto& s : suite) {
            SceneScript back = parse_script(parse_kv_text(script_text(s)));
            CHECK(script_text(back) == script_text(s));
            CHECK(script_hash(back) == script_hash(s));
        }
    }

    SECTION("small variants stay within the explicit-matrix budget") {
        for (const auto& s : standard_benchmark_small()) {
            CHECK(s.width <= 32);
            CHECK(s.height <= 32);
            CHECK(s.num_frames <= 7);
        }
    }
}

TEST_CASE("scripts validate their invariants") {
    SceneScript s;
    s.width = 0;
    CHECK_THROWS_AS(s.validate(), InvalidScript);
    s = SceneScript{};
    s.flow_noise_sigma = -1;
    CHECK_THROWS_AS(s.validate(), InvalidScript);
    s = SceneScript{};
    ObjectSpec o;
    o.shape = ShapeKind::Polygon;
    o.poly = {0, 0, 1, 1};
    s.objects = {o};
    CHECK_THROWS_AS(s.validate(), InvalidScript);
}

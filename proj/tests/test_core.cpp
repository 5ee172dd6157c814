#include <catch2/catch_amalgamated.hpp>

#include "segprop/core.hpp"

using namespace segprop;

namespace {
LabelMap random_labels(int w, int h, int classes, uint64_t seed) {
    LabelMap m(w, h, classes);
    Rng rng(seed);
    for (auto& v : m.data) v = static_cast<uint8_t>(rng.uniform_int(0, classes - 1));
    return m;
}

VoteVolume random_votes(int w, int h, int classes, uint64_t seed) {
    VoteVolume v(w, h, classes);
    Rng rng(seed);
    for (auto& x : v.data) x = static_cast<float>(rng.uniform(0.0, 1.0));
    return v;
}
}  // namespace

TEST_CASE("one_hot places the full mass on the labeled channel") {
    LabelMap m(1, 1, 3);
    m.data = {2};
    VoteVolume v = one_hot(m, 1.0f);
    CHECK(v.at(0, 0, 0) == 0.0f);
    CHECK(v.at(0, 0, 1) == 0.0f);
    CHECK(v.at(0, 0, 2) == 1.0f);

    LabelMap m2(2, 1, 2);
    m2.data = {0, 1};
    VoteVolume v2 = one_hot(m2, 4.0f);
    CHECK(v2.plane(0)[0] == 4.0f);
    CHECK(v2.plane(0)[1] == 0.0f);
    CHECK(v2.plane(1)[0] == 0.0f);
    CHECK(v2.plane(1)[1] == 4.0f);
}

TEST_CASE("one_hot then argmax_labels is the identity") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        LabelMap m = random_labels(8, 8, 5, seed);
        for (float mass : {1.0f, 0.25f, 7.5f}) {
            LabelMap back = argmax_labels(one_hot(m, mass));
            CHECK(back.data == m.data);
        }
    }
}

TEST_CASE("argmax_labels picks the majority class, ties to lowest index") {
    VoteVolume v(1, 1, 3);
    v.at(0, 0, 0) = 0.2f;
    v.at(0, 0, 1) = 0.5f;
    v.at(0, 0, 2) = 0.3f;
    CHECK(argmax_labels(v).at(0, 0) == 1);

    v.at(0, 0, 0) = 0.5f;
    v.at(0, 0, 1) = 0.5f;
    v.at(0, 0, 2) = 0.0f;
    CHECK(argmax_labels(v).at(0, 0) == 0);
}

TEST_CASE("argmax_labels matches a per-pixel linear scan") {
    VoteVolume v = random_votes(16, 16, 6, 99);
    LabelMap got = argmax_labels(v);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            int best = 0;
            for (int c = 1; c < 6; ++c)
                if (v.at(x, y, c) > v.at(x, y, best)) best = c;
            REQUIRE(got.at(x, y) == best);
        }
    }
}

TEST_CASE("argmax_labels is invariant under positive scaling") {
    VoteVolume v = random_votes(12, 9, 4, 5);
    LabelMap base = argmax_labels(v);
    for (float s : {2.0f, 0.5f, 16.0f}) {
        VoteVolume w = v;
        for (auto& x : w.data) x *= s;
        CHECK(argmax_labels(w).data == base.data);
    }
}

TEST_CASE("tie_fraction counts pixels with shared maxima") {
    VoteVolume distinct(4, 4, 3);
    Rng rng(7);
    for (int i = 0; i < distinct.pixels(); ++i)
        for (int c = 0; c < 3; ++c)
            distinct.data[static_cast<size_t>(c) * 16 + i] = static_cast<float>(c + 1 + 0.01 * i);
    CHECK(tie_fraction(distinct) == 0.0);

    VoteVolume uniform(5, 3, 4);
    std::fill(uniform.data.begin(), uniform.data.end(), 0.25f);
    CHECK(tie_fraction(uniform) == 1.0);

    // plant exactly 3 tied pixels in a 10x10 volume, then recount independently
    VoteVolume v(10, 10, 3);
    for (int i = 0; i < 100; ++i) {
        v.data[i] = 1.0f;
        v.data[100 + i] = 0.5f;
        v.data[200 + i] = 0.25f;
    }
    for (int i : {4, 17, 62}) v.data[100 + i] = 1.0f;
    int tied = 0;
    for (int i = 0; i < 100; ++i) {
        float m = std::max({v.data[i], v.data[100 + i], v.data[200 + i]});
        int winners = 0;
        for (int c = 0; c < 3; ++c) winners += v.data[c * 100 + i] == m;
        tied += winners >= 2;
    }
    CHECK(tied == 3);
    CHECK(tie_fraction(v) == Catch::Approx(0.03).margin(1e-12));
}

TEST_CASE("argmax tie-break is deterministic across runs") {
    VoteVolume v = random_votes(8, 8, 3, 42);
    for (int i = 0; i < 16; ++i) v.data[i + 64] = v.data[i];  // force some ties
    LabelMap a = argmax_labels(v);
    LabelMap b = argmax_labels(v);
    CHECK(a.data == b.data);
}

TEST_CASE("LabelMap validation rejects bad data") {
    LabelMap m(2, 2, 2);
    m.data = {0, 1, 1, 0};
    CHECK_NOTHROW(m.validate());
    m.data[0] = 5;
    CHECK_THROWS_AS(m.validate(), Error);
    m.data = {0, 1};
    CHECK_THROWS_AS(m.validate(), DimensionMismatch);
}

TEST_CASE("SequenceSpec validation and offsets") {
    SequenceSpec s;
    s.num_frames = 20;
    s.width = 4;
    s.height = 4;
    s.num_classes = 2;
    s.keyframes = {0, 10};
    CHECK_NOTHROW(s.validate());
    CHECK(s.offsets() == std::vector<int>{-10, -5, 5, 10});
    s.keyframes = {10, 10};
    CHECK_THROWS_AS(s.validate(), Error);
    s.keyframes = {0, 25};
    CHECK_THROWS_AS(s.validate(), Error);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include "hear/ingest.hpp"
#include "hear/layout.hpp"

using namespace hear;

namespace {

// Frame i is frame i-1 shifted by step[i] along x, so its score is step[i].
JointSequence walk(const std::vector<double>& step, int joints = 3)
{
    JointSequence s;
    Frame f(joints);
    for (int j = 0; j < joints; ++j) f[j] = {10.0 * j, 5.0 * j};
    for (std::size_t i = 0; i < step.size(); ++i) {
        if (i > 0)
            for (Joint& p : f) p.x += step[i];
        s.frames.push_back(f);
    }
    return s;
}

bool same_frame(const Frame& a, const Frame& b)
{
    for (std::size_t j = 0; j < a.size(); ++j)
        if (a[j].x != b[j].x || a[j].y != b[j].y) return false;
    return true;
}

std::vector<int> kept_indices(const JointSequence& in, const JointSequence& out)
{
    std::vector<int> idx;
    std::size_t i = 0;
    for (const Frame& f : out.frames) {
        while (i < in.frames.size() && !same_frame(in.frames[i], f)) ++i;
        REQUIRE(i < in.frames.size());
        idx.push_back(static_cast<int>(i++));
    }
    return idx;
}

}  // namespace

TEST_CASE("identical frames at the target length are kept")
{
    const JointSequence s = walk(std::vector<double>(32, 0.0));
    CHECK(select_frames(s, 32).frames.size() == 32);
}

TEST_CASE("a duplicate frame is dropped first")
{
    std::vector<double> step(33, 20.0);
    step[5] = 0.0;
    const JointSequence s = walk(step);
    const JointSequence out = select_frames(s, 32, 5.0);
    std::vector<int> want(33);
    std::iota(want.begin(), want.end(), 0);
    want.erase(want.begin() + 5);
    CHECK(kept_indices(s, out) == want);
}

TEST_CASE("without droppable frames the lowest scores go, earliest first")
{
    std::mt19937_64 g(4);
    std::uniform_int_distribution<int> d(6, 12);
    std::vector<double> step(40);
    for (double& v : step) v = d(g);  // many ties, all above the threshold
    const JointSequence s = walk(step);
    const JointSequence out = select_frames(s, 32, 5.0);
    REQUIRE(out.frames.size() == 32);
    std::vector<std::pair<double, int>> order;
    for (int i = 1; i < 40; ++i) order.push_back({step[i], i});
    std::sort(order.begin(), order.end());
    std::vector<int> want;
    for (int i = 0; i < 40; ++i)
        if (std::none_of(order.begin(), order.begin() + 8, [&](const auto& p) { return p.second == i; }))
            want.push_back(i);
    CHECK(kept_indices(s, out) == want);
}

TEST_CASE("frame selection output is an order-preserving subsequence")
{
    std::mt19937_64 g(8);
    std::uniform_real_distribution<double> d(0.0, 10.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> step(50);
        for (double& v : step) v = d(g);
        const JointSequence s = walk(step);
        const auto idx = kept_indices(s, select_frames(s, 32));
        CHECK(idx.size() == 32);
        CHECK(std::is_sorted(idx.begin(), idx.end()));
    }
    CHECK_THROWS_AS(select_frames(walk(std::vector<double>(10, 1.0)), 32), ValidationError);
}

TEST_CASE("normalization")
{
    JointSequence s;
    s.frames.push_back({{0.0, 3.0}, {5.0, 3.0}, {10.0, 3.0}});
    const JointSequence n = normalize(s);
    CHECK(n.frames[0][0].x == 0.0);
    CHECK(n.frames[0][1].x == 0.5);
    CHECK(n.frames[0][2].x == 1.0);
    for (const Joint& p : n.frames[0]) CHECK(p.y == 0.0);  // constant axis
    const JointSequence twice = normalize(n);
    for (int j = 0; j < 3; ++j) CHECK(twice.frames[0][j].x == n.frames[0][j].x);
}

TEST_CASE("assemble puts x in channel 0 and y in channel 1")
{
    JointSequence s;
    s.frames.push_back({{0.1, 0.2}, {0.3, 0.4}});
    const InputTensor x = assemble(s);
    CHECK(x.frames == 1);
    CHECK(x.joints == 2);
    CHECK(x.at(0, 0, 0) == 0.1);
    CHECK(x.at(0, 1, 0) == 0.3);
    CHECK(x.at(0, 0, 1) == 0.2);
    CHECK(x.at(0, 1, 1) == 0.4);
}

TEST_CASE("frames and tensors round-trip through JSON")
{
    const JointSequence s = frames_from_json_text("[[[1,2],[3,4]],[[5,6],[7,8]]]");
    CHECK(s.frames.size() == 2);
    CHECK(s.frames[1][0].x == 5.0);
    CHECK_THROWS_AS(frames_from_json_text("[[[1,2],[3]]]"), ValidationError);
    CHECK_THROWS_AS(frames_from_json_text("{}"), ValidationError);
    CHECK_THROWS_AS(frames_from_json_text("[[[1,2]],[[1,2],[3,4]]]"), ValidationError);
    const auto path = (std::filesystem::temp_directory_path() / "hear_test_tensor.json").string();
    const InputTensor x = random_input(4, 3, 2);
    write_tensor_json(path, x);
    CHECK(read_tensor_json(path).values == x.values);
    std::filesystem::remove(path);
}

TEST_CASE("pot, vtm and mtv")
{
    CHECK(pot(480) == 512);
    CHECK(pot(512) == 512);
    CHECK(pot(1) == 1);
    CHECK(vtm({{1, 2}, {3, 4}}) == std::vector<double>{1, 2, 3, 4});
    CHECK(mtv({1, 2, 3, 4}, 2, 2) == std::vector<std::vector<double>>{{1, 2}, {3, 4}});
    CHECK(vtm({{1, 2, 3}}) == std::vector<double>{1, 2, 3});
    CHECK_THROWS_AS(mtv({1, 2, 3}, 2, 2), ValidationError);
}

TEST_CASE("input packing")
{
    const PackedInput p = pack_input(random_input(32, 15, 1), 8192);
    CHECK(p.layout.block == 512);
    CHECK(p.layout.replicas == 8);
    CHECK(p.layout.channels_per_ct == 16);
    CHECK(p.layout.block * p.layout.channels_per_ct == 8192);

    InputTensor x = InputTensor::zeros(2, 2);
    for (int i = 0; i < 8; ++i) x.values[i] = i + 1;  // (t, j, c) interleaved
    const PackedInput q = pack_input(x, 16);
    CHECK(q.layout.block == 4);
    CHECK(q.layout.replicas == 2);
    const std::vector<double> pair{1, 3, 5, 7, 2, 4, 6, 8};
    for (int r = 0; r < 2; ++r)
        for (int i = 0; i < 8; ++i) CHECK(q.slots[r * 8 + i] == pair[i]);

    for (double v : pack_input(InputTensor::zeros(32, 15), 8192).slots) CHECK(v == 0.0);
    CHECK_THROWS_AS(pack_input(InputTensor::zeros(32, 15), 512), ValidationError);
}

TEST_CASE("valid masks follow the pooling lattice")
{
    const NetworkShape s = NetworkShape::named("2d-w64");
    const PackedLayout l1 = stage_layout(s, 8192, 1);
    const SlotVector m1 = valid_mask(l1);
    for (int b = 0; b < 16; ++b)
        for (int i = 0; i < 512; ++i) CHECK(m1[b * 512 + i] == (i < 480 ? 1.0 : 0.0));

    for (int k = 1; k <= 2; ++k) {
        const PackedLayout l = stage_layout(s, 8192, k + 1);
        CHECK(l == after_pool(k == 1 ? l1 : stage_layout(s, 8192, 2)));
        const SlotVector m = valid_mask(l);
        const int step = 1 << k;
        std::size_t ones = 0;
        for (int b = 0; b < 16; ++b)
            for (int i = 0; i < 512; ++i) {
                const int r = i / 15, c = i % 15;
                const bool want = i < 480 && r % step == 0 && c % step == 0 && c / step < 15 / step &&
                                  r / step < 32 / step;
                CHECK(m[b * 512 + i] == (want ? 1.0 : 0.0));
                ones += m[b * 512 + i] != 0.0;
            }
        CHECK(ones == static_cast<std::size_t>(16 * (32 >> k) * (15 >> k)));
    }
    CHECK(stage_layout(s, 8192, 3).map_h == 8);
    CHECK(stage_layout(s, 8192, 3).map_w == 3);
}

TEST_CASE("load factors")
{
    CHECK(load_factor(3, 16, Dim::Two) == 16);
    CHECK(load_factor(3, 8, Dim::One) == 4);
    CHECK(load_factor(2, 8, Dim::One) == 2);
    CHECK(load_factor(2, 8, Dim::Two) == 4);
    CHECK(load_factor(3, 1, Dim::Two) == 1);
    CHECK(load_factor(1, 8, Dim::Two) == 1);
}

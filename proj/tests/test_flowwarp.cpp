#include "doctest.h"
#include "flocode/data.hpp"
#include "flocode/flowwarp.hpp"
#include "flocode/rng.hpp"

#include <algorithm>
#include <cmath>

using flocode::Box;
using flocode::FlowProvider;
using flocode::Tensor;

namespace {

Tensor const_flow(int h, int w, double dx, double dy) {
    std::vector<double> f(static_cast<size_t>(2 * h * w));
    for (int i = 0; i < h * w; ++i) {
        f[static_cast<size_t>(i)] = dx;
        f[static_cast<size_t>(h * w + i)] = dy;
    }
    return Tensor::from_data({2, h, w}, f);
}

Tensor row_map(const std::vector<double>& row) {
    return Tensor::from_data({1, 1, static_cast<int>(row.size())}, row);
}

}  // namespace

TEST_CASE("unit flow shifts a row left and zero-fills the tail") {
    Tensor map = row_map({3.0, 5.0, 7.0, 9.0});  // a b c d
    Tensor out = flocode::bilinear_warp(map, const_flow(1, 4, 1.0, 0.0));
    CHECK(out(0, 0, 0) == 5.0);
    CHECK(out(0, 0, 1) == 7.0);
    CHECK(out(0, 0, 2) == 9.0);
    CHECK(out(0, 0, 3) == 0.0);
}

TEST_CASE("half-pixel flow interpolates neighbours") {
    Tensor map = row_map({0.0, 1.0, 0.0, 0.0});
    Tensor out = flocode::bilinear_warp(map, const_flow(1, 4, 0.5, 0.0));
    CHECK(out(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out(0, 0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out(0, 0, 2) == 0.0);
    CHECK(out(0, 0, 3) == 0.0);
}

TEST_CASE("zero flow is the exact identity") {
    flocode::Rng rng(3);
    std::vector<double> data(2 * 5 * 6);
    for (auto& v : data) v = rng.normal();
    Tensor map = Tensor::from_data({2, 5, 6}, data);
    Tensor out = flocode::bilinear_warp(map, Tensor::zeros({2, 5, 6}));
    CHECK(out.equals(map));
}

TEST_CASE("warping is linear in the map values") {
    flocode::Rng rng(4);
    const int h = 6, w = 7;
    auto rand_map = [&] {
        std::vector<double> d(static_cast<size_t>(3 * h * w));
        for (auto& v : d) v = rng.normal();
        return Tensor::from_data({3, h, w}, d);
    };
    std::vector<double> fd(static_cast<size_t>(2 * h * w));
    for (auto& v : fd) v = rng.uniform(-2.0, 2.0);
    Tensor flow = Tensor::from_data({2, h, w}, fd);

    Tensor a = rand_map(), b = rand_map();
    const double ca = 1.7, cb = -0.6;
    std::vector<double> mix(static_cast<size_t>(3 * h * w));
    for (int i = 0; i < 3 * h * w; ++i) mix[static_cast<size_t>(i)] = ca * a.data()[i] + cb * b.data()[i];
    Tensor wa = flocode::bilinear_warp(a, flow);
    Tensor wb = flocode::bilinear_warp(b, flow);
    Tensor wmix = flocode::bilinear_warp(Tensor::from_data({3, h, w}, mix), flow);
    for (int i = 0; i < wmix.numel(); ++i)
        CHECK(wmix.data()[i] == doctest::Approx(ca * wa.data()[i] + cb * wb.data()[i]).epsilon(1e-10));
}

TEST_CASE("integer shifts reproduce the map exactly") {
    flocode::Rng rng(5);
    const int h = 5, w = 5;
    std::vector<double> d(static_cast<size_t>(h * w));
    for (auto& v : d) v = rng.normal();
    Tensor map = Tensor::from_data({1, h, w}, d);
    Tensor out = flocode::bilinear_warp(map, const_flow(h, w, 2.0, 1.0));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double expect = (x + 2 < w && y + 1 < h) ? map(0, y + 1, x + 2) : 0.0;
            CHECK(out(0, y, x) == expect);
        }
}

TEST_CASE("composing constant flows adds displacements in the interior") {
    const int h = 8, w = 8;
    Tensor f1 = const_flow(h, w, 1.0, 0.5);
    Tensor f2 = const_flow(h, w, -0.5, 1.0);
    Tensor c = flocode::compose_flows(f1, f2);
    // Positions whose midpoint stays in bounds see the exact sum.
    CHECK(c(0, 3, 3) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c(1, 3, 3) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("roi_pool of the full frame averages the whole map") {
    Tensor map = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
    Box full{0, 0, 1, 1};
    for (int grid : {1, 2, 4, 8}) {
        Tensor pooled = flocode::roi_pool(map, full, grid, /*flatten=*/false);
        CHECK(pooled.numel() == 1);
        CHECK(pooled(0) == doctest::Approx(2.5).epsilon(1e-12));
    }
}

TEST_CASE("roi_pool flattened layout is channel-major") {
    Tensor map = Tensor::from_data({2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
    Box full{0, 0, 1, 1};
    Tensor pooled = flocode::roi_pool(map, full, 2, /*flatten=*/true);
    REQUIRE(pooled.numel() == 8);
    // Second channel is ten times the first, sample for sample.
    for (int i = 0; i < 4; ++i)
        CHECK(pooled(i + 4) == doctest::Approx(10.0 * pooled(i)).epsilon(1e-12));
}

TEST_CASE("roi_pool rejects degenerate and out-of-bounds boxes") {
    Tensor map = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
    CHECK_THROWS(flocode::roi_pool(map, Box{1, 1, 1, 1}, 2, false));       // zero area
    CHECK_THROWS(flocode::roi_pool(map, Box{0, 0, 1.5, 1}, 2, false));     // past right edge
    CHECK_THROWS(flocode::roi_pool(map, Box{-0.5, 0, 1, 1}, 2, false));    // past left edge
}

TEST_CASE("constant map pools to the constant") {
    Tensor map = Tensor::full({3, 4, 4}, 7.5);
    Tensor pooled = flocode::roi_pool(map, Box{0.5, 1.0, 2.5, 2.0}, 3, true);
    for (int i = 0; i < pooled.numel(); ++i) CHECK(pooled(i) == doctest::Approx(7.5).epsilon(1e-12));
}

TEST_CASE("flow provider composes steps across frame gaps") {
    const int h = 6, w = 6;
    std::vector<Tensor> steps;
    steps.push_back(Tensor());  // frame 0 has no predecessor
    steps.push_back(const_flow(h, w, 1.0, 0.0));   // 1 -> 0
    steps.push_back(const_flow(h, w, 0.0, 1.0));   // 2 -> 1
    steps.push_back(const_flow(h, w, -1.0, 0.0));  // 3 -> 2
    FlowProvider flows(std::move(steps));

    Tensor same = flows.field(2, 2);
    CHECK(same.equals(Tensor::zeros({2, h, w})));

    Tensor one = flows.field(1, 0);
    CHECK(one(0, 2, 2) == 1.0);

    Tensor gap2 = flows.field(2, 0);  // (0,1) then (1,0)
    CHECK(gap2(0, 2, 2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gap2(1, 2, 2) == doctest::Approx(1.0).epsilon(1e-12));

    Tensor gap3 = flows.field(3, 0);
    CHECK(gap3(0, 3, 3) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(gap3(1, 3, 3) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS(flows.field(0, 1));
    CHECK_THROWS(flows.field(4, 0));
}

namespace {

// Video with one object per listed frame, its box translating by (vx, vy)
// per frame; painted content moves with the box and flows are the exact
// displacement fields.
flocode::VideoSample moving_object_video(const std::vector<int>& present_frames, int total_frames,
                                         int class_id, double vx, double vy) {
    const int h = 8, w = 8, c = 2;
    flocode::VideoSample video;
    const double bx = 1.0, by = 1.0, bw = 2.0, bh = 2.0;
    for (int t = 0; t < total_frames; ++t) {
        flocode::VideoFrame frame;
        const double x1 = bx + vx * t, y1 = by + vy * t;
        std::vector<double> map(static_cast<size_t>(c * h * w), 0.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (x >= x1 && x <= x1 + bw && y >= y1 && y <= y1 + bh)
                    for (int ci = 0; ci < c; ++ci)
                        map[static_cast<size_t>(ci * h * w + y * w + x)] = 1.0 + ci + 0.1 * (x - x1) + 0.01 * (y - y1);
        frame.feature_map = flocode::Tensor::from_data({c, h, w}, map);
        frame.flow = const_flow(h, w, -vx, -vy);  // positions in t map back to t-1
        if (std::find(present_frames.begin(), present_frames.end(), t) != present_frames.end()) {
            flocode::GtObject obj;
            obj.id = 0;
            obj.class_id = class_id;
            obj.box = {x1, y1, x1 + bw, y1 + bh};
            obj.feature = flocode::roi_pool(frame.feature_map, obj.box, 2, true);
            frame.objects.push_back(obj);
        }
        video.frames.push_back(std::move(frame));
    }
    return video;
}

flocode::FlowProvider provider_for(const flocode::VideoSample& video) {
    std::vector<flocode::Tensor> steps;
    for (const auto& f : video.frames) steps.push_back(f.flow);
    return flocode::FlowProvider(std::move(steps));
}

}  // namespace

TEST_CASE("single-frame video yields unwarped singleton sequences") {
    auto video = moving_object_video({0}, 1, 3, 0, 0);
    auto seqs = flocode::build_object_sequences(video, provider_for(video), {});
    REQUIRE(seqs.size() == 1);
    REQUIRE(seqs[0].entries.size() == 1);
    CHECK(!seqs[0].entries[0].warped);
    CHECK(seqs[0].class_id == 3);
    CHECK(seqs[0].entries[0].feature.equals(video.frames[0].objects[0].feature));
}

TEST_CASE("occurrence gap warps from the previous occurrence") {
    auto video = moving_object_video({1, 3}, 4, 5, 1.0, 0.0);
    auto seqs = flocode::build_object_sequences(video, provider_for(video), {});
    REQUIRE(seqs.size() == 1);
    REQUIRE(seqs[0].entries.size() == 2);
    CHECK(seqs[0].entries[0].frame == 1);
    CHECK(!seqs[0].entries[0].warped);
    CHECK(seqs[0].entries[1].frame == 3);
    CHECK(seqs[0].entries[1].warped);

    // Integer motion with exact flows: the warped entry must reproduce the
    // object's appearance, i.e. match the raw feature pooled at frame 3.
    const auto& raw3 = video.frames[3].objects[0].feature;
    const auto& warped = seqs[0].entries[1].feature;
    REQUIRE(warped.numel() == raw3.numel());
    for (int i = 0; i < warped.numel(); ++i)
        CHECK(warped(i) == doctest::Approx(raw3(i)).epsilon(1e-9));
}

TEST_CASE("sequences partition detections and split same-frame collisions") {
    const int h = 8, w = 8;
    flocode::VideoSample video;
    for (int t = 0; t < 3; ++t) {
        flocode::VideoFrame frame;
        frame.feature_map = flocode::Tensor::full({1, h, w}, 1.0);
        frame.flow = flocode::Tensor::zeros({2, h, w});
        for (int k = 0; k < 2; ++k) {  // two same-class objects every frame
            flocode::GtObject obj;
            obj.id = k;
            obj.class_id = 9;
            obj.box = {1.0 + 3 * k, 1.0, 2.0 + 3 * k, 2.0};
            obj.feature = flocode::Tensor::full({4}, static_cast<double>(k)+1.0);
            frame.objects.push_back(obj);
        }
        video.frames.push_back(std::move(frame));
    }
    auto flows = provider_for(video);

    auto by_class = flocode::build_object_sequences(video, flows, {});
    REQUIRE(by_class.size() == 2);  // parallel chains for the colliding class
    int total_entries = 0;
    for (const auto& s : by_class) {
        int prev = -1;
        for (const auto& e : s.entries) {
            CHECK(e.frame > prev);
            prev = e.frame;
            ++total_entries;
        }
    }
    CHECK(total_entries == 6);

    flocode::SequenceOptions by_inst;
    by_inst.by_instance = true;
    auto tracks = flocode::build_object_sequences(video, flows, by_inst);
    REQUIRE(tracks.size() == 2);
    CHECK(tracks[0].track_id == 0);
    CHECK(tracks[1].track_id == 1);
    for (const auto& s : tracks) CHECK(s.entries.size() == 3);
}

TEST_CASE("warp disabled keeps raw features everywhere") {
    auto video = moving_object_video({0, 1, 2}, 3, 5, 1.0, 0.0);
    flocode::SequenceOptions opt;
    opt.warp = false;
    auto seqs = flocode::build_object_sequences(video, provider_for(video), opt);
    REQUIRE(seqs.size() == 1);
    for (size_t i = 0; i < seqs[0].entries.size(); ++i) {
        CHECK(!seqs[0].entries[i].warped);
        CHECK(seqs[0].entries[i].feature.equals(video.frames[i].objects[0].feature));
    }
}

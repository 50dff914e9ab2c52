#include "doctest.h"
#include "flocode/synthdata.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

using namespace flocode;

namespace {

GenConfig small_config() {
    GenConfig cfg;
    cfg.frames = 3;
    cfg.objects = 1;
    cfg.map_channels = 2;
    cfg.map_height = 12;
    cfg.map_width = 12;
    return cfg;
}

bool videos_equal(const VideoSample& a, const VideoSample& b) {
    if (a.frames.size() != b.frames.size()) return false;
    for (size_t t = 0; t < a.frames.size(); ++t) {
        const VideoFrame& fa = a.frames[t];
        const VideoFrame& fb = b.frames[t];
        if (!fa.feature_map.equals(fb.feature_map)) return false;
        if (!fa.flow.equals(fb.flow)) return false;
        if (fa.objects.size() != fb.objects.size()) return false;
        for (size_t i = 0; i < fa.objects.size(); ++i) {
            const GtObject& oa = fa.objects[i];
            const GtObject& ob = fb.objects[i];
            if (oa.id != ob.id || oa.class_id != ob.class_id) return false;
            if (oa.box.x1 != ob.box.x1 || oa.box.y1 != ob.box.y1 || oa.box.x2 != ob.box.x2 ||
                oa.box.y2 != ob.box.y2)
                return false;
            if (!oa.feature.equals(ob.feature)) return false;
        }
        if (fa.triplets.size() != fb.triplets.size()) return false;
        for (size_t i = 0; i < fa.triplets.size(); ++i) {
            if (fa.triplets[i].subj_id != fb.triplets[i].subj_id) return false;
            if (fa.triplets[i].obj_id != fb.triplets[i].obj_id) return false;
            if (fa.triplets[i].predicates != fb.triplets[i].predicates) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("predicate frequencies are a normalized power law") {
    LabelSpace ls;
    std::vector<double> freq = ls.frequencies();
    REQUIRE(static_cast<int>(freq.size()) == 26);
    double total = std::accumulate(freq.begin(), freq.end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    for (size_t p = 1; p < freq.size(); ++p) CHECK(freq[p] < freq[p - 1]);
    CHECK(freq[0] / freq[1] == doctest::Approx(std::pow(2.0, 1.6)).epsilon(1e-12));

    LabelSpace flat;
    flat.exponent = 0.0;
    for (double f : flat.frequencies()) CHECK(f == doctest::Approx(1.0 / 26).epsilon(1e-12));

    LabelSpace bad;
    bad.exponent = -1.0;
    CHECK_THROWS(bad.frequencies());
    LabelSpace tiny;
    tiny.predicate_classes = 1;
    CHECK_THROWS(tiny.validate());
}

TEST_CASE("token marginal blends in the paired co-label mass") {
    GenConfig cfg;
    std::vector<double> freq = cfg.labels.frequencies();
    std::vector<double> marginal = predicate_token_marginal(cfg);
    double total = std::accumulate(marginal.begin(), marginal.end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(marginal[1] ==
          doctest::Approx((freq[1] + 0.25 * freq[0]) / 1.25).epsilon(1e-12));
    CHECK(marginal[0] ==
          doctest::Approx((freq[0] + 0.25 * freq[25]) / 1.25).epsilon(1e-12));

    GenConfig plain = cfg;
    plain.co_label_rate = 0.0;
    std::vector<double> m0 = predicate_token_marginal(plain);
    for (size_t p = 0; p < m0.size(); ++p) CHECK(m0[p] == doctest::Approx(freq[p]).epsilon(1e-12));
}

TEST_CASE("generation is deterministic and structurally sound") {
    GenConfig cfg;
    VideoSample a = generate_video(cfg, 2024, 7);
    VideoSample b = generate_video(cfg, 2024, 7);
    CHECK(videos_equal(a, b));
    VideoSample c = generate_video(cfg, 2024, 8);
    CHECK_FALSE(videos_equal(a, c));

    REQUIRE(static_cast<int>(a.frames.size()) == cfg.frames);
    for (const VideoFrame& frame : a.frames) {
        REQUIRE(static_cast<int>(frame.objects.size()) == cfg.objects + 1);
        CHECK(frame.feature_map.shape() == std::vector<int>{8, 16, 16});
        CHECK(frame.flow.shape() == std::vector<int>{2, 16, 16});
        CHECK(frame.objects[0].id == 0);
        CHECK(frame.objects[0].class_id == 0);  // the person
        for (const GtObject& obj : frame.objects) {
            CHECK(obj.box.valid());
            CHECK(obj.box.x1 >= 0.0);
            CHECK(obj.box.y1 >= 0.0);
            CHECK(obj.box.x2 <= 15.0);
            CHECK(obj.box.y2 <= 15.0);
            CHECK(obj.feature.numel() == cfg.feature_dim());
        }
        REQUIRE(static_cast<int>(frame.triplets.size()) == cfg.objects);
        for (const GtTriplet& trip : frame.triplets) {
            CHECK(trip.subj_id == 0);
            CHECK(trip.obj_id >= 1);
            CHECK(trip.obj_id <= cfg.objects);
            REQUIRE_FALSE(trip.predicates.empty());
            for (int p : trip.predicates) {
                CHECK(p >= 0);
                CHECK(p < cfg.labels.predicate_classes);
            }
        }
    }

    GenConfig crowded;
    crowded.objects = 20;
    CHECK_THROWS(crowded.validate());
}

TEST_CASE("flow fields recover the previous frame's boxes within a pixel") {
    GenConfig cfg;
    for (uint64_t seed : {11ull, 12ull, 13ull}) {
        for (int v = 0; v < 6; ++v) {
            VideoSample video = generate_video(cfg, seed, v);
            for (size_t t = 1; t < video.frames.size(); ++t) {
                const VideoFrame& cur = video.frames[t];
                const VideoFrame& prev = video.frames[t - 1];
                for (size_t i = 0; i < cur.objects.size(); ++i) {
                    const Box& now = cur.objects[i].box;
                    const Box& before = prev.objects[i].box;
                    int cx = static_cast<int>(std::lround(now.cx()));
                    int cy = static_cast<int>(std::lround(now.cy()));
                    double dx = cur.flow(0, cy, cx);
                    double dy = cur.flow(1, cy, cx);
                    CHECK(std::abs(now.x1 + dx - before.x1) <= 1.0);
                    CHECK(std::abs(now.x2 + dx - before.x2) <= 1.0);
                    CHECK(std::abs(now.y1 + dy - before.y1) <= 1.0);
                    CHECK(std::abs(now.y2 + dy - before.y2) <= 1.0);
                }
            }
        }
    }
}

TEST_CASE("default labels are long-tailed: top fifth carries three quarters") {
    GenConfig cfg;
    std::vector<long> counts(static_cast<size_t>(cfg.labels.predicate_classes), 0);
    long total = 0;
    for (int v = 0; v < 650; ++v) {
        VideoSample video = generate_video(cfg, 31, v);
        for (const VideoFrame& frame : video.frames)
            for (const GtTriplet& trip : frame.triplets)
                for (int p : trip.predicates) {
                    counts[static_cast<size_t>(p)] += 1;
                    ++total;
                }
    }
    REQUIRE(total >= 10000);
    std::vector<long> sorted = counts;
    std::sort(sorted.rbegin(), sorted.rend());
    long top5 = sorted[0] + sorted[1] + sorted[2] + sorted[3] + sorted[4];
    CHECK(static_cast<double>(top5) / static_cast<double>(total) >= 0.75);
}

TEST_CASE("empirical token histogram matches the analytic marginal") {
    GenConfig cfg;
    cfg.objects = 3;
    cfg.label_refresh_rate = 0.5;
    std::vector<double> expect = predicate_token_marginal(cfg);
    std::vector<long> counts(expect.size(), 0);
    long total = 0;
    for (int v = 0; v < 1000; ++v) {
        Dataset one{generate_video(cfg, 99, v)};
        std::vector<long> h = predicate_histogram(one, cfg.labels.predicate_classes);
        for (size_t p = 0; p < h.size(); ++p) counts[p] += h[p];
        total += std::accumulate(h.begin(), h.end(), 0L);
    }
    double tv = 0.0;
    for (size_t p = 0; p < expect.size(); ++p)
        tv += std::abs(static_cast<double>(counts[p]) / total - expect[p]);
    tv *= 0.5;
    CHECK(tv < 0.02);
}

TEST_CASE("noiseless detection simulation returns the ground truth") {
    GenConfig cfg = small_config();
    VideoSample video = generate_video(cfg, 5, 0);
    DetectionNoise clean;
    auto dets = simulate_detections(video, clean, cfg.pool_grid);
    REQUIRE(dets.size() == video.frames.size());
    for (size_t t = 0; t < dets.size(); ++t) {
        REQUIRE(dets[t].objects.size() == video.frames[t].objects.size());
        // Sort both sides by class for comparison: roster order is by score.
        for (const GtObject& gt : video.frames[t].objects) {
            bool found = false;
            for (const GtObject& det : dets[t].objects) {
                if (det.class_id != gt.class_id) continue;
                if (det.box.x1 != gt.box.x1 || det.box.y1 != gt.box.y1) continue;
                CHECK(det.box.x2 == gt.box.x2);
                CHECK(det.box.y2 == gt.box.y2);
                CHECK(det.feature.equals(gt.feature));
                found = true;
            }
            CHECK(found);
        }
        for (size_t i = 1; i < dets[t].scores.size(); ++i)
            CHECK(dets[t].scores[i] <= dets[t].scores[i - 1]);
    }
}

TEST_CASE("same-class overlaps are suppressed at the 0.4 threshold") {
    // Two same-class boxes with IoU 2/3 plus a distant one: the overlapping
    // pair collapses to a single proposal.
    VideoFrame frame;
    frame.feature_map = Tensor::full({1, 12, 12}, 1.0);
    frame.flow = Tensor::zeros({2, 12, 12});
    GtObject a;
    a.id = 0;
    a.class_id = 3;
    a.box = Box{1, 1, 5, 5};
    a.feature = Tensor::zeros({4});
    GtObject b = a;
    b.id = 1;
    b.box = Box{1, 2, 5, 6};  // IoU with a = 12/20 = 0.6
    GtObject c = a;
    c.id = 2;
    c.box = Box{7, 7, 10, 10};
    frame.objects = {a, b, c};
    VideoSample video;
    video.frames.push_back(frame);

    DetectionNoise clean;
    auto dets = simulate_detections(video, clean, 2);
    CHECK(dets[0].objects.size() == 2);

    // Different classes never suppress each other.
    frame.objects[1].class_id = 4;
    video.frames[0] = frame;
    auto dets2 = simulate_detections(video, clean, 2);
    CHECK(dets2[0].objects.size() == 3);
}

TEST_CASE("detection noise knobs behave as rates") {
    GenConfig cfg = small_config();
    VideoSample video = generate_video(cfg, 6, 0);

    DetectionNoise all_missed;
    all_missed.miss_rate = 1.0;
    for (const auto& frame : simulate_detections(video, all_missed, cfg.pool_grid))
        CHECK(frame.objects.empty());

    DetectionNoise jittered;
    jittered.jitter_sigma = 0.8;
    jittered.seed = 9;
    auto dets = simulate_detections(video, jittered, cfg.pool_grid);
    bool any_moved = false;
    for (size_t t = 0; t < dets.size(); ++t) {
        for (const GtObject& det : dets[t].objects) {
            CHECK(det.box.valid());
            CHECK(det.box.x1 >= 0.0);
            CHECK(det.box.x2 <= 11.0);
            CHECK(det.box.y1 >= 0.0);
            CHECK(det.box.y2 <= 11.0);
            for (const GtObject& gt : video.frames[t].objects)
                if (det.class_id == gt.class_id && det.box.x1 != gt.box.x1) any_moved = true;
        }
    }
    CHECK(any_moved);

    DetectionNoise fp;
    fp.false_positive_rate = 0.9;
    fp.seed = 4;
    auto noisy = simulate_detections(video, fp, cfg.pool_grid);
    size_t total = 0;
    for (const auto& frame : noisy) total += frame.objects.size();
    size_t gt_total = video.frames.size() * video.frames[0].objects.size();
    CHECK(total > gt_total);

    DetectionNoise bad;
    bad.false_positive_rate = 1.0;
    CHECK_THROWS(simulate_detections(video, bad, cfg.pool_grid));
    DetectionNoise bad2;
    bad2.jitter_sigma = -0.1;
    CHECK_THROWS(simulate_detections(video, bad2, cfg.pool_grid));
}

TEST_CASE("dataset files round-trip exactly") {
    GenConfig cfg = small_config();
    Dataset ds = generate(cfg, 17, 2);
    const std::string path = "synthdata_roundtrip.jsonl";
    save_dataset(ds, path);
    Dataset back = load_dataset(path);
    REQUIRE(back.size() == ds.size());
    for (size_t v = 0; v < ds.size(); ++v) CHECK(videos_equal(ds[v], back[v]));
    std::remove(path.c_str());
}

TEST_CASE("dataset loader reports schema problems with line numbers") {
    const std::string path = "synthdata_schema.jsonl";

    {
        std::ofstream out(path);
        out << "\n";  // blank lines are skipped
    }
    CHECK(load_dataset(path).empty());

    {
        std::ofstream out(path);
        out << R"({"version":1,"frames":[]})" << "\n";
        out << "not json\n";
    }
    try {
        load_dataset(path);
        FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    {
        std::ofstream out(path);
        out << R"({"version":3,"frames":[]})" << "\n";
    }
    try {
        load_dataset(path);
        FAIL("expected version error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("schema version") != std::string::npos);
    }

    {
        std::ofstream out(path);
        out << R"({"version":1,"frames":[{"feature_map":[[[1.0]]],"objects":[],"triplets":[]}]})"
            << "\n";
    }
    try {
        load_dataset(path);
        FAIL("expected missing-field error");
    } catch (const std::runtime_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("line 1") != std::string::npos);
        CHECK(msg.find("\"flow\"") != std::string::npos);
    }

    {
        std::ofstream out(path);
        out << R"({"version":1,"frames":[{"feature_map":[[[1.0]]],"flow":[[[0.0]],[[0.0]]],)"
            << R"("objects":[],"triplets":[{"subj":0,"obj":1,"predicates":[2]}]}]})" << "\n";
    }
    try {
        load_dataset(path);
        FAIL("expected dangling-reference error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("nonexistent detection") != std::string::npos);
    }

    std::remove(path.c_str());
}

TEST_CASE("histogram rejects labels outside the class range") {
    VideoFrame frame;
    frame.feature_map = Tensor::full({1, 12, 12}, 1.0);
    frame.flow = Tensor::zeros({2, 12, 12});
    GtObject person;
    person.id = 0;
    person.feature = Tensor::zeros({4});
    person.box = Box{1, 1, 3, 3};
    GtObject thing = person;
    thing.id = 1;
    thing.class_id = 2;
    frame.objects = {person, thing};
    GtTriplet trip;
    trip.subj_id = 0;
    trip.obj_id = 1;
    trip.predicates = {7};
    frame.triplets.push_back(trip);
    VideoSample video;
    video.frames.push_back(frame);
    Dataset ds{video};
    CHECK(predicate_histogram(ds, 26)[7] == 1);
    CHECK_THROWS(predicate_histogram(ds, 7));
}

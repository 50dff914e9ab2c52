#include "flocode/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "flocode/flowwarp.hpp"
#include "flocode/rng.hpp"
#include "json.hpp"

namespace flocode {

namespace {

using nlohmann::json;

std::vector<double> cumulative(const std::vector<double>& freq) {
    std::vector<double> cum(freq.size());
    double running = 0.0;
    for (size_t i = 0; i < freq.size(); ++i) {
        running += freq[i];
        cum[i] = running;
    }
    cum.back() = 1.0;
    return cum;
}

int inverse_cdf(const std::vector<double>& cum, double u) {
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    return static_cast<int>(it - cum.begin());
}

/// Deterministic per-class appearance pattern: an affine field over the
/// box-relative position, the same in every video so classes stay learnable.
double proto_component(int class_id, int channel, int which) {
    uint64_t h = mix64(0x50524f544f545950ull ^ (static_cast<uint64_t>(class_id) << 24) ^
                       (static_cast<uint64_t>(channel) << 8) ^ static_cast<uint64_t>(which));
    double u = static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
    return 2.0 * u - 1.0;
}

struct Track {
    int id = 0;
    int class_id = 0;
    double w = 0.0, h = 0.0;
    std::vector<double> cx, cy;  // per-frame centers, clamped into bounds

    Box box(int t) const {
        return Box{cx[static_cast<size_t>(t)] - 0.5 * w, cy[static_cast<size_t>(t)] - 0.5 * h,
                   cx[static_cast<size_t>(t)] + 0.5 * w, cy[static_cast<size_t>(t)] + 0.5 * h};
    }
};

double clamp_center(double c, double extent, double limit) {
    double lo = 0.5 * extent;
    double hi = limit - 0.5 * extent;
    return std::min(std::max(c, lo), hi);
}

}  // namespace

void LabelSpace::validate() const {
    if (object_classes < 2) throw std::invalid_argument("need at least two object classes");
    if (predicate_classes < 2) throw std::invalid_argument("need at least two predicate classes");
    if (!(exponent >= 0.0) || !std::isfinite(exponent))
        throw std::invalid_argument("power-law exponent must be finite and non-negative");
}

std::vector<double> LabelSpace::frequencies() const {
    validate();
    std::vector<double> freq(static_cast<size_t>(predicate_classes));
    double total = 0.0;
    for (int p = 0; p < predicate_classes; ++p) {
        freq[static_cast<size_t>(p)] = std::pow(static_cast<double>(p + 1), -exponent);
        total += freq[static_cast<size_t>(p)];
    }
    for (double& f : freq) f /= total;
    return freq;
}

void GenConfig::validate() const {
    labels.validate();
    if (frames < 1) throw std::invalid_argument("need at least one frame");
    if (objects < 1) throw std::invalid_argument("need at least one object besides the person");
    if (map_channels < 1) throw std::invalid_argument("need at least one feature channel");
    if (map_height < 12 || map_width < 12)
        throw std::invalid_argument("feature map too small for the scene layout");
    if (pool_grid < 1) throw std::invalid_argument("pooling grid must be positive");
    auto rate = [](double r, const char* what) {
        if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0,1]");
    };
    rate(label_refresh_rate, "label refresh rate");
    rate(co_label_rate, "co-label rate");
    rate(class_link_rate, "class link rate");
    if (!(feature_noise >= 0.0)) throw std::invalid_argument("feature noise must be non-negative");
    // Rough packing bound: the person needs ~40 cells, each object ~12.
    double budget = 0.8 * map_height * map_width;
    if (40.0 + 12.0 * objects > budget)
        throw std::invalid_argument("more objects than fit the frame grid");
}

std::vector<double> predicate_token_marginal(const GenConfig& cfg) {
    cfg.validate();
    const std::vector<double> freq = cfg.labels.frequencies();
    const int c = cfg.labels.predicate_classes;
    std::vector<double> marginal(static_cast<size_t>(c));
    for (int p = 0; p < c; ++p) {
        int prev = (p - 1 + c) % c;
        marginal[static_cast<size_t>(p)] =
            (freq[static_cast<size_t>(p)] + cfg.co_label_rate * freq[static_cast<size_t>(prev)]) /
            (1.0 + cfg.co_label_rate);
    }
    return marginal;
}

VideoSample generate_video(const GenConfig& cfg, uint64_t seed, int video_index) {
    cfg.validate();
    if (video_index < 0) throw std::invalid_argument("video index must be non-negative");
    Rng rng = Rng(seed).fork(0x5649444544ull + static_cast<uint64_t>(video_index));

    const int T = cfg.frames;
    const int W = cfg.map_width;
    const int H = cfg.map_height;
    const int C = cfg.map_channels;
    const int Cr = cfg.labels.predicate_classes;
    const double x_limit = static_cast<double>(W - 1);
    const double y_limit = static_cast<double>(H - 1);
    const std::vector<double> cum = cumulative(cfg.labels.frequencies());

    // Person trajectory: straight-line motion clamped into bounds.
    Track person;
    person.id = 0;
    person.class_id = 0;
    person.w = rng.uniform(4.0, 6.0);
    person.h = rng.uniform(4.5, 6.5);
    double vx = rng.uniform(-0.6, 0.6);
    double vy = rng.uniform(-0.6, 0.6);
    if (T > 1) {
        double span_x = 0.95 * (x_limit - person.w) / (T - 1);
        double span_y = 0.95 * (y_limit - person.h) / (T - 1);
        vx = std::clamp(vx, -span_x, span_x);
        vy = std::clamp(vy, -span_y, span_y);
    }
    double x_lo = 0.5 * person.w - std::min(0.0, vx * (T - 1));
    double x_hi = x_limit - 0.5 * person.w - std::max(0.0, vx * (T - 1));
    double y_lo = 0.5 * person.h - std::min(0.0, vy * (T - 1));
    double y_hi = y_limit - 0.5 * person.h - std::max(0.0, vy * (T - 1));
    double px = rng.uniform(x_lo, std::max(x_lo, x_hi));
    double py = rng.uniform(y_lo, std::max(y_lo, y_hi));
    for (int t = 0; t < T; ++t) {
        person.cx.push_back(clamp_center(px + vx * t, person.w, x_limit));
        person.cy.push_back(clamp_center(py + vy * t, person.h, y_limit));
    }

    // Objects: anchor predicate steers class, placement, and size.
    std::vector<Track> tracks{person};
    std::vector<int> anchors;
    for (int k = 1; k <= cfg.objects; ++k) {
        int anchor = inverse_cdf(cum, rng.uniform());
        anchors.push_back(anchor);
        Track obj;
        obj.id = k;
        obj.class_id = (rng.uniform() < cfg.class_link_rate)
                           ? 1 + anchor % (cfg.labels.object_classes - 1)
                           : rng.uniform_int(1, cfg.labels.object_classes - 1);
        double angle = 2.0 * std::numbers::pi * (anchor + 0.35 * rng.uniform()) / Cr;
        double radius = 1.5 + 1.25 * (anchor % 5) + 0.4 * rng.uniform();
        obj.w = 2.0 + 0.5 * (anchor % 3) + 0.4 * rng.uniform();
        obj.h = 2.0 + 0.5 * ((anchor / 3) % 3) + 0.4 * rng.uniform();
        double dvx = 0.2 * (rng.uniform() - 0.5);
        double dvy = 0.2 * (rng.uniform() - 0.5);
        for (int t = 0; t < T; ++t) {
            double cx = person.cx[static_cast<size_t>(t)] + radius * std::cos(angle) + dvx * t;
            double cy = person.cy[static_cast<size_t>(t)] + radius * std::sin(angle) + dvy * t;
            obj.cx.push_back(clamp_center(cx, obj.w, x_limit));
            obj.cy.push_back(clamp_center(cy, obj.h, y_limit));
        }
        tracks.push_back(obj);
    }

    // Per-frame emitted labels: anchor (or a fresh redraw) plus an optional
    // deterministic co-label, so label-token statistics stay analytic.
    std::vector<std::vector<std::vector<int>>> labels(
        static_cast<size_t>(cfg.objects), std::vector<std::vector<int>>(static_cast<size_t>(T)));
    for (int k = 0; k < cfg.objects; ++k) {
        for (int t = 0; t < T; ++t) {
            double u_refresh = rng.uniform();
            double u_fresh = rng.uniform();
            double u_co = rng.uniform();
            int primary = (u_refresh < cfg.label_refresh_rate) ? inverse_cdf(cum, u_fresh)
                                                               : anchors[static_cast<size_t>(k)];
            std::vector<int> preds{primary};
            if (u_co < cfg.co_label_rate) preds.push_back((primary + 1) % Cr);
            std::sort(preds.begin(), preds.end());
            labels[static_cast<size_t>(k)][static_cast<size_t>(t)] = std::move(preds);
        }
    }

    VideoSample video;
    for (int t = 0; t < T; ++t) {
        VideoFrame frame;

        // Feature map: per-class affine pattern inside every box (painted
        // person first), then optional white noise.
        std::vector<double> map_data(static_cast<size_t>(C) * H * W, 0.0);
        for (const Track& track : tracks) {
            Box b = track.box(t);
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) {
                    if (x < b.x1 || x > b.x2 || y < b.y1 || y > b.y2) continue;
                    double rx = (x - b.x1) / track.w;
                    double ry = (y - b.y1) / track.h;
                    for (int c = 0; c < C; ++c) {
                        double value = proto_component(track.class_id, c, 1) +
                                       0.8 * proto_component(track.class_id, c, 2) * rx +
                                       0.8 * proto_component(track.class_id, c, 3) * ry;
                        map_data[(static_cast<size_t>(c) * H + y) * W + x] = value;
                    }
                }
            }
        }
        if (cfg.feature_noise > 0.0) {
            for (double& v : map_data) v += rng.normal(0.0, cfg.feature_noise);
        }
        frame.feature_map = Tensor::from_data({C, H, W}, std::move(map_data));

        // Flow landing in the previous frame: -velocity inside each box.
        std::vector<double> flow_data(static_cast<size_t>(2) * H * W, 0.0);
        if (t > 0) {
            for (const Track& track : tracks) {
                Box b = track.box(t);
                double dx = -(track.cx[static_cast<size_t>(t)] - track.cx[static_cast<size_t>(t - 1)]);
                double dy = -(track.cy[static_cast<size_t>(t)] - track.cy[static_cast<size_t>(t - 1)]);
                for (int y = 0; y < H; ++y) {
                    for (int x = 0; x < W; ++x) {
                        if (x < b.x1 || x > b.x2 || y < b.y1 || y > b.y2) continue;
                        flow_data[(static_cast<size_t>(0) * H + y) * W + x] = dx;
                        flow_data[(static_cast<size_t>(1) * H + y) * W + x] = dy;
                    }
                }
            }
        }
        frame.flow = Tensor::from_data({2, H, W}, std::move(flow_data));

        for (const Track& track : tracks) {
            GtObject obj;
            obj.id = track.id;
            obj.class_id = track.class_id;
            obj.box = track.box(t);
            obj.feature = roi_pool(frame.feature_map, obj.box, cfg.pool_grid, true);
            frame.objects.push_back(std::move(obj));
        }
        for (int k = 0; k < cfg.objects; ++k) {
            GtTriplet trip;
            trip.subj_id = 0;
            trip.obj_id = k + 1;
            trip.predicates = labels[static_cast<size_t>(k)][static_cast<size_t>(t)];
            frame.triplets.push_back(std::move(trip));
        }
        video.frames.push_back(std::move(frame));
    }
    return video;
}

Dataset generate(const GenConfig& cfg, uint64_t seed, int videos) {
    if (videos < 0) throw std::invalid_argument("video count must be non-negative");
    Dataset out;
    out.reserve(static_cast<size_t>(videos));
    for (int v = 0; v < videos; ++v) out.push_back(generate_video(cfg, seed, v));
    return out;
}

void DetectionNoise::validate() const {
    // Miss rate 1 (drop everything) is a meaningful degenerate case; a
    // false-positive rate of 1 would inject unboundedly confusing rosters.
    if (!(miss_rate >= 0.0 && miss_rate <= 1.0))
        throw std::invalid_argument("miss rate must lie in [0,1]");
    if (!(false_positive_rate >= 0.0 && false_positive_rate < 1.0))
        throw std::invalid_argument("false-positive rate must lie in [0,1)");
    if (!(jitter_sigma >= 0.0)) throw std::invalid_argument("jitter sigma must be non-negative");
}

std::vector<FrameDetections> simulate_detections(const VideoSample& video,
                                                 const DetectionNoise& noise, int pool_grid) {
    noise.validate();
    if (pool_grid < 1) throw std::invalid_argument("pooling grid must be positive");
    Rng rng = Rng(noise.seed).fork(0xde7ec7ull);

    std::vector<FrameDetections> out;
    for (const VideoFrame& frame : video.frames) {
        if (frame.feature_map.ndim() != 3) throw std::invalid_argument("frame feature map must be [C,H,W]");
        const double x_limit = static_cast<double>(frame.feature_map.shape()[2] - 1);
        const double y_limit = static_cast<double>(frame.feature_map.shape()[1] - 1);

        auto settle = [](double a, double b, double limit) {
            double lo = std::min(a, b);
            double hi = std::max(a, b);
            double extent = std::clamp(hi - lo, 0.5, limit);
            lo = std::clamp(lo, 0.0, limit - extent);
            return std::pair<double, double>{lo, lo + extent};
        };

        struct Candidate {
            int class_id;
            Box box;
            double score;
        };
        std::vector<Candidate> candidates;
        for (const GtObject& gt : frame.objects) {
            double u_miss = rng.uniform();
            double n1 = rng.normal(), n2 = rng.normal(), n3 = rng.normal(), n4 = rng.normal();
            double u_score = rng.uniform();
            if (u_miss < noise.miss_rate) continue;
            auto [x1, x2] = settle(gt.box.x1 + noise.jitter_sigma * n1,
                                   gt.box.x2 + noise.jitter_sigma * n3, x_limit);
            auto [y1, y2] = settle(gt.box.y1 + noise.jitter_sigma * n2,
                                   gt.box.y2 + noise.jitter_sigma * n4, y_limit);
            candidates.push_back({gt.class_id, Box{x1, y1, x2, y2}, 0.75 + 0.25 * u_score});
        }
        for (const GtObject& gt : frame.objects) {
            (void)gt;
            if (rng.uniform() >= noise.false_positive_rate) continue;
            if (frame.objects.empty()) continue;
            int pick = rng.uniform_int(0, static_cast<int>(frame.objects.size()) - 1);
            int cls = frame.objects[static_cast<size_t>(pick)].class_id;
            double w = rng.uniform(2.0, 4.0);
            double h = rng.uniform(2.0, 4.0);
            double cx = rng.uniform(0.5 * w, x_limit - 0.5 * w);
            double cy = rng.uniform(0.5 * h, y_limit - 0.5 * h);
            double score = rng.uniform(0.3, 0.8);
            candidates.push_back({cls, Box{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h}, score});
        }

        // Per-class suppression, then a deterministic score-ordered roster.
        std::vector<int> classes;
        for (const Candidate& c : candidates) classes.push_back(c.class_id);
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
        std::vector<int> kept;
        for (int cls : classes) {
            std::vector<Box> boxes;
            std::vector<double> scores;
            std::vector<int> index;
            for (size_t i = 0; i < candidates.size(); ++i) {
                if (candidates[i].class_id != cls) continue;
                boxes.push_back(candidates[i].box);
                scores.push_back(candidates[i].score);
                index.push_back(static_cast<int>(i));
            }
            for (int local : nms(boxes, scores, 0.4)) kept.push_back(index[static_cast<size_t>(local)]);
        }
        std::sort(kept.begin(), kept.end(), [&](int a, int b) {
            if (candidates[static_cast<size_t>(a)].score != candidates[static_cast<size_t>(b)].score)
                return candidates[static_cast<size_t>(a)].score > candidates[static_cast<size_t>(b)].score;
            return a < b;
        });

        FrameDetections dets;
        for (size_t rank = 0; rank < kept.size(); ++rank) {
            const Candidate& c = candidates[static_cast<size_t>(kept[rank])];
            GtObject obj;
            obj.id = static_cast<int>(rank);
            obj.class_id = c.class_id;
            obj.box = c.box;
            obj.feature = roi_pool(frame.feature_map, c.box, pool_grid, true);
            dets.objects.push_back(std::move(obj));
            dets.scores.push_back(c.score);
        }
        out.push_back(std::move(dets));
    }
    return out;
}

namespace {

json tensor_to_nested(const Tensor& t) {
    if (t.ndim() == 1) {
        json arr = json::array();
        for (int i = 0; i < t.numel(); ++i) arr.push_back(t.data()[i]);
        return arr;
    }
    const int lead = t.shape()[0];
    const int rest = t.numel() / lead;
    std::vector<int> tail(t.shape().begin() + 1, t.shape().end());
    json arr = json::array();
    for (int i = 0; i < lead; ++i) {
        std::vector<double> chunk(t.data() + static_cast<size_t>(i) * rest,
                                  t.data() + static_cast<size_t>(i + 1) * rest);
        arr.push_back(tensor_to_nested(Tensor::from_data_unchecked(tail, std::move(chunk))));
    }
    return arr;
}

[[noreturn]] void fail_at(int line, const std::string& what) {
    throw std::runtime_error("dataset line " + std::to_string(line) + ": " + what);
}

const json& need(const json& j, const char* field, int line) {
    auto it = j.find(field);
    if (it == j.end()) fail_at(line, std::string("missing field \"") + field + "\"");
    return *it;
}

void flatten_into(const json& node, int depth, int max_depth, std::vector<int>& shape,
                  std::vector<double>& out, int line, const char* field) {
    if (!node.is_array()) {
        if (depth == max_depth && node.is_number()) {
            out.push_back(node.get<double>());
            return;
        }
        fail_at(line, std::string("field \"") + field + "\" has a malformed array nesting");
    }
    if (depth >= max_depth) fail_at(line, std::string("field \"") + field + "\" is nested too deep");
    int n = static_cast<int>(node.size());
    if (n == 0) fail_at(line, std::string("field \"") + field + "\" contains an empty array");
    if (static_cast<int>(shape.size()) <= depth)
        shape.push_back(n);
    else if (shape[static_cast<size_t>(depth)] != n)
        fail_at(line, std::string("field \"") + field + "\" is ragged");
    for (const json& child : node) flatten_into(child, depth + 1, max_depth, shape, out, line, field);
}

Tensor nested_to_tensor(const json& node, int expect_ndim, int line, const char* field) {
    std::vector<int> shape;
    std::vector<double> data;
    flatten_into(node, 0, expect_ndim, shape, data, line, field);
    if (static_cast<int>(shape.size()) != expect_ndim)
        fail_at(line, std::string("field \"") + field + "\" has the wrong rank");
    return Tensor::from_data(shape, std::move(data));
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    for (const VideoSample& video : dataset) {
        json jv;
        jv["version"] = 1;
        json jframes = json::array();
        for (const VideoFrame& frame : video.frames) {
            json jf;
            jf["feature_map"] = tensor_to_nested(frame.feature_map);
            jf["flow"] = tensor_to_nested(frame.flow);
            json jobjects = json::array();
            for (const GtObject& obj : frame.objects) {
                json jo;
                jo["id"] = obj.id;
                jo["class"] = obj.class_id;
                jo["box"] = json::array({obj.box.x1, obj.box.y1, obj.box.x2, obj.box.y2});
                jo["feature"] = tensor_to_nested(obj.feature);
                jobjects.push_back(std::move(jo));
            }
            jf["objects"] = std::move(jobjects);
            json jtriplets = json::array();
            for (const GtTriplet& trip : frame.triplets) {
                json jt;
                jt["subj"] = trip.subj_id;
                jt["obj"] = trip.obj_id;
                jt["predicates"] = trip.predicates;
                jtriplets.push_back(std::move(jt));
            }
            jf["triplets"] = std::move(jtriplets);
            jframes.push_back(std::move(jf));
        }
        jv["frames"] = std::move(jframes);
        out << jv.dump() << "\n";
    }
    if (!out) throw std::runtime_error("failed writing dataset file: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    Dataset dataset;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (raw.empty()) continue;
        json jv;
        try {
            jv = json::parse(raw);
        } catch (const json::exception& e) {
            fail_at(line_no, std::string("parse error: ") + e.what());
        }
        const json& version = need(jv, "version", line_no);
        if (!version.is_number_integer() || version.get<int>() != 1)
            fail_at(line_no, "unsupported schema version " + version.dump());
        const json& jframes = need(jv, "frames", line_no);
        if (!jframes.is_array()) fail_at(line_no, "field \"frames\" must be an array");

        VideoSample video;
        for (const json& jf : jframes) {
            VideoFrame frame;
            frame.feature_map = nested_to_tensor(need(jf, "feature_map", line_no), 3, line_no, "feature_map");
            frame.flow = nested_to_tensor(need(jf, "flow", line_no), 3, line_no, "flow");
            if (frame.flow.shape()[0] != 2 || frame.flow.shape()[1] != frame.feature_map.shape()[1] ||
                frame.flow.shape()[2] != frame.feature_map.shape()[2])
                fail_at(line_no, "field \"flow\" shape does not match the feature map");

            const json& jobjects = need(jf, "objects", line_no);
            if (!jobjects.is_array()) fail_at(line_no, "field \"objects\" must be an array");
            for (const json& jo : jobjects) {
                GtObject obj;
                obj.id = need(jo, "id", line_no).get<int>();
                obj.class_id = need(jo, "class", line_no).get<int>();
                const json& jb = need(jo, "box", line_no);
                if (!jb.is_array() || jb.size() != 4) fail_at(line_no, "field \"box\" must hold 4 numbers");
                obj.box = Box{jb[0].get<double>(), jb[1].get<double>(), jb[2].get<double>(),
                              jb[3].get<double>()};
                if (!obj.box.valid()) fail_at(line_no, "field \"box\" is degenerate");
                obj.feature = nested_to_tensor(need(jo, "feature", line_no), 1, line_no, "feature");
                frame.objects.push_back(std::move(obj));
            }

            const json& jtriplets = need(jf, "triplets", line_no);
            if (!jtriplets.is_array()) fail_at(line_no, "field \"triplets\" must be an array");
            for (const json& jt : jtriplets) {
                GtTriplet trip;
                trip.subj_id = need(jt, "subj", line_no).get<int>();
                trip.obj_id = need(jt, "obj", line_no).get<int>();
                const json& jp = need(jt, "predicates", line_no);
                if (!jp.is_array() || jp.empty())
                    fail_at(line_no, "field \"predicates\" must be a non-empty array");
                for (const json& p : jp) trip.predicates.push_back(p.get<int>());
                auto exists = [&](int id) {
                    for (const GtObject& o : frame.objects)
                        if (o.id == id) return true;
                    return false;
                };
                if (!exists(trip.subj_id) || !exists(trip.obj_id))
                    fail_at(line_no, "triplet references a nonexistent detection");
                frame.triplets.push_back(std::move(trip));
            }
            video.frames.push_back(std::move(frame));
        }
        dataset.push_back(std::move(video));
    }
    return dataset;
}

std::vector<long> predicate_histogram(const Dataset& dataset, int predicate_classes) {
    if (predicate_classes < 1) throw std::invalid_argument("predicate class count must be positive");
    std::vector<long> counts(static_cast<size_t>(predicate_classes), 0);
    for (const VideoSample& video : dataset)
        for (const VideoFrame& frame : video.frames)
            for (const GtTriplet& trip : frame.triplets)
                for (int p : trip.predicates) {
                    if (p < 0 || p >= predicate_classes)
                        throw std::out_of_range("predicate label outside the class range");
                    counts[static_cast<size_t>(p)] += 1;
                }
    return counts;
}

}  // namespace flocode

#include "flocode/flowwarp.hpp"

#include <cmath>
#include <stdexcept>

namespace flocode {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Bilinear read with zero padding; (x, y) in pixel-center coordinates.
double sample(const double* plane, int h, int w, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    auto at = [&](int yy, int xx) -> double {
        if (xx < 0 || xx >= w || yy < 0 || yy >= h) return 0.0;
        return plane[yy * w + xx];
    };
    return (1.0 - fx) * (1.0 - fy) * at(y0, x0) + fx * (1.0 - fy) * at(y0, x0 + 1) +
           (1.0 - fx) * fy * at(y0 + 1, x0) + fx * fy * at(y0 + 1, x0 + 1);
}

}  // namespace

Tensor bilinear_warp(const Tensor& map, const Tensor& flow) {
    require(map.ndim() == 3, "bilinear_warp: map must be [C,H,W]");
    require(flow.ndim() == 3 && flow.dim(0) == 2, "bilinear_warp: flow must be [2,H,W]");
    const int c = map.dim(0), h = map.dim(1), w = map.dim(2);
    require(flow.dim(1) == h && flow.dim(2) == w, "bilinear_warp: flow size mismatch");

    const double* md = map.data();
    const double* dx = flow.data();
    const double* dy = dx + static_cast<std::size_t>(h) * w;
    std::vector<double> out(static_cast<std::size_t>(map.numel()));
    for (int ci = 0; ci < c; ++ci) {
        const double* plane = md + static_cast<std::size_t>(ci) * h * w;
        double* op = out.data() + static_cast<std::size_t>(ci) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int i = y * w + x;
                op[i] = sample(plane, h, w, x + dx[i], y + dy[i]);
            }
    }
    Tensor t = Tensor::from_data_unchecked(map.shape(), std::move(out));
    t.check_finite("bilinear_warp");
    return t;
}

Tensor compose_flows(const Tensor& first, const Tensor& then) {
    require(first.ndim() == 3 && first.dim(0) == 2, "compose_flows: fields must be [2,H,W]");
    require(first.same_shape(then), "compose_flows: field shapes must match");
    const int h = first.dim(1), w = first.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    const double* fx = first.data();
    const double* fy = fx + plane;
    const double* gx = then.data();
    const double* gy = gx + plane;
    std::vector<double> out(2 * plane);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int i = y * w + x;
            const double mx = x + fx[i];
            const double my = y + fy[i];
            out[static_cast<std::size_t>(i)] = fx[i] + sample(gx, h, w, mx, my);
            out[plane + static_cast<std::size_t>(i)] = fy[i] + sample(gy, h, w, mx, my);
        }
    Tensor t = Tensor::from_data_unchecked(first.shape(), std::move(out));
    t.check_finite("compose_flows");
    return t;
}

Tensor roi_pool(const Tensor& map, const Box& box, int grid, bool flatten) {
    require(map.ndim() == 3, "roi_pool: map must be [C,H,W]");
    require(grid >= 1, "roi_pool: grid must be >= 1");
    require(box.x2 > box.x1 && box.y2 > box.y1, "roi_pool: degenerate box");
    const int c = map.dim(0), h = map.dim(1), w = map.dim(2);
    require(box.x1 >= 0.0 && box.y1 >= 0.0 && box.x2 <= w - 1.0 && box.y2 <= h - 1.0,
            "roi_pool: box outside frame bounds");

    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(flatten ? c * grid * grid : c));
    for (int ci = 0; ci < c; ++ci) {
        const double* plane = map.data() + static_cast<std::size_t>(ci) * h * w;
        double acc = 0.0;
        for (int gy = 0; gy < grid; ++gy) {
            const double sy = box.y1 + (gy + 0.5) * (box.y2 - box.y1) / grid;
            for (int gx = 0; gx < grid; ++gx) {
                const double sx = box.x1 + (gx + 0.5) * (box.x2 - box.x1) / grid;
                const double v = sample(plane, h, w, sx, sy);
                if (flatten)
                    out.push_back(v);
                else
                    acc += v;
            }
        }
        if (!flatten) out.push_back(acc / (grid * grid));
    }
    if (flatten) return Tensor::from_data({c * grid * grid}, std::move(out));
    return Tensor::from_data({c}, std::move(out));
}

FlowProvider::FlowProvider(std::vector<Tensor> step_fields) : steps_(std::move(step_fields)) {
    require(!steps_.empty(), "FlowProvider: no frames");
    for (std::size_t t = 1; t < steps_.size(); ++t) {
        const Tensor& f = steps_[t];
        require(f.ndim() == 3 && f.dim(0) == 2, "FlowProvider: step field must be [2,H,W]");
        if (height_ == 0) {
            height_ = f.dim(1);
            width_ = f.dim(2);
        }
        require(f.dim(1) == height_ && f.dim(2) == width_, "FlowProvider: inconsistent field sizes");
    }
    if (height_ == 0 && !steps_.empty() && !steps_[0].empty()) {
        height_ = steps_[0].dim(1);
        width_ = steps_[0].dim(2);
    }
}

Tensor FlowProvider::field(int t, int t_src) const {
    require(t >= 0 && t < frames(), "FlowProvider: frame out of range");
    require(t_src >= 0 && t_src <= t, "FlowProvider: source frame must not be later");
    if (t_src == t) return Tensor::zeros({2, height_, width_});
    Tensor acc = steps_[static_cast<std::size_t>(t)];  // t -> t-1
    for (int s = t - 1; s > t_src; --s) acc = compose_flows(acc, steps_[static_cast<std::size_t>(s)]);
    return acc;
}

std::vector<ObjectSequence> build_object_sequences(const VideoSample& video,
                                                   const FlowProvider& flows,
                                                   const SequenceOptions& options) {
    std::vector<ObjectSequence> sequences;
    // Deterministic scan order: frames ascending, objects in stored order.
    for (int t = 0; t < static_cast<int>(video.frames.size()); ++t) {
        const auto& objects = video.frames[static_cast<std::size_t>(t)].objects;
        for (int oi = 0; oi < static_cast<int>(objects.size()); ++oi) {
            const GtObject& det = objects[static_cast<std::size_t>(oi)];

            ObjectSequence* seq = nullptr;
            for (auto& s : sequences) {
                const bool same_group = options.by_instance ? (s.track_id == det.id)
                                                            : (s.class_id == det.class_id);
                // By-class: two same-class detections in one frame must not
                // share a chain, so take the first chain not yet at frame t.
                if (same_group && s.entries.back().frame < t) {
                    seq = &s;
                    break;
                }
                if (options.by_instance && same_group)
                    throw std::invalid_argument(
                        "build_object_sequences: duplicate object id within a frame");
            }

            SequenceEntry entry;
            entry.frame = t;
            entry.object_index = oi;
            if (seq == nullptr) {
                entry.warped = false;
                entry.feature = det.feature;
                ObjectSequence fresh;
                fresh.class_id = det.class_id;
                fresh.track_id = options.by_instance ? det.id : -1;
                fresh.entries.push_back(std::move(entry));
                sequences.push_back(std::move(fresh));
            } else {
                const int t_prev = seq->entries.back().frame;
                if (options.warp) {
                    const Tensor& prev_map =
                        video.frames[static_cast<std::size_t>(t_prev)].feature_map;
                    Tensor aligned = bilinear_warp(prev_map, flows.field(t, t_prev));
                    entry.warped = true;
                    entry.feature = roi_pool(aligned, det.box, options.grid, options.flatten);
                } else {
                    entry.warped = false;
                    entry.feature = det.feature;
                }
                seq->entries.push_back(std::move(entry));
            }
        }
    }
    return sequences;
}

}  // namespace flocode

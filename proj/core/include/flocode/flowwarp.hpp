#pragma once

#include <vector>

#include "flocode/data.hpp"
#include "flocode/geometry.hpp"
#include "flocode/tensor.hpp"

namespace flocode {

/// Backward-warps a feature map: out(c, y, x) samples `map` bilinearly at
/// (x + flow_dx(y,x), y + flow_dy(y,x)). `map` is [C,H,W], `flow` is [2,H,W]
/// with channel 0 = dx, channel 1 = dy. Samples outside the map read as zero.
Tensor bilinear_warp(const Tensor& map, const Tensor& flow);

/// Chains two displacement fields. `first` maps positions in the output
/// domain into the domain of `then`; the result is
/// out(x) = first(x) + then(x + first(x)), with `then` sampled bilinearly
/// (zero displacement outside the map).
Tensor compose_flows(const Tensor& first, const Tensor& then);

/// Pools a box from a [C,H,W] map on a grid x grid lattice of bilinear
/// samples. Box corners live in pixel-center coordinates [0, W-1] x [0, H-1];
/// sample g along an axis sits at lo + (g + 0.5) * (hi - lo) / grid.
/// Returns [C*grid*grid] when flatten is true, otherwise the per-channel
/// mean as [C].
Tensor roi_pool(const Tensor& map, const Box& box, int grid, bool flatten);

/// Per-video step flows: step_fields[t] is the [2,H,W] field aligned to
/// frame t whose displacements land in frame t-1. step_fields[0] is ignored
/// (there is no earlier frame) and may be empty.
class FlowProvider {
public:
    explicit FlowProvider(std::vector<Tensor> step_fields);

    int frames() const { return static_cast<int>(steps_.size()); }

    /// Displacement field aligned to frame t that lands in frame t_src <= t.
    /// field(t, t) is identically zero; longer gaps are step compositions.
    Tensor field(int t, int t_src) const;

private:
    std::vector<Tensor> steps_;
    int height_ = 0, width_ = 0;
};

/// One temporally ordered occurrence chain of an object (class or instance).
struct SequenceEntry {
    int frame = -1;
    int object_index = -1;  // index into VideoFrame::objects of that frame
    bool warped = false;
    Tensor feature;
};

struct ObjectSequence {
    int class_id = -1;
    int track_id = -1;  // -1 under by-class grouping
    std::vector<SequenceEntry> entries;
};

struct SequenceOptions {
    int grid = 2;           // pooling lattice per axis
    bool flatten = true;    // channel-major C*grid*grid features vs per-channel mean
    bool by_instance = false;  // group by object id instead of class
    bool warp = true;       // false: every entry uses its raw detection feature
};

/// Builds temporally consistent feature sequences for one video. The first
/// entry of each sequence keeps the detection's own feature; every later
/// entry warps the previous occurrence's full map to the current frame via
/// the composed flow and pools it at the current box. Same-class detections
/// sharing a frame split into parallel sequences under by-class grouping so
/// frame indices stay strictly increasing and every detection lands in
/// exactly one entry.
std::vector<ObjectSequence> build_object_sequences(const VideoSample& video,
                                                   const FlowProvider& flows,
                                                   const SequenceOptions& options);

}  // namespace flocode

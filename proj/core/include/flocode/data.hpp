#pragma once

#include <vector>

#include "flocode/geometry.hpp"
#include "flocode/tensor.hpp"

namespace flocode {

/// One annotated (or detected) object in a frame. `feature` is the pooled
/// appearance vector; `id` is stable across the frames of a video.
struct GtObject {
    int id = -1;
    int class_id = -1;
    Box box;
    Tensor feature;
};

/// Multi-label relation annotation between two objects of the same frame.
struct GtTriplet {
    int subj_id = -1;
    int obj_id = -1;
    std::vector<int> predicates;
};

struct VideoFrame {
    Tensor feature_map;  // [C,H,W]
    Tensor flow;         // [2,H,W] displacements landing in the previous frame
    std::vector<GtObject> objects;
    std::vector<GtTriplet> triplets;
};

struct VideoSample {
    std::vector<VideoFrame> frames;
};

using Dataset = std::vector<VideoSample>;

}  // namespace flocode

#pragma once

#include <vector>

namespace flocode {

/// Axis-aligned box in continuous pixel coordinates, corners (x1,y1)-(x2,y2).
struct Box {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const;
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }
    bool valid() const { return x2 > x1 && y2 > y1; }
};

double iou(const Box& a, const Box& b);
Box union_box(const Box& a, const Box& b);

/// Greedy non-maximum suppression within one class; returns kept indices in
/// descending score order. Ties broken by lower index.
std::vector<int> nms(const std::vector<Box>& boxes, const std::vector<double>& scores,
                     double iou_threshold);

}  // namespace flocode

#include "flocode/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace flocode {

double Box::area() const {
    return std::max(0.0, x2 - x1) * std::max(0.0, y2 - y1);
}

double iou(const Box& a, const Box& b) {
    const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

Box union_box(const Box& a, const Box& b) {
    return {std::min(a.x1, b.x1), std::min(a.y1, b.y1),
            std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
}

std::vector<int> nms(const std::vector<Box>& boxes, const std::vector<double>& scores,
                     double iou_threshold) {
    if (boxes.size() != scores.size())
        throw std::invalid_argument("nms: boxes/scores length mismatch");
    std::vector<int> order(boxes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
        if (scores[static_cast<size_t>(i)] != scores[static_cast<size_t>(j)])
            return scores[static_cast<size_t>(i)] > scores[static_cast<size_t>(j)];
        return i < j;
    });
    std::vector<int> kept;
    std::vector<char> suppressed(boxes.size(), 0);
    for (int i : order) {
        if (suppressed[static_cast<size_t>(i)]) continue;
        kept.push_back(i);
        for (int j : order) {
            if (j == i || suppressed[static_cast<size_t>(j)]) continue;
            if (iou(boxes[static_cast<size_t>(i)], boxes[static_cast<size_t>(j)]) > iou_threshold)
                suppressed[static_cast<size_t>(j)] = 1;
        }
    }
    return kept;
}

}  // namespace flocode

#include "doctest.h"
#include "flocode/geometry.hpp"

using flocode::Box;

TEST_CASE("iou on overlapping boxes") {
    Box a{0, 0, 10, 10};
    Box b{0, 0, 10, 9};
    CHECK(flocode::iou(a, b) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(flocode::iou(b, a) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(flocode::iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("iou of disjoint and touching boxes is zero") {
    Box a{0, 0, 1, 1};
    Box b{2, 2, 3, 3};
    CHECK(flocode::iou(a, b) == 0.0);
    Box c{1, 0, 2, 1};  // shares an edge only
    CHECK(flocode::iou(a, c) == 0.0);
}

TEST_CASE("iou of contained box is area ratio") {
    Box outer{0, 0, 4, 4};
    Box inner{1, 1, 3, 3};
    CHECK(flocode::iou(outer, inner) == doctest::Approx(4.0 / 16.0).epsilon(1e-12));
}

TEST_CASE("union_box covers both inputs") {
    Box a{0, 0, 2, 2};
    Box b{1, -1, 5, 1};
    Box u = flocode::union_box(a, b);
    CHECK(u.x1 == 0.0);
    CHECK(u.y1 == -1.0);
    CHECK(u.x2 == 5.0);
    CHECK(u.y2 == 2.0);
}

TEST_CASE("nms keeps the best of overlapping boxes") {
    std::vector<Box> boxes = {{0, 0, 10, 10}, {1, 1, 11, 11}, {20, 20, 30, 30}};
    std::vector<double> scores = {0.8, 0.9, 0.5};
    std::vector<int> kept = flocode::nms(boxes, scores, 0.4);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0] == 1);  // highest score first
    CHECK(kept[1] == 2);
}

TEST_CASE("nms tie-break prefers the lower index") {
    std::vector<Box> boxes = {{0, 0, 10, 10}, {0, 0, 10, 10}};
    std::vector<double> scores = {0.7, 0.7};
    std::vector<int> kept = flocode::nms(boxes, scores, 0.4);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0] == 0);
}

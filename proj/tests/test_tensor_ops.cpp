#include "doctest.h"
#include "flocode/tensor.hpp"
#include "flocode/tensor_ops.hpp"

#include <cmath>

using flocode::Tensor;
namespace ops = flocode::ops;

TEST_CASE("matmul matches hand-computed product") {
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from_data({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = ops::matmul(a, b);
    CHECK(c(0, 0) == doctest::Approx(58).epsilon(1e-12));
    CHECK(c(0, 1) == doctest::Approx(64).epsilon(1e-12));
    CHECK(c(1, 0) == doctest::Approx(139).epsilon(1e-12));
    CHECK(c(1, 1) == doctest::Approx(154).epsilon(1e-12));
    CHECK_THROWS(ops::matmul(a, a));
}

TEST_CASE("transpose and concat") {
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor at = ops::transpose(a);
    CHECK(at.dim(0) == 3);
    CHECK(at(2, 1) == 6.0);

    Tensor b = Tensor::from_data({2, 1}, {9, 10});
    Tensor cols = ops::concat(a, b, 1);
    CHECK(cols.dim(1) == 4);
    CHECK(cols(0, 3) == 9.0);
    CHECK(cols(1, 0) == 4.0);

    Tensor c = Tensor::from_data({1, 3}, {7, 8, 9});
    Tensor rows = ops::concat(a, c, 0);
    CHECK(rows.dim(0) == 3);
    CHECK(rows(2, 0) == 7.0);
}

TEST_CASE("softmax rows are stable and normalized") {
    Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 1000, 1000, 1000});
    Tensor y = ops::softmax_rows(x);
    for (int i = 0; i < 2; ++i) {
        double s = y(i, 0) + y(i, 1) + y(i, 2);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(y(1, 0) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(y(0, 2) > y(0, 1));

    // Shifting a row by a constant leaves the softmax unchanged.
    Tensor xs = Tensor::from_data({1, 3}, {1 + 500.0, 2 + 500.0, 3 + 500.0});
    Tensor ys = ops::softmax_rows(xs);
    for (int j = 0; j < 3; ++j)
        CHECK(ys(0, j) == doctest::Approx(y(0, j)).epsilon(1e-12));
}

TEST_CASE("masked positions vanish after softmax") {
    Tensor x = Tensor::from_data({1, 3}, {5.0, 1.0, 2.0});
    Tensor mask = Tensor::from_data({1, 3}, {1, 0, 1});
    Tensor y = ops::softmax_rows(ops::masked_fill(x, mask));
    CHECK(y(0, 1) == 0.0);  // exactly zero: the filled score underflows
    CHECK(y(0, 0) + y(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sigmoid extremes and gelu fixed points") {
    Tensor x = Tensor::from_data({4}, {0.0, 1000.0, -1000.0, 1.0});
    Tensor y = ops::sigmoid(x);
    CHECK(y(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y(1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(y(2) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(y(3) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-14));

    Tensor g = ops::gelu(Tensor::from_data({3}, {0.0, 10.0, -10.0}));
    CHECK(g(0) == 0.0);
    CHECK(g(1) == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(std::fabs(g(2)) < 1e-8);
}

TEST_CASE("layer_norm produces zero mean unit variance before affine") {
    Tensor x = Tensor::from_data({2, 4}, {1, 2, 3, 4, -5, 0, 5, 10});
    Tensor gain = Tensor::full({4}, 1.0);
    Tensor bias = Tensor::zeros({4});
    Tensor y = ops::layer_norm(x, gain, bias);
    for (int i = 0; i < 2; ++i) {
        double m = 0, v = 0;
        for (int j = 0; j < 4; ++j) m += y(i, j);
        m /= 4;
        for (int j = 0; j < 4; ++j) v += (y(i, j) - m) * (y(i, j) - m);
        v /= 4;
        CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(v == doctest::Approx(1.0).epsilon(1e-4));  // eps shifts variance slightly
    }
}

TEST_CASE("l2_normalize rows") {
    Tensor x = Tensor::from_data({2, 2}, {3, 4, 0, 5});
    Tensor y = ops::l2_normalize(x);
    CHECK(y(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(y(0, 1) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(y(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS(ops::l2_normalize(Tensor::zeros({1, 3})));
}

TEST_CASE("reductions") {
    Tensor x = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    CHECK(ops::sum(x) == 10.0);
    CHECK(ops::mean(x) == 2.5);
    Tensor y = Tensor::from_data({2, 2}, {2, 0, 1, 1});
    CHECK(ops::dot(x, y) == doctest::Approx(9.0));
    CHECK(ops::l2_norm(Tensor::from_data({2}, {3, 4})) == doctest::Approx(5.0));
}

TEST_CASE("exp log scale add") {
    Tensor x = Tensor::from_data({2}, {0.0, 1.0});
    Tensor e = ops::exp(x);
    CHECK(e(0) == 1.0);
    CHECK(e(1) == doctest::Approx(M_E).epsilon(1e-14));
    Tensor l = ops::log(e);
    CHECK(l(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS(ops::log(Tensor::from_data({1}, {0.0})));

    Tensor s = ops::scale(x, -2.0);
    CHECK(s(1) == -2.0);
    Tensor a = ops::add_scalar(x, 0.5);
    CHECK(a(0) == 0.5);
    CHECK_THROWS(ops::add(x, Tensor::zeros({3})));
}

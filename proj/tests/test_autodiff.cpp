#include "doctest.h"
#include "flocode/autodiff.hpp"
#include "flocode/grad_check.hpp"
#include "flocode/params.hpp"
#include "flocode/rng.hpp"

#include <cmath>

using namespace flocode;
namespace ad = flocode::ad;

namespace {

// Runs the central-difference comparison for a graph over named parameters.
double max_rel_error(ParamStore& store,
                     const std::function<ad::VarPtr(ParamContext&)>& build) {
    return check_gradients(store, build, 1e-5).max_rel_error;
}

ParamStore random_store(Rng& rng, const std::vector<std::pair<std::string, std::vector<int>>>& specs) {
    ParamStore store;
    for (const auto& [name, shape] : specs)
        store.insert(name, normal_init(rng, 0.5, shape));
    return store;
}

}  // namespace

TEST_CASE("closed-form gradient of sum(x*x) is 2x") {
    Tensor x = Tensor::from_data({3}, {1.0, -2.0, 0.5});
    auto vx = ad::leaf(x);
    auto loss = ad::sum(ad::mul(vx, vx));
    ad::backward(loss);
    Tensor g = vx->grad_tensor();
    CHECK(g(0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(g(1) == doctest::Approx(-4.0).epsilon(1e-14));
    CHECK(g(2) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("gradient accumulates when a node is reused") {
    auto vx = ad::leaf(Tensor::scalar(3.0));
    auto loss = ad::add(ad::mul(vx, vx), ad::scale(vx, 4.0));  // x^2 + 4x
    ad::backward(loss);
    CHECK(vx->grad_tensor().item() == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("matmul chain matches central differences") {
    Rng rng(7);
    ParamStore store = random_store(rng, {{"a", {3, 4}}, {"b", {4, 2}}});
    double err = max_rel_error(store, [](ParamContext& ctx) {
        return ad::sum(ad::matmul(ctx["a"], ctx["b"]));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("nonlinearity gradients match central differences") {
    Rng rng(11);
    ParamStore store = random_store(rng, {{"x", {2, 5}}});
    // Weighted sum, so row-normalizing ops keep a nonzero gradient.
    Tensor w = normal_init(rng, 1.0, {2, 5});
    auto check = [&](const std::function<ad::VarPtr(ad::VarPtr)>& f) {
        return max_rel_error(store, [&](ParamContext& ctx) {
            return ad::dot(f(ctx["x"]), ad::constant(w));
        });
    };
    CHECK(check([](ad::VarPtr v) { return ad::sigmoid(v); }) < 1e-6);
    CHECK(check([](ad::VarPtr v) { return ad::gelu(v); }) < 1e-6);
    CHECK(check([](ad::VarPtr v) { return ad::softmax_rows(v); }) < 1e-5);
    CHECK(check([](ad::VarPtr v) { return ad::exp(v); }) < 1e-6);
    CHECK(check([](ad::VarPtr v) { return ad::square(v); }) < 1e-6);
    CHECK(check([](ad::VarPtr v) { return ad::l2_normalize_rows(v); }) < 1e-5);
}

TEST_CASE("layer_norm gradients for input gain and bias") {
    Rng rng(13);
    ParamStore store = random_store(rng, {{"x", {3, 6}}, {"g", {6}}, {"b", {6}}});
    double err = max_rel_error(store, [](ParamContext& ctx) {
        return ad::sum(ad::layer_norm(ctx["x"], ctx["g"], ctx["b"]));
    });
    CHECK(err < 1e-5);
}

TEST_CASE("structural op gradients") {
    Rng rng(17);
    ParamStore store = random_store(rng, {{"x", {3, 4}}, {"y", {3, 2}}, {"b", {1, 4}}});
    double err = max_rel_error(store, [](ParamContext& ctx) {
        auto cat = ad::concat_cols(ctx["x"], ctx["y"]);          // [3,6]
        auto t = ad::transpose(cat);                             // [6,3]
        auto s = ad::slice_rows(t, 1, 4);                        // [4,3]
        auto r = ad::reshape(s, {3, 4});
        auto withb = ad::add_rowvec(r, ctx["b"]);
        auto sm = ad::softmax_rows(withb);
        return ad::mean(ad::mul(sm, r));
    });
    CHECK(err < 1e-5);

    ParamStore store2 = random_store(rng, {{"r0", {1, 3}}, {"r1", {1, 3}}});
    double err2 = max_rel_error(store2, [](ParamContext& ctx) {
        auto m = ad::stack_rows({ctx["r0"], ctx["r1"], ctx["r0"]});
        return ad::sum(ad::mul(m, m));
    });
    CHECK(err2 < 1e-6);
}

TEST_CASE("division and row-normalization gradients") {
    Rng rng(19);
    ParamStore store;
    store.insert("x", normal_init(rng, 0.3, {3, 4}));
    {
        // keep denominators away from zero
        std::vector<double> d = {1.5, 2.0, 0.7, 1.1, 3.0, 0.9, 1.3, 2.2, 0.8, 1.9, 2.4, 1.05};
        store.insert("d", Tensor::from_data({3, 4}, d));
    }
    double err = max_rel_error(store, [](ParamContext& ctx) {
        return ad::sum(ad::div(ctx["x"], ctx["d"]));
    });
    CHECK(err < 1e-6);

    double err2 = max_rel_error(store, [](ParamContext& ctx) {
        auto p = ad::exp(ctx["x"]);          // positive rows
        auto z = ad::rowsum(p);              // [3,1]
        auto n = ad::div_rows(p, z);         // rows sum to one
        return ad::sum(ad::mul(n, ctx["d"]));
    });
    CHECK(err2 < 1e-5);
}

TEST_CASE("clamp passes gradient only strictly inside the interval") {
    auto v = ad::leaf(Tensor::from_data({3}, {-2.0, 0.3, 2.0}));
    auto loss = ad::sum(ad::clamp(v, -1.0, 1.0));
    ad::backward(loss);
    Tensor g = v->grad_tensor();
    CHECK(g(0) == 0.0);
    CHECK(g(1) == 1.0);
    CHECK(g(2) == 0.0);
}

TEST_CASE("masked_fill blocks gradient through softmax at masked positions") {
    auto v = ad::leaf(Tensor::from_data({1, 3}, {1.0, 2.0, 3.0}));
    Tensor mask = Tensor::from_data({1, 3}, {1, 0, 1});
    auto y = ad::softmax_rows(ad::masked_fill(v, mask));
    auto loss = ad::sum(ad::mul(y, y));
    ad::backward(loss);
    Tensor g = v->grad_tensor();
    CHECK(g(0, 1) == 0.0);  // masked score cannot influence the loss
    CHECK(g(0, 0) != 0.0);
}

TEST_CASE("backward rejects non-scalar roots and constant graphs") {
    auto v = ad::leaf(Tensor::from_data({2}, {1, 2}));
    CHECK_THROWS(ad::backward(ad::mul(v, v)));
    auto c = ad::constant(Tensor::scalar(1.0));
    CHECK_THROWS(ad::backward(ad::sum(c)));
}

TEST_CASE("probe sampling in the gradient checker") {
    Rng rng(23);
    ParamStore store = random_store(rng, {{"w", {8, 8}}});
    Rng probes(99);
    GradReport rep = check_gradients(
        store,
        [](ParamContext& ctx) { return ad::sum(ad::gelu(ctx["w"])); },
        1e-5, 10, &probes);
    CHECK(rep.probes <= 10);
    CHECK(rep.probes > 0);
    CHECK(rep.max_rel_error < 1e-6);
}

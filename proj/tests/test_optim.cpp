#include "doctest.h"
#include "flocode/optim.hpp"
#include "flocode/serialize.hpp"
#include "flocode/tensor_ops.hpp"

#include <cmath>
#include <sstream>

using namespace flocode;

TEST_CASE("one update step matches the published rule computed by hand") {
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.01;
    AdamW opt(cfg);

    ParamStore store;
    store.insert("w", Tensor::from_data({1, 1}, {1.0}));
    opt.step(store, {{"w", Tensor::from_data({1, 1}, {0.5})}});

    // m = 0.1*0.5, v = 0.001*0.25; bias corrections cancel those factors at
    // t=1, so m_hat = 0.5, v_hat = 0.25.
    double m_hat = 0.5;
    double v_hat = 0.25;
    double expect = 1.0 - 0.1 * (m_hat / (std::sqrt(v_hat) + cfg.eps) + 0.01 * 1.0);
    CHECK(store.get("w").item() == doctest::Approx(expect).epsilon(1e-15));
    CHECK(opt.step_count("w") == 1);
}

TEST_CASE("weight decay applies even when the gradient is zero") {
    AdamWConfig cfg;
    cfg.lr = 0.2;
    cfg.weight_decay = 0.5;
    AdamW opt(cfg);
    ParamStore store;
    store.insert("w", Tensor::from_data({1, 2}, {4.0, -2.0}));
    opt.step(store, {{"w", Tensor::zeros({1, 2})}});
    // Zero gradient keeps both moments zero, so only decay acts: w *= 1 - lr*wd.
    CHECK(store.get("w")(0, 0) == doctest::Approx(4.0 * 0.9).epsilon(1e-15));
    CHECK(store.get("w")(0, 1) == doctest::Approx(-2.0 * 0.9).epsilon(1e-15));
}

TEST_CASE("optimizer drives a quadratic to its minimum") {
    AdamWConfig cfg;
    cfg.lr = 0.05;
    cfg.weight_decay = 0.0;
    AdamW opt(cfg);
    ParamStore store;
    store.insert("x", Tensor::from_data({1, 2}, {5.0, -3.0}));
    Tensor target = Tensor::from_data({1, 2}, {1.5, 0.25});

    for (int it = 0; it < 800; ++it) {
        ParamContext ctx(store);
        auto diff = ad::sub(ctx["x"], ad::constant(target));
        auto loss = ad::sum(ad::square(diff));
        ad::backward(loss);
        opt.step(store, ctx.grads());
    }
    CHECK(store.get("x")(0, 0) == doctest::Approx(1.5).epsilon(1e-3));
    CHECK(store.get("x")(0, 1) == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("prefix groups choose learning rates by longest match") {
    AdamWConfig cfg;
    cfg.lr = 1e-2;
    cfg.weight_decay = 0.0;
    AdamW opt(cfg);
    opt.set_group_lr("rel.", 1e-3);
    opt.set_group_lr("rel.deep.", 1e-4);

    CHECK(opt.lr_for("obj.w") == 1e-2);
    CHECK(opt.lr_for("rel.w") == 1e-3);
    CHECK(opt.lr_for("rel.deep.w") == 1e-4);

    ParamStore store;
    store.insert("obj.w", Tensor::from_data({1, 1}, {1.0}));
    store.insert("rel.w", Tensor::from_data({1, 1}, {1.0}));
    Tensor g = Tensor::from_data({1, 1}, {1.0});
    opt.step(store, {{"obj.w", g}, {"rel.w", g}});
    double obj_delta = 1.0 - store.get("obj.w").item();
    double rel_delta = 1.0 - store.get("rel.w").item();
    CHECK(obj_delta == doctest::Approx(10.0 * rel_delta).epsilon(1e-9));

    // Retuning a group takes effect on the next step.
    opt.set_group_lr("rel.", 1e-2);
    CHECK(opt.lr_for("rel.w") == 1e-2);
}

TEST_CASE("optimizer state round-trips bit-exactly through save and load") {
    AdamWConfig cfg;
    cfg.lr = 0.01;
    AdamW opt(cfg);
    opt.set_group_lr("b.", 0.002);
    ParamStore store;
    store.insert("a", Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0}));
    store.insert("b.x", Tensor::from_data({1, 3}, {0.5, -0.5, 0.25}));

    Rng rng(77);
    auto random_grads = [&]() {
        std::map<std::string, Tensor> g;
        g.emplace("a", normal_init(rng, 1.0, {2, 2}));
        g.emplace("b.x", normal_init(rng, 1.0, {1, 3}));
        return g;
    };
    for (int i = 0; i < 5; ++i) opt.step(store, random_grads());

    std::stringstream buffer;
    opt.save(buffer);
    ParamStore fork_store = store;
    AdamW fork = AdamW::load(buffer);
    CHECK(fork.lr_for("b.x") == 0.002);
    CHECK(fork.step_count("a") == 5);

    // Continue both copies with identical gradients: trajectories must agree
    // bit for bit.
    Rng rng2(123);
    for (int i = 0; i < 5; ++i) {
        Tensor ga = normal_init(rng2, 1.0, {2, 2});
        Tensor gb = normal_init(rng2, 1.0, {1, 3});
        std::map<std::string, Tensor> g{{"a", ga}, {"b.x", gb}};
        opt.step(store, g);
        fork.step(fork_store, g);
    }
    CHECK(store.get("a").equals(fork_store.get("a")));
    CHECK(store.get("b.x").equals(fork_store.get("b.x")));
}

TEST_CASE("invalid optimizer inputs are rejected") {
    AdamW opt;
    ParamStore store;
    store.insert("w", Tensor::zeros({2, 2}));
    CHECK_THROWS(opt.step(store, {{"missing", Tensor::zeros({1, 1})}}));
    CHECK_THROWS(opt.step(store, {{"w", Tensor::zeros({1, 2})}}));

    AdamWConfig bad;
    bad.lr = 0.0;
    CHECK_THROWS(AdamW{bad});
    AdamWConfig bad2;
    bad2.beta1 = 1.0;
    CHECK_THROWS(AdamW{bad2});
}

TEST_CASE("plateau scheduler fires after the configured patience") {
    PlateauScheduler sched(0.5, 3);
    CHECK_FALSE(sched.observe(0.10));  // first value becomes the best
    CHECK_FALSE(sched.observe(0.09));  // bad 1
    CHECK_FALSE(sched.observe(0.10));  // ties are not improvements: bad 2
    CHECK(sched.observe(0.08));        // bad 3 -> reduce
    CHECK(sched.bad_epochs() == 0);    // counter restarts after firing
    CHECK(sched.best() == 0.10);
    CHECK_FALSE(sched.observe(0.11));  // improvement resets cleanly
    CHECK(sched.best() == 0.11);
    CHECK_FALSE(sched.observe(0.10));
    CHECK_FALSE(sched.observe(0.10));
    CHECK(sched.observe(0.10));

    CHECK_THROWS(PlateauScheduler(1.5, 3));
    CHECK_THROWS(PlateauScheduler(0.5, 0));
}

TEST_CASE("plateau scheduler state survives serialization") {
    PlateauScheduler sched(0.25, 2);
    sched.observe(0.5);
    sched.observe(0.4);  // bad 1
    std::stringstream buffer;
    sched.save(buffer);
    PlateauScheduler twin = PlateauScheduler::load(buffer);
    CHECK(twin.factor() == 0.25);
    CHECK(twin.patience() == 2);
    CHECK(twin.best() == 0.5);
    CHECK(twin.bad_epochs() == 1);
    // One more bad epoch fires on both.
    CHECK(sched.observe(0.3));
    CHECK(twin.observe(0.3));
}

TEST_CASE("binary tensor serialization preserves exact bits") {
    Rng rng(404);
    Tensor t = normal_init(rng, 3.0, {3, 5});
    std::stringstream buffer;
    io::write_tensor(buffer, t);
    io::write_f64(buffer, 0.1);
    io::write_string(buffer, "checkpoint/section");
    io::write_i64(buffer, -123456789012345LL);

    Tensor back = io::read_tensor(buffer);
    CHECK(back.equals(t));
    double d = io::read_f64(buffer);
    CHECK(d == 0.1);  // exact: raw bit transport
    CHECK(io::read_string(buffer) == "checkpoint/section");
    CHECK(io::read_i64(buffer) == -123456789012345LL);

    // Truncated stream surfaces as an error, not garbage.
    std::stringstream half;
    io::write_f64(half, 1.0);
    std::string bytes = half.str();
    std::stringstream cut(bytes.substr(0, 4));
    CHECK_THROWS(io::read_f64(cut));
}

#include "doctest.h"
#include "flocode/config.hpp"

#include <stdexcept>
#include <string>

using namespace flocode;

TEST_CASE("config parses dotted keys, comments, and blank lines") {
    KvConfig cfg = KvConfig::parse_text(
        "# training setup\n"
        "model.dim = 66   # inline comment\n"
        "\n"
        "train.lr = 2e-5\n"
        "train.epochs=12\n"
        "dataset.path = out/videos.jsonl\n"
        "debias.enabled = true\n");
    CHECK(cfg.size() == 5);
    CHECK(cfg.get_int("model.dim") == 66);
    CHECK(cfg.get_double("train.lr") == 2e-5);
    CHECK(cfg.get_int("train.epochs") == 12);
    CHECK(cfg.get_string("dataset.path") == "out/videos.jsonl");
    CHECK(cfg.get_bool("debias.enabled"));
}

TEST_CASE("config rejects malformed lines with their line number") {
    try {
        KvConfig::parse_text("a = 1\nb = 2\nnot a pair\n");
        FAIL("expected parse error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    try {
        KvConfig::parse_text("ok = 1\nx = \n");
        FAIL("expected parse error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        CHECK(std::string(e.what()).find("x") != std::string::npos);
    }
    CHECK_THROWS(KvConfig::parse_text("du.p = 1\ndu.p = 2\n"));
    CHECK_THROWS(KvConfig::parse_text(".bad = 1\n"));
    CHECK_THROWS(KvConfig::parse_text("ba d = 1\n"));
}

TEST_CASE("typed getters are strict about their formats") {
    KvConfig cfg = KvConfig::parse_text("n = 12x\nf = 1.5.2\nb = yes\nok = 7\n");
    CHECK_THROWS(cfg.get_int("n"));
    CHECK_THROWS(cfg.get_double("f"));
    CHECK_THROWS(cfg.get_bool("b"));
    CHECK(cfg.get_int("ok") == 7);
    CHECK(cfg.get_double("ok") == 7.0);
    CHECK_THROWS(cfg.get_int("absent"));

    // Defaults only cover absence, never malformed values.
    CHECK(cfg.get_int("absent", 42) == 42);
    CHECK_THROWS(cfg.get_int("n", 42));
    CHECK(cfg.get_bool("absent", true));
    CHECK(cfg.get_string("absent", "dflt") == "dflt");
}

TEST_CASE("boolean forms true/false/1/0 are accepted") {
    KvConfig cfg = KvConfig::parse_text("a = true\nb = false\nc = 1\nd = 0\n");
    CHECK(cfg.get_bool("a"));
    CHECK_FALSE(cfg.get_bool("b"));
    CHECK(cfg.get_bool("c"));
    CHECK_FALSE(cfg.get_bool("d"));
}

TEST_CASE("overrides replace file values and add new keys") {
    KvConfig base = KvConfig::parse_text("a = 1\nb = 2\n");
    KvConfig flags = KvConfig::parse_text("b = 20\nc = 30\n");
    base.merge_overrides(flags);
    CHECK(base.get_int("a") == 1);
    CHECK(base.get_int("b") == 20);
    CHECK(base.get_int("c") == 30);
}

TEST_CASE("serialization is sorted, stable, and round-trips") {
    KvConfig cfg;
    cfg.set("zeta.k", "5");
    cfg.set_double("alpha.lr", 2e-5);
    cfg.set_bool("mid.flag", false);
    cfg.set_int("mid.count", -3);

    std::string text = cfg.serialize();
    CHECK(text == "alpha.lr = 2.0000000000000002e-05\nmid.count = -3\nmid.flag = false\nzeta.k = 5\n");
    KvConfig back = KvConfig::parse_text(text);
    CHECK(back == cfg);
    CHECK(back.get_double("alpha.lr") == 2e-5);  // 17 digits round-trip exactly

    CHECK(cfg.hash() == back.hash());
    back.set("zeta.k", "6");
    CHECK(cfg.hash() != back.hash());
}

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "xfrl/config.hpp"
#include "xfrl/error.hpp"
#include "xfrl/report.hpp"

using namespace xfrl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

cfg::Config parse(const std::string& text) {
    return cfg::parse_config_text(text, "/cfg/test.ini");
}

}  // namespace

TEST_CASE("config parsing: sections, comments, whitespace, types") {
    cfg::Config c = parse(
        "# comment\n"
        "; another full-line comment\n"
        "[network]\n"
        "architecture = a_convnet\n"
        "num_classes = 3\n"
        "\n"
        "[train]\n"
        "base_lr = 0.01\n"
        "epochs=25\n"
        "lr_multipliers = 0.1, 0.1, 0.5, 1\n"
        "[adapt]\n"
        "adaptation_layers = 3,4\n"
        "[data]\n"
        "dir = sets/tgt\n"
        "[output]\n"
        "svg = true\n");

    CHECK(c.get_str("network.architecture") == "a_convnet");
    CHECK(c.get_int("network.num_classes") == 3);
    CHECK(c.get_double("train.base_lr") == 0.01);
    CHECK(c.get_int("train.epochs") == 25);
    CHECK(c.get_doubles("train.lr_multipliers") == std::vector<double>{0.1, 0.1, 0.5, 1.0});
    CHECK(c.get_ints("adapt.adaptation_layers") == std::vector<long>{3, 4});
    CHECK(c.get_bool_or("output.svg", false));
    CHECK(c.get_bool_or("output.checkpoint", true));
    CHECK(c.get_path("data.dir") == fs::path("/cfg/sets/tgt"));
    CHECK(c.get_int_or("train.batch_size", 32) == 32);
    CHECK(c.get_str_or("network.head", "classification") == "classification");
    CHECK(c.has("train.epochs"));
    CHECK(!c.has("train.seed"));
}

TEST_CASE("config diagnostics carry the origin and line number") {
    auto expect_fail = [&](const std::string& text, const std::string& needle) {
        try {
            parse(text);
            FAIL("expected config_error for: ", text);
        } catch (const config_error& e) {
            std::string msg = e.what();
            INFO("message: ", msg);
            CHECK(msg.find("test.ini") != std::string::npos);
            CHECK(msg.find(needle) != std::string::npos);
        }
    };

    expect_fail("[nosuch]\n", "nosuch");
    expect_fail("[train]\nwarmup = 5\n", "warmup");
    expect_fail("[train]\nepochs\n", ":2");
    expect_fail("epochs = 5\n", ":1");  // key before any section header
    expect_fail("[train\n", ":1");

    // duplicate keys report both line numbers
    try {
        parse("[train]\nepochs = 5\nepochs = 6\n");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        std::string msg = e.what();
        CHECK(msg.find(":3") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }

    // type errors cite the line of the bad value at lookup time
    try {
        parse("[train]\nepochs = soon\n").get_int("train.epochs");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        std::string msg = e.what();
        CHECK(msg.find(":2") != std::string::npos);
        CHECK(msg.find("soon") != std::string::npos);
    }
    CHECK_THROWS_AS(parse("[train]\nbase_lr = abc\n").get_double("train.base_lr"), config_error);
    CHECK_THROWS_AS(parse("[output]\nsvg = maybe\n").get_bool_or("output.svg", false),
                    config_error);

    // missing key lookups name the key
    cfg::Config c = parse("[train]\nepochs = 5\n");
    try {
        c.get_int("train.batch_size");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("train.batch_size") != std::string::npos);
    }
}

TEST_CASE("load_config reads files and resolves relative paths") {
    fs::path dir = fs::temp_directory_path() / "xfrl_cfg_test";
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "run.ini");
        f << "[data]\ndir = mydata\n[output]\ndir = out/run1\n";
    }
    cfg::Config c = cfg::load_config(dir / "run.ini");
    CHECK(c.get_path("data.dir") == dir / "mydata");
    CHECK(c.get_path("output.dir") == dir / "out/run1");
    CHECK_THROWS_AS(cfg::load_config(dir / "absent.ini"), io_error);
    fs::remove_all(dir);
}

TEST_CASE("fmt produces shortest round-trip decimals") {
    CHECK(rep::fmt(0.0) == "0");
    CHECK(rep::fmt(1.0) == "1");
    CHECK(rep::fmt(0.1) == "0.1");
    CHECK(rep::fmt(-2.5) == "-2.5");
    CHECK(rep::fmt(1.0 / 3.0) == "0.3333333333333333");
    // exact round trip
    for (double v : {0.1, 1e-17, 123456.789, -0.007, 2.0 / 7.0}) {
        CHECK(std::stod(rep::fmt(v)) == v);
    }
}

TEST_CASE("train log golden output") {
    fs::path p = fs::temp_directory_path() / "xfrl_train_log.csv";
    std::vector<rep::EpochRow> rows;
    rep::EpochRow r1;
    r1.epoch = 1;
    r1.loss_cls = 1.5;
    r1.mmd = {0.25, 0.125};
    r1.loss_total = 1.875;
    r1.test_acc = 0.5;
    rep::EpochRow r2;
    r2.epoch = 2;
    r2.loss_cls = 1.25;
    r2.mmd = {0.2, 0.1};
    r2.loss_total = 1.55;
    r2.test_acc = -1.0;  // not evaluated: empty cell
    rows = {r1, r2};
    rep::write_train_log(p, {3, 4}, rows);
    CHECK(slurp(p) ==
          "epoch,loss_cls,mmd_l3,mmd_l4,loss_total,test_acc\n"
          "1,1.5,0.25,0.125,1.875,0.5\n"
          "2,1.25,0.2,0.1,1.55,\n");

    // supervised shape: no mmd columns
    rep::EpochRow s1;
    s1.epoch = 1;
    s1.loss_cls = 2.0;
    s1.loss_total = 2.0;
    s1.test_acc = 0.25;
    rep::write_train_log(p, {}, {s1});
    CHECK(slurp(p) ==
          "epoch,loss_cls,loss_total,test_acc\n"
          "1,2,2,0.25\n");
    fs::remove(p);
}

TEST_CASE("sweep csv golden output") {
    fs::path p = fs::temp_directory_path() / "xfrl_sweep.csv";
    std::vector<rep::SweepRow> rows{{0, 0.5, 0.0}, {1, 0.625, 0.125}, {2, 0.4375, -0.0625}};
    rep::write_sweep_csv(p, rows);
    CHECK(slurp(p) ==
          "k,accuracy,relative_accuracy\n"
          "0,0.5,0\n"
          "1,0.625,0.125\n"
          "2,0.4375,-0.0625\n");
    fs::remove(p);
}

TEST_CASE("sweep svg anchors the accuracy axis at zero") {
    fs::path p = fs::temp_directory_path() / "xfrl_sweep.svg";
    std::vector<rep::SweepRow> rows{{0, 0.8, 0.0}, {1, 0.9, 0.1}, {2, 0.85, 0.05}};
    rep::write_sweep_svg(p, rows);
    std::string svg = slurp(p);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    // identical accuracies at different k must map to different x, same y
    rep::write_sweep_svg(p, {{0, 0.5, 0.0}, {5, 0.5, 0.0}});
    std::string svg2 = slurp(p);
    CHECK(svg2.find("polyline") != std::string::npos);
    fs::remove(p);
}

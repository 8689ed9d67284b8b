#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* p = std::getenv("VADFUSE_BIN");
    REQUIRE_MESSAGE(p != nullptr, "VADFUSE_BIN must point at the CLI binary");
    return p;
}

int run(const std::string& args) {
    const std::string cmd = binary() + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "vadfuse_cli";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

// One small, fast configuration shared by the whole pipeline walk-through.
fs::path small_config() {
    static fs::path p = [] {
        fs::path cfg = work_dir() / "run.cfg";
        std::ofstream out(cfg);
        out << "[paths]\n"
            << "out_dir = " << (work_dir() / "out").string() << "\n"
            << "[architecture]\n"
            << "cae_widths = 4,6\n"
            << "cae_downsample = 1,0\n"
            << "[training]\n"
            << "pretrain_epochs = 2\n"
            << "finetune_epochs = 2\n"
            << "batch_size = 8\n"
            << "seed = 7\n"
            << "[synth]\n"
            << "modalities = appearance:2:8x8,depth:2:6x6\n"
            << "train_videos = 2\n"
            << "test_videos = 2\n"
            << "frames_per_video = 40\n";
        return cfg;
    }();
    return p;
}

}  // namespace

TEST_CASE("missing required arguments fail with a nonzero exit") {
    CHECK(run("synth") != 0);
    CHECK(run("") != 0);
    CHECK(run("unknown-command --config x") != 0);
}

TEST_CASE("a missing config file exits with the config error code") {
    CHECK(run("synth --config /nonexistent/nowhere.cfg") == 2);
}

TEST_CASE("a malformed config exits with the config error code") {
    fs::path bad = work_dir() / "bad.cfg";
    {
        std::ofstream out(bad);
        out << "[training]\nnot_a_real_key = 5\n";
    }
    CHECK(run("synth --config " + bad.string()) == 2);

    fs::path bad2 = work_dir() / "bad2.cfg";
    {
        std::ofstream out(bad2);
        out << "[training]\nbatch_size = 1\n";
    }
    CHECK(run("synth --config " + bad2.string()) == 2);
}

TEST_CASE("pipeline commands run in order and leave their artifacts") {
    fs::path cfg = small_config();
    fs::path out = work_dir() / "out";

    REQUIRE(run("synth --config " + cfg.string()) == 0);
    CHECK(fs::exists(out / "data" / "train_manifest.json"));
    CHECK(fs::exists(out / "data" / "test_manifest.json"));

    REQUIRE(run("pretrain --config " + cfg.string()) == 0);
    CHECK(fs::exists(out / "cae.mawt"));
    CHECK(fs::exists(out / "pretrain_loss.csv"));

    REQUIRE(run("finetune --config " + cfg.string()) == 0);
    CHECK(fs::exists(out / "model.mawt"));
    CHECK(fs::exists(out / "finetune_loss.csv"));

    REQUIRE(run("score --config " + cfg.string()) == 0);
    CHECK(fs::exists(out / "scores.csv"));

    REQUIRE(run("eval --config " + cfg.string()) == 0);
    CHECK(fs::exists(out / "report.json"));
    CHECK(fs::exists(out / "curves"));

    std::ifstream rep(out / "report.json");
    nlohmann::json j = nlohmann::json::parse(rep);
    CHECK(j.contains("per_video"));
    CHECK(j.contains("average"));
    CHECK(j.contains("overall"));

    // scores.csv has the documented header and one row per test frame.
    std::ifstream sc(out / "scores.csv");
    std::string header;
    std::getline(sc, header);
    CHECK(header == "video_id,frame_index,score,label");
    int rows = 0;
    std::string line;
    while (std::getline(sc, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2 * 40);
}

TEST_CASE("scoring before training exits with the data error code") {
    fs::path cfg = work_dir() / "fresh.cfg";
    {
        std::ofstream out(cfg);
        out << "[paths]\nout_dir = " << (work_dir() / "fresh_out").string() << "\n";
    }
    CHECK(run("score --config " + cfg.string()) == 3);
    CHECK(run("eval --config " + cfg.string()) == 3);
    CHECK(run("pretrain --config " + cfg.string()) == 3);
}

TEST_CASE("the seed override changes synthetic payloads, out override relocates them") {
    fs::path cfg = small_config();
    fs::path alt = work_dir() / "alt_out";
    REQUIRE(run("synth --config " + cfg.string() + " --out " + alt.string() + " --seed 99") == 0);
    CHECK(fs::exists(alt / "data" / "train_manifest.json"));

    // Same config, different seed: at least one clip must differ from the
    // primary output tree.
    bool any_diff = false;
    for (auto& e : fs::recursive_directory_iterator(alt / "data")) {
        if (!e.is_regular_file() || e.path().extension() != ".mafc") continue;
        fs::path rel = fs::relative(e.path(), alt);
        fs::path other = work_dir() / "out" / rel;
        REQUIRE(fs::exists(other));
        std::ifstream a(e.path(), std::ios::binary), b(other, std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        if (sa.str() != sb.str()) any_diff = true;
    }
    CHECK(any_diff);
}

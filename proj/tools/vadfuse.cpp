// vadfuse: multimodal one-class video anomaly detection pipeline.
//
//   vadfuse synth|pretrain|finetune|score|eval --config <path> [--out <dir>] [--seed <u64>]
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "vad/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal one-class video anomaly detection"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false;

    for (const char* name : {"synth", "pretrain", "finetune", "score", "eval"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--out", out_dir, "override the output directory");
        sub->add_option("--seed", seed, "override the config seed")
            ->each([&](const std::string&) { seed_set = true; });
    }

    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();

    try {
        vad::RunConfig cfg = vad::parse_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed_set) cfg.seed = seed;
        cfg.validate();

        if (cmd == "synth") {
            vad::SynthResult res = vad::run_synth(cfg);
            std::cout << "train manifest: " << res.train_manifest.string() << "\n";
            std::cout << "test manifest: " << res.test_manifest.string() << "\n";
        } else if (cmd == "pretrain") {
            const auto losses = vad::run_pretrain(cfg);
            std::cout << "checkpoint: " << cfg.cae_checkpoint().string() << "\n";
            std::cout << "first epoch loss: " << losses.front()
                      << ", final epoch loss: " << losses.back() << "\n";
        } else if (cmd == "finetune") {
            const auto hist = vad::run_finetune(cfg);
            std::cout << "checkpoint: " << cfg.model_checkpoint().string() << "\n";
            std::cout << "central data term: epoch 1 = " << hist.central.front()
                      << ", final = " << hist.central.back() << "\n";
        } else if (cmd == "score") {
            vad::run_score(cfg);
            std::cout << "scores: " << cfg.scores_csv().string() << "\n";
        } else if (cmd == "eval") {
            const vad::AucReport report = vad::run_eval(cfg);
            std::cout << vad::report_to_json(report);
            std::cout << "report: " << cfg.report_json().string() << "\n";
        }
    } catch (const vad::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const vad::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const vad::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}

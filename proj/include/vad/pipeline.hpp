#pragma once

#include "vad/config.hpp"
#include "vad/metrics.hpp"

namespace vad {

// The five pipeline stages behind the CLI subcommands. Each validates its
// inputs before writing anything and is deterministic given the config.

// Synthetic dataset under <out_dir>/data plus both manifests.
SynthResult run_synth(const RunConfig& cfg);

// CAE pretraining on the depth-0 fused maps of the train split. Writes
// the CAE checkpoint and the "epoch,loss" CSV. Returns per-epoch loss.
std::vector<double> run_pretrain(const RunConfig& cfg);

// Center initialization plus SVDD fine-tuning starting from the CAE
// encoder. Writes the model checkpoint (centers included) and a loss CSV
// with per-branch data terms and the regularization term.
FinetuneHistory run_finetune(const RunConfig& cfg);

// Scores the test split with the fine-tuned model; one CSV row per frame
// ordered by (video_id, frame_index).
void run_score(const RunConfig& cfg);

// Reads the scores CSV, writes the report JSON and per-video curve CSVs.
AucReport run_eval(const RunConfig& cfg);

// Scores CSV parsing, exposed for the eval stage and tests.
std::vector<ScoreSeries> read_scores_csv(const std::filesystem::path& path);

}  // namespace vad

// SPDX-License-Identifier: Apache-2.0
//
// End-to-end experiment pipeline: configuration, the prepare / run /
// evaluate / compare stages and report rendering. Every stage is a pure
// function of its config plus the files the previous stage wrote, so a rerun
// from the same config reproduces every artifact byte for byte (manifest
// timestamps aside).

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gdg/corpus.hpp"
#include "gdg/metrics.hpp"
#include "gdg/model.hpp"
#include "gdg/prompting.hpp"
#include "gdg/stats.hpp"

namespace gdg::pipeline {

extern const char* const kToolVersion;

// Scheme selector string: base mode, optional "+" modifier, optional "@"
// grounding position, e.g. "continuous", "continuous+wo_co@post_gs",
// "discrete+speaker_pert".
struct SchemeSpec {
  prompting::Mode mode = prompting::Mode::kNone;
  bool wo_component = false;
  bool wo_speaker = false;
  std::optional<prompting::Perturbation> perturbation;
  prompting::GsPosition position = prompting::GsPosition::kPreContext;
};

SchemeSpec parse_scheme_name(const std::string& name);

struct PretrainConfig {
  std::size_t epochs = 4;
  double learning_rate = 3e-3;
  std::size_t batch_size = 16;
  std::size_t warmup_steps = 20;
};

struct PromptResources {
  std::optional<std::string> instruction;  // discrete template override
  std::string gs_label;                    // e.g. "knowledge"
  std::string gs_explanation;              // semantic init text for the GS indicator
  std::string context_explanation = "conversation";
};

struct RunConfig {
  std::string task;
  std::string corpus_path;
  std::string test_corpus_path;
  std::string out_dir;
  std::uint64_t master_seed = 7;

  std::string scheme = "none";
  std::string init = "semantic";
  prompting::Layout layout = prompting::Layout::kSingleSequence;
  corpus::FilterPolicy filter = corpus::FilterPolicy::kNone;
  corpus::TruncationLimits truncation;
  corpus::FewShotPlan plan;

  model::ToyLMConfig model;
  model::TrainConfig train;
  model::GenerationConfig generation;

  std::optional<std::string> base_checkpoint;
  std::optional<PretrainConfig> pretrain;
  PromptResources prompt;
};

// Strict JSON loading: unknown keys and type mismatches fail with the field
// path. Also accepts a manifest file and reads its embedded config.
RunConfig load_config(const std::string& path);
RunConfig config_from_json_text(const std::string& text,
                                const std::string& origin);
std::string config_to_json(const RunConfig& cfg);

// File layout under out_dir.
struct Paths {
  explicit Paths(const std::string& out_dir);
  std::string out_dir;
  std::string manifest;
  std::string filtered_corpus;
  std::string test_corpus;
  std::string splits_dir;
  std::string base_checkpoint;
  std::string runs_dir;
  std::string reports_dir;

  std::string split_file(const std::string& run_name) const;
  std::string run_dir(const std::string& run_name) const;
  std::string checkpoint(const std::string& run_name) const;
  std::string generations(const std::string& run_name) const;
  std::string run_report(const std::string& run_name) const;
  std::string aggregate_base() const;  // reports/aggregate (.json/.csv/.txt)
};

// Filters + truncates the corpora and draws the few-shot splits.
void cmd_prepare(const RunConfig& cfg);

// Trains one model per split (optionally from a shared pretrained base) and
// generates responses for the test set. run_filter limits execution to the
// named runs; empty means all.
void cmd_run(const RunConfig& cfg,
             const std::vector<std::string>& run_filter = {});

// Computes per-run metrics and the aggregate report files.
void cmd_evaluate(const RunConfig& cfg);

struct CompareOptions {
  std::size_t pool_size = 0;  // 0 means every test dialog
  std::size_t n_resamples = 1000;
  std::uint64_t seed = 17;
  std::string out_base;  // default: <dir_a>/compare_<name_b>
};

struct ComparedMetric {
  std::string metric;
  double mean_a = 0.0, mean_b = 0.0;
  std::optional<double> std_a, std_b;
  std::optional<stats::SignificanceResult> test;  // absent for ppl
};

struct CompareResult {
  std::string system_a, system_b;
  std::string task;
  std::size_t pooled_size = 0;
  std::vector<ComparedMetric> metrics;
};

// Pools both systems over the same dialogs and runs the per-metric
// significance tests. Writes <out_base>.json and <out_base>.txt.
CompareResult cmd_compare(const std::string& dir_a, const std::string& dir_b,
                          const CompareOptions& opts);

// Renders aggregate tables for one or more output directories, with stars
// attached from an optional compare result file.
std::string cmd_report(const std::vector<std::string>& dirs,
                       const std::optional<std::string>& compare_json);

// Exposed for reuse in tests: the fully resolved prompt scheme for a config,
// given the grounding kind of the corpus.
prompting::PromptScheme build_scheme(const RunConfig& cfg,
                                     corpus::GsKind gs_kind,
                                     std::span<const corpus::DialogSample>
                                         strategy_inventory_source);

}  // namespace gdg::pipeline

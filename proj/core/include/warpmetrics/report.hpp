#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "warpmetrics/flow.hpp"
#include "warpmetrics/losses.hpp"
#include "warpmetrics/metrics.hpp"
#include "warpmetrics/synth.hpp"

namespace warpmetrics {

inline constexpr const char* kToolkitVersion = "0.1.0";

/// Everything a run needs; every field has a default and the serialized form
/// reproduces the run exactly (fingerprint = content hash).
struct RunConfig {
  std::string input_dir;
  std::string out_dir = "out";

  // metric selection ("aad", "ld", "ad", "ms_ssim"; ED/CER follow the OCR
  // adapter configuration)
  std::vector<std::string> metrics{"aad", "ld", "ad", "ms_ssim"};
  std::string flow_source = "estimate";  ///< gt | estimate | import
  std::string flows_dir;  ///< defaults to <input_dir>/flows

  SiftFlowParams sift;
  AadParams aad_params;
  LossWeights weights;

  std::string predictor;  ///< file:<template> | command:<cmd> | oracle:<spec.json>
  int rounds = 1;
  double margin = 0.05;
  int grid_rows = 45;
  int grid_cols = 31;
  int out_height = 712;
  int out_width = 488;

  uint64_t seed = 0;
  int jobs = 0;  ///< 0 = logical cores
  int canonical_max_side = 512;

  // robustness / synth corpus
  int corpus_count = 100;
  int corpus_height = 256;
  int corpus_width = 256;
  double amplitude_min = 0.5;
  double amplitude_max = 10.0;
  std::vector<std::string> sets{"Set1", "Set2", "Set3"};
  std::string corpus_base;  ///< base image path; empty = synthetic page

  /// OCR command, invoked as `<command> <image-path>` ("{}" substitutes the
  /// path). Empty falls back to WARPMETRICS_OCR_CMD, then to
  /// "tesseract {} stdout"; the literal "none" disables OCR.
  std::string ocr_command;

  std::string to_canonical_json() const;
  std::string fingerprint() const;
  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_file(const std::filesystem::path& path);  // .json/.toml
};

struct SkippedEntry {
  std::string stem;
  std::string reason;
};

struct DatasetPair {
  std::string stem;
  std::filesystem::path distorted;
  std::filesystem::path gt;
  std::optional<std::filesystem::path> flow;
  std::optional<std::filesystem::path> grid;
  std::optional<std::filesystem::path> text;
};

struct DatasetScan {
  std::vector<DatasetPair> pairs;    ///< ordered by stem
  std::vector<SkippedEntry> skipped; ///< unpaired files with reasons
};

/// Scans root/distorted + root/gt (+ optional flows/, grids/, text/), pairing
/// by filename stem. Unpaired files are reported, never silently dropped.
DatasetScan scan_dataset(const std::filesystem::path& root);

struct EvaluateOutcome {
  std::vector<MetricReport> reports;
  std::vector<SkippedEntry> skipped;
  std::filesystem::path jsonl_path;
  std::filesystem::path csv_path;
  bool had_hard_failure = false;
};

/// Per-pair metric reports (JSON-lines) plus the aggregate CSV.
EvaluateOutcome run_evaluate(const RunConfig& config);

struct RobustnessCell {
  std::string set;
  std::string metric;
  std::vector<double> gt_values;   ///< per sample, ground-truth flow
  std::vector<double> est_values;  ///< per sample, estimated flow
  std::optional<double> r2;        ///< unset when the statistic is undefined
};

struct RobustnessSummary {
  std::vector<RobustnessCell> cells;
  std::vector<double> amplitudes;
  /// per metric: mean cross-illumination normalized std (estimated flows)
  std::vector<std::pair<std::string, std::optional<double>>> est_cross_std;
  /// per metric: the same statistic from ground-truth flows (0 by invariance)
  std::vector<std::pair<std::string, std::optional<double>>> gt_cross_std;
  std::filesystem::path scatter_csv;
  std::filesystem::path summary_json;
};

RobustnessSummary run_robustness(const RunConfig& config);

struct DewarpOutcome {
  int processed = 0;
  std::vector<SkippedEntry> failures;
};

/// Dewarps every image in input_dir with the configured predictor; writes
/// images, AAGRID1 grids and PreprocessReport JSON into out_dir.
DewarpOutcome run_dewarp(const RunConfig& config);

/// Writes the synthetic corpus (corpus/<set>/<index>.{png,flow,json} plus
/// manifest.json) under out_dir.
void run_synth(const RunConfig& config);

struct HeatmapArgs {
  std::string gt_image;
  std::string dewarped_image;
  std::string flow_file;  ///< optional AAFLOW1 import; else flow is estimated
  std::string out_dir = "out";
  double alpha = 0.6;
  double cap_percentile = 99.0;
  int legend_height = 18;
};

/// Renders the d / d_row / d_col overlays; returns the written paths.
std::vector<std::filesystem::path> run_heatmap(const HeatmapArgs& args,
                                               const RunConfig& config);

struct LossArgs {
  std::string pred_grid;
  std::string gt_grid;
  std::string pred_grid3d;  ///< optional
  std::string gt_grid3d;    ///< optional
  std::string image;        ///< optional, for the SSIM term
  std::string dewarped;     ///< optional, for the SSIM term
};

struct LossReportValues {
  std::optional<double> l2d;
  std::optional<double> l3d;
  double l_hor = 0.0;
  double l_ver = 0.0;
  double l_al = 0.0;
  std::optional<double> l_ssim;
  double l_all = 0.0;
};

LossReportValues compute_loss_report(const LossArgs& args,
                                     const RunConfig& config);
std::string loss_report_to_json(const LossReportValues& v,
                                const RunConfig& config);

/// Runs `command` (or $WARPMETRICS_OCR_CMD, or none) as `<command> <image>`;
/// returns the recognized text on exit 0, nullopt otherwise.
std::optional<std::string> run_ocr_adapter(const std::string& command,
                                           const std::filesystem::path& image);

/// Spearman rank correlation (average ranks on ties).
double spearman_rho(std::span<const double> a, std::span<const double> b);

/// Runs fn(0..count-1) on `jobs` worker threads (jobs<=0: logical cores).
/// Exceptions are captured and rethrown as a combined Error after all tasks
/// finish; results must be written into pre-sized slots by index.
void run_parallel(int count, int jobs, const std::function<void(int)>& fn);

}  // namespace warpmetrics

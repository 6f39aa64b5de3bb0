#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "warpmetrics/report.hpp"

using namespace warpmetrics;

namespace {

std::string g_config_path;  // applied in a pre-parse pass; option exists so
                            // CLI11 accepts it in any position

void bind_common(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--config", g_config_path, "Config file (JSON or TOML)");
  cmd->add_option("--out-dir", cfg.out_dir, "Output directory");
  cmd->add_option("--seed", cfg.seed, "Master seed");
  cmd->add_option("--jobs", cfg.jobs, "Worker threads (0 = logical cores)");
}

void bind_flow(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--flow-source", cfg.flow_source,
                  "Flow source: gt | estimate | import")
      ->check(CLI::IsMember({"gt", "estimate", "import"}));
  cmd->add_option("--flows-dir", cfg.flows_dir,
                  "Directory of AAFLOW1 files for gt/import sources");
  cmd->add_option("--sift-levels", cfg.sift.levels, "SIFT-flow pyramid levels");
  cmd->add_option("--sift-radius", cfg.sift.coarsest_radius,
                  "Search radius at the coarsest level");
  cmd->add_option("--sift-iterations", cfg.sift.iterations,
                  "Message-passing sweeps per level");
  cmd->add_option("--canonical-max-side", cfg.canonical_max_side,
                  "Images larger than this are downscaled before metrics");
}

void bind_corpus(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--count", cfg.corpus_count, "Samples per set");
  cmd->add_option("--height", cfg.corpus_height, "Corpus frame height");
  cmd->add_option("--width", cfg.corpus_width, "Corpus frame width");
  cmd->add_option("--amplitude-min", cfg.amplitude_min, "Sweep start (px)");
  cmd->add_option("--amplitude-max", cfg.amplitude_max, "Sweep end (px)");
  cmd->add_option("--sets", cfg.sets, "Disturbance sets to generate");
  cmd->add_option("--base", cfg.corpus_base,
                  "Base image (default: synthetic page)");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  // --config is applied before the flag overrides
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        cfg = RunConfig::from_file(argv[i + 1]);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      }
    }
  }

  CLI::App app{"warpmetrics: document-dewarping geometry and evaluation toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "Config file (JSON or TOML)");

  auto* evaluate = app.add_subcommand(
      "evaluate", "Evaluate a dataset (distorted/ vs gt/) into JSONL + CSV");
  evaluate->add_option("input", cfg.input_dir, "Dataset root")->required();
  bind_common(evaluate, cfg);
  bind_flow(evaluate, cfg);
  evaluate->add_option("--metrics", cfg.metrics, "Metric selection");
  evaluate->add_option("--ocr-cmd", cfg.ocr_command,
                       "OCR command (overrides WARPMETRICS_OCR_CMD)");

  auto* dewarp = app.add_subcommand(
      "dewarp", "Dewarp a directory of images with a grid predictor");
  dewarp->add_option("input", cfg.input_dir, "Input image directory")
      ->required();
  bind_common(dewarp, cfg);
  dewarp->add_option("--predictor", cfg.predictor,
                     "file:<template> | command:<cmd> | oracle:<spec.json>");
  dewarp->add_option("--rounds", cfg.rounds,
                     "Axis-alignment preprocessing rounds");
  dewarp->add_option("--margin", cfg.margin, "Crop margin fraction");
  dewarp->add_option("--grid-rows", cfg.grid_rows, "Predictor grid rows");
  dewarp->add_option("--grid-cols", cfg.grid_cols, "Predictor grid cols");
  dewarp->add_option("--out-height", cfg.out_height, "Dewarped output height");
  dewarp->add_option("--out-width", cfg.out_width, "Dewarped output width");

  auto* heatmap = app.add_subcommand(
      "heatmap", "Render AAD / AAD_H / AAD_V overlays for one image pair");
  HeatmapArgs hargs;
  heatmap->add_option("--gt", hargs.gt_image, "Ground-truth image")->required();
  heatmap->add_option("--dewarped", hargs.dewarped_image, "Dewarped image");
  heatmap->add_option("--flow", hargs.flow_file, "Imported AAFLOW1 flow");
  heatmap->add_option("--alpha", hargs.alpha, "Overlay opacity");
  heatmap->add_option("--cap-percentile", hargs.cap_percentile,
                      "Color scale cap percentile of the d map");
  heatmap->add_option("--legend-height", hargs.legend_height,
                      "Legend strip height in px (0 disables)");
  bind_common(heatmap, cfg);
  bind_flow(heatmap, cfg);

  auto* robustness = app.add_subcommand(
      "robustness", "Synthetic-disturbance study: R^2 + normalized std");
  bind_common(robustness, cfg);
  bind_flow(robustness, cfg);
  bind_corpus(robustness, cfg);

  auto* synth = app.add_subcommand(
      "synth", "Generate the disturbance corpus with ground-truth flows");
  bind_common(synth, cfg);
  bind_corpus(synth, cfg);

  auto* loss = app.add_subcommand(
      "loss", "Compute the training losses for a grid pair");
  LossArgs largs;
  loss->add_option("--pred", largs.pred_grid, "Predicted 2D grid file")
      ->required();
  loss->add_option("--gt", largs.gt_grid, "Ground-truth 2D grid file")
      ->required();
  loss->add_option("--pred-3d", largs.pred_grid3d, "Predicted 3D grid file");
  loss->add_option("--gt-3d", largs.gt_grid3d, "Ground-truth 3D grid file");
  loss->add_option("--image", largs.image, "Reference image (SSIM term)");
  loss->add_option("--dewarped", largs.dewarped, "Dewarped image (SSIM term)");
  loss->add_option("--alpha", cfg.weights.alpha, "L2D weight");
  loss->add_option("--beta", cfg.weights.beta, "L3D weight");
  loss->add_option("--gamma", cfg.weights.gamma, "L_AL weight");
  loss->add_option("--lambda", cfg.weights.lambda, "SSIM weight");
  bind_common(loss, cfg);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*evaluate) {
      const EvaluateOutcome out = run_evaluate(cfg);
      std::cout << "evaluated " << out.reports.size() << " pair(s), skipped "
                << out.skipped.size() << "\n";
      std::cout << "reports: " << out.jsonl_path.string() << "\n";
      std::cout << "aggregate: " << out.csv_path.string() << "\n";
      return out.had_hard_failure ? 1 : 0;
    }
    if (*dewarp) {
      const DewarpOutcome out = run_dewarp(cfg);
      std::cout << "dewarped " << out.processed << " image(s), failed "
                << out.failures.size() << "\n";
      for (const SkippedEntry& f : out.failures)
        std::cout << "  failed " << f.stem << ": " << f.reason << "\n";
      return out.failures.empty() ? 0 : 1;
    }
    if (*heatmap) {
      hargs.out_dir = cfg.out_dir;
      for (const auto& p : run_heatmap(hargs, cfg))
        std::cout << p.string() << "\n";
      return 0;
    }
    if (*robustness) {
      const RobustnessSummary out = run_robustness(cfg);
      for (const RobustnessCell& c : out.cells) {
        std::cout << c.set << " " << c.metric << " R2=";
        if (c.r2)
          std::cout << *c.r2;
        else
          std::cout << "undefined";
        std::cout << "\n";
      }
      std::cout << "scatter: " << out.scatter_csv.string() << "\n";
      std::cout << "summary: " << out.summary_json.string() << "\n";
      return 0;
    }
    if (*synth) {
      run_synth(cfg);
      std::cout << "corpus written under " << cfg.out_dir << "/corpus\n";
      return 0;
    }
    if (*loss) {
      const LossReportValues v = compute_loss_report(largs, cfg);
      std::cout << loss_report_to_json(v, cfg) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

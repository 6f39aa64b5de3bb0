#include "warpmetrics/report.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "warpmetrics/heatmap.hpp"
#include "warpmetrics/io.hpp"
#include "warpmetrics/pipeline.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace warpmetrics {

// ---- config ------------------------------------------------------------------

namespace {

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["input_dir"] = c.input_dir;
  j["out_dir"] = c.out_dir;
  j["metrics"] = c.metrics;
  j["flow_source"] = c.flow_source;
  j["flows_dir"] = c.flows_dir;
  j["sift"] = {{"levels", c.sift.levels},
               {"cell_size", c.sift.cell_size},
               {"orientation_bins", c.sift.orientation_bins},
               {"coarsest_radius", c.sift.coarsest_radius},
               {"iterations", c.sift.iterations},
               {"regularization", c.sift.regularization},
               {"smooth_truncation", c.sift.smooth_truncation},
               {"data_truncation", c.sift.data_truncation},
               {"small_displacement", c.sift.small_displacement}};
  j["aad"] = {{"epsilon", c.aad_params.epsilon}};
  j["weights"] = {{"alpha", c.weights.alpha},
                  {"beta", c.weights.beta},
                  {"gamma", c.weights.gamma},
                  {"lambda", c.weights.lambda}};
  j["predictor"] = c.predictor;
  j["rounds"] = c.rounds;
  j["margin"] = c.margin;
  j["grid_rows"] = c.grid_rows;
  j["grid_cols"] = c.grid_cols;
  j["out_height"] = c.out_height;
  j["out_width"] = c.out_width;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["canonical_max_side"] = c.canonical_max_side;
  j["corpus_count"] = c.corpus_count;
  j["corpus_height"] = c.corpus_height;
  j["corpus_width"] = c.corpus_width;
  j["amplitude_min"] = c.amplitude_min;
  j["amplitude_max"] = c.amplitude_max;
  j["sets"] = c.sets;
  j["corpus_base"] = c.corpus_base;
  j["ocr_command"] = c.ocr_command;
  return j;
}

void config_from_json(const nlohmann::json& j, RunConfig& c) {
  c.input_dir = j.value("input_dir", c.input_dir);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("metrics"))
    c.metrics = j["metrics"].get<std::vector<std::string>>();
  c.flow_source = j.value("flow_source", c.flow_source);
  c.flows_dir = j.value("flows_dir", c.flows_dir);
  if (j.contains("sift")) {
    const auto& s = j["sift"];
    c.sift.levels = s.value("levels", c.sift.levels);
    c.sift.cell_size = s.value("cell_size", c.sift.cell_size);
    c.sift.orientation_bins = s.value("orientation_bins", c.sift.orientation_bins);
    c.sift.coarsest_radius = s.value("coarsest_radius", c.sift.coarsest_radius);
    c.sift.iterations = s.value("iterations", c.sift.iterations);
    c.sift.regularization = s.value("regularization", c.sift.regularization);
    c.sift.smooth_truncation =
        s.value("smooth_truncation", c.sift.smooth_truncation);
    c.sift.data_truncation = s.value("data_truncation", c.sift.data_truncation);
    c.sift.small_displacement =
        s.value("small_displacement", c.sift.small_displacement);
  }
  if (j.contains("aad"))
    c.aad_params.epsilon = j["aad"].value("epsilon", c.aad_params.epsilon);
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    c.weights.alpha = w.value("alpha", c.weights.alpha);
    c.weights.beta = w.value("beta", c.weights.beta);
    c.weights.gamma = w.value("gamma", c.weights.gamma);
    c.weights.lambda = w.value("lambda", c.weights.lambda);
  }
  c.predictor = j.value("predictor", c.predictor);
  c.rounds = j.value("rounds", c.rounds);
  c.margin = j.value("margin", c.margin);
  c.grid_rows = j.value("grid_rows", c.grid_rows);
  c.grid_cols = j.value("grid_cols", c.grid_cols);
  c.out_height = j.value("out_height", c.out_height);
  c.out_width = j.value("out_width", c.out_width);
  c.seed = j.value("seed", c.seed);
  c.jobs = j.value("jobs", c.jobs);
  c.canonical_max_side = j.value("canonical_max_side", c.canonical_max_side);
  c.corpus_count = j.value("corpus_count", c.corpus_count);
  c.corpus_height = j.value("corpus_height", c.corpus_height);
  c.corpus_width = j.value("corpus_width", c.corpus_width);
  c.amplitude_min = j.value("amplitude_min", c.amplitude_min);
  c.amplitude_max = j.value("amplitude_max", c.amplitude_max);
  if (j.contains("sets")) c.sets = j["sets"].get<std::vector<std::string>>();
  c.corpus_base = j.value("corpus_base", c.corpus_base);
  c.ocr_command = j.value("ocr_command", c.ocr_command);
}

// Minimal TOML subset: [section] headers, key = value with strings, numbers,
// booleans and flat arrays. Sections map onto the JSON nesting above.
nlohmann::json parse_toml_subset(std::istream& is) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* section = &root;
  std::string line;
  auto parse_scalar = [](std::string v) -> nlohmann::json {
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    v = trim(v);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
      return v.substr(1, v.size() - 2);
    if (v == "true") return true;
    if (v == "false") return false;
    try {
      if (v.find_first_of(".eE") != std::string::npos) return std::stod(v);
      return std::stoll(v);
    } catch (...) {
      return v;
    }
  };
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto b = line.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r\n");
    line = line.substr(b, e - b + 1);
    if (line.front() == '[' && line.back() == ']') {
      const std::string name = line.substr(1, line.size() - 2);
      section = &root[name];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    std::string value = line.substr(eq + 1);
    auto vtrim_b = value.find_first_not_of(" \t");
    if (vtrim_b != std::string::npos) value = value.substr(vtrim_b);
    if (!value.empty() && value.front() == '[') {
      nlohmann::json arr = nlohmann::json::array();
      std::string inner = value.substr(1, value.rfind(']') - 1);
      std::stringstream ss(inner);
      std::string item;
      while (std::getline(ss, item, ','))
        if (item.find_first_not_of(" \t") != std::string::npos)
          arr.push_back(parse_scalar(item));
      (*section)[key] = arr;
    } else {
      (*section)[key] = parse_scalar(value);
    }
  }
  return root;
}

}  // namespace

std::string RunConfig::to_canonical_json() const {
  return config_to_json(*this).dump();
}

std::string RunConfig::fingerprint() const {
  return hex64(fnv1a64(to_canonical_json()));
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  RunConfig c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("config: invalid JSON (") + e.what() + ")");
  }
  config_from_json(j, c);
  return c;
}

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path.string());
  if (path.extension() == ".toml" || path.extension() == ".ini") {
    RunConfig c;
    config_from_json(parse_toml_subset(is), c);
    return c;
  }
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

// ---- helpers -----------------------------------------------------------------

void run_parallel(int count, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::vector<std::string> errors;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (int t = 0; t < jobs; ++t)
    workers.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(err_mutex);
          errors.push_back(e.what());
        }
      }
    });
  for (auto& w : workers) w.join();
  if (!errors.empty()) throw Error("parallel task failed: " + errors.front());
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 3)
    throw InvalidInputError("spearman_rho: need equal lengths >= 3");
  auto ranks = [](std::span<const double> v) {
    std::vector<size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t i, size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    size_t i = 0;
    while (i < order.size()) {
      size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (i + j) / 2.0 + 1.0;
      for (size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a);
  const std::vector<double> rb = ranks(b);
  const double r2 = r_squared(ra, rb);
  // recover the sign from the covariance of ranks
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0.0;
  for (size_t k = 0; k < ra.size(); ++k) cov += (ra[k] - ma) * (rb[k] - mb);
  return (cov >= 0 ? 1.0 : -1.0) * std::sqrt(r2);
}

std::optional<std::string> run_ocr_adapter(const std::string& command,
                                           const fs::path& image) {
  std::string cmd = command;
  if (cmd.empty()) {
    const char* env = std::getenv("WARPMETRICS_OCR_CMD");
    if (env) cmd = env;
  }
  if (cmd.empty()) cmd = "tesseract {} stdout";
  if (cmd == "none") return std::nullopt;
  const std::string quoted = "'" + image.string() + "'";
  const size_t pos = cmd.find("{}");
  if (pos != std::string::npos)
    cmd.replace(pos, 2, quoted);
  else
    cmd += " " + quoted;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return std::nullopt;
  std::string text;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) text.append(buf, n);
  const int rc = pclose(pipe);
  if (rc != 0) return std::nullopt;
  return text;
}

// ---- dataset -----------------------------------------------------------------

namespace {

bool is_image_file(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".png" || ext == ".PNG";
}

}  // namespace

DatasetScan scan_dataset(const fs::path& root) {
  const fs::path ddir = root / "distorted";
  const fs::path gdir = root / "gt";
  if (!fs::is_directory(ddir) || !fs::is_directory(gdir))
    throw IoError("dataset root must contain distorted/ and gt/: " +
                  root.string());
  DatasetScan scan;
  std::vector<fs::path> dfiles;
  for (const auto& e : fs::directory_iterator(ddir))
    if (e.is_regular_file() && is_image_file(e.path()))
      dfiles.push_back(e.path());
  std::sort(dfiles.begin(), dfiles.end());

  for (const fs::path& d : dfiles) {
    const std::string stem = d.stem().string();
    const fs::path gt = gdir / d.filename();
    if (!fs::exists(gt)) {
      scan.skipped.push_back({stem, "missing gt partner"});
      continue;
    }
    DatasetPair pair;
    pair.stem = stem;
    pair.distorted = d;
    pair.gt = gt;
    const fs::path flow = root / "flows" / (stem + ".flow");
    if (fs::exists(flow)) pair.flow = flow;
    for (const char* ext : {".grid", ".json"}) {
      const fs::path grid = root / "grids" / (stem + ext);
      if (fs::exists(grid)) {
        pair.grid = grid;
        break;
      }
    }
    const fs::path text = root / "text" / (stem + ".txt");
    if (fs::exists(text)) pair.text = text;
    scan.pairs.push_back(std::move(pair));
  }
  // gt files without a distorted partner are reported too
  for (const auto& e : fs::directory_iterator(gdir)) {
    if (!e.is_regular_file() || !is_image_file(e.path())) continue;
    if (!fs::exists(ddir / e.path().filename()))
      scan.skipped.push_back(
          {e.path().stem().string(), "gt without distorted partner"});
  }
  std::sort(scan.pairs.begin(), scan.pairs.end(),
            [](const DatasetPair& a, const DatasetPair& b) {
              return a.stem < b.stem;
            });
  std::sort(scan.skipped.begin(), scan.skipped.end(),
            [](const SkippedEntry& a, const SkippedEntry& b) {
              return a.stem < b.stem;
            });
  return scan;
}

// ---- evaluate ------------------------------------------------------------------

namespace {

ImageBuffer canonicalize(const ImageBuffer& img, int max_side) {
  const int side = std::max(img.height(), img.width());
  if (side <= max_side) return img;
  const double scale = static_cast<double>(max_side) / side;
  return resize_bilinear(img,
                         std::max(2, (int)std::lround(img.height() * scale)),
                         std::max(2, (int)std::lround(img.width() * scale)));
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
  return buf;
}

ordered_json report_to_json(const MetricReport& r, const std::string& ts) {
  ordered_json j;
  j["image_id"] = r.image_id;
  j["aad"] = r.aad;
  j["aad_h"] = r.aad_h;
  j["aad_v"] = r.aad_v;
  j["ld"] = r.ld;
  j["ad_approx"] = r.ad_approx;
  j["ad_degenerate"] = r.ad_degenerate;
  j["ms_ssim"] = r.ms_ssim;
  if (r.ed)
    j["ed"] = *r.ed;
  else
    j["ed"] = nullptr;
  if (r.cer)
    j["cer"] = *r.cer;
  else
    j["cer"] = nullptr;
  j["flow_source"] = r.flow_source;
  j["fingerprint"] = r.fingerprint;
  j["version"] = kToolkitVersion;
  j["timestamp"] = ts;
  return j;
}

bool wants(const RunConfig& c, const std::string& m) {
  return std::find(c.metrics.begin(), c.metrics.end(), m) != c.metrics.end();
}

}  // namespace

EvaluateOutcome run_evaluate(const RunConfig& config) {
  const fs::path root(config.input_dir);
  DatasetScan scan = scan_dataset(root);
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);

  const std::string fp = config.fingerprint();
  const std::string flow_tag = config.flow_source == "gt"
                                   ? "ground-truth"
                                   : (config.flow_source == "import"
                                          ? "imported"
                                          : "estimated");
  const fs::path flows_dir = config.flows_dir.empty()
                                 ? root / "flows"
                                 : fs::path(config.flows_dir);

  EvaluateOutcome outcome;
  outcome.reports.resize(scan.pairs.size());
  std::vector<std::optional<std::string>> failures(scan.pairs.size());

  run_parallel(static_cast<int>(scan.pairs.size()), config.jobs, [&](int i) {
    const DatasetPair& pair = scan.pairs[i];
    try {
      const ImageBuffer gt_full = read_png(pair.gt);
      const ImageBuffer eval_full = read_png(pair.distorted);

      MetricReport rep;
      rep.image_id = pair.stem;
      rep.flow_source = flow_tag;
      rep.fingerprint = fp;

      FlowField flow;
      ImageBuffer gt_work;
      if (config.flow_source == "estimate") {
        gt_work = canonicalize(gt_full, config.canonical_max_side);
        ImageBuffer eval_work = eval_full;
        if (eval_work.height() != gt_work.height() ||
            eval_work.width() != gt_work.width())
          eval_work =
              resize_bilinear(eval_work, gt_work.height(), gt_work.width());
        flow = estimate_sift_flow(gt_work, eval_work, config.sift);
      } else {
        const fs::path flow_path =
            pair.flow ? *pair.flow : flows_dir / (pair.stem + ".flow");
        if (!fs::exists(flow_path))
          throw IoError("flow file not found: " + flow_path.string());
        flow = read_flow_file(flow_path);
        gt_work = gt_full;
        if (gt_work.height() != flow.height || gt_work.width() != flow.width)
          throw DimensionError("flow/gt dimensions differ for " + pair.stem);
      }

      const GradientWeights weights = sobel_weights(gt_work);
      if (wants(config, "aad")) {
        const AadResult a = aad(weights, flow, config.aad_params);
        rep.aad = a.aad;
        rep.aad_h = a.aad_h;
        rep.aad_v = a.aad_v;
      }
      if (wants(config, "ld")) rep.ld = ld(flow);
      if (wants(config, "ad")) {
        const AdResult ad = ad_approx(flow, weights);
        rep.ad_approx = ad.value;
        rep.ad_degenerate = ad.degenerate;
      }
      if (wants(config, "ms_ssim")) {
        ImageBuffer eval_ms = eval_full;
        if (eval_ms.height() != gt_full.height() ||
            eval_ms.width() != gt_full.width())
          eval_ms = resize_bilinear(eval_ms, gt_full.height(), gt_full.width());
        rep.ms_ssim = ms_ssim(gt_full, eval_ms);
      }
      if (pair.text) {
        const auto hyp = run_ocr_adapter(config.ocr_command, pair.distorted);
        if (hyp) {
          std::ifstream ts(*pair.text);
          std::stringstream ss;
          ss << ts.rdbuf();
          const std::string ref = ss.str();
          rep.ed = edit_distance(ref, *hyp);
          rep.cer = cer(ref, *hyp);
        }
      }
      outcome.reports[i] = std::move(rep);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });

  // merge: ordered by stem (pairs are already sorted)
  std::vector<MetricReport> kept;
  for (size_t i = 0; i < scan.pairs.size(); ++i) {
    if (failures[i]) {
      outcome.skipped.push_back({scan.pairs[i].stem, *failures[i]});
      outcome.had_hard_failure = true;
    } else {
      kept.push_back(std::move(outcome.reports[i]));
    }
  }
  outcome.reports = std::move(kept);
  for (const SkippedEntry& s : scan.skipped) outcome.skipped.push_back(s);

  const std::string ts = iso_timestamp();
  outcome.jsonl_path = out_dir / "reports.jsonl";
  {
    std::ofstream os(outcome.jsonl_path);
    for (const MetricReport& r : outcome.reports)
      os << report_to_json(r, ts).dump() << "\n";
  }
  outcome.csv_path = out_dir / "aggregate.csv";
  {
    std::ofstream os(outcome.csv_path);
    os << "metric,mean,count,fingerprint\n";
    auto emit = [&](const std::string& name, auto getter) {
      double acc = 0.0;
      long count = 0;
      for (const MetricReport& r : outcome.reports) {
        const std::optional<double> v = getter(r);
        if (v) {
          acc += *v;
          ++count;
        }
      }
      os << name << "," << (count ? acc / count : 0.0) << "," << count << ","
         << fp << "\n";
    };
    os.precision(17);
    emit("aad", [](const MetricReport& r) { return std::optional<double>(r.aad); });
    emit("aad_h",
         [](const MetricReport& r) { return std::optional<double>(r.aad_h); });
    emit("aad_v",
         [](const MetricReport& r) { return std::optional<double>(r.aad_v); });
    emit("ld", [](const MetricReport& r) { return std::optional<double>(r.ld); });
    emit("ad_approx",
         [](const MetricReport& r) { return std::optional<double>(r.ad_approx); });
    emit("ms_ssim",
         [](const MetricReport& r) { return std::optional<double>(r.ms_ssim); });
    emit("ed", [](const MetricReport& r) {
      return r.ed ? std::optional<double>(double(*r.ed)) : std::nullopt;
    });
    emit("cer", [](const MetricReport& r) {
      return r.cer ? std::optional<double>(*r.cer) : std::nullopt;
    });
  }
  // skipped manifest
  {
    std::ofstream os(out_dir / "skipped.json");
    ordered_json j = ordered_json::array();
    for (const SkippedEntry& s : outcome.skipped)
      j.push_back({{"stem", s.stem}, {"reason", s.reason}});
    os << j.dump(2) << "\n";
  }
  return outcome;
}

// ---- robustness ----------------------------------------------------------------

RobustnessSummary run_robustness(const RunConfig& config) {
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);

  ImageBuffer base =
      config.corpus_base.empty()
          ? make_synthetic_page(config.corpus_height, config.corpus_width,
                                derive_seed(config.seed, 0, 0))
          : read_png(config.corpus_base);
  base = canonicalize(base, config.canonical_max_side);
  const GradientWeights weights = sobel_weights(base);

  const std::vector<std::string> metric_names{"aad", "ld", "ad"};
  RobustnessSummary summary;

  // metric values per set and per sample (gt flow & estimated flow)
  struct SetValues {
    std::vector<double> gt[3];   // aad, ld, ad
    std::vector<double> est[3];
  };
  std::vector<SetValues> per_set(config.sets.size());

  for (size_t si = 0; si < config.sets.size(); ++si) {
    DisturbanceSetting setting;
    setting.set = set_id_from_name(config.sets[si]);
    setting.amplitude_min = config.amplitude_min;
    setting.amplitude_max = config.amplitude_max;
    setting.seed = config.seed;
    const std::vector<CorpusSample> corpus =
        make_robustness_corpus(base, setting, config.corpus_count);
    if (si == 0) {
      summary.amplitudes.clear();
      for (const CorpusSample& s : corpus)
        summary.amplitudes.push_back(s.amplitude);
    }
    SetValues& vals = per_set[si];
    for (int m = 0; m < 3; ++m) {
      vals.gt[m].resize(corpus.size());
      vals.est[m].resize(corpus.size());
    }
    run_parallel(static_cast<int>(corpus.size()), config.jobs, [&](int k) {
      const CorpusSample& sample = corpus[k];
      const AadResult a_gt = aad(weights, sample.gt_flow, config.aad_params);
      vals.gt[0][k] = a_gt.aad;
      vals.gt[1][k] = ld(sample.gt_flow);
      vals.gt[2][k] = ad_approx(sample.gt_flow, weights).value;
      const FlowField est = estimate_sift_flow(base, sample.image, config.sift);
      const AadResult a_est = aad(weights, est, config.aad_params);
      vals.est[0][k] = a_est.aad;
      vals.est[1][k] = ld(est);
      vals.est[2][k] = ad_approx(est, weights).value;
    });
    for (int m = 0; m < 3; ++m) {
      RobustnessCell cell;
      cell.set = config.sets[si];
      cell.metric = metric_names[m];
      cell.gt_values = vals.gt[m];
      cell.est_values = vals.est[m];
      try {
        cell.r2 = r_squared(cell.gt_values, cell.est_values);
      } catch (const Error&) {
        cell.r2 = std::nullopt;  // undefined statistic; run continues
      }
      summary.cells.push_back(std::move(cell));
    }
  }

  // cross-illumination normalized std per base sample, averaged
  auto cross_std = [&](auto member) {
    std::vector<std::pair<std::string, std::optional<double>>> out;
    for (int m = 0; m < 3; ++m) {
      double acc = 0.0;
      int count = 0;
      bool all_defined = true;
      for (int k = 0; k < config.corpus_count; ++k) {
        std::vector<double> vals;
        for (const SetValues& sv : per_set) vals.push_back((sv.*member)[m][k]);
        if (vals.size() < 3) {
          all_defined = false;
          break;
        }
        try {
          acc += normalized_std(vals);
          ++count;
        } catch (const Error&) {
          // undefined for this sample; skip it
        }
      }
      if (!all_defined || count == 0)
        out.push_back({metric_names[m], std::nullopt});
      else
        out.push_back({metric_names[m], acc / count});
    }
    return out;
  };
  summary.est_cross_std = cross_std(&SetValues::est);
  summary.gt_cross_std = cross_std(&SetValues::gt);

  const std::string fp = config.fingerprint();
  const std::string ts = iso_timestamp();
  summary.scatter_csv = out_dir / "robustness_scatter.csv";
  {
    std::ofstream os(summary.scatter_csv);
    os.precision(17);
    os << "set,metric,index,amplitude,gt_value,est_value\n";
    for (const RobustnessCell& c : summary.cells)
      for (size_t k = 0; k < c.gt_values.size(); ++k)
        os << c.set << "," << c.metric << "," << k << ","
           << summary.amplitudes[k] << "," << c.gt_values[k] << ","
           << c.est_values[k] << "\n";
  }
  summary.summary_json = out_dir / "robustness_summary.json";
  {
    ordered_json j;
    j["fingerprint"] = fp;
    j["version"] = kToolkitVersion;
    j["sets"] = config.sets;
    j["count"] = config.corpus_count;
    ordered_json cells = ordered_json::array();
    for (const RobustnessCell& c : summary.cells) {
      ordered_json jc;
      jc["set"] = c.set;
      jc["metric"] = c.metric;
      if (c.r2)
        jc["r2"] = *c.r2;
      else
        jc["r2"] = nullptr;
      cells.push_back(jc);
    }
    j["cells"] = cells;
    auto dump_std = [&](const auto& v) {
      ordered_json o;
      for (const auto& [name, value] : v) {
        if (value)
          o[name] = *value;
        else
          o[name] = nullptr;
      }
      return o;
    };
    j["est_cross_illumination_normalized_std"] = dump_std(summary.est_cross_std);
    j["gt_cross_illumination_normalized_std"] = dump_std(summary.gt_cross_std);
    j["timestamp"] = ts;
    std::ofstream os(summary.summary_json);
    os << j.dump(2) << "\n";
  }
  return summary;
}

// ---- synth ---------------------------------------------------------------------

void run_synth(const RunConfig& config) {
  const fs::path out_dir = fs::path(config.out_dir) / "corpus";
  fs::create_directories(out_dir);
  ImageBuffer base =
      config.corpus_base.empty()
          ? make_synthetic_page(config.corpus_height, config.corpus_width,
                                derive_seed(config.seed, 0, 0))
          : read_png(config.corpus_base);

  ordered_json manifest;
  manifest["version"] = kToolkitVersion;
  manifest["fingerprint"] = config.fingerprint();
  manifest["count"] = config.corpus_count;
  manifest["seed"] = config.seed;
  ordered_json sets = ordered_json::array();

  for (const std::string& set_name : config.sets) {
    DisturbanceSetting setting;
    setting.set = set_id_from_name(set_name);
    setting.amplitude_min = config.amplitude_min;
    setting.amplitude_max = config.amplitude_max;
    setting.seed = config.seed;
    const fs::path set_dir = out_dir / set_name;
    fs::create_directories(set_dir);
    const std::vector<CorpusSample> corpus =
        make_robustness_corpus(base, setting, config.corpus_count);
    ordered_json entries = ordered_json::array();
    for (const CorpusSample& s : corpus) {
      char name[16];
      std::snprintf(name, sizeof(name), "%03d", s.index);
      write_png(set_dir / (std::string(name) + ".png"), s.image);
      write_flow_file(set_dir / (std::string(name) + ".flow"), s.gt_flow);
      ordered_json prov;
      prov["index"] = s.index;
      prov["amplitude"] = s.amplitude;
      prov["spec"] = nlohmann::json::parse(warp_spec_to_json(s.spec));
      prov["color_seed"] = s.color_seed;
      prov["shadow_seed"] = s.shadow_seed;
      std::ofstream os(set_dir / (std::string(name) + ".json"));
      os << prov.dump(2) << "\n";
      entries.push_back({{"index", s.index},
                         {"image", set_name + "/" + name + ".png"},
                         {"flow", set_name + "/" + name + ".flow"},
                         {"amplitude", s.amplitude}});
    }
    sets.push_back({{"set", set_name}, {"samples", entries}});
  }
  manifest["sets"] = sets;
  std::ofstream os(out_dir / "manifest.json");
  os << manifest.dump(2) << "\n";
}

// ---- dewarp --------------------------------------------------------------------

namespace {

std::unique_ptr<GridPredictor> make_predictor(const RunConfig& config) {
  const std::string& spec = config.predictor;
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg =
      colon == std::string::npos ? std::string() : spec.substr(colon + 1);
  if (kind == "file")
    return file_predictor(arg, config.grid_rows, config.grid_cols);
  if (kind == "command")
    return command_predictor(arg, config.grid_rows, config.grid_cols);
  if (kind == "oracle") {
    std::ifstream is(arg);
    if (!is) throw IoError("cannot open warp spec: " + arg);
    std::stringstream ss;
    ss << is.rdbuf();
    const WarpSpec w = warp_spec_from_json(ss.str());
    // bind the warp to each image's own frame; crops reach it through the
    // context's original dimensions
    const int rows = config.grid_rows, cols = config.grid_cols;
    return function_predictor(
        [w, rows, cols](const ImageBuffer&, const PredictContext& ctx) {
          if (ctx.original_height < 2 || ctx.original_width < 2)
            throw PredictorError("oracle predictor needs the original frame",
                                 ctx.image_id);
          const ExpandedWarp warp(w, ctx.original_height, ctx.original_width);
          const FrameTransform to_current = ctx.to_original.inverse();
          Grid2D g(rows, cols);
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
              const Vec2 q{
                  double(c) * (ctx.original_width - 1) / (cols - 1),
                  double(r) * (ctx.original_height - 1) / (rows - 1)};
              g.at(r, c) = to_current.apply(warp.forward(q));
            }
          return g;
        },
        rows, cols);
  }
  throw ParameterError("unknown predictor spec: " + spec);
}

}  // namespace

DewarpOutcome run_dewarp(const RunConfig& config) {
  const fs::path in_dir(config.input_dir);
  if (!fs::is_directory(in_dir))
    throw IoError("dewarp input dir not found: " + in_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in_dir))
    if (e.is_regular_file() && is_image_file(e.path()))
      files.push_back(e.path());
  std::sort(files.begin(), files.end());

  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);
  const auto predictor = make_predictor(config);
  const std::string fp = config.fingerprint();

  DewarpOutcome outcome;
  std::vector<std::optional<std::string>> failures(files.size());
  run_parallel(static_cast<int>(files.size()), config.jobs, [&](int i) {
    const fs::path& path = files[i];
    const std::string stem = path.stem().string();
    try {
      const ImageBuffer img = read_png(path);
      const DewarpResult res = dewarp_with_axis_alignment(
          img, *predictor, config.rounds, config.margin, config.out_height,
          config.out_width, stem);
      write_png(out_dir / (stem + "_dewarped.png"), res.image);
      write_grid_file(out_dir / (stem + ".grid"),
                      StoredGrid::from_pixels(res.grid, img.height(),
                                              img.width()));
      ordered_json j;
      j["image_id"] = stem;
      j["rounds_executed"] = res.report.rounds_executed;
      j["residual_angle_deg"] = res.report.residual_angle_deg;
      j["coverage"] = res.report.coverage;
      j["degenerate_fallback"] = res.report.degenerate_fallback;
      ordered_json rounds = ordered_json::array();
      for (const RoundRecord& r : res.report.rounds) {
        ordered_json jr;
        jr["rect"] = {{"cx", r.rect.center.x},   {"cy", r.rect.center.y},
                      {"width", r.rect.width},   {"height", r.rect.height},
                      {"angle_deg", r.rect.angle_deg}};
        jr["coverage"] = r.coverage;
        jr["transform"] = r.transform.matrix();
        rounds.push_back(jr);
      }
      j["rounds"] = rounds;
      j["fingerprint"] = fp;
      j["version"] = kToolkitVersion;
      std::ofstream os(out_dir / (stem + "_report.json"));
      os << j.dump(2) << "\n";
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });
  for (size_t i = 0; i < files.size(); ++i) {
    if (failures[i])
      outcome.failures.push_back({files[i].stem().string(), *failures[i]});
    else
      ++outcome.processed;
  }
  return outcome;
}

// ---- heatmap -------------------------------------------------------------------

std::vector<fs::path> run_heatmap(const HeatmapArgs& args,
                                  const RunConfig& config) {
  const ImageBuffer gt_full = read_png(args.gt_image);
  ImageBuffer gt = canonicalize(gt_full, config.canonical_max_side);

  FlowField flow;
  ImageBuffer dewarped;
  if (!args.flow_file.empty()) {
    flow = read_flow_file(args.flow_file);
    if (!args.dewarped_image.empty()) {
      dewarped = resize_bilinear(read_png(args.dewarped_image), flow.height,
                                 flow.width);
    } else {
      dewarped = resize_bilinear(gt_full, flow.height, flow.width);
    }
    if (flow.height != gt.height() || flow.width != gt.width()) {
      if (flow.height == gt_full.height() && flow.width == gt_full.width())
        gt = gt_full;
      else
        throw DimensionError("heatmap: flow/gt dimensions differ");
    }
  } else {
    if (args.dewarped_image.empty())
      throw InvalidInputError("heatmap: need a dewarped image or a flow file");
    dewarped = resize_bilinear(read_png(args.dewarped_image), gt.height(),
                               gt.width());
    flow = estimate_sift_flow(gt, dewarped, config.sift);
  }

  const AadResult res = aad(gt, flow, config.aad_params);
  const double cap = heatmap_cap(res.d, args.cap_percentile);
  HeatmapOptions opts;
  opts.alpha = args.alpha;
  opts.percentile = args.cap_percentile;
  opts.legend_height = args.legend_height;

  const fs::path out_dir(args.out_dir);
  fs::create_directories(out_dir);
  const std::string stem = fs::path(args.gt_image).stem().string();
  std::vector<fs::path> written;
  const struct {
    const char* suffix;
    const std::vector<float>* map;
  } maps[] = {{"_aad.png", &res.d},
              {"_aad_h.png", &res.d_row},
              {"_aad_v.png", &res.d_col}};
  for (const auto& m : maps) {
    const ImageBuffer overlay = render_heatmap_overlay(
        dewarped, *m.map, res.height, res.width, cap, opts);
    const fs::path path = out_dir / (stem + m.suffix);
    write_png(path, overlay);
    written.push_back(path);
  }
  return written;
}

// ---- loss ----------------------------------------------------------------------

LossReportValues compute_loss_report(const LossArgs& args,
                                     const RunConfig& config) {
  if (args.pred_grid.empty() || args.gt_grid.empty())
    throw InvalidInputError("loss: prediction and gt grid paths are required");
  const StoredGrid pred_s = read_grid_file(args.pred_grid);
  const StoredGrid gt_s = read_grid_file(args.gt_grid);
  if (pred_s.dim != 2 || gt_s.dim != 2)
    throw DimensionError("loss: 2D grids required");
  if (pred_s.h != gt_s.h || pred_s.w != gt_s.w)
    throw DimensionError("loss: grid shapes differ");
  // normalized coordinates live on the unit square; evaluate there
  const Grid2D pred = pred_s.to_pixels(2, 2);
  const Grid2D gt = gt_s.to_pixels(2, 2);

  LossReportValues v;
  v.l2d = l1_grid_loss(pred, gt);
  const UVGrid uv_gt = make_uniform_uv_grid(gt.rows(), gt.cols());
  const LossBreakdown al = axis_aligned_loss_from_prediction(pred, gt, uv_gt);
  v.l_hor = al.l_hor;
  v.l_ver = al.l_ver;
  v.l_al = al.l_al;
  if (!args.pred_grid3d.empty() && !args.gt_grid3d.empty()) {
    const StoredGrid p3 = read_grid_file(args.pred_grid3d);
    const StoredGrid g3 = read_grid_file(args.gt_grid3d);
    v.l3d = l1_grid_loss(p3.to_grid3d(), g3.to_grid3d());
  }
  if (!args.image.empty() && !args.dewarped.empty()) {
    const ImageBuffer a = read_png(args.image);
    ImageBuffer b = read_png(args.dewarped);
    if (a.height() != b.height() || a.width() != b.width())
      b = resize_bilinear(b, a.height(), a.width());
    v.l_ssim = ssim_loss(a, b);
  }
  LossParts parts;
  parts.l2d = v.l2d.value_or(0.0);
  parts.l3d = v.l3d.value_or(0.0);
  parts.l_al = v.l_al;
  parts.l_ssim = v.l_ssim.value_or(0.0);
  v.l_all = total_loss(parts, config.weights);
  return v;
}

std::string loss_report_to_json(const LossReportValues& v,
                                const RunConfig& config) {
  ordered_json j;
  auto put = [&](const char* k, const std::optional<double>& x) {
    if (x)
      j[k] = *x;
    else
      j[k] = nullptr;
  };
  put("l_2d", v.l2d);
  put("l_3d", v.l3d);
  j["l_hor"] = v.l_hor;
  j["l_ver"] = v.l_ver;
  j["l_al"] = v.l_al;
  put("l_ssim", v.l_ssim);
  j["l_all"] = v.l_all;
  j["weights"] = {{"alpha", config.weights.alpha},
                  {"beta", config.weights.beta},
                  {"gamma", config.weights.gamma},
                  {"lambda", config.weights.lambda}};
  j["fingerprint"] = config.fingerprint();
  j["version"] = kToolkitVersion;
  return j.dump(2);
}

}  // namespace warpmetrics

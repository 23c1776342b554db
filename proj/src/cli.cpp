#include "pixmix/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pixmix/adversary.hpp"
#include "pixmix/errors.hpp"
#include "pixmix/ifs.hpp"
#include "pixmix/manifest.hpp"
#include "pixmix/metrics.hpp"
#include "pixmix/mixing.hpp"
#include "pixmix/rng.hpp"

namespace pixmix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitItemFailures = 1;
constexpr int kExitUsage = 2;

int default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void add_seed_option(CLI::App* cmd, std::uint64_t& seed) {
  cmd->add_option("--seed", seed, "Root RNG seed")
      ->envname("PIXMIX_SEED")
      ->capture_default_str();
}

struct AugmentArgs {
  std::string input_dir;
  std::string output_dir;
  std::string mixing_set;
  std::string preset_name;
  std::string sources;
  int k = 4;
  double beta = 3.0;
  std::string mode = "full";
  int severity = 3;
  Eigen::Index size = 32;
  std::uint64_t seed = 0;
  int workers = default_workers();
  std::vector<std::string> sweep;
};

// Restrict a manifest to a comma-separated list of source tags.
MixingManifest filter_sources(MixingManifest manifest,
                              const std::string& sources) {
  std::vector<std::string> allowed;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t comma = sources.find(',', pos);
    const std::string tag = comma == std::string::npos
                                ? sources.substr(pos)
                                : sources.substr(pos, comma - pos);
    if (tag != "fractal" && tag != "feature_vis" && tag != "other") {
      throw std::invalid_argument("--sources: unknown source tag '" + tag +
                                  "'");
    }
    allowed.push_back(tag);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  std::erase_if(manifest.entries, [&](const ManifestEntry& e) {
    return std::find(allowed.begin(), allowed.end(), e.source) == allowed.end();
  });
  if (manifest.entries.empty()) {
    throw std::invalid_argument(
        "--sources filter left no usable mixing pictures");
  }
  return manifest;
}

// "k=2,3,4" -> {2, 3, 4}
std::vector<double> parse_sweep_values(const std::string& token,
                                       const std::string& key) {
  const std::string prefix = key + "=";
  std::vector<double> values;
  const std::string rest = token.substr(prefix.size());
  std::size_t pos = 0;
  for (;;) {
    const std::size_t comma = rest.find(',', pos);
    const std::string piece = comma == std::string::npos
                                  ? rest.substr(pos)
                                  : rest.substr(pos, comma - pos);
    if (piece.empty()) {
      throw std::invalid_argument("bad --sweep token '" + token + "'");
    }
    values.push_back(std::stod(piece));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return values;
}

int run_augment(const AugmentArgs& args, const CLI::App& cmd) {
  PixMixConfig config;
  if (!args.preset_name.empty()) config = preset(args.preset_name);
  if (cmd.count("--k") || args.preset_name.empty()) config.k = args.k;
  if (cmd.count("--beta") || args.preset_name.empty()) config.beta = args.beta;
  if (cmd.count("--size") || args.preset_name.empty()) {
    config.target_size = args.size;
  }
  config.mode = parse_mix_mode(args.mode);
  config.aug.severity = args.severity;
  if (config.k < 0) throw std::invalid_argument("--k must be >= 0");
  if (!(config.beta > 0.0)) throw std::invalid_argument("--beta must be > 0");

  MixingManifest manifest;
  if (!args.mixing_set.empty()) {
    manifest = load_manifest(args.mixing_set);
    if (!args.sources.empty()) {
      manifest = filter_sources(std::move(manifest), args.sources);
    }
  } else if (config.mode != MixMode::kInputOnly) {
    throw std::invalid_argument(
        "--mixing-set is required unless --mode input_only");
  }

  const RngStream root(args.seed);
  struct Cell {
    fs::path out_dir;
    PixMixConfig config;
    RngStream stream;
  };
  std::vector<Cell> cells;
  if (args.sweep.empty()) {
    cells.push_back({args.output_dir, config, root});
  } else {
    std::vector<double> ks = {static_cast<double>(config.k)};
    std::vector<double> betas = {config.beta};
    for (const auto& token : args.sweep) {
      if (token.rfind("k=", 0) == 0) {
        ks = parse_sweep_values(token, "k");
      } else if (token.rfind("beta=", 0) == 0) {
        betas = parse_sweep_values(token, "beta");
      } else {
        throw std::invalid_argument("bad --sweep token '" + token + "'");
      }
    }
    for (double k : ks) {
      for (double beta : betas) {
        char name[64];
        std::snprintf(name, sizeof name, "k%d_beta%g", static_cast<int>(k),
                      beta);
        Cell cell{fs::path(args.output_dir) / name, config, root.split(name)};
        cell.config.k = static_cast<int>(k);
        cell.config.beta = beta;
        cells.push_back(std::move(cell));
      }
    }
  }

  bool any_errors = false;
  std::size_t total = 0;
  for (const auto& cell : cells) {
    const DatasetSummary summary =
        augment_dataset(args.input_dir, manifest, cell.config, cell.stream,
                        cell.out_dir, args.workers);
    total += summary.count;
    std::printf(
        "augment: %zu image(s) -> %s (k=%d beta=%g mode=%s) in %.2fs\n",
        summary.count, cell.out_dir.string().c_str(), cell.config.k,
        cell.config.beta, std::string(mix_mode_name(cell.config.mode)).c_str(),
        summary.seconds);
    for (const auto& err : summary.errors) {
      std::fprintf(stderr, "augment: FAILED %s: %s\n", err.path.c_str(),
                   err.message.c_str());
      any_errors = true;
    }
  }
  if (total == 0 && !any_errors) {
    std::fprintf(stderr, "augment: no .png inputs found under %s\n",
                 args.input_dir.c_str());
    return kExitUsage;
  }
  return any_errors ? kExitItemFailures : kExitOk;
}

int run_gen_fractals(int count, Eigen::Index size, std::uint64_t seed,
                     const std::string& out_dir, std::int64_t points,
                     int workers) {
  FractalGenConfig config;
  config.points = points;
  config.workers = workers;
  const MixingManifest manifest =
      generate_mixing_set(RngStream(seed), count, size, out_dir, config);
  std::printf(
      "gen-fractals: %zu image(s) at %lldx%lld -> %s (manifest.json included)\n",
      manifest.entries.size(), static_cast<long long>(size),
      static_cast<long long>(size), out_dir.c_str());
  return kExitOk;
}

int run_manifest_build(const std::string& fractals_dir,
                       const std::string& feature_vis_dir,
                       const std::string& other_dir,
                       const std::string& out_file) {
  std::vector<std::pair<fs::path, std::string>> dirs;
  if (!fractals_dir.empty()) dirs.push_back({fractals_dir, "fractal"});
  if (!feature_vis_dir.empty()) {
    dirs.push_back({feature_vis_dir, "feature_vis"});
  }
  if (!other_dir.empty()) dirs.push_back({other_dir, "other"});
  if (dirs.empty()) {
    throw std::invalid_argument(
        "manifest build: give at least one of --fractals/--feature-vis/--other");
  }
  const fs::path out_path = fs::weakly_canonical(out_file);
  const fs::path base =
      out_path.has_parent_path() ? out_path.parent_path() : fs::current_path();
  fs::create_directories(base);
  for (auto& [dir, tag] : dirs) dir = fs::weakly_canonical(dir);

  const ManifestBuildResult result = build_manifest(dirs, base);
  save_manifest(result.manifest, out_path);
  std::printf("manifest: %zu entr%s -> %s\n", result.manifest.entries.size(),
              result.manifest.entries.size() == 1 ? "y" : "ies",
              out_path.string().c_str());
  for (const auto& err : result.errors) {
    std::fprintf(stderr, "manifest: SKIPPED %s: %s\n", err.path.c_str(),
                 err.message.c_str());
  }
  return result.errors.empty() ? kExitOk : kExitItemFailures;
}

int run_eval(const std::string& predictions, const std::string& normalizers,
             std::optional<int> bins, const std::string& out_file,
             const std::string& csv_file) {
  const auto records = ingest_predictions(predictions);
  EvalOptions options;
  options.bins = bins;
  if (!normalizers.empty()) {
    options.normalizers = load_normalizers(normalizers);
  }

  const EvalReport report = evaluate(records, options);
  const std::string doc = report_to_json_string(report);
  if (!out_file.empty()) {
    std::ofstream out(out_file, std::ios::binary);
    if (!out) throw IoError("cannot write report: " + out_file);
    out << doc;
  }
  if (!csv_file.empty()) write_per_corruption_csv(records, csv_file);

  auto pct = [](const std::optional<double>& v) {
    return v.has_value() ? std::to_string(100.0 * *v) : std::string("n/a");
  };
  std::printf("eval: %zu record(s), %zu anomaly(ies)\n", report.counts.records,
              report.counts.anomalies);
  std::printf("  clean error      %s\n", pct(report.clean_error).c_str());
  std::printf("  mCE              %s\n",
              report.mce ? std::to_string(100.0 * report.mce->value).c_str()
                         : "n/a");
  std::printf("  mFR              %s\n",
              report.mfr ? std::to_string(100.0 * report.mfr->value).c_str()
                         : "n/a");
  std::printf("  mT5D             %s\n",
              report.mt5d ? std::to_string(report.mt5d->value).c_str() : "n/a");
  std::printf("  AUROC / AUPR     %s / %s\n", pct(report.auroc).c_str(),
              pct(report.aupr).c_str());
  if (!out_file.empty()) std::printf("  report -> %s\n", out_file.c_str());
  return kExitOk;
}

int run_attack(const std::string& model_file, const std::string& data_file,
               double epsilon, int steps, std::optional<double> step_size,
               bool no_random_start, std::uint64_t seed, int workers,
               const std::string& out_file) {
  const ToyModel model = load_model(model_file);
  const Dataset dataset = load_dataset(data_file);
  for (const auto& ex : dataset) {
    if (ex.x.size() != model.input_dim()) {
      throw SchemaError("data/model dimension mismatch");
    }
    if (ex.label >= model.class_count()) {
      throw SchemaError("data label exceeds model class count");
    }
  }
  AttackConfig config;
  config.epsilon = epsilon;
  config.steps = steps;
  config.step_size = step_size;
  config.random_start = !no_random_start;

  const double clean = clean_error(model, dataset);
  const double adversarial =
      adversarial_error(model, dataset, config, RngStream(seed), workers);

  const json doc = {
      {"epsilon", config.epsilon},
      {"steps", config.steps},
      {"step_size", config.resolved_step_size()},
      {"random_start", config.random_start},
      {"examples", dataset.size()},
      {"clean_error", 100.0 * clean},
      {"adversarial_error", 100.0 * adversarial},
      {"rates_unit", "percent"},
  };
  if (!out_file.empty()) {
    std::ofstream out(out_file, std::ios::binary);
    if (!out) throw IoError("cannot write report: " + out_file);
    out << doc.dump(2) << "\n";
  }
  std::printf("attack: %zu example(s), eps=%g, %d step(s)\n", dataset.size(),
              config.epsilon, config.steps);
  std::printf("  clean error       %.4f%%\n", 100.0 * clean);
  std::printf("  adversarial error %.4f%%\n", 100.0 * adversarial);
  if (!out_file.empty()) std::printf("  report -> %s\n", out_file.c_str());
  return kExitOk;
}

int run_synth_anomalies(const std::string& kind, int count, Eigen::Index size,
                        std::uint64_t seed, const std::string& out_dir) {
  gen_synthetic_anomalies(parse_anomaly_kind(kind), RngStream(seed), count,
                          size, out_dir);
  std::printf("synth-anomalies: %d %s image(s) at %lldx%lld -> %s\n", count,
              kind.c_str(), static_cast<long long>(size),
              static_cast<long long>(size), out_dir.c_str());
  return kExitOk;
}

}  // namespace

int cli_run(int argc, char** argv) {
  CLI::App app{
      "pixmix: structurally complex image mixing and an ML-safety evaluation "
      "harness"};
  app.require_subcommand(1);

  AugmentArgs aug;
  CLI::App* augment_cmd = app.add_subcommand(
      "augment", "Apply the mixing pipeline to a directory of PNGs");
  augment_cmd->add_option("--in", aug.input_dir, "Input directory")->required();
  augment_cmd->add_option("--out", aug.output_dir, "Output directory")
      ->required();
  augment_cmd->add_option("--mixing-set", aug.mixing_set,
                          "manifest.json of mixing pictures");
  augment_cmd->add_option(
      "--sources", aug.sources,
      "Restrict mixing pictures to these source tags, e.g. fractal or "
      "fractal,feature_vis");
  augment_cmd->add_option("--preset", aug.preset_name,
                          "Hyperparameter preset: cifar or imagenet");
  augment_cmd->add_option("--k", aug.k, "Maximum mixing rounds")
      ->capture_default_str();
  augment_cmd->add_option("--beta", aug.beta, "Beta-distribution parameter")
      ->capture_default_str();
  augment_cmd->add_option("--mode", aug.mode, "full, input_only or mixset_only")
      ->capture_default_str();
  augment_cmd
      ->add_option("--severity", aug.severity, "Augmentation severity 1..5")
      ->check(CLI::Range(1, 5))
      ->capture_default_str();
  augment_cmd->add_option("--size", aug.size, "Target image side in pixels")
      ->capture_default_str();
  augment_cmd->add_option("--workers", aug.workers, "Worker thread count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  augment_cmd->add_option(
      "--sweep", aug.sweep,
      "Hyperparameter grid, e.g. --sweep k=2,3,4 beta=3,4,5");
  add_seed_option(augment_cmd, aug.seed);

  int gf_count = 100;
  Eigen::Index gf_size = 256;
  std::uint64_t gf_seed = 0;
  std::string gf_out;
  std::int64_t gf_points = 200000;
  int gf_workers = default_workers();
  CLI::App* gen_cmd =
      app.add_subcommand("gen-fractals", "Render an IFS fractal mixing set");
  gen_cmd->add_option("--count", gf_count, "Images to emit")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_cmd->add_option("--size", gf_size, "Image side in pixels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_cmd->add_option("--out", gf_out, "Output directory")->required();
  gen_cmd->add_option("--points", gf_points, "Chaos-game iterations per image")
      ->check(CLI::Range(static_cast<std::int64_t>(1000),
                         static_cast<std::int64_t>(100000000)))
      ->capture_default_str();
  gen_cmd->add_option("--workers", gf_workers, "Worker thread count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_seed_option(gen_cmd, gf_seed);

  CLI::App* manifest_cmd =
      app.add_subcommand("manifest", "Mixing-set manifest operations");
  manifest_cmd->require_subcommand(1);
  std::string mb_fractals, mb_feature_vis, mb_other, mb_out;
  CLI::App* manifest_build_cmd = manifest_cmd->add_subcommand(
      "build", "Scan picture directories into manifest.json");
  manifest_build_cmd->add_option("--fractals", mb_fractals,
                                 "Directory of fractal PNGs");
  manifest_build_cmd->add_option("--feature-vis", mb_feature_vis,
                                 "Directory of feature-visualization PNGs");
  manifest_build_cmd->add_option("--other", mb_other,
                                 "Directory of other mixing PNGs");
  manifest_build_cmd->add_option("--out", mb_out, "Manifest file to write")
      ->required();

  std::string ev_predictions, ev_normalizers, ev_out, ev_csv;
  int ev_bins = 0;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Compute safety metrics from a JSONL prediction log");
  eval_cmd->add_option("--predictions", ev_predictions, "JSONL prediction log")
      ->required();
  eval_cmd->add_option("--normalizers", ev_normalizers,
                       "Per-corruption reference errors (JSON)");
  eval_cmd
      ->add_option("--bins", ev_bins,
                   "Calibration bin count (default: floor(sqrt(n)))")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", ev_out, "Report JSON path");
  eval_cmd->add_option("--csv", ev_csv, "Optional per-corruption CSV path");

  std::string at_model, at_data, at_out;
  double at_epsilon = 2.0 / 255.0;
  int at_steps = 20;
  double at_step_size = 0.0;
  bool at_no_random_start = false;
  std::uint64_t at_seed = 0;
  int at_workers = default_workers();
  CLI::App* attack_cmd = app.add_subcommand(
      "attack", "PGD-attack a toy model over a labeled dataset");
  attack_cmd->add_option("--model", at_model, "Model JSON file")->required();
  attack_cmd->add_option("--data", at_data, "Dataset JSON file")->required();
  attack_cmd->add_option("--epsilon", at_epsilon, "l_inf budget")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  attack_cmd->add_option("--steps", at_steps, "PGD steps")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  attack_cmd->add_option("--step-size", at_step_size,
                         "Step size (default 2.5*epsilon/steps)");
  attack_cmd->add_flag("--no-random-start", at_no_random_start,
                       "Start from the clean input instead of a random point");
  attack_cmd->add_option("--workers", at_workers, "Worker thread count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  attack_cmd->add_option("--out", at_out, "Report JSON path");
  add_seed_option(attack_cmd, at_seed);

  std::string sa_kind, sa_out;
  int sa_count = 100;
  Eigen::Index sa_size = 32;
  std::uint64_t sa_seed = 0;
  CLI::App* synth_cmd =
      app.add_subcommand("synth-anomalies", "Generate synthetic outlier images");
  synth_cmd->add_option("--kind", sa_kind, "gaussian, rademacher or blobs")
      ->required();
  synth_cmd->add_option("--count", sa_count, "Images to emit")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth_cmd->add_option("--size", sa_size, "Image side in pixels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth_cmd->add_option("--out", sa_out, "Output directory")->required();
  add_seed_option(synth_cmd, sa_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (augment_cmd->parsed()) return run_augment(aug, *augment_cmd);
    if (gen_cmd->parsed()) {
      return run_gen_fractals(gf_count, gf_size, gf_seed, gf_out, gf_points,
                              gf_workers);
    }
    if (manifest_build_cmd->parsed()) {
      return run_manifest_build(mb_fractals, mb_feature_vis, mb_other, mb_out);
    }
    if (eval_cmd->parsed()) {
      return run_eval(ev_predictions, ev_normalizers,
                      ev_bins > 0 ? std::optional<int>(ev_bins) : std::nullopt,
                      ev_out, ev_csv);
    }
    if (attack_cmd->parsed()) {
      return run_attack(at_model, at_data, at_epsilon, at_steps,
                        at_step_size > 0.0 ? std::optional<double>(at_step_size)
                                           : std::nullopt,
                        at_no_random_start, at_seed, at_workers, at_out);
    }
    if (synth_cmd->parsed()) {
      return run_synth_anomalies(sa_kind, sa_count, sa_size, sa_seed, sa_out);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace pixmix

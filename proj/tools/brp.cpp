// Command-line front end: synthetic data, both training stages, inference,
// evaluation and parameter sweeps.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "brp/config.hpp"
#include "brp/data.hpp"
#include "brp/evaluation.hpp"
#include "brp/pipeline.hpp"
#include "brp/training.hpp"

namespace fs = std::filesystem;
using namespace brp;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Config file first, then --set pairs, then dedicated flags.
struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;

  void attach(CLI::App* app, bool stage2) {
    app->add_option("--config", file, "key = value config file (desk-scale defaults otherwise)");
    app->add_option("--set", sets, "override one key, e.g. --set stage1.lr0=1e-4 (repeatable)");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--epochs", epochs, stage2 ? "stage-2 epochs" : "stage-1 epochs (also the single period)");
    is_stage2 = stage2;
  }

  TrainConfig resolve() const {
    TrainConfig cfg = file.empty() ? TrainConfig::desk_scale() : load_config(file);
    KeyValues kv;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects KEY=VALUE, got '" + s + "'");
      kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    apply_key_values(cfg, kv);
    if (seed) cfg.seed = *seed;
    if (epochs) {
      if (is_stage2) {
        cfg.stage2.epochs = *epochs;
      } else {
        cfg.stage1.epochs = *epochs;
        cfg.stage1.first_period = *epochs;
      }
    }
    cfg.validate();
    return cfg;
  }

  bool is_stage2 = false;
};

Stage2Pair load_stage2_pair(const std::string& small, const std::string& large) {
  Stage2Pair p{load_stage2(small), load_stage2(large)};
  if (p.small.size_class != SizeClass::kSmall || p.large.size_class != SizeClass::kLarge) {
    throw std::invalid_argument("--stage2-small/--stage2-large checkpoints hold the wrong size class");
  }
  return p;
}

void print_epoch(const char* tag, const EpochRecord& r) {
  std::cout << tag << " epoch " << r.epoch << "  lr " << r.lr << "  loss " << r.loss;
  if (r.val_aji) std::cout << "  val_aji " << *r.val_aji;
  std::cout << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage nucleus instance segmentation"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  int synth_n = 10;
  std::string synth_shape = "128x128", synth_out;
  SynthConfig synth_cfg;
  synth->add_option("--n", synth_n, "number of images")->check(CLI::PositiveNumber);
  synth->add_option("--shape", synth_shape, "HxW, both divisible by 8");
  synth->add_option("--seed", synth_cfg.seed, "random seed");
  synth->add_option("--density", synth_cfg.density, "expected nuclei per 10^4 pixels");
  synth->add_option("--overlap", synth_cfg.overlap_prob, "chance a nucleus overlaps an earlier one");
  synth->add_option("--out", synth_out, "output directory")->required();

  // train-stage1
  auto* t1 = app.add_subcommand("train-stage1", "train the stage-1 network");
  std::string t1_data, t1_out;
  ConfigFlags t1_cfg;
  t1->add_option("--data", t1_data, "dataset directory with images/ and labels/")->required();
  t1->add_option("--out", t1_out, "output directory")->required();
  t1_cfg.attach(t1, false);

  // train-stage2
  auto* t2 = app.add_subcommand("train-stage2", "train the two refinement networks");
  std::string t2_data, t2_stage1, t2_out;
  ConfigFlags t2_cfg;
  t2->add_option("--data", t2_data, "dataset directory with images/ and labels/")->required();
  t2->add_option("--stage1", t2_stage1, "stage-1 checkpoint")->required();
  t2->add_option("--out", t2_out, "output directory")->required();
  t2_cfg.attach(t2, true);

  // infer
  auto* inf = app.add_subcommand("infer", "predict instance maps");
  std::string inf_data, inf_stage1, inf_small, inf_large, inf_out, inf_debug;
  bool inf_no_stage2 = false;
  std::optional<int> inf_radius;
  inf->add_option("--data", inf_data, "directory of images (or with images/)")->required();
  inf->add_option("--stage1", inf_stage1, "stage-1 checkpoint")->required();
  inf->add_option("--stage2-small", inf_small, "small-patch refinement checkpoint");
  inf->add_option("--stage2-large", inf_large, "large-patch refinement checkpoint");
  inf->add_flag("--no-stage2", inf_no_stage2, "output the stage-1 proposals");
  inf->add_option("--dilation-radius", inf_radius, "override the stored dilation radius");
  inf->add_option("--debug-patches", inf_debug, "write every stage-2 input patch here");
  inf->add_option("--out", inf_out, "output directory (labels/<stem>.png)")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score predictions against ground truth");
  std::string ev_pred, ev_gt, ev_report, ev_crit = "iou";
  ev->add_option("--pred", ev_pred, "prediction directory")->required();
  ev->add_option("--gt", ev_gt, "ground-truth directory")->required();
  ev->add_option("--f1-criterion", ev_crit, "iou or centroid")->check(CLI::IsMember({"iou", "centroid"}));
  ev->add_option("--report", ev_report, "report file")->required();

  // sweep
  auto* sw = app.add_subcommand("sweep", "rerun part of the pipeline per parameter value");
  std::string sw_param, sw_values, sw_data, sw_train, sw_stage1, sw_small, sw_large, sw_out;
  ConfigFlags sw_cfg;
  sw->add_option("--param", sw_param, "dilation_radius, tau or stage2_loss")
      ->required()
      ->check(CLI::IsMember({"dilation_radius", "tau", "stage2_loss"}));
  sw->add_option("--values", sw_values, "comma-separated values")->required();
  sw->add_option("--data", sw_data, "labelled evaluation set")->required();
  sw->add_option("--stage1", sw_stage1, "stage-1 checkpoint")->required();
  sw->add_option("--stage2-small", sw_small, "small-patch checkpoint (dilation_radius)");
  sw->add_option("--stage2-large", sw_large, "large-patch checkpoint (dilation_radius)");
  sw->add_option("--train", sw_train, "labelled training set (tau, stage2_loss)");
  sw->add_option("--out", sw_out, "write the table here as well");
  sw_cfg.attach(sw, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto x = synth_shape.find_first_of("x,");
      if (x == std::string::npos) throw std::invalid_argument("--shape expects HxW");
      synth_cfg.height = std::stoi(synth_shape.substr(0, x));
      synth_cfg.width = std::stoi(synth_shape.substr(x + 1));
      const auto ds = synth_generate(synth_n, synth_cfg);
      save_dataset(synth_out, ds.samples);
      long placed = 0;
      for (int p : ds.placed) placed += p;
      std::cout << "wrote " << ds.samples.size() << " images (" << placed << " nuclei) to " << synth_out << "\n";
    } else if (*t1) {
      const auto cfg = t1_cfg.resolve();
      const auto all = load_dataset(t1_data);
      auto [train, val] = split_train_val(all, cfg.stage1.val_fraction, cfg.seed);
      fs::create_directories(t1_out);
      save_config(fs::path(t1_out) / "config.txt", cfg);
      TrainOptions opts{fs::path(t1_out), [](const EpochRecord& r) { print_epoch("stage1", r); }};
      const auto res = train_stage1(train, val, cfg, opts);
      std::cout << "best epoch " << res.best_epoch << "; checkpoint " << (fs::path(t1_out) / "stage1_best.brpc")
                << "\n";
    } else if (*t2) {
      const auto cfg = t2_cfg.resolve();
      auto stage1 = load_stage1(t2_stage1);
      const auto all = load_dataset(t2_data);
      fs::create_directories(t2_out);
      save_config(fs::path(t2_out) / "config.txt", cfg);
      TrainOptions opts{fs::path(t2_out), [](const EpochRecord& r) { print_epoch("stage2", r); }};
      const auto res = train_stage2(stage1, all, cfg, opts);
      std::cout << "patches: " << res.n_small << " small, " << res.n_large << " large\n";
    } else if (*inf) {
      auto stage1 = load_stage1(inf_stage1);
      std::optional<Stage2Pair> stage2;
      if (!inf_no_stage2) {
        if (inf_small.empty() || inf_large.empty()) {
          throw std::invalid_argument("infer needs --stage2-small and --stage2-large unless --no-stage2 is given");
        }
        stage2 = load_stage2_pair(inf_small, inf_large);
      }
      InferOptions opts;
      opts.use_stage2 = !inf_no_stage2;
      if (inf_radius) {
        auto pp = stage1.postproc;
        pp.dilation_radius = *inf_radius;
        pp.validate();
        opts.postproc = pp;
      }
      if (!inf_debug.empty()) opts.debug_patch_dir = inf_debug;
      const auto samples = load_images(inf_data);
      std::vector<std::string> stems;
      for (const auto& s : samples) stems.push_back(s.stem);
      const auto preds = infer(stage1, stage2 ? &*stage2 : nullptr, samples, opts);
      save_predictions(inf_out, stems, preds);
      std::cout << "wrote " << preds.size() << " label maps to " << (fs::path(inf_out) / "labels") << "\n";
    } else if (*ev) {
      const auto report =
          evaluate_dirs(ev_pred, ev_gt, ev_crit == "centroid" ? F1Criterion::kCentroid : F1Criterion::kIou);
      write_report(ev_report, report);
      std::cout << format_report(report);
    } else if (*sw) {
      auto stage1 = load_stage1(sw_stage1);
      const auto eval = load_dataset(sw_data);
      std::vector<SweepRow> rows;
      if (sw_param == "dilation_radius") {
        if (sw_small.empty() || sw_large.empty()) {
          throw std::invalid_argument("dilation_radius sweep needs --stage2-small and --stage2-large");
        }
        auto stage2 = load_stage2_pair(sw_small, sw_large);
        std::vector<int> radii;
        for (const auto& v : split_csv(sw_values)) radii.push_back(std::stoi(v));
        rows = sweep_dilation_radius(stage1, stage2, eval, radii);
      } else {
        if (sw_train.empty()) throw std::invalid_argument(sw_param + " sweep retrains stage 2 and needs --train");
        const auto cfg = sw_cfg.resolve();
        rows = sweep_stage2_param(stage1, load_dataset(sw_train), eval, cfg, sw_param, split_csv(sw_values));
      }
      const auto table = format_sweep(sw_param, rows);
      std::cout << table;
      if (!sw_out.empty()) {
        std::ofstream(sw_out) << table;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "abc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <optional>

#include "abc/checkpoint.hpp"
#include "abc/grad_battery.hpp"
#include "abc/metrics.hpp"
#include "abc/ops.hpp"
#include "abc/run_config.hpp"
#include "abc/trainer.hpp"

namespace abc {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct Paths {
  std::string checkpoint;
  std::string dataset;
  std::string image;
  std::string resume;
  std::string inject_fault;
  std::size_t instances = 5;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config, "key=value run configuration file");
  sub->add_option("--seed", flags.seed, "overrides the configured seed");
  sub->add_option("--out", flags.out, "output path");
}

RunConfig load_config(const CommonFlags& flags) {
  return flags.config.empty() ? RunConfig{} : RunConfig::load(flags.config);
}

/// Flag value when given, else the config key, else a ConfigError.
std::string pick_path(const std::string& flag, const RunConfig& cfg, std::string_view key, const char* flag_name) {
  if (!flag.empty()) return flag;
  if (cfg.has(key)) return cfg.get_string(key);
  throw ConfigError(std::string("missing ") + flag_name + " (or config key " + std::string(key) + ")");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text)) throw DatasetError("cannot write " + path.string());
}

int cmd_gen_data(const CommonFlags& flags, std::ostream& out) {
  RunConfig cfg = load_config(flags);
  static constexpr std::array<std::string_view, 1> required{"data.count"};
  cfg.require(required);
  if (flags.seed) cfg.set("data.seed", std::to_string(*flags.seed));
  const SceneSpec spec = cfg.scene_spec();
  const fs::path dir = pick_path(flags.out, cfg, "paths.dataset", "--out");
  const std::size_t count = cfg.get_size("data.count");
  write_dataset(dir, generate_dataset(spec, count));
  out << "wrote " << count << " samples to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const CommonFlags& flags, const Paths& paths, std::ostream& out) {
  RunConfig cfg = load_config(flags);
  static constexpr std::array<std::string_view, 6> required{"model.C",      "model.height", "model.width",
                                                            "train.epochs", "train.lr",     "train.batch_size"};
  cfg.require(required);
  if (flags.seed) cfg.set("train.seed", std::to_string(*flags.seed));
  const AbcConfig model_cfg = cfg.model_config();
  TrainConfig train_cfg = cfg.train_config();
  const fs::path dataset_dir = pick_path(paths.dataset, cfg, "paths.dataset", "--dataset");
  const fs::path out_dir = pick_path(flags.out, cfg, "paths.out", "--out");

  const std::vector<Sample> dataset = load_dataset(dataset_dir);
  if (dataset.empty()) throw DatasetError("dataset " + dataset_dir.string() + " is empty");

  AbcNet model(model_cfg, train_cfg.seed);
  AdamWState state;
  if (!paths.resume.empty()) load_checkpoint(paths.resume, model, state);

  fs::create_directories(out_dir);
  train_cfg.checkpoint_path = out_dir / "model.abck";
  const fs::path log_path = out_dir / "train_log.csv";
  std::ofstream log(log_path, std::ios::binary | (paths.resume.empty() ? std::ios::trunc : std::ios::app));
  if (!log) throw DatasetError("cannot write " + log_path.string());

  fit(model, dataset, train_cfg, state, [&](const EpochRecord& r) {
    const std::string line = format_epoch_line(r);
    log << line << '\n' << std::flush;
    out << line << '\n' << std::flush;
  });
  out << "checkpoint: " << train_cfg.checkpoint_path.string() << "\n";
  return kExitOk;
}

AbcNet load_model(const RunConfig& cfg, const fs::path& checkpoint) {
  AbcNet model(cfg.model_config(), 0);
  AdamWState state;
  load_checkpoint(checkpoint, model, state);
  return model;
}

int cmd_eval(const CommonFlags& flags, const Paths& paths, std::ostream& out) {
  const RunConfig cfg = load_config(flags);
  const fs::path checkpoint = pick_path(paths.checkpoint, cfg, "paths.checkpoint", "--checkpoint");
  const fs::path dataset_dir = pick_path(paths.dataset, cfg, "paths.dataset", "--dataset");
  const AbcNet model = load_model(cfg, checkpoint);
  const std::vector<Sample> dataset = load_dataset(dataset_dir);
  if (dataset.empty()) throw DatasetError("dataset " + dataset_dir.string() + " is empty");

  const auto probs = predict_probabilities(model, dataset);
  std::vector<ConfusionCounts> counts;
  std::vector<ProbabilityMap> maps;
  std::vector<MaskView> truths;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    counts.push_back(confusion(binarize(probs[i], 0.5f), dataset[i].mask));
    maps.push_back({probs[i], dataset[i].height, dataset[i].width});
    truths.push_back({dataset[i].mask, dataset[i].height, dataset[i].width});
  }
  out << format_metrics_csv(summarize(counts));
  const auto thresholds = even_thresholds(64);
  const std::string roc = format_roc_csv(roc_sweep(maps, truths, thresholds));
  if (flags.out.empty()) {
    out << roc;
  } else {
    write_text(flags.out, roc);
  }
  return kExitOk;
}

int cmd_infer(const CommonFlags& flags, const Paths& paths, std::ostream& out) {
  const RunConfig cfg = load_config(flags);
  const fs::path checkpoint = pick_path(paths.checkpoint, cfg, "paths.checkpoint", "--checkpoint");
  if (paths.image.empty()) throw ConfigError("missing --image");
  if (flags.out.empty()) throw ConfigError("missing --out");
  const AbcNet model = load_model(cfg, checkpoint);

  const GrayImage image = load_pgm(paths.image);
  Sample s;
  s.height = image.height;
  s.width = image.width;
  s.image = gray_to_float(image);
  s.mask.assign(s.image.size(), 0);
  const auto prob = predict_probabilities(model, std::span<const Sample>(&s, 1)).front();

  const fs::path mask_path = flags.out;
  fs::path prob_path = mask_path;
  prob_path.replace_filename(mask_path.stem().string() + ".prob.pgm");
  if (mask_path.has_parent_path()) fs::create_directories(mask_path.parent_path());
  save_pgm(mask_to_gray(binarize(prob, 0.5f), s.height, s.width), mask_path);
  save_pgm(to_gray(prob, s.height, s.width), prob_path);
  out << "mask: " << mask_path.string() << "\nprobability: " << prob_path.string() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const CommonFlags& flags, const Paths& paths, std::ostream& out) {
  BatteryOptions options;
  options.seed = flags.seed.value_or(0);
  options.instances = paths.instances;
  if (!paths.inject_fault.empty()) debug::inject_backward_fault(paths.inject_fault, 1.5f);
  std::vector<GradCheckRow> rows;
  try {
    rows = run_gradient_battery(options);
  } catch (...) {
    debug::clear_backward_fault();
    throw;
  }
  debug::clear_backward_fault();

  std::string table = "op,instances,max_rel_error,status,note\n";
  bool ok = true;
  for (const auto& r : rows) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s,%zu,%.3e,%s,", r.op.c_str(), r.instances, r.max_error,
                  r.informational ? "INFO" : (r.passed ? "PASS" : "FAIL"));
    table += buf + r.note + "\n";
    if (!r.informational) ok = ok && r.passed;
  }
  out << table;
  if (!flags.out.empty()) write_text(flags.out, table);
  return ok ? kExitOk : kExitNumerical;
}

int cmd_flops(const CommonFlags& flags, std::ostream& out) {
  const RunConfig cfg = load_config(flags);
  AbcConfig base;
  if (cfg.has("model.height")) base.height = cfg.get_size("model.height");
  if (cfg.has("model.width")) base.width = cfg.get_size("model.width");
  if (cfg.has("model.encoder_first_layer")) {
    base.encoder_first_layer = parse_encoder_first_layer(cfg.get_string("model.encoder_first_layer"));
  }
  if (cfg.has("model.decoder_first_layer")) {
    base.decoder_first_layer = parse_decoder_first_layer(cfg.get_string("model.decoder_first_layer"));
  }
  if (cfg.has("model.deep_supervision")) base.deep_supervision = cfg.get_bool("model.deep_supervision");

  std::string table = "C,MACs,GFLOPs\n";
  std::array<std::uint64_t, 3> flops{};
  constexpr std::array<std::size_t, 3> channels{16, 32, 64};
  for (std::size_t i = 0; i < channels.size(); ++i) {
    AbcConfig c = base;
    c.input_dim = channels[i];
    c.validate();
    flops[i] = count_flops(c);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%zu,%llu,%.4f\n", channels[i], static_cast<unsigned long long>(flops[i] / 2),
                  static_cast<double>(flops[i]) * 1e-9);
    table += buf;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "ratio 32/16,%.4f\nratio 64/32,%.4f\n",
                static_cast<double>(flops[1]) / static_cast<double>(flops[0]),
                static_cast<double>(flops[2]) / static_cast<double>(flops[1]));
  table += buf;
  out << "resolution " << base.height << "x" << base.width << "\n" << table;
  if (!flags.out.empty()) write_text(flags.out, table);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Infrared small-target segmentation toolkit", "abc"};
  app.require_subcommand(1);
  CommonFlags flags;
  Paths paths;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset directory");
  add_common(gen, flags);

  CLI::App* train = app.add_subcommand("train", "train a model; writes model.abck and train_log.csv");
  add_common(train, flags);
  train->add_option("--dataset", paths.dataset, "dataset directory");
  train->add_option("--resume", paths.resume, "checkpoint to resume from");

  CLI::App* eval = app.add_subcommand("eval", "IoU/nIoU/F1 at 0.5 and a 64-threshold ROC sweep");
  add_common(eval, flags);
  eval->add_option("--checkpoint", paths.checkpoint, "model checkpoint");
  eval->add_option("--dataset", paths.dataset, "dataset directory");

  CLI::App* infer = app.add_subcommand("infer", "predict a mask for one PGM image");
  add_common(infer, flags);
  infer->add_option("--checkpoint", paths.checkpoint, "model checkpoint");
  infer->add_option("--image", paths.image, "input PGM");

  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  add_common(grad, flags);
  grad->add_option("--instances", paths.instances, "random instances per op")->check(CLI::PositiveNumber);
  grad->add_option("--inject-fault", paths.inject_fault)->group("");

  CLI::App* flops = app.add_subcommand("flops", "FLOPs for C in {16,32,64} at the configured resolution");
  add_common(flops, flags);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(flags, out);
    if (train->parsed()) return cmd_train(flags, paths, out);
    if (eval->parsed()) return cmd_eval(flags, paths, out);
    if (infer->parsed()) return cmd_infer(flags, paths, out);
    if (grad->parsed()) return cmd_gradcheck(flags, paths, out);
    if (flops->parsed()) return cmd_flops(flags, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const PgmError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DatasetError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace abc

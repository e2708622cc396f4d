#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "memseg/checkpoint.hpp"
#include "memseg/dataset.hpp"
#include "memseg/evaluation.hpp"
#include "memseg/image_io.hpp"
#include "memseg/memory.hpp"
#include "memseg/metrics.hpp"
#include "memseg/network.hpp"
#include "memseg/simulation.hpp"
#include "memseg/texture.hpp"
#include "memseg/toyset.hpp"
#include "memseg/training.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace memseg::cli {
namespace {

struct Invocation {
  std::string command;
  RunConfig cfg;
  fs::path input;
  fs::path checkpoint;
  fs::path normals;
  std::int64_t count = 8;
  std::int64_t synth_count = 200;
  std::int64_t heldout = 50;
};

std::string numbered(std::int64_t i, int width = 3) {
  std::ostringstream s;
  s << std::setw(width) << std::setfill('0') << i;
  return s.str();
}

std::string config_line(const RunConfig& cfg) { return "config " + to_json(cfg).dump(); }

void require_dir(const fs::path& p, const std::string& what) {
  if (p.empty()) throw UsageError(what + " is required");
  if (!fs::is_directory(p)) throw UsageError(what + " is not a directory: " + p.string());
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw UsageError(what + " is required");
  if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

void configure_runtime(const RunConfig& cfg, bool deterministic) {
  std::int64_t threads = cfg.threads;
  if (threads == 0) {
    threads = deterministic ? 1 : std::max<std::int64_t>(1, std::thread::hardware_concurrency());
  }
  torch::set_num_threads(static_cast<int>(threads));
  at::globalContext().setDeterministicAlgorithms(deterministic, false);
}

void check_textures(const RunConfig& cfg) {
  if (cfg.textures.mode == "directory") require_dir(cfg.textures.dir, "--textures-dir");
}

void prepare_out(const Invocation& inv) {
  fs::create_directories(inv.cfg.out);
  json doc = {{"command", inv.command}, {"config", to_json(inv.cfg)}};
  write_text(inv.cfg.out / (inv.command + "_config.json"), doc.dump(2) + "\n");
}

DatasetIndex train_index(const RunConfig& cfg) {
  require_dir(cfg.dataset.root, "--dataset-root");
  if (cfg.dataset.category.empty()) throw UsageError("--dataset-category is required");
  require_dir(cfg.dataset.root / cfg.dataset.category, "dataset category");
  return scan_dataset(cfg.dataset.root, cfg.dataset.category, Split::kTrain);
}

// A directory of images or a single image file.
DatasetIndex input_index(const fs::path& input) {
  if (input.empty()) throw UsageError("--input is required");
  if (fs::is_directory(input)) return scan_directory(input);
  if (fs::is_regular_file(input) && is_image_file(input)) {
    DatasetIndex idx;
    idx.root = input.parent_path();
    idx.items.push_back(DatasetItem{input, Label::kNormal, "good", std::nullopt});
    return idx;
  }
  throw UsageError("--input is neither an image nor a directory: " + input.string());
}

std::vector<Image> load_all(const DatasetIndex& index, std::int64_t size) {
  std::vector<Image> out;
  out.reserve(index.items.size());
  for (const auto& item : index.items) out.push_back(load_image(item.image, size));
  return out;
}

AblationFlags combine(const AblationFlags& a, const AblationFlags& b) {
  return {a.memory && b.memory, a.multi_scale && b.multi_scale,
          a.spatial_attention && b.spatial_attention,
          a.coordinate_attention && b.coordinate_attention};
}

json ablation_json(const AblationFlags& f) {
  return {{"memory", f.memory},
          {"multi_scale", f.multi_scale},
          {"spatial_attention", f.spatial_attention},
          {"coordinate_attention", f.coordinate_attention}};
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

SegModel restore_for_inference(const Invocation& inv, AblationFlags& flags) {
  require_file(inv.checkpoint, "--checkpoint");
  auto ckpt = load_checkpoint(inv.checkpoint);
  auto model = restore_model(ckpt);
  flags = combine(ckpt.network.ablation, inv.cfg.ablation);
  model->set_ablation(flags);
  model->eval();
  return model;
}

int cmd_simulate(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.cfg;
  check_textures(cfg);
  if (inv.count < 1) throw UsageError("--count must be >= 1");
  DatasetIndex index = inv.input.empty() ? train_index(cfg) : input_index(inv.input);
  if (index.items.empty()) throw Error("no input images found");
  prepare_out(inv);
  configure_runtime(cfg, cfg.deterministic);

  const fs::path dir = cfg.out / "simulate";
  fs::create_directories(dir);
  const auto textures = texture_source(cfg);
  Rng rng(derive_seed(cfg.seed, seeds::kSimulate));
  std::ofstream log(dir / "log.csv");
  log << "# " << config_line(cfg) << "\n";
  log << "index,source,kind,delta,mask_area,attempts\n";
  std::map<std::size_t, Image> cache;
  for (std::int64_t i = 0; i < inv.count; ++i) {
    const std::size_t src = static_cast<std::size_t>(i) % index.items.size();
    if (!cache.count(src)) cache[src] = load_image(index.items[src].image, cfg.dataset.image_size);
    auto sample = simulate(cache[src], cfg.sim, textures, rng);
    const std::string stem = numbered(i);
    save_image(sample.image, dir / (stem + "_image.png"));
    save_mask(sample.mask, dir / (stem + "_mask.png"));
    save_image(sample.noise, dir / (stem + "_noise.png"));
    log << i << "," << index.items[src].image.string() << "," << to_string(sample.kind) << ","
        << std::setprecision(17) << sample.delta << "," << sample.mask.area() << "," << sample.attempts
        << "\n";
  }
  out << "simulate: wrote " << inv.count << " samples to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.cfg;
  check_textures(cfg);
  if (cfg.encoder.kind == "resnet18") require_file(cfg.encoder.weights, "--encoder-weights");
  auto index = train_index(cfg);
  if (index.items.empty()) throw Error("no training images under " + cfg.dataset.root.string());
  prepare_out(inv);
  configure_runtime(cfg, cfg.deterministic);

  auto images = load_all(index, cfg.dataset.image_size);
  SegModel model(network_config(cfg));
  model->set_memory_pool(build_pool(model->encoder(), index, cfg.memory.size, cfg.dataset.image_size,
                                    derive_seed(cfg.seed, seeds::kPool)));

  std::vector<Image> train_images;
  if (cfg.train.exclude_memory_images) {
    const auto& src = model->memory_pool().sources;
    const std::set<std::string> in_pool(src.begin(), src.end());
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (!in_pool.count(index.items[i].image.string())) train_images.push_back(images[i]);
    }
    if (train_images.empty()) throw Error("every training image is in the memory pool");
  } else {
    train_images = images;
  }

  const std::string run_json = to_json(cfg).dump();
  CheckpointHook hook;
  if (cfg.train.checkpoint_every > 0) {
    fs::create_directories(cfg.out / "checkpoints");
    hook = [&](std::int64_t it) {
      save_checkpoint(make_checkpoint(model, run_json),
                      cfg.out / "checkpoints" / ("iter_" + numbered(it, 6) + ".ckpt"));
    };
  }
  auto result = train(model, train_images, train_config(cfg), texture_source(cfg), hook, &out);
  model->eval();
  save_checkpoint(make_checkpoint(model, run_json), cfg.out / "model.ckpt");
  write_loss_csv(result.trace, cfg.out / "loss.csv", {config_line(cfg)});
  out << "train: " << result.trace.size() << " iterations, final loss "
      << (result.trace.empty() ? 0.0 : result.trace.back().total) << ", checkpoint "
      << (cfg.out / "model.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_infer(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.cfg;
  auto index = input_index(inv.input);
  AblationFlags flags;
  auto model = restore_for_inference(inv, flags);
  prepare_out(inv);
  configure_runtime(cfg, cfg.deterministic);

  const fs::path maps = cfg.out / "maps";
  fs::create_directories(maps);
  std::ofstream csv(cfg.out / "scores.csv");
  csv << "# ablation " << flags.describe() << "\n";
  csv << "# " << config_line(cfg) << "\n";
  csv << "image,score\n";
  const std::int64_t size = model->config().image_size;
  for (const auto& item : index.items) {
    auto map = memseg::forward(model, load_image(item.image, size)).probs;
    const std::string stem = item.image.stem().string();
    save_heatmap(map, maps / (stem + "_heatmap.png"));
    save_gray(map, maps / (stem + "_map.png"));
    csv << item.image.string() << "," << std::setprecision(9) << image_score(map, cfg.eval.top_k) << "\n";
  }
  out << "infer: scored " << index.items.size() << " images, maps in " << maps.string() << "\n";
  return kExitOk;
}

int cmd_eval(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.cfg;
  require_dir(cfg.dataset.root, "--dataset-root");
  if (cfg.dataset.category.empty()) throw UsageError("--dataset-category is required");
  AblationFlags flags;
  auto model = restore_for_inference(inv, flags);
  auto test = scan_dataset(cfg.dataset.root, cfg.dataset.category, Split::kTest);
  prepare_out(inv);
  configure_runtime(cfg, cfg.deterministic);

  EvalOptions opt;
  opt.image_size = model->config().image_size;
  opt.top_k = cfg.eval.top_k;
  if (cfg.eval.heatmaps) opt.heatmap_dir = cfg.out / "heatmaps";
  auto report = evaluate_model(model, test, opt);

  const std::vector<std::string> header = {
      "checkpoint: " + inv.checkpoint.string(), "category: " + cfg.dataset.category,
      "ablation: " + flags.describe(), "top_k: " + std::to_string(cfg.eval.top_k),
      "seed: " + std::to_string(cfg.seed)};
  const std::string summary = format_summary(report, header);
  write_text(cfg.out / "eval_report.txt", summary);
  json doc = {{"image_auroc", finite_or_null(report.image_auroc)},
              {"pixel_auroc", finite_or_null(report.pixel_auroc)},
              {"images", report.items.size()},
              {"normal", report.normal_count},
              {"anomalous", report.anomalous_count},
              {"pixel_images", report.pixel_images},
              {"ablation", flags.describe()},
              {"ablation_flags", ablation_json(flags)},
              {"checkpoint", inv.checkpoint.string()},
              {"latency_ms", {{"mean", report.latency.mean_ms},
                              {"min", report.latency.min_ms},
                              {"max", report.latency.max_ms}}},
              {"config", to_json(cfg)}};
  write_text(cfg.out / "eval_report.json", doc.dump(2) + "\n");
  std::vector<std::string> comment(header.begin(), header.end());
  comment.push_back(config_line(cfg));
  write_eval_csv(report, cfg.out / "eval_scores.csv", comment);
  out << summary;
  return kExitOk;
}

int cmd_toyset(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.cfg;
  require_dir(inv.normals, "--normals");
  auto normals = scan_directory(inv.normals);
  if (normals.items.empty()) throw Error("no images in " + inv.normals.string());
  prepare_out(inv);
  auto log = gen_toyset(normals, toy_spec(cfg), cfg.out);
  out << "toyset: " << log.samples.size() << " anomalies and " << log.normals.size()
      << " normals under " << log.root.string() << "\n";
  return kExitOk;
}

int cmd_bench(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.cfg;
  const bool det = cfg.bench.deterministic;
  std::optional<DatasetIndex> index;
  if (!inv.input.empty()) index = input_index(inv.input);
  prepare_out(inv);
  configure_runtime(cfg, det);

  AblationFlags flags = cfg.ablation;
  std::string source;
  SegModel model{nullptr};
  if (!inv.checkpoint.empty()) {
    model = restore_for_inference(inv, flags);
    source = inv.checkpoint.string();
  } else {
    auto ncfg = network_config(cfg);
    const bool with_weights = !ncfg.encoder.weights.empty();
    model = SegModel(ncfg, Encoder(ncfg.encoder, with_weights));
    std::vector<Image> pool;
    std::vector<std::string> names;
    const auto cat = derive_seed(cfg.seed, seeds::kBench);
    for (std::int64_t i = 0; i < cfg.memory.size; ++i) {
      pool.push_back(procedural_category_sample(ncfg.image_size, cat, static_cast<std::uint64_t>(i)));
      names.push_back("procedural:" + std::to_string(i));
    }
    model->set_memory_pool(pool_from_images(model->encoder(), pool, names, cat));
    model->eval();
    source = std::string("untrained ") + model->encoder()->backbone_name() +
             (with_weights ? "" : " (random weights)");
  }
  const std::int64_t size = model->config().image_size;
  std::vector<Image> images;
  if (index) {
    images = load_all(*index, size);
    if (images.empty()) throw Error("no images in " + inv.input.string());
  } else {
    const auto cat = derive_seed(cfg.seed, seeds::kBench) + 1;
    for (std::uint64_t i = 0; i < 4; ++i) images.push_back(procedural_category_sample(size, cat, i));
  }

  auto stats = benchmark(model, images, cfg.bench.warmup, cfg.bench.reps);
  std::ostringstream txt;
  txt << "model: " << source << "\n"
      << "image size: " << size << "\n"
      << "memory size: " << model->memory_pool().f1.size(0) << "\n"
      << "ablation: " << flags.describe() << "\n"
      << "deterministic: " << (det ? "yes" : "no") << ", threads " << torch::get_num_threads() << "\n"
      << format_latency(stats);
  write_text(cfg.out / "bench.txt", txt.str());
  json doc = {{"model", source},
              {"image_size", size},
              {"deterministic", det},
              {"threads", torch::get_num_threads()},
              {"ablation", flags.describe()},
              {"hardware", stats.hardware},
              {"mean_ms", stats.mean_ms},
              {"min_ms", stats.min_ms},
              {"max_ms", stats.max_ms},
              {"samples_ms", stats.samples_ms},
              {"config", to_json(cfg)}};
  write_text(cfg.out / "bench.json", doc.dump(2) + "\n");
  out << txt.str();
  return kExitOk;
}

int cmd_synth(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.cfg;
  if (inv.synth_count < 1 || inv.heldout < 0) throw UsageError("--count must be >= 1 and --heldout >= 0");
  prepare_out(inv);
  const std::string category = cfg.dataset.category.empty() ? "toy" : cfg.dataset.category;
  const fs::path train_dir = cfg.out / category / "train" / "good";
  const fs::path held_dir = cfg.out / "heldout";
  fs::create_directories(train_dir);
  fs::create_directories(held_dir);
  const auto cat = derive_seed(cfg.seed, seeds::kSynth);
  const auto size = cfg.dataset.image_size;
  for (std::int64_t i = 0; i < inv.synth_count; ++i) {
    save_image(procedural_category_sample(size, cat, static_cast<std::uint64_t>(i)),
               train_dir / (numbered(i) + ".png"));
  }
  for (std::int64_t i = 0; i < inv.heldout; ++i) {
    save_image(procedural_category_sample(size, cat, static_cast<std::uint64_t>(1000000 + i)),
               held_dir / (numbered(i) + ".png"));
  }
  out << "synth: " << inv.synth_count << " training normals in " << train_dir.string() << ", " << inv.heldout
      << " held-out normals in " << held_dir.string() << "\n";
  return kExitOk;
}

void print_error(std::ostream& err, const char* kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"memseg: memory-guided anomaly segmentation", "memseg"};
  app.require_subcommand(1);

  fs::path config_file;
  app.add_option("--config", config_file, "JSON run configuration; flags override its values");

  const RunConfig defaults;
  const json def = to_json(defaults);
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  for (const auto& path : leaf_paths()) {
    const std::string flag = flag_for_path(path);
    const json& d = def.at(json::json_pointer("/" + [&] {
      std::string p = path;
      std::replace(p.begin(), p.end(), '.', '/');
      return p;
    }()));
    const std::string help = "config " + path + " (default " + d.dump() + ")";
    if (d.is_boolean()) {
      options[path] = app.add_flag(flag + "{true},--no-" + flag.substr(2) + "{false}", values[path], help);
    } else {
      options[path] = app.add_option(flag, values[path], help);
    }
  }
  bool no_memory = false, no_ms = false, no_sa = false, no_ca = false;
  app.add_flag("--no-memory", no_memory, "disable the memory module");
  app.add_flag("--no-multi-scale", no_ms, "disable multi-scale fusion");
  app.add_flag("--no-spatial-attention", no_sa, "disable spatial attention maps");
  app.add_flag("--no-coordinate-attention", no_ca, "disable coordinate attention");

  Invocation inv;
  auto* simulate = app.add_subcommand("simulate", "write simulated anomalies (image, mask, noise)");
  simulate->add_option("--input", inv.input, "image file or directory (default: training split)");
  simulate->add_option("--count", inv.count, "number of samples")->capture_default_str();
  auto* train_cmd = app.add_subcommand("train", "train a model and write model.ckpt and loss.csv");
  auto* infer = app.add_subcommand("infer", "anomaly maps and scores for images");
  infer->add_option("--checkpoint", inv.checkpoint, "trained checkpoint")->required();
  infer->add_option("--input", inv.input, "image file or directory")->required();
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval->add_option("--checkpoint", inv.checkpoint, "trained checkpoint")->required();
  auto* toyset = app.add_subcommand("toyset", "paint toy-shape anomalies onto normal images");
  toyset->add_option("--normals", inv.normals, "directory of normal images")->required();
  auto* bench = app.add_subcommand("bench", "forward-pass latency");
  bench->add_option("--checkpoint", inv.checkpoint, "trained checkpoint (default: untrained model)");
  bench->add_option("--input", inv.input, "images to time (default: procedural)");
  auto* synth = app.add_subcommand("synth", "procedural normal images in dataset layout");
  synth->add_option("--count", inv.synth_count, "training images")->capture_default_str();
  synth->add_option("--heldout", inv.heldout, "held-out normal images")->capture_default_str();
  for (auto* sub : {simulate, train_cmd, infer, eval, toyset, bench, synth}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return kExitUsage;
  }

  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& path : leaf_paths()) {
      if (options[path]->count() > 0) overrides.emplace_back(path, values[path]);
    }
    if (no_memory) overrides.emplace_back("ablation.memory", "false");
    if (no_ms) overrides.emplace_back("ablation.multi_scale", "false");
    if (no_sa) overrides.emplace_back("ablation.spatial_attention", "false");
    if (no_ca) overrides.emplace_back("ablation.coordinate_attention", "false");
    inv.cfg = resolve_config(config_file, overrides);
    inv.command = app.get_subcommands().front()->get_name();

    if (inv.command == "simulate") return cmd_simulate(inv, out);
    if (inv.command == "train") return cmd_train(inv, out);
    if (inv.command == "infer") return cmd_infer(inv, out);
    if (inv.command == "eval") return cmd_eval(inv, out);
    if (inv.command == "toyset") return cmd_toyset(inv, out);
    if (inv.command == "bench") return cmd_bench(inv, out);
    return cmd_synth(inv, out);
  } catch (const UsageError& e) {
    print_error(err, "usage", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    const auto nl = msg.find('\n');
    if (nl != std::string::npos) msg.resize(nl);
    print_error(err, "runtime", msg);
    return kExitRuntime;
  }
}

}  // namespace memseg::cli

#include "run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace memseg::cli {
namespace {

json jitter_json(const JitterConfig& j) {
  return {{"enabled", j.enabled},       {"mirror_prob", j.mirror_prob},
          {"rotate", j.rotate},         {"brightness", j.brightness},
          {"saturation", j.saturation}, {"hue", j.hue}};
}

std::string type_name(const json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_object()) return "object";
  return "array";
}

// Checks `value` against the type of `schema` (the default document).
void check_type(const json& schema, const json& value, const std::string& path) {
  bool ok = false;
  if (schema.is_object()) {
    ok = value.is_object();
  } else if (schema.is_boolean()) {
    ok = value.is_boolean();
  } else if (schema.is_number_integer()) {
    ok = value.is_number_integer();
  } else if (schema.is_number()) {
    ok = value.is_number();
  } else if (schema.is_string()) {
    ok = value.is_string();
  } else if (schema.is_null()) {
    ok = value.is_null() || value.is_number();  // optional number
  }
  if (!ok) {
    throw UsageError("config: '" + path + "' must be " +
                     (schema.is_null() ? std::string("a number or null") : type_name(schema)) +
                     ", got " + type_name(value));
  }
}

void overlay(json& base, const json& patch, const json& schema, const std::string& prefix) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!schema.contains(it.key())) {
      throw UsageError("config: unknown key '" + path + "'");
    }
    const json& sub = schema.at(it.key());
    check_type(sub, it.value(), path);
    if (sub.is_object()) {
      overlay(base[it.key()], it.value(), sub, path);
    } else {
      base[it.key()] = it.value();
    }
  }
}

void collect_leaves(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object()) {
      collect_leaves(it.value(), path, out);
    } else {
      out.push_back(path);
    }
  }
}

json::json_pointer pointer(const std::string& path) {
  std::string p = "/" + path;
  std::replace(p.begin(), p.end(), '.', '/');
  return json::json_pointer(p);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw UsageError("config: " + what);
  };
  require(dataset.image_size >= 32 && dataset.image_size % 32 == 0,
          "dataset.image_size must be a positive multiple of 32");
  require(textures.mode == "procedural" || textures.mode == "directory",
          "textures.mode must be 'procedural' or 'directory'");
  require(textures.mode != "directory" || !textures.dir.empty(),
          "textures.dir is required in directory mode");
  require(encoder.kind == "resnet18" || encoder.kind == "toy", "encoder.kind must be 'resnet18' or 'toy'");
  require(encoder.base_width >= 1, "encoder.base_width must be positive");
  require(encoder.kind != "resnet18" || encoder.base_width == 64,
          "encoder.base_width must be 64 for resnet18");
  require(optimizer.kind == "sgd" || optimizer.kind == "adam", "optimizer.kind must be 'sgd' or 'adam'");
  require(optimizer.lr > 0, "optimizer.lr must be positive");
  require(train.iterations >= 0, "train.iterations must be non-negative");
  require(train.normal >= 0 && train.abnormal >= 0 && train.normal + train.abnormal >= 1,
          "train batch composition must contain at least one image");
  require(memory.size >= 1, "memory.size must be >= 1");
  require(ca_reduction >= 1, "ca_reduction must be >= 1");
  require(eval.top_k >= 1, "eval.top_k must be >= 1");
  require(bench.warmup >= 0 && bench.reps >= 1, "bench.warmup >= 0 and bench.reps >= 1 required");
  require(toyset.count >= 1, "toyset.count must be >= 1");
  require(0 < toyset.min_size && toyset.min_size <= toyset.max_size && toyset.max_size < 0.5,
          "toyset sizes must satisfy 0 < min_size <= max_size < 0.5");
  require(0 < toyset.min_aspect && toyset.min_aspect <= toyset.max_aspect,
          "toyset aspects must satisfy 0 < min_aspect <= max_aspect");
  require(threads >= 0, "threads must be >= 0");
  try {
    sim.validate(dataset.image_size, dataset.image_size);
    loss.validate();
  } catch (const Error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

json to_json(const RunConfig& c) {
  json fixed_delta = c.sim.fixed_delta ? json(*c.sim.fixed_delta) : json(nullptr);
  return {
      {"dataset",
       {{"root", c.dataset.root.string()},
        {"category", c.dataset.category},
        {"image_size", c.dataset.image_size}}},
      {"textures", {{"mode", c.textures.mode}, {"dir", c.textures.dir.string()}}},
      {"encoder",
       {{"kind", c.encoder.kind},
        {"weights", c.encoder.weights.string()},
        {"base_width", c.encoder.base_width}}},
      {"sim",
       {{"perlin_threshold", c.sim.perlin_threshold},
        {"delta_min", c.sim.delta_min},
        {"delta_max", c.sim.delta_max},
        {"fixed_delta", fixed_delta},
        {"foreground_enhancement", c.sim.foreground_enhancement},
        {"grid_rows", c.sim.grid_rows},
        {"grid_cols", c.sim.grid_cols},
        {"structural_prob", c.sim.structural_prob},
        {"morph_kernel", c.sim.morph_kernel},
        {"min_freq_exp", c.sim.min_freq_exp},
        {"max_freq_exp", c.sim.max_freq_exp},
        {"max_retries", c.sim.max_retries},
        {"jitter", jitter_json(c.sim.jitter)}}},
      {"loss",
       {{"gamma", c.loss.gamma},
        {"alpha", c.loss.alpha},
        {"lambda_l1", c.loss.lambda_l1},
        {"lambda_focal", c.loss.lambda_focal},
        {"eps", c.loss.eps}}},
      {"optimizer",
       {{"kind", c.optimizer.kind},
        {"lr", c.optimizer.lr},
        {"momentum", c.optimizer.momentum},
        {"weight_decay", c.optimizer.weight_decay}}},
      {"train",
       {{"iterations", c.train.iterations},
        {"normal", c.train.normal},
        {"abnormal", c.train.abnormal},
        {"checkpoint_every", c.train.checkpoint_every},
        {"log_every", c.train.log_every},
        {"exclude_memory_images", c.train.exclude_memory_images}}},
      {"memory", {{"size", c.memory.size}, {"per_scale_argmin", c.memory.per_scale_argmin}}},
      {"ablation",
       {{"memory", c.ablation.memory},
        {"multi_scale", c.ablation.multi_scale},
        {"spatial_attention", c.ablation.spatial_attention},
        {"coordinate_attention", c.ablation.coordinate_attention}}},
      {"ca_reduction", c.ca_reduction},
      {"eval", {{"top_k", c.eval.top_k}, {"heatmaps", c.eval.heatmaps}}},
      {"bench",
       {{"warmup", c.bench.warmup}, {"reps", c.bench.reps}, {"deterministic", c.bench.deterministic}}},
      {"toyset",
       {{"count", c.toyset.count},
        {"min_size", c.toyset.min_size},
        {"max_size", c.toyset.max_size},
        {"min_aspect", c.toyset.min_aspect},
        {"max_aspect", c.toyset.max_aspect},
        {"defect", c.toyset.defect},
        {"copy_normals", c.toyset.copy_normals}}},
      {"seed", c.seed},
      {"deterministic", c.deterministic},
      {"threads", c.threads},
      {"out", c.out.string()},
  };
}

RunConfig from_json(const json& patch) {
  const json schema = to_json(RunConfig{});
  if (!patch.is_object()) {
    throw UsageError("config: top level must be an object");
  }
  json j = schema;
  overlay(j, patch, schema, "");

  RunConfig c;
  const auto& d = j["dataset"];
  c.dataset.root = d["root"].get<std::string>();
  c.dataset.category = d["category"].get<std::string>();
  c.dataset.image_size = d["image_size"].get<std::int64_t>();
  c.textures.mode = j["textures"]["mode"].get<std::string>();
  c.textures.dir = j["textures"]["dir"].get<std::string>();
  const auto& e = j["encoder"];
  c.encoder.kind = e["kind"].get<std::string>();
  c.encoder.weights = e["weights"].get<std::string>();
  c.encoder.base_width = e["base_width"].get<std::int64_t>();

  const auto& s = j["sim"];
  c.sim.perlin_threshold = s["perlin_threshold"].get<double>();
  c.sim.delta_min = s["delta_min"].get<double>();
  c.sim.delta_max = s["delta_max"].get<double>();
  if (!s["fixed_delta"].is_null()) c.sim.fixed_delta = s["fixed_delta"].get<double>();
  c.sim.foreground_enhancement = s["foreground_enhancement"].get<bool>();
  c.sim.grid_rows = s["grid_rows"].get<std::int64_t>();
  c.sim.grid_cols = s["grid_cols"].get<std::int64_t>();
  c.sim.structural_prob = s["structural_prob"].get<double>();
  c.sim.morph_kernel = s["morph_kernel"].get<std::int64_t>();
  c.sim.min_freq_exp = s["min_freq_exp"].get<int>();
  c.sim.max_freq_exp = s["max_freq_exp"].get<int>();
  c.sim.max_retries = s["max_retries"].get<int>();
  const auto& jit = s["jitter"];
  c.sim.jitter.enabled = jit["enabled"].get<bool>();
  c.sim.jitter.mirror_prob = jit["mirror_prob"].get<double>();
  c.sim.jitter.rotate = jit["rotate"].get<bool>();
  c.sim.jitter.brightness = jit["brightness"].get<double>();
  c.sim.jitter.saturation = jit["saturation"].get<double>();
  c.sim.jitter.hue = jit["hue"].get<double>();

  const auto& l = j["loss"];
  c.loss.gamma = l["gamma"].get<double>();
  c.loss.alpha = l["alpha"].get<double>();
  c.loss.lambda_l1 = l["lambda_l1"].get<double>();
  c.loss.lambda_focal = l["lambda_focal"].get<double>();
  c.loss.eps = l["eps"].get<double>();

  const auto& o = j["optimizer"];
  c.optimizer.kind = o["kind"].get<std::string>();
  c.optimizer.lr = o["lr"].get<double>();
  c.optimizer.momentum = o["momentum"].get<double>();
  c.optimizer.weight_decay = o["weight_decay"].get<double>();

  const auto& t = j["train"];
  c.train.iterations = t["iterations"].get<std::int64_t>();
  c.train.normal = t["normal"].get<std::int64_t>();
  c.train.abnormal = t["abnormal"].get<std::int64_t>();
  c.train.checkpoint_every = t["checkpoint_every"].get<std::int64_t>();
  c.train.log_every = t["log_every"].get<std::int64_t>();
  c.train.exclude_memory_images = t["exclude_memory_images"].get<bool>();

  c.memory.size = j["memory"]["size"].get<std::int64_t>();
  c.memory.per_scale_argmin = j["memory"]["per_scale_argmin"].get<bool>();
  const auto& a = j["ablation"];
  c.ablation.memory = a["memory"].get<bool>();
  c.ablation.multi_scale = a["multi_scale"].get<bool>();
  c.ablation.spatial_attention = a["spatial_attention"].get<bool>();
  c.ablation.coordinate_attention = a["coordinate_attention"].get<bool>();
  c.ca_reduction = j["ca_reduction"].get<std::int64_t>();
  c.eval.top_k = j["eval"]["top_k"].get<std::int64_t>();
  c.eval.heatmaps = j["eval"]["heatmaps"].get<bool>();
  c.bench.warmup = j["bench"]["warmup"].get<std::int64_t>();
  c.bench.reps = j["bench"]["reps"].get<std::int64_t>();
  c.bench.deterministic = j["bench"]["deterministic"].get<bool>();

  const auto& y = j["toyset"];
  c.toyset.count = y["count"].get<std::int64_t>();
  c.toyset.min_size = y["min_size"].get<double>();
  c.toyset.max_size = y["max_size"].get<double>();
  c.toyset.min_aspect = y["min_aspect"].get<double>();
  c.toyset.max_aspect = y["max_aspect"].get<double>();
  c.toyset.defect = y["defect"].get<std::string>();
  c.toyset.copy_normals = y["copy_normals"].get<bool>();

  if (j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() < 0) {
    throw UsageError("config: 'seed' must be non-negative");
  }
  c.seed = j["seed"].get<std::uint64_t>();
  c.deterministic = j["deterministic"].get<bool>();
  c.threads = j["threads"].get<std::int64_t>();
  c.out = j["out"].get<std::string>();
  return c;
}

std::vector<std::string> leaf_paths() {
  std::vector<std::string> out;
  collect_leaves(to_json(RunConfig{}), "", out);
  return out;
}

std::string flag_for_path(const std::string& path) {
  std::string f = path;
  std::replace(f.begin(), f.end(), '.', '-');
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("config file not found: " + path.string());
  }
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  from_json(j);  // schema check
  return j;
}

void apply_override(json& doc, const std::string& path, const std::string& text) {
  const json schema = to_json(RunConfig{});
  const auto ptr = pointer(path);
  if (!schema.contains(ptr) || schema.at(ptr).is_object()) {
    throw UsageError("unknown config field '" + path + "'");
  }
  const json& def = schema.at(ptr);
  const std::string flag = flag_for_path(path);
  json value;
  try {
    std::size_t used = 0;
    if (def.is_boolean()) {
      const std::string t = lower(text);
      if (t == "true" || t == "1" || t == "on" || t == "yes") {
        value = true;
      } else if (t == "false" || t == "0" || t == "off" || t == "no") {
        value = false;
      } else {
        throw UsageError(flag + " expects a boolean, got '" + text + "'");
      }
    } else if (def.is_number_integer()) {
      const long long v = std::stoll(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      value = v;
    } else if (def.is_number()) {
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      value = v;
    } else if (def.is_null()) {
      if (lower(text) == "none" || lower(text) == "null") {
        value = nullptr;
      } else {
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        value = v;
      }
    } else {
      value = text;
    }
  } catch (const std::invalid_argument&) {
    throw UsageError(flag + " expects a number, got '" + text + "'");
  } catch (const std::out_of_range&) {
    throw UsageError(flag + " value out of range: '" + text + "'");
  }
  doc[ptr] = value;
}

RunConfig resolve_config(const std::filesystem::path& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  json doc = json::object();
  if (!file.empty()) {
    doc = read_config_file(file);
  }
  for (const auto& [path, text] : overrides) {
    apply_override(doc, path, text);
  }
  RunConfig cfg = from_json(doc);
  cfg.validate();
  return cfg;
}

NetworkConfig network_config(const RunConfig& cfg) {
  NetworkConfig n;
  n.encoder.kind = parse_encoder_kind(cfg.encoder.kind);
  n.encoder.base_width = cfg.encoder.base_width;
  n.encoder.seed = derive_seed(cfg.seed, seeds::kEncoder);
  n.encoder.weights = cfg.encoder.weights;
  n.image_size = cfg.dataset.image_size;
  n.ca_reduction = cfg.ca_reduction;
  n.ablation = cfg.ablation;
  n.memory.per_scale_argmin = cfg.memory.per_scale_argmin;
  n.seed = derive_seed(cfg.seed, seeds::kNetwork);
  return n;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.iterations = cfg.train.iterations;
  t.batch = {cfg.train.normal, cfg.train.abnormal};
  t.optimizer = cfg.optimizer;
  t.loss = cfg.loss;
  t.sim = cfg.sim;
  t.seed = derive_seed(cfg.seed, seeds::kTrain);
  t.checkpoint_every = cfg.train.checkpoint_every;
  t.log_every = cfg.train.log_every;
  return t;
}

TextureSource texture_source(const RunConfig& cfg) {
  const std::uint64_t seed = derive_seed(cfg.seed, seeds::kTextures);
  if (cfg.textures.mode == "directory") {
    return TextureSource::from_directory(cfg.textures.dir, seed);
  }
  return TextureSource::procedural(seed);
}

ToySpec toy_spec(const RunConfig& cfg) {
  ToySpec s;
  s.count = cfg.toyset.count;
  s.seed = derive_seed(cfg.seed, seeds::kToyset);
  s.image_size = cfg.dataset.image_size;
  s.min_size = cfg.toyset.min_size;
  s.max_size = cfg.toyset.max_size;
  s.min_aspect = cfg.toyset.min_aspect;
  s.max_aspect = cfg.toyset.max_aspect;
  s.category = cfg.dataset.category.empty() ? "toy" : cfg.dataset.category;
  s.defect = cfg.toyset.defect;
  s.copy_normals = cfg.toyset.copy_normals;
  return s;
}

}  // namespace memseg::cli

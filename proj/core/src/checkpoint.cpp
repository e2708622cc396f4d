#include "memseg/checkpoint.hpp"

#include <json.hpp>

#include "memseg/tensor_archive.hpp"

using nlohmann::json;

namespace memseg {
namespace {

json to_json(const NetworkConfig& cfg) {
  return {{"encoder",
           {{"kind", to_string(cfg.encoder.kind)},
            {"base_width", cfg.encoder.base_width},
            {"seed", cfg.encoder.seed},
            {"weights", cfg.encoder.weights.string()}}},
          {"image_size", cfg.image_size},
          {"ca_reduction", cfg.ca_reduction},
          {"ablation",
           {{"memory", cfg.ablation.memory},
            {"multi_scale", cfg.ablation.multi_scale},
            {"spatial_attention", cfg.ablation.spatial_attention},
            {"coordinate_attention", cfg.ablation.coordinate_attention}}},
          {"per_scale_argmin", cfg.memory.per_scale_argmin},
          {"seed", cfg.seed}};
}

NetworkConfig from_json(const json& j) {
  NetworkConfig cfg;
  const auto& e = j.at("encoder");
  cfg.encoder.kind = parse_encoder_kind(e.at("kind").get<std::string>());
  cfg.encoder.base_width = e.at("base_width").get<std::int64_t>();
  cfg.encoder.seed = e.at("seed").get<std::uint64_t>();
  cfg.encoder.weights = e.value("weights", std::string());
  cfg.image_size = j.at("image_size").get<std::int64_t>();
  cfg.ca_reduction = j.at("ca_reduction").get<std::int64_t>();
  const auto& a = j.at("ablation");
  cfg.ablation.memory = a.at("memory").get<bool>();
  cfg.ablation.multi_scale = a.at("multi_scale").get<bool>();
  cfg.ablation.spatial_attention = a.at("spatial_attention").get<bool>();
  cfg.ablation.coordinate_attention = a.at("coordinate_attention").get<bool>();
  cfg.memory.per_scale_argmin = j.value("per_scale_argmin", false);
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

std::string network_config_to_json(const NetworkConfig& cfg) {
  return to_json(cfg).dump();
}

NetworkConfig network_config_from_json(const std::string& text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(std::string("invalid network config: ") + e.what());
  }
}

Checkpoint make_checkpoint(SegModel& model, std::string run_config_json) {
  Checkpoint ckpt;
  ckpt.encoder_tag = model->encoder()->tag();
  ckpt.network = model->config();
  ckpt.run_config_json = std::move(run_config_json);
  for (auto& [name, t] : model->state()) {
    ckpt.model_state.emplace_back(name, t.detach().clone());
  }
  ckpt.pool = model->memory_pool();
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  TensorArchive archive;
  archive.kind = "checkpoint";
  json meta{{"checkpoint_version", ckpt.version},
            {"encoder_tag", ckpt.encoder_tag},
            {"network", to_json(ckpt.network)},
            {"run_config", json::parse(ckpt.run_config_json)},
            {"pool", {{"size", ckpt.pool.size()}, {"seed", ckpt.pool.seed}, {"sources", ckpt.pool.sources}}}};
  archive.meta_json = meta.dump();
  for (const auto& [name, t] : ckpt.model_state) {
    archive.tensors.emplace_back("model." + name, t);
  }
  if (!ckpt.pool.empty()) {
    archive.tensors.emplace_back("pool.f1", ckpt.pool.f1);
    archive.tensors.emplace_back("pool.f2", ckpt.pool.f2);
    archive.tensors.emplace_back("pool.f3", ckpt.pool.f3);
  }
  write_archive(archive, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_encoder_tag) {
  TensorArchive archive = read_archive(path);
  if (archive.kind != "checkpoint") {
    throw Error("not a checkpoint file (kind '" + archive.kind + "'): " + path.string());
  }
  Checkpoint ckpt;
  try {
    const json meta = json::parse(archive.meta_json);
    ckpt.version = meta.at("checkpoint_version").get<std::uint32_t>();
    if (ckpt.version != Checkpoint::kVersion) {
      throw Error("unsupported checkpoint version " + std::to_string(ckpt.version) +
                  " (supported: " + std::to_string(Checkpoint::kVersion) + ")");
    }
    ckpt.encoder_tag = meta.at("encoder_tag").get<std::string>();
    ckpt.network = from_json(meta.at("network"));
    ckpt.run_config_json = meta.at("run_config").dump();
    const auto& pool = meta.at("pool");
    ckpt.pool.seed = pool.at("seed").get<std::uint64_t>();
    ckpt.pool.sources = pool.at("sources").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error("malformed checkpoint metadata in " + path.string() + ": " + e.what());
  }
  if (expected_encoder_tag && *expected_encoder_tag != ckpt.encoder_tag) {
    throw Error("encoder tag mismatch: checkpoint has '" + ckpt.encoder_tag + "', expected '" +
                *expected_encoder_tag + "'");
  }
  for (auto& [name, t] : archive.tensors) {
    if (name.starts_with("model.")) {
      ckpt.model_state.emplace_back(name.substr(6), std::move(t));
    } else if (name == "pool.f1") {
      ckpt.pool.f1 = std::move(t);
    } else if (name == "pool.f2") {
      ckpt.pool.f2 = std::move(t);
    } else if (name == "pool.f3") {
      ckpt.pool.f3 = std::move(t);
    }
  }
  return ckpt;
}

SegModel restore_model(const Checkpoint& ckpt) {
  SegModel model(ckpt.network, Encoder(ckpt.network.encoder, /*load_weights=*/false));
  model->load_state(ckpt.model_state);
  const std::string tag = model->encoder()->tag();
  if (tag != ckpt.encoder_tag) {
    throw Error("encoder tag mismatch: checkpoint has '" + ckpt.encoder_tag +
                "', restored weights give '" + tag + "'");
  }
  model->set_memory_pool(ckpt.pool);
  model->eval();
  return model;
}

}  // namespace memseg

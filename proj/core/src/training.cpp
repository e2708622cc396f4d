#include "memseg/training.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace memseg {

TrainBatch make_batch(const std::vector<Image>& images, const SimConfig& sim,
                      const TextureSource& textures, const BatchComposition& composition,
                      Rng& rng) {
  if (images.empty()) {
    throw Error("make_batch: empty training set");
  }
  if (composition.normal < 0 || composition.abnormal < 0 || composition.size() < 1) {
    throw Error("make_batch: invalid batch composition");
  }
  const std::uint64_t batch_seed = rng();
  std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);

  std::vector<torch::Tensor> batch_images;
  std::vector<torch::Tensor> batch_masks;
  TrainBatch batch;
  for (std::int64_t i = 0; i < composition.size(); ++i) {
    Rng item_rng(derive_seed(batch_seed, static_cast<std::uint64_t>(i)));
    std::size_t source = pick(item_rng);
    const Image& image = images[source];
    if (i < composition.normal) {
      batch_images.push_back(image.tensor());
      batch_masks.push_back(torch::zeros({image.height(), image.width()}));
      batch.items.push_back({source, false, 0.0, NoiseKind::kTextural});
      continue;
    }
    constexpr int kImageRetries = 10;
    for (int attempt = 0;; ++attempt) {
      try {
        SimulatedSample s = simulate(images[source], sim, textures, item_rng);
        batch_images.push_back(s.image.tensor());
        batch_masks.push_back(s.mask.tensor());
        batch.items.push_back({source, true, s.delta, s.kind});
        break;
      } catch (const Error& e) {
        if (attempt + 1 >= kImageRetries ||
            std::string(e.what()).find("degenerate mask") == std::string::npos) {
          throw;
        }
        source = pick(item_rng);
      }
    }
  }
  batch.images = torch::stack(batch_images);
  batch.masks = torch::stack(batch_masks);
  return batch;
}

TrainResult train(SegModel& model, const std::vector<Image>& images, const TrainConfig& cfg,
                  const TextureSource& textures, const CheckpointHook& hook, std::ostream* log) {
  cfg.loss.validate();
  if (cfg.iterations < 0) {
    throw Error("train: iteration count must be non-negative");
  }
  if (images.empty()) {
    throw Error("train: empty training set");
  }
  cfg.sim.validate(images.front().height(), images.front().width());

  auto params = model->trainable_parameters();
  std::unique_ptr<torch::optim::Optimizer> optimizer;
  if (cfg.optimizer.kind == "sgd") {
    optimizer = std::make_unique<torch::optim::SGD>(
        params, torch::optim::SGDOptions(cfg.optimizer.lr)
                    .momentum(cfg.optimizer.momentum)
                    .weight_decay(cfg.optimizer.weight_decay));
  } else if (cfg.optimizer.kind == "adam") {
    optimizer = std::make_unique<torch::optim::Adam>(
        params,
        torch::optim::AdamOptions(cfg.optimizer.lr).weight_decay(cfg.optimizer.weight_decay));
  } else {
    throw Error("unknown optimizer: " + cfg.optimizer.kind);
  }

  const auto dtype = params.empty() ? torch::kFloat32 : params.front().scalar_type();
  model->train();
  TrainResult result;
  result.trace.reserve(static_cast<std::size_t>(cfg.iterations));
  for (std::int64_t it = 1; it <= cfg.iterations; ++it) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(it)));
    TrainBatch batch = make_batch(images, cfg.sim, textures, cfg.batch, rng);

    optimizer->zero_grad();
    auto probs = model->forward(batch.images.to(dtype));
    LossTerms loss = total_loss(batch.masks.to(dtype), probs, cfg.loss);
    LossRecord record{it, loss.l1.item<double>(), loss.focal.item<double>(),
                      loss.total.item<double>()};
    if (!std::isfinite(record.total)) {
      std::ostringstream msg;
      msg << "non-finite loss at iteration " << it << " (l1=" << record.l1
          << ", focal=" << record.focal << ", total=" << record.total << ")";
      throw Error(msg.str());
    }
    loss.total.backward();
    optimizer->step();
    result.trace.push_back(record);

    if (log != nullptr && cfg.log_every > 0 && (it % cfg.log_every == 0 || it == 1)) {
      *log << "iter " << it << "/" << cfg.iterations << " l1=" << std::setprecision(5)
           << record.l1 << " focal=" << record.focal << " total=" << record.total << "\n";
      log->flush();
    }
    if (hook && cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0) {
      hook(it);
    }
  }
  model->eval();
  return result;
}

void write_loss_csv(const std::vector<LossRecord>& trace, const std::filesystem::path& path,
                    const std::vector<std::string>& comment) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  for (const auto& line : comment) out << "# " << line << "\n";
  out << "iteration,l1,focal,total\n" << std::setprecision(9);
  for (const auto& r : trace) {
    out << r.iteration << "," << r.l1 << "," << r.focal << "," << r.total << "\n";
  }
}

}  // namespace memseg

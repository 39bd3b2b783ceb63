#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ledpose/augment.hpp"
#include "ledpose/checkpoint.hpp"
#include "ledpose/dataset.hpp"
#include "ledpose/losses.hpp"
#include "ledpose/optimizer.hpp"

namespace ledpose {

enum class Strategy { pretext, baseline, downstream, upperbound };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::pretext: return "pretext";
    case Strategy::baseline: return "baseline";
    case Strategy::downstream: return "downstream";
    default: return "upperbound";
  }
}

inline Strategy strategy_from_name(const std::string& name) {
  if (name == "pretext") return Strategy::pretext;
  if (name == "baseline") return Strategy::baseline;
  if (name == "downstream") return Strategy::downstream;
  if (name == "upperbound") return Strategy::upperbound;
  throw ConfigError("unknown strategy '" + name + "'");
}

/// Closed-form cosine annealing evaluated at integer epochs; epoch 0 gives
/// lr_start and epoch == last_epoch gives lr_end.
inline double cosine_lr(int epoch, int last_epoch, double lr_start, double lr_end) {
  if (last_epoch <= 0) return lr_start;
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(kPi * epoch / last_epoch));
}

struct TrainConfig {
  Strategy strategy = Strategy::pretext;
  int epochs = 100;
  int batch_size = 64;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  int replicas = 4;
  std::uint64_t seed = 1;
  int upperbound_eval_epoch = 40;
  int checkpoint_every = 10;
  std::string init_checkpoint;  // required for downstream
  std::string resume_checkpoint;

  int labeled_budget = -1;  // N; -1 = all of the labeled split
  UnlabeledMode unlabeled_mode = UnlabeledMode::visible_only;
  LedMode led_mode = LedMode::independent;
  int unlabeled_budget = -1;

  void validate() const {
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(lr_start > 0) || !(lr_end > 0)) throw ConfigError("train: learning rates must be > 0");
    if (replicas < 1) throw ConfigError("train: replicas must be >= 1");
    if (strategy == Strategy::downstream && init_checkpoint.empty())
      throw ConfigError("train: downstream strategy requires an initial checkpoint (--init)");
    if (strategy != Strategy::downstream && !init_checkpoint.empty())
      throw ConfigError("train: only the downstream strategy takes an initial checkpoint");
  }
};

struct EpochStats {
  int epoch = 0;
  double lr = 0;
  double loss = 0, pos = 0, dist = 0, ori = 0, led = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::string final_checkpoint;
  std::string eval_checkpoint;  // checkpoint evaluated downstream (upperbound: epoch 40)
  long pose_label_reads = 0;
  long led_label_reads = 0;
  std::string train_split_name;
  int train_pool_size = 0;
};

namespace detail {

inline Tensor3<float> image_to_tensor(const cv::Mat& img) {
  Tensor3<float> t(3, img.rows, img.cols);
  for (int y = 0; y < img.rows; ++y) {
    const auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x)
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = (row[x][c] / 255.0f - 0.5f) * 2.0f;
  }
  return t;
}

inline void write_history_csv(const std::string& path, const std::vector<EpochStats>& hist) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write history: " + path);
  f << "epoch,lr,loss,loss_pos,loss_dist,loss_ori,loss_led\n";
  for (const auto& e : hist)
    f << e.epoch << ',' << fmt_double(e.lr) << ',' << fmt_double(e.loss) << ','
      << fmt_double(e.pos) << ',' << fmt_double(e.dist) << ',' << fmt_double(e.ori) << ','
      << fmt_double(e.led) << '\n';
}

}  // namespace detail

/// One training run. Picks the strategy's training pool from the dataset,
/// runs the epoch loop with the cosine schedule, writes checkpoints,
/// history.csv and a manifest into out_dir, and returns the history plus the
/// label-consumption audit. Bit-deterministic for fixed (seed, config,
/// data).
inline TrainResult train_run(const TrainConfig& cfg, const ModelConfig& model_cfg,
                             const LossConfig& loss_cfg, const AugmentPolicy& augment_cfg,
                             const Dataset& ds, const std::string& out_dir,
                             const nlohmann::json& manifest_extra = {}) {
  cfg.validate();
  model_cfg.validate();
  loss_cfg.validate();
  augment_cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  SplitSpec spec;
  spec.labeled_budget = cfg.labeled_budget;
  spec.unlabeled_mode = cfg.unlabeled_mode;
  spec.led_mode = cfg.led_mode;
  spec.unlabeled_budget = cfg.unlabeled_budget;
  SplitBundle splits = make_splits(ds.samples, spec, cfg.seed);

  // Strategy data contract.
  std::vector<Sample> pool;
  bool use_task_loss = false;
  std::string split_name;
  switch (cfg.strategy) {
    case Strategy::pretext:
      pool = splits.unlabeled;
      split_name = cfg.unlabeled_mode == UnlabeledMode::visible_only ? "unlabeled_visible"
                                                                     : "unlabeled_all";
      if (cfg.led_mode == LedMode::synchronized_turret) split_name += "_syncleds";
      break;
    case Strategy::baseline:
    case Strategy::downstream:
      pool = splits.labeled;
      use_task_loss = true;
      split_name = "labeled";
      break;
    case Strategy::upperbound: {
      // Pose-annotated unlabeled data plus the labeled split. The position
      // loss needs an in-frame robot, so only visible frames participate.
      for (const auto& s : splits.unlabeled)
        if (s.visible && s.pose) pool.push_back(s);
      for (const auto& s : splits.labeled) pool.push_back(s);
      use_task_loss = true;
      split_name = "unlabeled_visible*+labeled";
      if (pool.empty() || !pool.front().pose)
        throw ConfigError(
            "upperbound strategy needs the pose-annotated dataset view "
            "(load with expose_all_poses)");
      break;
    }
  }
  if (pool.empty()) throw ConfigError("training pool for strategy is empty");
  if (use_task_loss)
    for (const auto& s : pool)
      if (!s.pose) throw ConfigError("task loss requires pose labels on every sample");

  // Model init: fresh, from a pretext checkpoint, or resumed.
  FcnNet<float> net(model_cfg, cfg.seed);
  AdamState<float> opt;
  opt.init(net.params());
  int start_epoch = 0;
  if (!cfg.init_checkpoint.empty()) {
    auto loaded = load_checkpoint<float>(cfg.init_checkpoint);
    if (!(loaded.net.config().channels == model_cfg.channels) ||
        loaded.net.config().led_count != model_cfg.led_count)
      throw ConfigError("init checkpoint architecture does not match the model config");
    net = std::move(loaded.net);  // weights transfer; optimizer state resets
  }
  if (!cfg.resume_checkpoint.empty()) {
    auto loaded = load_checkpoint<float>(cfg.resume_checkpoint);
    if (!(loaded.net.config().channels == model_cfg.channels))
      throw ConfigError("resume checkpoint architecture does not match the model config");
    net = std::move(loaded.net);
    if (loaded.has_optimizer) opt = std::move(loaded.optimizer);
    start_epoch = loaded.epoch + 1;
  }

  const CameraIntrinsics& K = ds.camera;
  const double stride = model_cfg.stride;
  TrainResult result;
  result.train_split_name = split_name;
  result.train_pool_size = static_cast<int>(pool.size());

  const int last_epoch = cfg.epochs - 1;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, last_epoch, cfg.lr_start, cfg.lr_end);
    auto shuffle_rng = make_rng(cfg.seed, 0x73687566ULL, static_cast<std::uint64_t>(epoch));
    auto aug_rng = make_rng(cfg.seed, 0x617567ULL, static_cast<std::uint64_t>(epoch));
    std::vector<int> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const int bn = static_cast<int>(std::min<std::size_t>(cfg.batch_size, order.size() - b0));
      net.zero_grad();
      for (int bi = 0; bi < bn; ++bi) {
        const Sample& s = pool[order[b0 + bi]];
        cv::Mat img = load_image(s);
        std::optional<ImagePoint> uv;
        if (use_task_loss) {
          uv = project<double>({s.pose->x, s.pose->y, s.pose->z}, K);
          ++result.pose_label_reads;
        }
        AugmentResult aug = augment(img, uv, augment_cfg, aug_rng);
        Tensor3<float> x = detail::image_to_tensor(aug.image);
        OutputMaps<float> maps = net.forward(x);
        const float inv_bn = 1.0f / bn;
        if (use_task_loss) {
          auto tl = loss_task<float>(maps, *aug.uv, static_cast<float>(s.pose->distance()),
                                     static_cast<float>(s.pose->yaw), loss_cfg, stride);
          stats.loss += tl.value;
          stats.pos += tl.pos;
          stats.dist += tl.dist;
          stats.ori += tl.ori;
          for (auto& g : tl.d_pos.cells) g *= inv_bn;
          for (auto& g : tl.d_dist.cells) g *= inv_bn;
          for (auto& g : tl.d_sin.cells) g *= inv_bn;
          for (auto& g : tl.d_cos.cells) g *= inv_bn;
          std::vector<MapGrid<float>> zeros(model_cfg.led_count,
                                            MapGrid<float>(maps.pos.width, maps.pos.height));
          net.backward(tl.d_pos, tl.d_dist, tl.d_sin, tl.d_cos, zeros);
        } else {
          std::vector<bool> leds(s.led_state.begin(), s.led_state.end());
          result.led_label_reads += model_cfg.led_count;
          auto ll = loss_led<float>(maps.led, maps.pos, leds, loss_cfg);
          stats.loss += ll.value;
          stats.led += ll.value;
          for (auto& g : ll.d_pos.cells) g *= inv_bn;
          for (auto& m : ll.d_led)
            for (auto& g : m.cells) g *= inv_bn;
          MapGrid<float> zero(maps.pos.width, maps.pos.height);
          net.backward(ll.d_pos, zero, zero, zero, ll.d_led);
        }
      }
      opt.update(net.params(), lr);
    }
    const double n = static_cast<double>(pool.size());
    stats.loss /= n;
    stats.pos /= n;
    stats.dist /= n;
    stats.ori /= n;
    stats.led /= n;
    if (!std::isfinite(stats.loss))
      throw std::runtime_error("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch));
    result.history.push_back(stats);

    const bool is_last = epoch == cfg.epochs - 1;
    const bool periodic = cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0;
    const bool ub_eval = cfg.strategy == Strategy::upperbound &&
                         epoch + 1 == cfg.upperbound_eval_epoch;
    if (periodic || is_last || ub_eval) {
      char name[64];
      std::snprintf(name, sizeof(name), "ckpt_e%04d.bin", epoch + 1);
      const std::string path = (fs::path(out_dir) / name).string();
      save_checkpoint(net, &opt, epoch, cfg.seed,
                      {{"strategy", strategy_name(cfg.strategy)}}, path);
      if (ub_eval) result.eval_checkpoint = path;
    }
  }

  // Zero-epoch runs (a no-op fine-tune) still materialize their weights.
  const std::string final_path = (fs::path(out_dir) / "final.bin").string();
  save_checkpoint(net, &opt, cfg.epochs - 1, cfg.seed,
                  {{"strategy", strategy_name(cfg.strategy)}}, final_path);
  result.final_checkpoint = final_path;
  if (result.eval_checkpoint.empty()) result.eval_checkpoint = final_path;

  detail::write_history_csv((fs::path(out_dir) / "history.csv").string(), result.history);

  nlohmann::json manifest = {
      {"kind", "train_run"},
      {"tool_version", kToolVersion},
      {"strategy", strategy_name(cfg.strategy)},
      {"seed", cfg.seed},
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"lr_start", cfg.lr_start},
      {"lr_end", cfg.lr_end},
      {"labeled_budget", cfg.labeled_budget},
      {"unlabeled_mode", cfg.unlabeled_mode == UnlabeledMode::all ? "all" : "visible_only"},
      {"led_mode",
       cfg.led_mode == LedMode::independent ? "independent" : "synchronized_turret"},
      {"init_checkpoint", cfg.init_checkpoint},
      {"dataset_fingerprint", ds.fingerprint},
      {"dataset_root", ds.root},
      {"loss_split_audit",
       {{"loss", use_task_loss ? "task" : "led"},
        {"train_split", split_name},
        {"train_pool_size", result.train_pool_size},
        {"pose_label_reads", result.pose_label_reads},
        {"led_label_reads", result.led_label_reads}}},
      {"artifacts",
       {{"final_checkpoint", "final.bin"}, {"history", "history.csv"}}}};
  if (!manifest_extra.is_null() && manifest_extra.is_object())
    for (auto it = manifest_extra.begin(); it != manifest_extra.end(); ++it)
      manifest[it.key()] = it.value();
  manifest["config_hash"] = to_hex(fnv1a64(manifest.dump()));
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
  if (!mf) throw DataError("cannot write run manifest in " + out_dir);
  return result;
}

/// Transfer a pretext checkpoint to the pose task: all weights trainable,
/// optimizer state reset, schedule restarted.
inline TrainResult fine_tune(const std::string& pretext_checkpoint, const TrainConfig& base,
                             const ModelConfig& model_cfg, const LossConfig& loss_cfg,
                             const AugmentPolicy& augment_cfg, const Dataset& ds,
                             const std::string& out_dir) {
  TrainConfig cfg = base;
  cfg.strategy = Strategy::downstream;
  cfg.init_checkpoint = pretext_checkpoint;
  return train_run(cfg, model_cfg, loss_cfg, augment_cfg, ds, out_dir);
}

}  // namespace ledpose

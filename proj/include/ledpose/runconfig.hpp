#pragma once

#include <fstream>
#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "ledpose/datagen.hpp"
#include "ledpose/training.hpp"

namespace ledpose {

namespace detail {

inline void check_keys(const nlohmann::json& j, const char* section,
                       std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok)
      throw ConfigError(std::string("unknown config key '") + it.key() + "' in section '" +
                        section + "'");
  }
}

template <class T>
inline void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

/// Everything one run needs; sections mirror the config file.
struct RunConfig {
  SimConfig sim;
  DatasetCounts counts;
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  AugmentPolicy augment;
};

inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  detail::check_keys(j, "sim",
                     {"arena_side", "robot_radius", "robot_speed", "fps", "led_toggle_period",
                      "turn_angle_deg", "turn_jitter_deg", "turret_yaw_offset", "image_width",
                      "image_height", "hfov_deg", "supersample", "cam_height", "ref_height",
                      "body_length", "body_width", "body_height", "turret_length",
                      "turret_width", "turret_height", "turret_forward_offset", "led_radius",
                      "environment"});
  detail::maybe(j, "arena_side", c.arena_side);
  detail::maybe(j, "robot_radius", c.robot_radius);
  detail::maybe(j, "robot_speed", c.robot_speed);
  detail::maybe(j, "fps", c.fps);
  detail::maybe(j, "led_toggle_period", c.led_toggle_period);
  detail::maybe(j, "turn_angle_deg", c.turn_angle_deg);
  detail::maybe(j, "turn_jitter_deg", c.turn_jitter_deg);
  detail::maybe(j, "turret_yaw_offset", c.turret_yaw_offset);
  detail::maybe(j, "image_width", c.image_width);
  detail::maybe(j, "image_height", c.image_height);
  detail::maybe(j, "hfov_deg", c.hfov_deg);
  detail::maybe(j, "supersample", c.supersample);
  detail::maybe(j, "cam_height", c.cam_height);
  detail::maybe(j, "ref_height", c.ref_height);
  detail::maybe(j, "body_length", c.body_length);
  detail::maybe(j, "body_width", c.body_width);
  detail::maybe(j, "body_height", c.body_height);
  detail::maybe(j, "turret_length", c.turret_length);
  detail::maybe(j, "turret_width", c.turret_width);
  detail::maybe(j, "turret_height", c.turret_height);
  detail::maybe(j, "turret_forward_offset", c.turret_forward_offset);
  detail::maybe(j, "led_radius", c.led_radius);
  detail::maybe(j, "environment", c.environment);
  return c;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig rc;
  detail::check_keys(j, "<root>", {"sim", "counts", "model", "loss", "train", "augment"});
  if (j.contains("sim")) rc.sim = sim_config_from_json(j.at("sim"));
  if (j.contains("counts")) {
    const auto& c = j.at("counts");
    detail::check_keys(c, "counts", {"unlabeled", "labeled", "test"});
    detail::maybe(c, "unlabeled", rc.counts.unlabeled);
    detail::maybe(c, "labeled", rc.counts.labeled);
    detail::maybe(c, "test", rc.counts.test);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::check_keys(m, "model",
                       {"channels", "fuse_channels", "head_channels", "led_count", "d_max"});
    if (m.contains("channels")) {
      const auto& ch = m.at("channels");
      if (!ch.is_array() || ch.size() != rc.model.channels.size())
        throw ConfigError("model.channels must be an array of 8 stage widths");
      for (std::size_t i = 0; i < rc.model.channels.size(); ++i)
        rc.model.channels[i] = ch[i].get<int>();
    }
    detail::maybe(m, "fuse_channels", rc.model.fuse_channels);
    detail::maybe(m, "head_channels", rc.model.head_channels);
    detail::maybe(m, "led_count", rc.model.led_count);
    detail::maybe(m, "d_max", rc.model.d_max);
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    detail::check_keys(l, "loss",
                       {"d_max", "led_count", "disc_radius", "bce_clamp", "heading_only"});
    detail::maybe(l, "d_max", rc.loss.d_max);
    detail::maybe(l, "led_count", rc.loss.led_count);
    detail::maybe(l, "disc_radius", rc.loss.disc_radius);
    detail::maybe(l, "bce_clamp", rc.loss.bce_clamp);
    detail::maybe(l, "heading_only", rc.loss.heading_only);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::check_keys(t, "train",
                       {"strategy", "epochs", "batch_size", "lr_start", "lr_end", "replicas",
                        "seed", "upperbound_eval_epoch", "checkpoint_every", "labeled_budget",
                        "unlabeled_mode", "led_mode", "unlabeled_budget"});
    if (t.contains("strategy")) rc.train.strategy = strategy_from_name(t.at("strategy"));
    detail::maybe(t, "epochs", rc.train.epochs);
    detail::maybe(t, "batch_size", rc.train.batch_size);
    detail::maybe(t, "lr_start", rc.train.lr_start);
    detail::maybe(t, "lr_end", rc.train.lr_end);
    detail::maybe(t, "replicas", rc.train.replicas);
    detail::maybe(t, "seed", rc.train.seed);
    detail::maybe(t, "upperbound_eval_epoch", rc.train.upperbound_eval_epoch);
    detail::maybe(t, "checkpoint_every", rc.train.checkpoint_every);
    detail::maybe(t, "labeled_budget", rc.train.labeled_budget);
    detail::maybe(t, "unlabeled_budget", rc.train.unlabeled_budget);
    if (t.contains("unlabeled_mode")) {
      const std::string m = t.at("unlabeled_mode");
      if (m == "all") rc.train.unlabeled_mode = UnlabeledMode::all;
      else if (m == "visible_only") rc.train.unlabeled_mode = UnlabeledMode::visible_only;
      else throw ConfigError("train.unlabeled_mode must be 'all' or 'visible_only'");
    }
    if (t.contains("led_mode")) {
      const std::string m = t.at("led_mode");
      if (m == "independent") rc.train.led_mode = LedMode::independent;
      else if (m == "synchronized_turret") rc.train.led_mode = LedMode::synchronized_turret;
      else throw ConfigError("train.led_mode must be 'independent' or 'synchronized_turret'");
    }
  }
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    detail::check_keys(a, "augment",
                       {"enabled", "translate_px", "rotate_deg", "hue_shift", "brightness",
                        "contrast", "noise_amplitude", "noise_octaves", "max_retries"});
    detail::maybe(a, "enabled", rc.augment.enabled);
    detail::maybe(a, "translate_px", rc.augment.translate_px);
    detail::maybe(a, "rotate_deg", rc.augment.rotate_deg);
    detail::maybe(a, "hue_shift", rc.augment.hue_shift);
    detail::maybe(a, "brightness", rc.augment.brightness);
    detail::maybe(a, "contrast", rc.augment.contrast);
    detail::maybe(a, "noise_amplitude", rc.augment.noise_amplitude);
    detail::maybe(a, "noise_octaves", rc.augment.noise_octaves);
    detail::maybe(a, "max_retries", rc.augment.max_retries);
  }
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline nlohmann::json run_config_to_json(const RunConfig& rc) {
  nlohmann::json j;
  j["sim"] = sim_config_json(rc.sim);
  j["counts"] = {{"unlabeled", rc.counts.unlabeled},
                 {"labeled", rc.counts.labeled},
                 {"test", rc.counts.test}};
  j["model"] = {{"channels", rc.model.channels},
                {"fuse_channels", rc.model.fuse_channels},
                {"head_channels", rc.model.head_channels},
                {"led_count", rc.model.led_count},
                {"d_max", rc.model.d_max}};
  j["loss"] = {{"d_max", rc.loss.d_max},
               {"led_count", rc.loss.led_count},
               {"disc_radius", rc.loss.disc_radius},
               {"bce_clamp", rc.loss.bce_clamp},
               {"heading_only", rc.loss.heading_only}};
  j["train"] = {{"strategy", strategy_name(rc.train.strategy)},
                {"epochs", rc.train.epochs},
                {"batch_size", rc.train.batch_size},
                {"lr_start", rc.train.lr_start},
                {"lr_end", rc.train.lr_end},
                {"replicas", rc.train.replicas},
                {"seed", rc.train.seed},
                {"upperbound_eval_epoch", rc.train.upperbound_eval_epoch},
                {"checkpoint_every", rc.train.checkpoint_every},
                {"labeled_budget", rc.train.labeled_budget},
                {"unlabeled_budget", rc.train.unlabeled_budget},
                {"unlabeled_mode",
                 rc.train.unlabeled_mode == UnlabeledMode::all ? "all" : "visible_only"},
                {"led_mode", rc.train.led_mode == LedMode::independent
                                 ? "independent"
                                 : "synchronized_turret"}};
  j["augment"] = {{"enabled", rc.augment.enabled},
                  {"translate_px", rc.augment.translate_px},
                  {"rotate_deg", rc.augment.rotate_deg},
                  {"hue_shift", rc.augment.hue_shift},
                  {"brightness", rc.augment.brightness},
                  {"contrast", rc.augment.contrast},
                  {"noise_amplitude", rc.augment.noise_amplitude},
                  {"noise_octaves", rc.augment.noise_octaves},
                  {"max_retries", rc.augment.max_retries}};
  return j;
}

}  // namespace ledpose

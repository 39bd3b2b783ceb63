#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "ledpose/render.hpp"

namespace ledpose {

struct DatasetCounts {
  int unlabeled = 8000;
  int labeled = 1000;
  int test = 1000;

  void validate() const {
    if (unlabeled < 0 || labeled < 0 || test < 0)
      throw ConfigError("dataset counts must be nonnegative");
    if (unlabeled + labeled + test == 0) throw ConfigError("dataset counts are all zero");
  }
};

struct GenStats {
  int total = 0;
  int unlabeled_visible = 0;
  double visible_fraction = 0.0;
  double max_distance = 0.0;
  std::string fingerprint;
};

inline const char* kIndexHeader =
    "path,frame,split,visible,vis_front,vis_back,vis_left,vis_right,"
    "x,y,z,roll,pitch,yaw,led_front,led_back,led_left,led_right,session,seed";

namespace detail {

inline std::string index_row(const std::string& path, long frame, const std::string& split,
                             const RenderedSample& s, int session, std::uint64_t seed) {
  std::string row = path + "," + std::to_string(frame) + "," + split + ",";
  row += std::string(s.visible ? "1" : "0");
  for (int i = 0; i < kNumLeds; ++i) row += std::string(",") + (s.led_visible[i] ? "1" : "0");
  row += "," + fmt_double(s.pose.x) + "," + fmt_double(s.pose.y) + "," + fmt_double(s.pose.z);
  row += "," + fmt_double(s.pose.roll) + "," + fmt_double(s.pose.pitch) + "," +
         fmt_double(s.pose.yaw);
  for (int i = 0; i < kNumLeds; ++i) row += std::string(",") + (s.led_state[i] ? "1" : "0");
  row += "," + std::to_string(session) + "," + std::to_string(seed);
  return row;
}

inline std::uint64_t hash_file(const std::filesystem::path& p, std::uint64_t h) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot hash missing file: " + p.string());
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    h = fnv1a64(buf, static_cast<std::size_t>(f.gcount()), h);
  }
  return h;
}

}  // namespace detail

inline nlohmann::json sim_config_json(const SimConfig& c) {
  return {{"arena_side", c.arena_side},
          {"robot_radius", c.robot_radius},
          {"robot_speed", c.robot_speed},
          {"fps", c.fps},
          {"led_toggle_period", c.led_toggle_period},
          {"turn_angle_deg", c.turn_angle_deg},
          {"turn_jitter_deg", c.turn_jitter_deg},
          {"turret_yaw_offset", c.turret_yaw_offset},
          {"image_width", c.image_width},
          {"image_height", c.image_height},
          {"hfov_deg", c.hfov_deg},
          {"supersample", c.supersample},
          {"cam_height", c.cam_height},
          {"ref_height", c.ref_height},
          {"body_length", c.body_length},
          {"body_width", c.body_width},
          {"body_height", c.body_height},
          {"turret_length", c.turret_length},
          {"turret_width", c.turret_width},
          {"turret_height", c.turret_height},
          {"turret_forward_offset", c.turret_forward_offset},
          {"led_radius", c.led_radius},
          {"environment", c.environment}};
}

/// Run the two-robot world and write a dataset: images/ plus index.csv plus
/// manifest.json. Session 0 records every frame as the unlabeled split;
/// sessions 1 and 2 keep only robot-visible frames for the labeled and test
/// splits. Deterministic for a fixed (config, counts, seed).
inline GenStats generate_dataset(const SimConfig& cfg, const DatasetCounts& counts,
                                 std::uint64_t seed, const std::string& out_dir) {
  cfg.validate();
  counts.validate();
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  if (ec) throw DataError("cannot create dataset directory: " + (root / "images").string());

  Renderer renderer(cfg);
  std::ofstream index(root / "index.csv");
  if (!index) throw DataError("cannot open index for writing: " + (root / "index.csv").string());
  index << kIndexHeader << "\n";

  GenStats stats;
  std::vector<std::string> image_files;
  const double dt = 1.0 / cfg.fps;

  struct SessionSpec {
    int id;
    const char* split;
    int want;
    bool visible_only;
  };
  const SessionSpec sessions[3] = {{0, "unlabeled", counts.unlabeled, false},
                                   {1, "labeled", counts.labeled, true},
                                   {2, "test", counts.test, true}};

  for (const auto& sess : sessions) {
    if (sess.want == 0) continue;
    auto rng = make_rng(seed, 0x73696dULL, static_cast<std::uint64_t>(sess.id));
    WorldState world = init_world(cfg, rng);
    int kept = 0;
    long frame = 0;
    const long frame_cap = static_cast<long>(sess.want) * 500 + 1000;
    while (kept < sess.want) {
      if (frame >= frame_cap)
        throw DataError("session " + std::to_string(sess.id) +
                        ": visible frames too rare; check camera/arena configuration");
      world = toggle_leds(world, frame, cfg.fps, cfg.led_toggle_period, rng);
      // Labels first; the image is only rendered for frames that are kept.
      // Environment draws are keyed by (seed, session, frame) so the rendered
      // pixels do not depend on which frames the session keeps.
      RenderedSample sample = renderer.labels(world);
      sample.frame_index = frame;
      if (!sess.visible_only || sample.visible) {
        auto rng_img = make_rng(seed, 0x696d67ULL, static_cast<std::uint64_t>(frame) ^
                                                       (static_cast<std::uint64_t>(sess.id) << 48));
        RenderedSample full = renderer.render(world, rng_img);
        sample.image = full.image;
        char name[64];
        std::snprintf(name, sizeof(name), "images/s%d_f%07ld.png", sess.id, frame);
        if (!cv::imwrite((root / name).string(), sample.image))
          throw DataError("failed to write image: " + (root / name).string());
        index << detail::index_row(name, frame, sess.split, sample, sess.id, seed) << "\n";
        image_files.emplace_back(name);
        ++kept;
        ++stats.total;
        if (sess.id == 0 && sample.visible) ++stats.unlabeled_visible;
        stats.max_distance = std::max(stats.max_distance, sample.pose.distance());
      }
      world = step_policy(world, cfg, dt, rng);
      ++frame;
    }
  }
  index.close();

  stats.visible_fraction =
      counts.unlabeled > 0 ? static_cast<double>(stats.unlabeled_visible) / counts.unlabeled : 0.0;

  std::uint64_t h = detail::hash_file(root / "index.csv", 0xcbf29ce484222325ULL);
  for (const auto& f : image_files) h = detail::hash_file(root / f, h);
  stats.fingerprint = to_hex(h);

  const CameraIntrinsics K = cfg.camera();
  nlohmann::json manifest = {
      {"format_version", 1},
      {"tool_version", kToolVersion},
      {"kind", "dataset"},
      {"seed", seed},
      {"sim", sim_config_json(cfg)},
      {"camera", {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}}},
      {"counts", {{"unlabeled", counts.unlabeled}, {"labeled", counts.labeled}, {"test", counts.test}}},
      {"stats",
       {{"total", stats.total},
        {"unlabeled_visible", stats.unlabeled_visible},
        {"visible_fraction", stats.visible_fraction},
        {"max_distance", stats.max_distance}}},
      {"fingerprint", stats.fingerprint}};
  std::ofstream mf(root / "manifest.json");
  mf << manifest.dump(2) << "\n";
  if (!mf) throw DataError("cannot write dataset manifest");
  return stats;
}

}  // namespace ledpose

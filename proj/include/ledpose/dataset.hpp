#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "ledpose/sim.hpp"

namespace ledpose {

enum class Split { unlabeled, labeled, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::unlabeled: return "unlabeled";
    case Split::labeled: return "labeled";
    default: return "test";
  }
}

/// One dataset record. The pose is exposed only where the split contract
/// provides it (labeled/test, or everywhere when a caller explicitly asks
/// for the pose-annotated view used by the upperbound strategy).
struct Sample {
  std::string image_path;  // absolute or dataset-relative resolved path
  long frame = 0;
  Split split = Split::unlabeled;
  bool visible = false;
  std::array<bool, kNumLeds> led_visible{};
  std::optional<RelativePose> pose;
  std::array<bool, kNumLeds> led_state{};
  int session = 0;
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  CameraIntrinsics camera;
  std::string fingerprint;
  std::string root;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, int line_no, const char* what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("index line " + std::to_string(line_no) + ": bad " + what + " value '" + s +
                    "'");
  }
}

inline bool parse_bool(const std::string& s, int line_no, const char* what) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw DataError("index line " + std::to_string(line_no) + ": bad " + what + " flag '" + s + "'");
}

}  // namespace detail

/// Load a simulator dataset directory (index.csv + images/ + manifest.json).
/// Every record is materialized and checked; missing images are an error
/// naming the offending path. Poses of unlabeled records are hidden unless
/// `expose_all_poses` (the upperbound training view) is set.
inline Dataset load_dataset(const std::string& dir, bool expose_all_poses = false) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::ifstream index(root / "index.csv");
  if (!index) throw DataError("cannot open dataset index: " + (root / "index.csv").string());

  Dataset ds;
  ds.root = dir;
  std::string line;
  if (!std::getline(index, line)) throw DataError("empty dataset index in " + dir);
  int line_no = 1;
  while (std::getline(index, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 20)
      throw DataError("index line " + std::to_string(line_no) + ": expected 20 fields, got " +
                      std::to_string(f.size()));
    Sample s;
    s.image_path = (root / f[0]).string();
    if (!fs::exists(s.image_path))
      throw DataError("index line " + std::to_string(line_no) + ": missing image " + s.image_path);
    s.frame = static_cast<long>(detail::parse_double(f[1], line_no, "frame"));
    if (f[2] == "unlabeled") s.split = Split::unlabeled;
    else if (f[2] == "labeled") s.split = Split::labeled;
    else if (f[2] == "test") s.split = Split::test;
    else throw DataError("index line " + std::to_string(line_no) + ": unknown split '" + f[2] + "'");
    s.visible = detail::parse_bool(f[3], line_no, "visible");
    for (int i = 0; i < kNumLeds; ++i)
      s.led_visible[i] = detail::parse_bool(f[4 + i], line_no, "led visibility");
    RelativePose pose;
    pose.x = detail::parse_double(f[8], line_no, "x");
    pose.y = detail::parse_double(f[9], line_no, "y");
    pose.z = detail::parse_double(f[10], line_no, "z");
    pose.roll = detail::parse_double(f[11], line_no, "roll");
    pose.pitch = detail::parse_double(f[12], line_no, "pitch");
    pose.yaw = detail::parse_double(f[13], line_no, "yaw");
    for (int i = 0; i < kNumLeds; ++i)
      s.led_state[i] = detail::parse_bool(f[14 + i], line_no, "led state");
    s.session = static_cast<int>(detail::parse_double(f[18], line_no, "session"));
    s.seed = static_cast<std::uint64_t>(detail::parse_double(f[19], line_no, "seed"));
    if (s.split != Split::unlabeled || expose_all_poses) s.pose = pose;
    if (s.split != Split::unlabeled && !s.visible)
      throw DataError("index line " + std::to_string(line_no) +
                      ": labeled/test records must be robot-visible");
    ds.samples.push_back(std::move(s));
  }

  std::ifstream mf(root / "manifest.json");
  if (!mf) throw DataError("cannot open dataset manifest in " + dir);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad dataset manifest: ") + e.what());
  }
  const auto& cam = manifest.at("camera");
  ds.camera.fx = cam.at("fx");
  ds.camera.fy = cam.at("fy");
  ds.camera.cx = cam.at("cx");
  ds.camera.cy = cam.at("cy");
  ds.camera.width = cam.at("width");
  ds.camera.height = cam.at("height");
  ds.camera.validate();
  ds.fingerprint = manifest.value("fingerprint", "");
  return ds;
}

inline cv::Mat load_image(const Sample& s) {
  cv::Mat img = cv::imread(s.image_path, cv::IMREAD_COLOR);
  if (img.empty()) throw DataError("cannot read image: " + s.image_path);
  return img;
}

enum class UnlabeledMode { all, visible_only };
enum class LedMode { independent, synchronized_turret };

struct SplitSpec {
  int labeled_budget = -1;  // -1 = all available labeled samples
  UnlabeledMode unlabeled_mode = UnlabeledMode::visible_only;
  LedMode led_mode = LedMode::independent;
  int unlabeled_budget = -1;  // optional cap after filtering, -1 = all
};

struct SplitBundle {
  std::vector<Sample> unlabeled;  // T_u under the requested mode/filters
  std::vector<Sample> labeled;    // T_l^N
  std::vector<Sample> test;       // Q
};

/// Carve the strategy views out of a dataset: the unlabeled pool under the
/// visibility/LED-synchronization filters, a seed-deterministic labeled
/// budget drawn without replacement, and the test split.
inline SplitBundle make_splits(const std::vector<Sample>& samples, const SplitSpec& spec,
                               std::uint64_t seed) {
  SplitBundle out;
  std::vector<Sample> labeled_pool;
  for (const auto& s : samples) {
    switch (s.split) {
      case Split::unlabeled: out.unlabeled.push_back(s); break;
      case Split::labeled: labeled_pool.push_back(s); break;
      case Split::test: out.test.push_back(s); break;
    }
  }
  if (spec.unlabeled_mode == UnlabeledMode::visible_only) {
    std::erase_if(out.unlabeled, [](const Sample& s) { return !s.visible; });
  }
  if (spec.led_mode == LedMode::synchronized_turret) {
    std::erase_if(out.unlabeled, [](const Sample& s) {
      return s.led_state[kLedTurretLeft] != s.led_state[kLedTurretRight];
    });
  }
  if (spec.unlabeled_budget >= 0) {
    if (spec.unlabeled_budget > static_cast<int>(out.unlabeled.size()))
      throw ConfigError("unlabeled budget " + std::to_string(spec.unlabeled_budget) +
                        " exceeds pool of " + std::to_string(out.unlabeled.size()));
    auto rng = make_rng(seed, 0x756eULL);
    std::shuffle(out.unlabeled.begin(), out.unlabeled.end(), rng);
    out.unlabeled.resize(spec.unlabeled_budget);
  }
  if (spec.labeled_budget >= 0) {
    if (spec.labeled_budget > static_cast<int>(labeled_pool.size()))
      throw ConfigError("labeled budget " + std::to_string(spec.labeled_budget) +
                        " exceeds pool of " + std::to_string(labeled_pool.size()));
    auto rng = make_rng(seed, 0x6c61ULL);
    std::shuffle(labeled_pool.begin(), labeled_pool.end(), rng);
    labeled_pool.resize(spec.labeled_budget);
  }
  out.labeled = std::move(labeled_pool);
  return out;
}

/// Map a foreign dataset (the released real-robot recordings) onto the
/// simulator record type via a schema-mapping JSON: CSV column names for
/// each field, plus units. Produces a normal Dataset usable by every
/// downstream stage.
///
/// Mapping keys: image_column, image_root, columns {x,y,z,yaw,visible},
/// led_columns [4], led_visible_columns [4] (optional), angle_unit
/// ("radians"|"degrees"), split_column or default_split, camera {fx,fy,cx,
/// cy,width,height}.
inline Dataset ingest_external_dataset(const std::string& csv_path,
                                       const nlohmann::json& mapping) {
  namespace fs = std::filesystem;
  std::ifstream f(csv_path);
  if (!f) throw DataError("cannot open external index: " + csv_path);
  const fs::path root = fs::path(csv_path).parent_path();
  const fs::path image_root = root / mapping.value("image_root", ".");

  std::string line;
  if (!std::getline(f, line)) throw DataError("external index is empty: " + csv_path);
  const auto header = detail::split_csv_line(line);
  auto col = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw DataError("external index missing column '" + name + "' in " + csv_path);
    return static_cast<int>(it - header.begin());
  };

  const auto& cols = mapping.at("columns");
  const int c_img = col(mapping.at("image_column"));
  const int c_x = col(cols.at("x")), c_y = col(cols.at("y")), c_z = col(cols.at("z"));
  const int c_yaw = col(cols.at("yaw"));
  const int c_vis = col(cols.at("visible"));
  std::array<int, kNumLeds> c_led{};
  const auto& led_cols = mapping.at("led_columns");
  for (int i = 0; i < kNumLeds; ++i) c_led[i] = col(led_cols.at(i));
  const bool degrees = mapping.value("angle_unit", "radians") == "degrees";
  const std::string default_split = mapping.value("default_split", "test");
  const int c_split = mapping.contains("split_column") ? col(mapping.at("split_column")) : -1;

  Dataset ds;
  ds.root = root.string();
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto v = detail::split_csv_line(line);
    if (v.size() != header.size())
      throw DataError("external index line " + std::to_string(line_no) + ": field count mismatch");
    Sample s;
    s.image_path = (image_root / v[c_img]).string();
    if (!fs::exists(s.image_path))
      throw DataError("external index line " + std::to_string(line_no) + ": missing image " +
                      s.image_path);
    const std::string split = c_split >= 0 ? v[c_split] : default_split;
    if (split == "unlabeled") s.split = Split::unlabeled;
    else if (split == "labeled") s.split = Split::labeled;
    else if (split == "test") s.split = Split::test;
    else throw DataError("external index line " + std::to_string(line_no) + ": unknown split '" +
                         split + "'");
    s.visible = detail::parse_bool(v[c_vis], line_no, "visible");
    RelativePose pose;
    pose.x = detail::parse_double(v[c_x], line_no, "x");
    pose.y = detail::parse_double(v[c_y], line_no, "y");
    pose.z = detail::parse_double(v[c_z], line_no, "z");
    pose.yaw = detail::parse_double(v[c_yaw], line_no, "yaw");
    if (degrees) pose.yaw = deg2rad(pose.yaw);
    pose.yaw = wrap_angle(pose.yaw);
    for (int i = 0; i < kNumLeds; ++i) {
      const std::string& raw = v[c_led[i]];
      s.led_state[i] = raw == "1" || raw == "on" || raw == "true" || raw == "ON";
      s.led_visible[i] = s.visible;  // unknown in foreign data; approximated
    }
    s.frame = line_no - 2;
    if (s.split != Split::unlabeled) s.pose = pose;
    ds.samples.push_back(std::move(s));
  }

  const auto& cam = mapping.at("camera");
  ds.camera.fx = cam.at("fx");
  ds.camera.fy = cam.at("fy");
  ds.camera.cx = cam.at("cx");
  ds.camera.cy = cam.at("cy");
  ds.camera.width = cam.at("width");
  ds.camera.height = cam.at("height");
  ds.camera.validate();
  return ds;
}

}  // namespace ledpose

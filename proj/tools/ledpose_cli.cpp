// Command-line front end: dataset generation, training, evaluation,
// reporting and single-image inference over the ledpose library.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "ledpose/evaluation.hpp"
#include "ledpose/runconfig.hpp"

namespace fs = std::filesystem;
using namespace ledpose;

namespace {

RunConfig config_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_run_config(path);
}

int cmd_gen_data(const std::string& config_path, const std::string& out, std::uint64_t seed,
                 bool seed_set, const std::string& environment) {
  RunConfig rc = config_or_default(config_path);
  if (!environment.empty()) rc.sim.environment = environment;
  const std::uint64_t use_seed = seed_set ? seed : rc.train.seed;
  GenStats stats = generate_dataset(rc.sim, rc.counts, use_seed, out);
  std::printf("dataset written to %s\n", out.c_str());
  std::printf("  samples %d, unlabeled visible fraction %.3f, max distance %.3f m\n",
              stats.total, stats.visible_fraction, stats.max_distance);
  std::printf("  fingerprint %s\n", stats.fingerprint.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data,
              const std::string& strategy, const std::string& out, int labels,
              const std::string& init, std::uint64_t seed, bool seed_set, int replicas,
              int epochs, const std::string& unlabeled_mode, const std::string& led_mode,
              const std::string& resume) {
  RunConfig rc = config_or_default(config_path);
  if (!strategy.empty()) rc.train.strategy = strategy_from_name(strategy);
  if (labels >= 0) rc.train.labeled_budget = labels;
  if (!init.empty()) rc.train.init_checkpoint = init;
  if (!resume.empty()) rc.train.resume_checkpoint = resume;
  if (seed_set) rc.train.seed = seed;
  if (replicas > 0) rc.train.replicas = replicas;
  if (epochs >= 0) rc.train.epochs = epochs;
  if (!unlabeled_mode.empty()) {
    if (unlabeled_mode == "all") rc.train.unlabeled_mode = UnlabeledMode::all;
    else if (unlabeled_mode == "visible") rc.train.unlabeled_mode = UnlabeledMode::visible_only;
    else throw ConfigError("--unlabeled-mode must be 'all' or 'visible'");
  }
  if (!led_mode.empty()) {
    if (led_mode == "independent") rc.train.led_mode = LedMode::independent;
    else if (led_mode == "synchronized") rc.train.led_mode = LedMode::synchronized_turret;
    else throw ConfigError("--led-mode must be 'independent' or 'synchronized'");
  }
  rc.train.validate();

  const bool expose_poses = rc.train.strategy == Strategy::upperbound;
  Dataset ds = load_dataset(data, expose_poses);

  fs::create_directories(out);
  nlohmann::json batch = {{"kind", "train_batch"},
                          {"tool_version", kToolVersion},
                          {"strategy", strategy_name(rc.train.strategy)},
                          {"replicas", rc.train.replicas},
                          {"base_seed", rc.train.seed},
                          {"dataset_root", data},
                          {"dataset_fingerprint", ds.fingerprint},
                          {"config", run_config_to_json(rc)}};
  batch["config_hash"] = to_hex(fnv1a64(batch.at("config").dump()));
  nlohmann::json replica_list = nlohmann::json::array();

  for (int r = 0; r < rc.train.replicas; ++r) {
    TrainConfig tc = rc.train;
    tc.seed = rc.train.seed + static_cast<std::uint64_t>(r);
    char name[32];
    std::snprintf(name, sizeof(name), "replica_%03d", r);
    const std::string run_dir = (fs::path(out) / name).string();
    std::printf("[%s] replica %d/%d (seed %llu) -> %s\n", strategy_name(tc.strategy), r + 1,
                rc.train.replicas, static_cast<unsigned long long>(tc.seed), run_dir.c_str());
    std::fflush(stdout);
    TrainResult res = train_run(tc, rc.model, rc.loss, rc.augment, ds, run_dir,
                                {{"replica", r}, {"config", run_config_to_json(rc)}});
    std::printf("  final loss %.5f over %d epochs (pool %s, %d samples)\n",
                res.history.empty() ? 0.0 : res.history.back().loss,
                static_cast<int>(res.history.size()), res.train_split_name.c_str(),
                res.train_pool_size);
    replica_list.push_back({{"dir", name},
                            {"seed", tc.seed},
                            {"final_checkpoint", name + std::string("/final.bin")},
                            {"eval_checkpoint",
                             name + std::string("/") +
                                 fs::path(res.eval_checkpoint).filename().string()}});
  }
  batch["replicas_list"] = replica_list;
  std::ofstream mf(fs::path(out) / "manifest.json");
  mf << batch.dump(2) << "\n";
  if (!mf) throw DataError("cannot write batch manifest in " + out);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out,
             const std::string& strategy_label, int labels, int replica, bool dummy) {
  Dataset ds = load_dataset(data);
  SplitBundle splits = make_splits(ds.samples, SplitSpec{}, 1);
  MetricsReport report;
  if (dummy) {
    DummyPredictor d = dummy_mean(splits.labeled, ds.camera);
    report = evaluate_dummy(d, splits.test, ds.camera);
  } else {
    auto loaded = load_checkpoint<float>(checkpoint);
    report = evaluate(loaded.net, splits.test, ds.camera,
                      loaded.net.config().stride);
    const std::string ckpt_strategy = loaded.extra.value("strategy", "");
    report.strategy = strategy_label.empty() ? ckpt_strategy : strategy_label;
    report.pose_heads_trained = ckpt_strategy != "pretext";
    report.led_heads_trained = ckpt_strategy == "pretext";
  }
  report.labeled_budget = labels;
  report.replica = replica;
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::ofstream f(out);
  f << report.to_json().dump(2) << "\n";
  if (!f) throw DataError("cannot write metrics file: " + out);
  std::printf("E_uv %.1f px  E_psi %.1f deg  E_d %.1f cm  E_xyz %.1f cm  AUC %.3f\n",
              report.e_uv_px, report.e_psi_deg, report.e_d_cm, report.e_xyz_cm,
              report.led_auc_all);
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<MetricsReport> reports;
  for (const auto& in : inputs) {
    std::ifstream f(in);
    if (!f) throw DataError("cannot open metrics file: " + in);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad metrics file " + in + ": " + e.what());
    }
    reports.push_back(MetricsReport::from_json(j));
  }
  write_report(reports, out);
  nlohmann::json manifest = {{"kind", "report"},
                             {"tool_version", kToolVersion},
                             {"inputs", inputs},
                             {"rows", aggregate_reports(reports).size()}};
  std::ofstream mf(fs::path(out) / "manifest.json");
  mf << manifest.dump(2) << "\n";
  std::printf("report written to %s (table.csv, e_uv_plot.png)\n", out.c_str());
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& image_path,
              const std::string& out) {
  auto loaded = load_checkpoint<float>(checkpoint);
  cv::Mat img = cv::imread(image_path, cv::IMREAD_COLOR);
  if (img.empty()) throw DataError("cannot read image: " + image_path);
  Tensor3<float> x = detail::image_to_tensor(img);
  OutputMaps<float> maps = loaded.net.forward(x);

  // Without dataset intrinsics, reconstruct with a unit-focal guess centered
  // on the image; uv, distance, heading and LED probabilities are exact.
  CameraIntrinsics K;
  K.width = img.cols;
  K.height = img.rows;
  K.fx = K.fy = img.cols / 2.0 / std::tan(deg2rad(75.0) / 2.0);
  K.cx = img.cols / 2.0;
  K.cy = img.rows / 2.0;
  Prediction p = predict_from_maps(maps, K, loaded.net.config().stride);

  fs::create_directories(out);
  nlohmann::json pj = {{"uv", {p.uv.u, p.uv.v}},
                       {"dist_m", p.dist},
                       {"yaw_rad", p.yaw},
                       {"yaw_deg", rad2deg(p.yaw)},
                       {"xyz_m", {p.xyz.x(), p.xyz.y(), p.xyz.z()}},
                       {"led_probs", p.led_probs},
                       {"checkpoint", checkpoint},
                       {"image", image_path}};
  std::ofstream pf(fs::path(out) / "prediction.json");
  pf << pj.dump(2) << "\n";

  // Position-map heat overlay.
  cv::Mat heat(maps.pos.height, maps.pos.width, CV_32F);
  for (int i = 0; i < maps.pos.height; ++i)
    for (int j = 0; j < maps.pos.width; ++j) heat.at<float>(i, j) = maps.pos.at(i, j);
  cv::Mat heat8, heat_big, color;
  heat.convertTo(heat8, CV_8U, 255.0);
  cv::resize(heat8, heat_big, img.size(), 0, 0, cv::INTER_NEAREST);
  cv::applyColorMap(heat_big, color, cv::COLORMAP_JET);
  cv::Mat overlay;
  cv::addWeighted(img, 0.55, color, 0.45, 0.0, overlay);
  cv::drawMarker(overlay, {static_cast<int>(p.uv.u), static_cast<int>(p.uv.v)},
                 {255, 255, 255}, cv::MARKER_CROSS, 12, 2);
  cv::imwrite((fs::path(out) / "position_map.png").string(), overlay);

  nlohmann::json manifest = {{"kind", "inference"},
                             {"tool_version", kToolVersion},
                             {"checkpoint", checkpoint},
                             {"image", image_path}};
  std::ofstream mf(fs::path(out) / "manifest.json");
  mf << manifest.dump(2) << "\n";
  std::printf("uv (%.1f, %.1f)  d %.2f m  yaw %.1f deg  led", p.uv.u, p.uv.v, p.dist,
              rad2deg(p.yaw));
  for (double q : p.led_probs) std::printf(" %.2f", q);
  std::printf("\n");
  return 0;
}

int cmd_ingest(const std::string& in_csv, const std::string& mapping_path,
               const std::string& out) {
  std::ifstream mf(mapping_path);
  if (!mf) throw ConfigError("cannot open schema mapping: " + mapping_path);
  nlohmann::json mapping;
  try {
    mf >> mapping;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad schema mapping: " + std::string(e.what()));
  }
  Dataset ds = ingest_external_dataset(in_csv, mapping);

  fs::create_directories(fs::path(out) / "images");
  std::ofstream index(fs::path(out) / "index.csv");
  index << kIndexHeader << "\n";
  int i = 0;
  std::vector<std::string> files;
  for (auto& s : ds.samples) {
    char name[64];
    std::snprintf(name, sizeof(name), "images/ext_%06d.png", i++);
    cv::Mat img = cv::imread(s.image_path, cv::IMREAD_COLOR);
    if (img.empty()) throw DataError("cannot read image: " + s.image_path);
    cv::imwrite((fs::path(out) / name).string(), img);
    RenderedSample rs;
    rs.visible = s.visible;
    rs.led_visible = s.led_visible;
    if (s.pose) rs.pose = *s.pose;
    rs.led_state = s.led_state;
    index << detail::index_row(name, s.frame, split_name(s.split), rs, 0, 0) << "\n";
    files.push_back(name);
  }
  index.close();
  std::uint64_t h = detail::hash_file(fs::path(out) / "index.csv", 0xcbf29ce484222325ULL);
  for (const auto& f : files) h = detail::hash_file(fs::path(out) / f, h);
  nlohmann::json manifest = {{"format_version", 1},
                             {"tool_version", kToolVersion},
                             {"kind", "dataset"},
                             {"ingested_from", in_csv},
                             {"camera",
                              {{"fx", ds.camera.fx},
                               {"fy", ds.camera.fy},
                               {"cx", ds.camera.cx},
                               {"cy", ds.camera.cy},
                               {"width", ds.camera.width},
                               {"height", ds.camera.height}}},
                             {"fingerprint", to_hex(h)}};
  std::ofstream omf(fs::path(out) / "manifest.json");
  omf << manifest.dump(2) << "\n";
  std::printf("ingested %zu samples into %s\n", ds.samples.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LED-pretext relative pose estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path, out, data, strategy, init, unlabeled_mode, led_mode, resume;
  std::string checkpoint, image_path, strategy_label, environment, in_csv, mapping_path;
  std::vector<std::string> report_inputs;
  std::uint64_t seed = 1;
  bool dummy = false;
  int labels = -1, replicas = -1, epochs = -1, replica_id = 0;

  auto* gen = app.add_subcommand("gen-data", "Generate a simulated two-robot dataset");
  gen->add_option("--config", config_path, "Run config JSON");
  gen->add_option("--out", out, "Output dataset directory")->required();
  auto* gen_seed = gen->add_option("--seed", seed, "Generation seed");
  gen->add_option("--environment", environment, "Texture pool: train or heldout");

  auto* tr = app.add_subcommand("train", "Train one strategy, possibly over replicas");
  tr->add_option("--config", config_path, "Run config JSON");
  tr->add_option("--data", data, "Dataset directory")->required();
  tr->add_option("--strategy", strategy, "pretext | baseline | downstream | upperbound");
  tr->add_option("--out", out, "Run output directory")->required();
  tr->add_option("--labels", labels, "Labeled budget N");
  tr->add_option("--init", init, "Initial checkpoint (downstream)");
  auto* tr_seed = tr->add_option("--seed", seed, "Base seed");
  tr->add_option("--replicas", replicas, "Number of seeded replicas");
  tr->add_option("--epochs", epochs, "Override epoch count");
  tr->add_option("--unlabeled-mode", unlabeled_mode, "all | visible");
  tr->add_option("--led-mode", led_mode, "independent | synchronized");
  tr->add_option("--resume", resume, "Resume from checkpoint");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file");
  ev->add_option("--data", data, "Dataset directory")->required();
  ev->add_option("--out", out, "Metrics JSON output path")->required();
  ev->add_option("--strategy-label", strategy_label, "Strategy name for the report");
  ev->add_option("--labels", labels, "Labeled budget the model was trained with");
  ev->add_option("--replica", replica_id, "Replica id for the report");
  ev->add_flag("--dummy", dummy, "Evaluate the dummy-mean reference instead");

  auto* rp = app.add_subcommand("report", "Aggregate metrics files into a table and plots");
  rp->add_option("--in", report_inputs, "Metrics JSON files")->required();
  rp->add_option("--out", out, "Report output directory")->required();

  auto* inf = app.add_subcommand("infer", "Run one image through a checkpoint");
  inf->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  inf->add_option("--image", image_path, "Input image")->required();
  inf->add_option("--out", out, "Output directory")->required();

  auto* ing = app.add_subcommand("ingest", "Convert an external dataset via a schema mapping");
  ing->add_option("--in", in_csv, "External index CSV")->required();
  ing->add_option("--mapping", mapping_path, "Schema mapping JSON")->required();
  ing->add_option("--out", out, "Output dataset directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_data(config_path, out, seed, gen_seed->count() > 0, environment);
    if (tr->parsed())
      return cmd_train(config_path, data, strategy, out, labels, init, seed,
                       tr_seed->count() > 0, replicas, epochs, unlabeled_mode, led_mode,
                       resume);
    if (ev->parsed())
      return cmd_eval(checkpoint, data, out, strategy_label, labels, replica_id, dummy);
    if (rp->parsed()) return cmd_report(report_inputs, out);
    if (inf->parsed()) return cmd_infer(checkpoint, image_path, out);
    if (ing->parsed()) return cmd_ingest(in_csv, mapping_path, out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "ledpose/dataset.hpp"
#include "ledpose/training.hpp"

namespace ledpose {

/// Median with the lower-mid convention for even counts (sorted[(n-1)/2]),
/// so reported medians are reproducible elementwise.
inline double median_lower(std::vector<double> v) {
  if (v.empty()) throw std::domain_error("median of empty set");
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

/// ROC AUC via the rank statistic; ties contribute half. Equivalent to the
/// normalized Mann-Whitney U count.
inline double led_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::domain_error("led_auc: score/label size mismatch");
  std::size_t n_pos = 0;
  for (bool l : labels) n_pos += l;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::domain_error("led_auc: needs at least one positive and one negative");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[idx[k]]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace detail {

/// Regularized incomplete beta function I_x(a, b), continued-fraction form.
inline double betacf(double a, double b, double x) {
  const int kMaxIter = 300;
  const double eps = 3e-14, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

inline double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_beta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  const double front = std::exp(ln_beta + a * std::log(x) + b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

/// Student-t CDF with (possibly fractional) degrees of freedom.
inline double student_t_cdf(double t, double dof) {
  if (dof <= 0) throw std::domain_error("student_t_cdf: dof must be positive");
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * detail::reg_inc_beta(dof / 2.0, 0.5, x);
  return t > 0 ? 1.0 - tail : tail;
}

/// One-tailed Welch's t-test for mean(a) < mean(b); returns the p-value.
inline double welch_one_tailed(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::domain_error("welch_one_tailed: needs at least two replicas per side");
  auto mean_var = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair<double, double>(m, s / (v.size() - 1));
  };
  const auto [ma, va] = mean_var(a);
  const auto [mb, vb] = mean_var(b);
  const double sa = va / a.size(), sb = vb / b.size();
  if (sa + sb == 0.0) return ma == mb ? 0.5 : (ma < mb ? 0.0 : 1.0);
  const double t = (ma - mb) / std::sqrt(sa + sb);
  const double dof = (sa + sb) * (sa + sb) /
                     (sa * sa / (a.size() - 1) + sb * sb / (b.size() - 1));
  return student_t_cdf(t, dof);
}

struct MetricsReport {
  std::string strategy;
  int replica = 0;
  int labeled_budget = -1;
  int test_count = 0;
  double e_uv_px = 0;
  double e_psi_deg = 0;
  double e_d_cm = 0;
  double e_xyz_cm = 0;
  double led_auc_all = 0;           // AUC over every test sample
  double led_auc_visible = 0;       // conditioned on the LED being visible
  std::vector<double> per_led_auc_visible;
  std::vector<std::string> warnings;
  bool pose_heads_trained = true;
  bool led_heads_trained = true;

  nlohmann::json to_json() const {
    return {{"strategy", strategy},
            {"replica", replica},
            {"labeled_budget", labeled_budget},
            {"test_count", test_count},
            {"e_uv_px", e_uv_px},
            {"e_psi_deg", e_psi_deg},
            {"e_d_cm", e_d_cm},
            {"e_xyz_cm", e_xyz_cm},
            {"led_auc_all", led_auc_all},
            {"led_auc_visible", led_auc_visible},
            {"per_led_auc_visible", per_led_auc_visible},
            {"warnings", warnings},
            {"pose_heads_trained", pose_heads_trained},
            {"led_heads_trained", led_heads_trained}};
  }

  static MetricsReport from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.strategy = j.at("strategy");
    r.replica = j.at("replica");
    r.labeled_budget = j.at("labeled_budget");
    r.test_count = j.at("test_count");
    r.e_uv_px = j.at("e_uv_px");
    r.e_psi_deg = j.at("e_psi_deg");
    r.e_d_cm = j.at("e_d_cm");
    r.e_xyz_cm = j.at("e_xyz_cm");
    r.led_auc_all = j.at("led_auc_all");
    r.led_auc_visible = j.at("led_auc_visible");
    r.per_led_auc_visible = j.at("per_led_auc_visible").get<std::vector<double>>();
    r.pose_heads_trained = j.value("pose_heads_trained", true);
    r.led_heads_trained = j.value("led_heads_trained", true);
    return r;
  }
};

/// Per-sample predictions extracted from the output maps with the exact
/// pooling semantics (argmax cell center, pooled distance, pooled heading).
struct Prediction {
  ImagePoint uv;
  double dist = 0;
  double yaw = 0;
  Eigen::Vector3d xyz;
  std::vector<double> led_probs;
};

inline Prediction predict_from_maps(const OutputMaps<float>& maps,
                                    const CameraIntrinsics& K, double stride) {
  Prediction p;
  MapGrid<double> pos(maps.pos.width, maps.pos.height);
  for (std::size_t k = 0; k < pos.size(); ++k) pos.cells[k] = maps.pos.cells[k];
  auto as_double = [&](const MapGrid<float>& m) {
    MapGrid<double> d(m.width, m.height);
    for (std::size_t k = 0; k < d.size(); ++k) d.cells[k] = m.cells[k];
    return d;
  };
  const MapGrid<double> w = normalize_map(pos);
  p.uv = extract_uv(pos, stride);
  p.dist = pool_with_weights(as_double(maps.dist), w);
  p.yaw = std::atan2(pool_with_weights(as_double(maps.ori_sin), w),
                     pool_with_weights(as_double(maps.ori_cos), w));
  p.xyz = reconstruct(p.uv, std::max(1e-9, p.dist), K);
  for (const auto& lm : maps.led) p.led_probs.push_back(pool_with_weights(as_double(lm), w));
  return p;
}

/// Evaluate a checkpoint on the test split: median pixel, heading, distance
/// and 3D errors plus the LED AUCs.
inline MetricsReport evaluate(FcnNet<float>& net, const std::vector<Sample>& test_split,
                              const CameraIntrinsics& K, double stride = 8.0) {
  if (test_split.empty()) throw DataError("evaluate: empty test split");
  std::vector<double> e_uv, e_psi, e_d, e_xyz;
  const int k = static_cast<int>(net.config().led_count);
  std::vector<std::vector<double>> scores(k), scores_vis(k);
  std::vector<std::vector<bool>> labels(k), labels_vis(k);

  for (const auto& s : test_split) {
    if (!s.pose || !s.visible)
      throw DataError("evaluate: test samples must be labeled and visible");
    cv::Mat img = load_image(s);
    Tensor3<float> x = detail::image_to_tensor(img);
    OutputMaps<float> maps = net.forward(x);
    Prediction p = predict_from_maps(maps, K, stride);

    const ImagePoint uv = project<double>({s.pose->x, s.pose->y, s.pose->z}, K);
    e_uv.push_back(std::hypot(p.uv.u - uv.u, p.uv.v - uv.v));
    e_psi.push_back(rad2deg(circular_distance(p.yaw, s.pose->yaw)));
    e_d.push_back(std::abs(p.dist - s.pose->distance()) * 100.0);
    const Eigen::Vector3d truth(s.pose->x, s.pose->y, s.pose->z);
    e_xyz.push_back((p.xyz - truth).norm() * 100.0);
    for (int i = 0; i < k; ++i) {
      scores[i].push_back(p.led_probs[i]);
      labels[i].push_back(s.led_state[i]);
      if (s.led_visible[i]) {
        scores_vis[i].push_back(p.led_probs[i]);
        labels_vis[i].push_back(s.led_state[i]);
      }
    }
  }

  MetricsReport r;
  r.test_count = static_cast<int>(test_split.size());
  r.e_uv_px = median_lower(e_uv);
  r.e_psi_deg = median_lower(e_psi);
  r.e_d_cm = median_lower(e_d);
  r.e_xyz_cm = median_lower(e_xyz);

  auto mean_auc = [&](std::vector<std::vector<double>>& sc,
                      std::vector<std::vector<bool>>& lb, const char* tag,
                      std::vector<double>* per_led) {
    double sum = 0;
    int used = 0;
    for (int i = 0; i < k; ++i) {
      try {
        const double a = led_auc(sc[i], lb[i]);
        if (per_led) per_led->push_back(a);
        sum += a;
        ++used;
      } catch (const std::domain_error&) {
        if (per_led) per_led->push_back(std::nan(""));
        r.warnings.push_back("led " + std::to_string(i) + " excluded from " + tag +
                             " AUC: single-class labels");
      }
    }
    return used > 0 ? sum / used : 0.5;
  };
  r.led_auc_all = mean_auc(scores, labels, "all", nullptr);
  r.led_auc_visible = mean_auc(scores_vis, labels_vis, "visible", &r.per_led_auc_visible);
  return r;
}

/// The constant reference predictor: training-set mean uv and distance,
/// circular-mean heading, with the 3D point reconstructed from those.
struct DummyPredictor {
  ImagePoint uv;
  double dist = 0;
  double yaw = 0;
};

inline DummyPredictor dummy_mean(const std::vector<Sample>& labeled,
                                 const CameraIntrinsics& K) {
  if (labeled.empty()) throw std::domain_error("dummy_mean: empty training labels");
  DummyPredictor d;
  double su = 0, sv = 0, sd = 0, ss = 0, sc = 0;
  for (const auto& s : labeled) {
    if (!s.pose) throw DataError("dummy_mean: unlabeled sample in the pool");
    const ImagePoint uv = project<double>({s.pose->x, s.pose->y, s.pose->z}, K);
    su += uv.u;
    sv += uv.v;
    sd += s.pose->distance();
    ss += std::sin(s.pose->yaw);
    sc += std::cos(s.pose->yaw);
  }
  const double n = static_cast<double>(labeled.size());
  d.uv = {su / n, sv / n};
  d.dist = sd / n;
  d.yaw = std::atan2(ss / n, sc / n);
  return d;
}

inline MetricsReport evaluate_dummy(const DummyPredictor& d,
                                    const std::vector<Sample>& test_split,
                                    const CameraIntrinsics& K) {
  if (test_split.empty()) throw DataError("evaluate_dummy: empty test split");
  std::vector<double> e_uv, e_psi, e_d, e_xyz;
  const Eigen::Vector3d pred_xyz = reconstruct(d.uv, std::max(1e-9, d.dist), K);
  for (const auto& s : test_split) {
    const ImagePoint uv = project<double>({s.pose->x, s.pose->y, s.pose->z}, K);
    e_uv.push_back(std::hypot(d.uv.u - uv.u, d.uv.v - uv.v));
    e_psi.push_back(rad2deg(circular_distance(d.yaw, s.pose->yaw)));
    e_d.push_back(std::abs(d.dist - s.pose->distance()) * 100.0);
    e_xyz.push_back((pred_xyz - Eigen::Vector3d(s.pose->x, s.pose->y, s.pose->z)).norm() * 100.0);
  }
  MetricsReport r;
  r.strategy = "dummy_mean";
  r.test_count = static_cast<int>(test_split.size());
  r.e_uv_px = median_lower(e_uv);
  r.e_psi_deg = median_lower(e_psi);
  r.e_d_cm = median_lower(e_d);
  r.e_xyz_cm = median_lower(e_xyz);
  r.led_heads_trained = false;
  return r;
}

struct ReportRow {
  std::string strategy;
  int labeled_budget = -1;
  int replicas = 0;
  bool show_pose = true, show_led = true;
  double e_uv = 0, e_uv_ci = 0;
  double e_psi = 0, e_psi_ci = 0;
  double e_d = 0, e_d_ci = 0;
  double e_xyz = 0, e_xyz_ci = 0;
  double auc = 0, auc_ci = 0;
};

/// Aggregate replica reports into a comparison table (mean with normal 95%
/// confidence intervals over replicas) plus a point plot of the pixel error.
inline std::vector<ReportRow> aggregate_reports(const std::vector<MetricsReport>& reports) {
  std::vector<ReportRow> rows;
  for (const auto& r : reports) {
    ReportRow* row = nullptr;
    for (auto& existing : rows)
      if (existing.strategy == r.strategy && existing.labeled_budget == r.labeled_budget)
        row = &existing;
    if (!row) {
      rows.push_back({});
      row = &rows.back();
      row->strategy = r.strategy;
      row->labeled_budget = r.labeled_budget;
    }
    ++row->replicas;
  }
  for (auto& row : rows) {
    std::vector<double> uv, psi, dd, xyz, auc;
    for (const auto& r : reports) {
      if (r.strategy != row.strategy || r.labeled_budget != row.labeled_budget) continue;
      uv.push_back(r.e_uv_px);
      psi.push_back(r.e_psi_deg);
      dd.push_back(r.e_d_cm);
      xyz.push_back(r.e_xyz_cm);
      auc.push_back(r.led_auc_all);
      row.show_pose = r.pose_heads_trained;
      row.show_led = r.led_heads_trained;
    }
    auto mean_ci = [](const std::vector<double>& v) {
      const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
      if (v.size() < 2) return std::pair<double, double>(m, 0.0);
      double s2 = 0;
      for (double x : v) s2 += (x - m) * (x - m);
      s2 /= (v.size() - 1);
      return std::pair<double, double>(m, 1.96 * std::sqrt(s2 / v.size()));
    };
    std::tie(row.e_uv, row.e_uv_ci) = mean_ci(uv);
    std::tie(row.e_psi, row.e_psi_ci) = mean_ci(psi);
    std::tie(row.e_d, row.e_d_ci) = mean_ci(dd);
    std::tie(row.e_xyz, row.e_xyz_ci) = mean_ci(xyz);
    std::tie(row.auc, row.auc_ci) = mean_ci(auc);
  }
  return rows;
}

inline void write_report(const std::vector<MetricsReport>& reports, const std::string& out_dir) {
  if (reports.empty()) throw DataError("report: no metric reports given");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto rows = aggregate_reports(reports);

  std::ofstream csv(fs::path(out_dir) / "table.csv");
  csv << "strategy,labeled_budget,replicas,e_uv_px,e_uv_ci95,e_psi_deg,e_psi_ci95,"
         "e_d_cm,e_d_ci95,e_xyz_cm,e_xyz_ci95,led_auc,led_auc_ci95\n";
  auto cell = [](bool show, double v) { return show ? fmt_double(v) : std::string("-"); };
  for (const auto& r : rows) {
    csv << r.strategy << ','
        << (r.labeled_budget >= 0 ? std::to_string(r.labeled_budget) : std::string("-")) << ','
        << r.replicas << ',' << fmt_double(r.e_uv) << ',' << fmt_double(r.e_uv_ci) << ','
        << cell(r.show_pose, r.e_psi) << ',' << cell(r.show_pose, r.e_psi_ci) << ','
        << cell(r.show_pose, r.e_d) << ',' << cell(r.show_pose, r.e_d_ci) << ','
        << cell(r.show_pose, r.e_xyz) << ',' << cell(r.show_pose, r.e_xyz_ci) << ','
        << cell(r.show_led, r.auc) << ',' << cell(r.show_led, r.auc_ci) << '\n';
  }
  csv.close();

  // Point plot of the pixel error with 95% confidence whiskers.
  const int W = 900, row_h = 44, margin_l = 260, margin_r = 40, margin_t = 50;
  const int H = margin_t + row_h * static_cast<int>(rows.size()) + 40;
  cv::Mat plot(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
  double max_uv = 1;
  for (const auto& r : rows) max_uv = std::max(max_uv, r.e_uv + r.e_uv_ci);
  const double scale = (W - margin_l - margin_r) / (max_uv * 1.05);
  cv::putText(plot, "median E_uv [px], 95% conf. int. over replicas", {margin_l, 28},
              cv::FONT_HERSHEY_SIMPLEX, 0.55, {30, 30, 30}, 1, cv::LINE_AA);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const int y = margin_t + static_cast<int>(i) * row_h + row_h / 2;
    std::string label = r.strategy;
    if (r.labeled_budget >= 0) label += "-" + std::to_string(r.labeled_budget);
    cv::putText(plot, label, {10, y + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {30, 30, 30}, 1,
                cv::LINE_AA);
    const int x0 = margin_l + static_cast<int>((r.e_uv - r.e_uv_ci) * scale);
    const int x1 = margin_l + static_cast<int>((r.e_uv + r.e_uv_ci) * scale);
    const int xm = margin_l + static_cast<int>(r.e_uv * scale);
    cv::line(plot, {x0, y}, {x1, y}, {120, 120, 120}, 1, cv::LINE_AA);
    cv::line(plot, {x0, y - 5}, {x0, y + 5}, {120, 120, 120}, 1, cv::LINE_AA);
    cv::line(plot, {x1, y - 5}, {x1, y + 5}, {120, 120, 120}, 1, cv::LINE_AA);
    cv::circle(plot, {xm, y}, 4, {180, 90, 20}, cv::FILLED, cv::LINE_AA);
  }
  // Axis ticks every 10 px of error.
  for (int v = 0; v <= static_cast<int>(max_uv * 1.05); v += 10) {
    const int x = margin_l + static_cast<int>(v * scale);
    cv::line(plot, {x, H - 30}, {x, H - 24}, {60, 60, 60}, 1);
    if (v % 20 == 0)
      cv::putText(plot, std::to_string(v), {x - 8, H - 10}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                  {60, 60, 60}, 1, cv::LINE_AA);
  }
  if (!cv::imwrite((fs::path(out_dir) / "e_uv_plot.png").string(), plot))
    throw DataError("report: cannot write plot image");
}

}  // namespace ledpose

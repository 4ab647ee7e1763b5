// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/metrics/report.hpp"

#include <cstdio>
#include <sstream>

#include "mirage/core/error.hpp"
#include "mirage/training/losses.hpp"

namespace mirage::metrics {

using nlohmann::json;

const char* mode_name(EvalMode mode) {
  return mode == EvalMode::kActorCentric ? "actor_centric" : "full_resolution";
}

EvalMode parse_mode(const std::string& name) {
  if (name == "full_resolution") return EvalMode::kFullResolution;
  if (name == "actor_centric") return EvalMode::kActorCentric;
  throw ConfigError("unknown evaluation mode '" + name + "' (full_resolution | actor_centric)");
}

json MetricReport::to_json() const {
  json rows = json::array();
  for (const auto& c : clips) {
    json r{{"id", c.id}, {"psnr", c.psnr}, {"ssim", c.ssim}, {"perceptual", c.perceptual}};
    r["e_warp"] = c.e_warp ? json(*c.e_warp) : json(nullptr);
    if (c.crop) r["crop"] = {c.crop->x0, c.crop->y0, c.crop->x1, c.crop->y1};
    rows.push_back(r);
  }
  return {{"mode", mode_name(mode)}, {"clips", rows}, {"aggregate", aggregate}};
}

std::string MetricReport::table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %9s %8s %11s %10s\n", "clip", "PSNR", "SSIM", "perceptual", "E_warp");
  os << "mode: " << mode_name(mode) << "\n" << line;
  auto warp = [](const std::optional<double>& v) {
    char b[32];
    if (v) std::snprintf(b, sizeof b, "%10.6f", *v);
    else std::snprintf(b, sizeof b, "%10s", "-");
    return std::string(b);
  };
  for (const auto& c : clips) {
    std::snprintf(line, sizeof line, "%-24s %9.3f %8.4f %11.5f %s\n", c.id.c_str(), c.psnr, c.ssim, c.perceptual,
                  warp(c.e_warp).c_str());
    os << line;
  }
  auto get = [&](const char* k) { return aggregate.count(k) ? std::optional<double>(aggregate.at(k)) : std::nullopt; };
  std::snprintf(line, sizeof line, "%-24s %9.3f %8.4f %11.5f %s\n", "mean", get("psnr").value_or(0),
                get("ssim").value_or(0), get("perceptual").value_or(0), warp(get("e_warp")).c_str());
  os << line;
  if (auto v = get("vfid")) {
    std::snprintf(line, sizeof line, "vFID %.6f\n", *v);
    os << line;
  }
  return os.str();
}

MetricReport evaluate(const std::vector<EvalItem>& items, EvalMode mode, bool warp_mean_abs) {
  MetricReport report;
  report.mode = mode;
  training::PerceptualNet net;
  VideoFeatureNet vnet;
  torch::NoGradGuard no_grad;
  Eigen::MatrixXd fp, fg;
  double sums[3] = {0, 0, 0}, warp_sum = 0;
  int warp_n = 0;
  for (size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    if (!it.pred.frames().sizes().equals(it.gt.frames().sizes())) {
      throw ShapeError("prediction and reference differ in shape for '" + it.id + "'");
    }
    ClipMetrics m;
    m.id = it.id;
    torch::Tensor p = it.pred.frames(), g = it.gt.frames();
    if (mode == EvalMode::kActorCentric) {
      if (it.boxes.empty()) throw InputError("actor-centric evaluation needs boxes for '" + it.id + "'");
      m.crop = actor_window(it.boxes, it.gt.height(), it.gt.width());
      p = crop(it.pred, *m.crop);
      g = crop(it.gt, *m.crop);
    }
    m.psnr = psnr(p, g);
    m.ssim = ssim(p, g);
    auto pp = p.to(torch::kFloat).permute({3, 0, 1, 2});
    auto gg = g.to(torch::kFloat).permute({3, 0, 1, 2});
    m.perceptual = training::perceptual_distance(net, pp, gg).item<double>();
    if (it.flow.defined()) {
      m.e_warp = warp_error(it.pred, it.flow, it.mask, warp_mean_abs);
      warp_sum += *m.e_warp;
      ++warp_n;
    }
    sums[0] += m.psnr;
    sums[1] += m.ssim;
    sums[2] += m.perceptual;
    const Eigen::VectorXd a = vnet->features(p), b = vnet->features(g);
    if (i == 0) {
      fp.resize(static_cast<Eigen::Index>(items.size()), a.size());
      fg.resize(static_cast<Eigen::Index>(items.size()), b.size());
    }
    fp.row(static_cast<Eigen::Index>(i)) = a.transpose();
    fg.row(static_cast<Eigen::Index>(i)) = b.transpose();
    report.clips.push_back(m);
  }
  if (!items.empty()) {
    const double n = static_cast<double>(items.size());
    report.aggregate["psnr"] = sums[0] / n;
    report.aggregate["ssim"] = sums[1] / n;
    report.aggregate["perceptual"] = sums[2] / n;
    if (warp_n) report.aggregate["e_warp"] = warp_sum / warp_n;
    if (items.size() >= 2) report.aggregate["vfid"] = frechet_distance(fp, fg);
  }
  return report;
}

}  // namespace mirage::metrics

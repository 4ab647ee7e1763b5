// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/metrics/metrics.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "mirage/core/error.hpp"

namespace mirage::metrics {

namespace {

void check_same(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.dim() != 4 || a.size(3) != 3) throw ShapeError("frames must be [T,H,W,3]");
  if (!a.sizes().equals(b.sizes())) throw ShapeError("clips differ in shape");
}

torch::Tensor gaussian_window() {
  auto x = torch::arange(11, torch::kDouble) - 5.0;
  auto g = torch::exp(-(x * x) / (2 * 1.5 * 1.5));
  g = g / g.sum();
  return torch::outer(g, g).view({1, 1, 11, 11});
}

torch::Tensor luma(const torch::Tensor& frame) {
  auto f = frame.to(torch::kDouble);
  return (f.select(2, 0) * 0.299 + f.select(2, 1) * 0.587 + f.select(2, 2) * 0.114).view({1, 1, f.size(0), f.size(1)});
}

}  // namespace

double psnr_frame(const torch::Tensor& a, const torch::Tensor& b) {
  if (!a.sizes().equals(b.sizes())) throw ShapeError("frames differ in shape");
  const double mse = (a.to(torch::kDouble) - b.to(torch::kDouble)).pow(2).mean().item<double>();
  if (mse <= 0) return kPsnrSentinel;
  return std::min(kPsnrSentinel, 10.0 * std::log10(1.0 / mse));
}

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
  check_same(a, b);
  double total = 0;
  for (int64_t t = 0; t < a.size(0); ++t) total += psnr_frame(a[t], b[t]);
  return total / static_cast<double>(a.size(0));
}

double psnr(const VideoClip& a, const VideoClip& b) { return psnr(a.frames(), b.frames()); }

double ssim_frame(const torch::Tensor& a, const torch::Tensor& b) {
  if (!a.sizes().equals(b.sizes())) throw ShapeError("frames differ in shape");
  if (a.size(0) < 11 || a.size(1) < 11) throw InputError("image smaller than the 11×11 SSIM window");
  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  const auto w = gaussian_window();
  auto x = luma(a), y = luma(b);
  auto mu1 = torch::conv2d(x, w), mu2 = torch::conv2d(y, w);
  auto s11 = torch::conv2d(x * x, w) - mu1 * mu1;
  auto s22 = torch::conv2d(y * y, w) - mu2 * mu2;
  auto s12 = torch::conv2d(x * y, w) - mu1 * mu2;
  auto num = (2 * mu1 * mu2 + C1) * (2 * s12 + C2);
  auto den = (mu1 * mu1 + mu2 * mu2 + C1) * (s11 + s22 + C2);
  return (num / den).mean().item<double>();
}

double ssim(const torch::Tensor& a, const torch::Tensor& b) {
  check_same(a, b);
  double total = 0;
  for (int64_t t = 0; t < a.size(0); ++t) total += ssim_frame(a[t], b[t]);
  return total / static_cast<double>(a.size(0));
}

double ssim(const VideoClip& a, const VideoClip& b) { return ssim(a.frames(), b.frames()); }

double warp_error(const VideoClip& x, const torch::Tensor& flow, const torch::Tensor& mask, bool mean_abs) {
  const int64_t T = x.num_frames(), H = x.height(), W = x.width();
  if (flow.dim() != 4 || flow.size(0) != T - 1 || flow.size(1) != H || flow.size(2) != W || flow.size(3) != 2) {
    throw ShapeError("flow must be [T−1, H, W, 2] for the clip");
  }
  if (mask.defined() && (mask.dim() != 3 || mask.size(0) != T - 1 || mask.size(1) != H || mask.size(2) != W)) {
    throw ShapeError("mask must be [T−1, H, W] for the clip");
  }
  if (T < 2) return 0.0;
  const auto frames = x.frames().to(torch::kDouble).contiguous();
  const auto fl = flow.to(torch::kDouble).contiguous();
  const auto mk = mask.defined() ? mask.to(torch::kDouble).contiguous() : torch::ones({T - 1, H, W}, torch::kDouble);
  const double* px = frames.data_ptr<double>();
  const double* pf = fl.data_ptr<double>();
  const double* pm = mk.data_ptr<double>();

  double total = 0;
  int64_t pairs = 0;
  for (int64_t t = 0; t + 1 < T; ++t) {
    const double* cur = px + t * H * W * 3;
    const double* nxt = px + (t + 1) * H * W * 3;
    double err = 0, weight = 0;
    for (int64_t y = 0; y < H; ++y) {
      for (int64_t xx = 0; xx < W; ++xx) {
        const int64_t i = (t * H + y) * W + xx;
        const double m = pm[i];
        if (m <= 0) continue;
        const double sx = xx + pf[i * 2], sy = y + pf[i * 2 + 1];
        if (sx < 0 || sy < 0 || sx > W - 1 || sy > H - 1) continue;
        const int64_t x0 = static_cast<int64_t>(std::floor(sx)), y0 = static_cast<int64_t>(std::floor(sy));
        const int64_t x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
        const double ax = sx - x0, ay = sy - y0;
        double e = 0;
        for (int c = 0; c < 3; ++c) {
          const double v = (1 - ax) * (1 - ay) * nxt[(y0 * W + x0) * 3 + c] + ax * (1 - ay) * nxt[(y0 * W + x1) * 3 + c] +
                           (1 - ax) * ay * nxt[(y1 * W + x0) * 3 + c] + ax * ay * nxt[(y1 * W + x1) * 3 + c];
          const double d = v - cur[(y * W + xx) * 3 + c];
          e += mean_abs ? std::abs(d) : d * d;
        }
        err += m * e / 3.0;
        weight += m;
      }
    }
    if (weight > 0) {
      total += err / weight;
      ++pairs;
    }
  }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((m + m.transpose()) / 2);
  Eigen::VectorXd v = eig.eigenvalues();
  for (int i = 0; i < v.size(); ++i) {
    if (v(i) < -1e-8) throw NumericError("covariance has a negative eigenvalue " + std::to_string(v(i)));
    v(i) = std::sqrt(std::max(0.0, v(i)));
  }
  return eig.eigenvectors() * v.asDiagonal() * eig.eigenvectors().transpose();
}

// Tr((ΣaΣb)^{1/2}) = Tr((√Σa Σb √Σa)^{1/2})
double trace_sqrt_product(const Eigen::MatrixXd& sa, const Eigen::MatrixXd& sb) {
  const Eigen::MatrixXd r = psd_sqrt(sa);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r * sb * r);
  double tr = 0;
  for (int i = 0; i < eig.eigenvalues().size(); ++i) tr += std::sqrt(std::max(0.0, eig.eigenvalues()(i)));
  return tr;
}

}  // namespace

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() < 2 || b.rows() < 2) throw InputError("Fréchet distance needs at least two feature vectors per set");
  if (a.cols() != b.cols()) throw InputError("feature sets differ in width");
  auto stats = [](const Eigen::MatrixXd& x) {
    Eigen::VectorXd mu = x.colwise().mean();
    Eigen::MatrixXd c = x.rowwise() - mu.transpose();
    Eigen::MatrixXd cov = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
    return std::make_pair(mu, cov);
  };
  const auto [ma, sa] = stats(a);
  const auto [mb, sb] = stats(b);
  if (!sa.allFinite() || !sb.allFinite() || !ma.allFinite() || !mb.allFinite()) {
    throw NumericError("non-finite feature statistics");
  }
  // Averaging both orders makes the value exactly symmetric in its arguments.
  const double tr = 0.5 * (trace_sqrt_product(sa, sb) + trace_sqrt_product(sb, sa));
  const double d = (ma - mb).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr;
  return std::max(0.0, d);
}

CropWindow actor_window(std::span<const alignment::BBox2D> boxes, int64_t height, int64_t width, double margin) {
  if (boxes.empty()) throw InputError("actor crop needs at least one box");
  alignment::BBox2D u = boxes[0];
  for (const auto& b : boxes) {
    if (!b.valid()) throw InputError("invalid box in actor crop");
    u.x_min = std::min(u.x_min, b.x_min);
    u.y_min = std::min(u.y_min, b.y_min);
    u.x_max = std::max(u.x_max, b.x_max);
    u.y_max = std::max(u.y_max, b.y_max);
  }
  const double mx = margin * u.width(), my = margin * u.height();
  CropWindow w;
  w.x0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(u.x_min - mx)), 0, width);
  w.y0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(u.y_min - my)), 0, height);
  w.x1 = std::clamp<int64_t>(static_cast<int64_t>(std::ceil(u.x_max + mx)), 0, width);
  w.y1 = std::clamp<int64_t>(static_cast<int64_t>(std::ceil(u.y_max + my)), 0, height);
  if (w.x1 <= w.x0 || w.y1 <= w.y0) throw InputError("actor crop window is empty after clamping");
  return w;
}

torch::Tensor crop(const VideoClip& clip, const CropWindow& w) {
  return clip.frames().slice(1, w.y0, w.y1).slice(2, w.x0, w.x1).contiguous();
}

torch::Tensor actor_crop(const VideoClip& clip, std::span<const alignment::BBox2D> boxes, double margin) {
  return crop(clip, actor_window(boxes, clip.height(), clip.width(), margin));
}

VideoFeatureNetImpl::VideoFeatureNetImpl(uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  const std::vector<std::pair<int64_t, int64_t>> io{{3, 8}, {8, 16}, {16, 16}};
  for (size_t k = 0; k < io.size(); ++k) {
    const double std = 1.0 / std::sqrt(static_cast<double>(io[k].first * 27));
    weights.push_back(register_buffer("weight" + std::to_string(k),
                                      at::normal(0.0, std, {io[k].second, io[k].first, 3, 3, 3}, gen, torch::kDouble)));
  }
}

Eigen::VectorXd VideoFeatureNetImpl::features(const VideoClip& clip) { return features(clip.frames()); }

Eigen::VectorXd VideoFeatureNetImpl::features(const torch::Tensor& frames) {
  torch::NoGradGuard no_grad;
  // [T,H,W,3] in [0,1] → [1,3,T,H,W] in [-1,1]
  auto h = (frames.to(torch::kDouble).permute({3, 0, 1, 2}).unsqueeze(0) * 2.0 - 1.0).contiguous();
  std::vector<torch::Tensor> pooled;
  for (const auto& w : weights) {
    const int64_t st = h.size(2) >= 3 ? 2 : 1;
    h = torch::tanh(torch::conv3d(h, w, {}, {st, 2, 2}, {1, 1, 1}));
    pooled.push_back(h.mean({0, 2, 3, 4}));
  }
  auto f = torch::cat(pooled).contiguous();
  return Eigen::Map<const Eigen::VectorXd>(f.data_ptr<double>(), f.numel());
}

}  // namespace mirage::metrics

// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#include "mirage/alignment/similarity.hpp"

#include <cmath>
#include <sstream>

#include "mirage/core/error.hpp"

namespace mirage::alignment {

CenterMoments center_moments(const GaussianSet& set) {
  if (set.empty()) throw InputError("empty gaussian set");
  CenterMoments m;
  for (const auto& g : set) {
    m.total_weight += g.opacity;
    m.mean += g.opacity * g.center;
  }
  m.mean /= m.total_weight;
  for (const auto& g : set) {
    const Eigen::Vector3d d = g.center - m.mean;
    m.covariance += g.opacity * d * d.transpose();
  }
  m.covariance /= m.total_weight;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(m.covariance);
  const double top = eig.eigenvalues()(2);
  for (int k = 0; k < 3; ++k) {
    const double lam = eig.eigenvalues()(2 - k);
    m.variances(k) = lam;
    m.axes.col(k) = eig.eigenvectors().col(2 - k);
  }
  for (int k = 0; k < 3; ++k) {
    if (!(m.variances(k) > 1e-12 * std::max(top, 1e-300))) {
      std::ostringstream os;
      const Eigen::Vector3d a = m.axes.col(k);
      os << "covariance rank < 3: principal axis " << k << " (direction " << a.x() << ", " << a.y() << ", "
         << a.z() << ") has variance " << m.variances(k);
      throw DegeneracyError(os.str());
    }
  }
  for (int k = 0; k < 3; ++k) {
    double s3 = 0;
    for (const auto& g : set) s3 += g.opacity * std::pow((g.center - m.mean).dot(m.axes.col(k)), 3);
    s3 /= m.total_weight;
    if (s3 < 0) {
      m.axes.col(k) = -m.axes.col(k);
      s3 = -s3;
    }
    m.skew(k) = s3;
  }
  return m;
}

SimilarityTransform estimate_similarity(const GaussianSet& asset, const GaussianSet& object) {
  const CenterMoments a = center_moments(asset);
  CenterMoments o = center_moments(object);
  SimilarityTransform T;
  T.R = o.axes * a.axes.transpose();
  if (T.R.determinant() < 0) {
    // A reflection remains; flip the axis whose sign is least determined.
    int weakest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      const double sk = std::min(a.skew(k) / std::pow(a.variances(k), 1.5), o.skew(k) / std::pow(o.variances(k), 1.5));
      if (sk < best) best = sk, weakest = k;
    }
    o.axes.col(weakest) = -o.axes.col(weakest);
    T.R = o.axes * a.axes.transpose();
  }
  T.s = std::sqrt(o.covariance.trace() / a.covariance.trace());
  T.t = o.mean - T.s * (T.R * a.mean);
  return T;
}

SimilarityTransform estimate_similarity_corresponding(const GaussianSet& asset, const GaussianSet& object) {
  if (asset.empty()) throw InputError("empty gaussian set");
  if (asset.size() != object.size()) throw InputError("corresponding sets must have equal sizes");
  const size_t n = asset.size();
  double wsum = 0;
  Eigen::Vector3d ma = Eigen::Vector3d::Zero(), mo = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    const double w = object[i].opacity;
    wsum += w;
    ma += w * asset[i].center;
    mo += w * object[i].center;
  }
  ma /= wsum;
  mo /= wsum;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_a = 0;
  for (size_t i = 0; i < n; ++i) {
    const double w = object[i].opacity / wsum;
    const Eigen::Vector3d da = asset[i].center - ma, dob = object[i].center - mo;
    cov += w * dob * da.transpose();
    var_a += w * da.squaredNorm();
  }
  if (!(var_a > 0)) throw DegeneracyError("asset centers coincide");
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) S(2, 2) = -1;
  SimilarityTransform T;
  T.R = svd.matrixU() * S * svd.matrixV().transpose();
  T.s = (svd.singularValues().asDiagonal() * S).trace() / var_a;
  T.t = mo - T.s * (T.R * ma);
  return T;
}

}  // namespace mirage::alignment

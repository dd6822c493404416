/*
 * Copyright 2026 The ehsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef EHSGD_OBJECTIVE_HPP_
#define EHSGD_OBJECTIVE_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ehsgd/error.hpp"
#include "ehsgd/random.hpp"
#include "ehsgd/vector_ops.hpp"

namespace ehsgd {

/// l(w, x) = 1/2 ||w - x||^2. Labels are ignored.
struct QuadraticLoss {};

/// l(w, x) = log(1 + exp(-y w.x)) + lambda/2 ||w||^2 with y in {-1, +1}.
/// The ridge term sits inside the per-point loss so the pooled average and
/// the p-weighted average of local losses coincide.
struct RegularizedLogisticLoss {
  double lambda = 0.1;
};

using LossKind = std::variant<QuadraticLoss, RegularizedLogisticLoss>;

struct DataPoint {
  ModelVector features;
  double label = 0.0;
};

struct LocalDataset {
  std::uint32_t user_id = 0;
  std::vector<DataPoint> points;
};

/// Problem constants consumed by the convergence bound. G and sigma are
/// stored as roots; the estimator works with squares.
struct ProblemConstants {
  double mu = 0.0;
  double L = 0.0;
  double G = 0.0;
  double sigma = 0.0;
};

struct ConstantsSpec {
  double radius = 1.0;          // ball radius R around w*
  std::size_t samples = 256;    // model points drawn in the ball
  std::uint64_t seed = 0;
  double safety_factor = 1.1;
};

struct Optimum {
  ModelVector w;
  double loss = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

class Objective {
 public:
  Objective(LossKind loss, std::vector<LocalDataset> datasets)
      : loss_(loss), datasets_(std::move(datasets)) {
    if (datasets_.empty()) throw Error(ErrorKind::kInvalidSpec, "objective needs at least one user");
    if (const auto* lg = std::get_if<RegularizedLogisticLoss>(&loss_); lg && !(lg->lambda > 0.0)) {
      throw Error(ErrorKind::kInvalidSpec, "logistic lambda must be > 0");
    }
    dim_ = datasets_.front().points.empty() ? 0 : datasets_.front().points.front().features.size();
    std::size_t total = 0;
    for (const auto& ds : datasets_) {
      if (ds.points.empty()) {
        throw Error(ErrorKind::kInvalidSpec, "user " + std::to_string(ds.user_id) + " has no data");
      }
      for (const auto& pt : ds.points) {
        require_same_dim(pt.features.size(), dim_, "data point");
        for (double v : pt.features) {
          if (!std::isfinite(v)) throw Error(ErrorKind::kInvalidSpec, "non-finite feature");
        }
      }
      total += ds.points.size();
    }
    if (dim_ == 0) throw Error(ErrorKind::kInvalidSpec, "feature dimension must be >= 1");
    total_points_ = total;
    weights_.reserve(datasets_.size());
    for (const auto& ds : datasets_) {
      weights_.push_back(static_cast<double>(ds.points.size()) / static_cast<double>(total));
    }
  }

  const LossKind& loss_kind() const noexcept { return loss_; }
  std::size_t num_users() const noexcept { return datasets_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t total_points() const noexcept { return total_points_; }
  const std::vector<LocalDataset>& datasets() const noexcept { return datasets_; }
  const LocalDataset& dataset(std::size_t i) const { return datasets_.at(i); }

  /// p_i = D_i / D.
  double weight(std::size_t i) const { return weights_.at(i); }
  const std::vector<double>& weights() const noexcept { return weights_; }

  double point_loss(std::span<const double> w, const DataPoint& x) const {
    require_same_dim(w.size(), dim_, "point_loss");
    if (std::holds_alternative<QuadraticLoss>(loss_)) {
      return 0.5 * squared_distance(w, x.features);
    }
    const double lambda = std::get<RegularizedLogisticLoss>(loss_).lambda;
    return detail::softplus(-x.label * dot(w, x.features)) + 0.5 * lambda * squared_norm(w);
  }

  /// Adds scale * grad l(w, x) into out.
  void accumulate_point_gradient(std::span<const double> w, const DataPoint& x, double scale,
                                 std::span<double> out) const {
    require_same_dim(w.size(), dim_, "point_gradient");
    if (std::holds_alternative<QuadraticLoss>(loss_)) {
      for (std::size_t k = 0; k < dim_; ++k) out[k] += scale * (w[k] - x.features[k]);
      return;
    }
    const double lambda = std::get<RegularizedLogisticLoss>(loss_).lambda;
    const double coeff = -x.label * detail::sigmoid(-x.label * dot(w, x.features));
    for (std::size_t k = 0; k < dim_; ++k) {
      out[k] += scale * (coeff * x.features[k] + lambda * w[k]);
    }
  }

  ModelVector point_gradient(std::span<const double> w, const DataPoint& x) const {
    ModelVector g(dim_, 0.0);
    accumulate_point_gradient(w, x, 1.0, g);
    return g;
  }

  /// F_i(w) = (1/D_i) sum_j l(w, x_ij)
  double local_loss(std::size_t i, std::span<const double> w) const {
    const auto& pts = dataset(i).points;
    double s = 0.0;
    for (const auto& pt : pts) s += point_loss(w, pt);
    return s / static_cast<double>(pts.size());
  }

  /// F(w) = sum_i p_i F_i(w)
  double global_loss(std::span<const double> w) const {
    double s = 0.0;
    for (std::size_t i = 0; i < num_users(); ++i) s += weights_[i] * local_loss(i, w);
    return s;
  }

  ModelVector local_gradient(std::size_t i, std::span<const double> w) const {
    const auto& pts = dataset(i).points;
    ModelVector g(dim_, 0.0);
    const double scale = 1.0 / static_cast<double>(pts.size());
    for (const auto& pt : pts) accumulate_point_gradient(w, pt, scale, g);
    return g;
  }

  ModelVector global_gradient(std::span<const double> w) const {
    ModelVector g(dim_, 0.0);
    for (std::size_t i = 0; i < num_users(); ++i) axpy(weights_[i], local_gradient(i, w), g);
    return g;
  }

  /// Index of the data point drawn by `stream` for user i.
  std::size_t sample_index(std::size_t i, CounterStream& stream) const {
    return static_cast<std::size_t>(stream.uniform_index(dataset(i).points.size()));
  }

  /// Gradient of l at one uniformly drawn local point.
  ModelVector stochastic_gradient(std::size_t i, std::span<const double> w,
                                  CounterStream& stream) const {
    return point_gradient(w, dataset(i).points[sample_index(i, stream)]);
  }

  /// Same draw addressed by (seed, user, kDataSample, t).
  ModelVector stochastic_gradient(std::size_t i, std::span<const double> w, std::uint64_t seed,
                                  std::uint64_t t) const {
    CounterStream stream(seed, dataset(i).user_id, Purpose::kDataSample, t);
    return stochastic_gradient(i, w, stream);
  }

  /// Smoothness of F_i: 1 for the quadratic loss, otherwise
  /// lambda + lambda_max(E_i[x x^T]) / 4.
  double local_smoothness(std::size_t i) const {
    if (std::holds_alternative<QuadraticLoss>(loss_)) return 1.0;
    const double lambda = std::get<RegularizedLogisticLoss>(loss_).lambda;
    const auto& pts = dataset(i).points;
    const auto d = static_cast<Eigen::Index>(dim_);
    Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(d, d);
    for (const auto& pt : pts) {
      const Eigen::Map<const Eigen::VectorXd> x(pt.features.data(), d);
      moment.noalias() += x * x.transpose();
    }
    moment /= static_cast<double>(pts.size());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moment, Eigen::EigenvaluesOnly);
    return lambda + eig.eigenvalues().maxCoeff() / 4.0;
  }

  double local_strong_convexity(std::size_t /*i*/) const {
    if (std::holds_alternative<QuadraticLoss>(loss_)) return 1.0;
    return std::get<RegularizedLogisticLoss>(loss_).lambda;
  }

 private:
  LossKind loss_;
  std::vector<LocalDataset> datasets_;
  std::vector<double> weights_;
  std::size_t dim_ = 0;
  std::size_t total_points_ = 0;
};

/// w* and F(w*). Closed form for the quadratic loss (pooled mean); full-batch
/// gradient descent with step 1/L for the logistic loss, stopping once
/// ||grad F|| <= tolerance.
inline Optimum solve_optimum(const Objective& obj, double tolerance = 1e-10,
                             std::size_t max_iterations = 1'000'000) {
  const std::size_t d = obj.dim();
  Optimum opt;
  opt.w.assign(d, 0.0);
  if (std::holds_alternative<QuadraticLoss>(obj.loss_kind())) {
    for (std::size_t i = 0; i < obj.num_users(); ++i) {
      const auto& pts = obj.dataset(i).points;
      const double scale = obj.weight(i) / static_cast<double>(pts.size());
      for (const auto& pt : pts) axpy(scale, pt.features, opt.w);
    }
    opt.loss = obj.global_loss(opt.w);
    return opt;
  }
  double smooth = 0.0;
  for (std::size_t i = 0; i < obj.num_users(); ++i) smooth = std::max(smooth, obj.local_smoothness(i));
  const double step = 1.0 / smooth;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const ModelVector g = obj.global_gradient(opt.w);
    if (norm(g) <= tolerance) {
      opt.iterations = it;
      opt.loss = obj.global_loss(opt.w);
      return opt;
    }
    axpy(-step, g, opt.w);
  }
  throw Error(ErrorKind::kNonConvergence,
              "gradient descent did not reach ||grad|| <= tolerance within the iteration budget");
}

/// mu and L are the min / max of the per-user moduli. G^2 and sigma^2 are the
/// largest per-point squared gradient norm and the largest per-user gradient
/// variance observed over w* plus `samples` points of the ball of radius R
/// around w* (half on the sphere, half inside), each inflated by the safety
/// factor.
inline ProblemConstants estimate_constants(const Objective& obj, const ModelVector& w_star,
                                           const ConstantsSpec& spec) {
  require_same_dim(w_star.size(), obj.dim(), "estimate_constants");
  ProblemConstants c;
  c.mu = obj.local_strong_convexity(0);
  c.L = 0.0;
  for (std::size_t i = 0; i < obj.num_users(); ++i) {
    c.mu = std::min(c.mu, obj.local_strong_convexity(i));
    c.L = std::max(c.L, obj.local_smoothness(i));
  }

  const std::size_t d = obj.dim();
  double g2_max = 0.0;
  double var_max = 0.0;
  auto probe = [&](const ModelVector& w) {
    for (std::size_t i = 0; i < obj.num_users(); ++i) {
      const auto& pts = obj.dataset(i).points;
      const ModelVector mean = obj.local_gradient(i, w);
      double var = 0.0;
      for (const auto& pt : pts) {
        const ModelVector g = obj.point_gradient(w, pt);
        g2_max = std::max(g2_max, squared_norm(g));
        var += squared_distance(g, mean);
      }
      var_max = std::max(var_max, var / static_cast<double>(pts.size()));
    }
  };

  probe(w_star);
  for (std::size_t s = 0; s < spec.samples; ++s) {
    CounterStream stream(spec.seed, 0, Purpose::kConstants, s);
    ModelVector dir(d);
    double len = 0.0;
    while (len == 0.0) {
      for (auto& v : dir) v = stream.normal();
      len = norm(dir);
    }
    double radius = spec.radius;
    if (s % 2 == 1) radius *= std::pow(stream.uniform01(), 1.0 / static_cast<double>(d));
    ModelVector w = w_star;
    axpy(radius / len, dir, w);
    probe(w);
  }
  c.G = std::sqrt(spec.safety_factor * g2_max);
  c.sigma = std::sqrt(spec.safety_factor * var_max);
  return c;
}

enum class PartitionMode { kIid, kGroupLabelSkew };

/// Synthetic two-class data. Class c in {0, 1} has label y = 2c - 1 and
/// centre y * separation * e_1; features are centre + N(0, I). The logistic
/// loss prepends a constant 1 intercept feature (so `dim` counts it).
///
/// kIid pools N * points_per_user points with fair-coin classes and deals
/// them to users through a seeded shuffle. kGroupLabelSkew puts user i in
/// group i mod num_groups and gives group k a class-0 share that falls
/// linearly from `skew` (group 0) to 1 - skew (last group).
struct SyntheticSpec {
  std::size_t num_users = 1;
  std::size_t dim = 1;
  std::size_t points_per_user = 1;
  PartitionMode mode = PartitionMode::kIid;
  LossKind loss = QuadraticLoss{};
  std::size_t num_groups = 4;
  double skew = 0.9;
  double separation = 1.0;
};

inline double class0_share(const SyntheticSpec& spec, std::size_t group) {
  if (spec.num_groups <= 1) return spec.skew;
  const double frac = static_cast<double>(group) / static_cast<double>(spec.num_groups - 1);
  return spec.skew - (2.0 * spec.skew - 1.0) * frac;
}

namespace detail {

inline DataPoint synth_point(const SyntheticSpec& spec, int cls, CounterStream& stream) {
  DataPoint pt;
  pt.label = cls == 1 ? 1.0 : -1.0;
  const bool intercept = std::holds_alternative<RegularizedLogisticLoss>(spec.loss);
  if (intercept) pt.features.push_back(1.0);
  const std::size_t free_dims = spec.dim - (intercept ? 1 : 0);
  for (std::size_t k = 0; k < free_dims; ++k) {
    const double centre = k == 0 ? pt.label * spec.separation : 0.0;
    pt.features.push_back(centre + stream.normal());
  }
  return pt;
}

}  // namespace detail

inline Objective make_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  const bool intercept = std::holds_alternative<RegularizedLogisticLoss>(spec.loss);
  if (spec.num_users == 0 || spec.points_per_user == 0 || spec.dim == 0) {
    throw Error(ErrorKind::kInvalidSpec, "num_users, points_per_user and dim must be >= 1");
  }
  if (intercept && spec.dim < 2) {
    throw Error(ErrorKind::kInvalidSpec, "logistic data needs dim >= 2 (intercept + features)");
  }
  if (spec.mode == PartitionMode::kGroupLabelSkew &&
      (spec.num_groups == 0 || !(spec.skew >= 0.5 && spec.skew <= 1.0))) {
    throw Error(ErrorKind::kInvalidSpec, "label skew needs num_groups >= 1 and skew in [0.5, 1]");
  }

  std::vector<LocalDataset> datasets(spec.num_users);
  for (std::size_t i = 0; i < spec.num_users; ++i) datasets[i].user_id = static_cast<std::uint32_t>(i);

  if (spec.mode == PartitionMode::kIid) {
    const std::size_t total = spec.num_users * spec.points_per_user;
    std::vector<DataPoint> pool;
    pool.reserve(total);
    for (std::size_t k = 0; k < total; ++k) {
      CounterStream stream(seed, 0, Purpose::kSynthetic, k);
      const int cls = stream.bernoulli(0.5) ? 1 : 0;
      pool.push_back(detail::synth_point(spec, cls, stream));
    }
    for (std::size_t k = total; k > 1; --k) {
      CounterStream stream(seed, 1, Purpose::kSynthetic, k);
      std::swap(pool[k - 1], pool[static_cast<std::size_t>(stream.uniform_index(k))]);
    }
    for (std::size_t k = 0; k < total; ++k) {
      datasets[k / spec.points_per_user].points.push_back(std::move(pool[k]));
    }
  } else {
    for (std::size_t i = 0; i < spec.num_users; ++i) {
      const double share = class0_share(spec, i % spec.num_groups);
      const auto n0 = static_cast<std::size_t>(
          std::lround(share * static_cast<double>(spec.points_per_user)));
      for (std::size_t j = 0; j < spec.points_per_user; ++j) {
        CounterStream stream(seed, static_cast<std::uint32_t>(i + 2), Purpose::kSynthetic, j);
        datasets[i].points.push_back(detail::synth_point(spec, j < n0 ? 0 : 1, stream));
      }
    }
  }
  return Objective(spec.loss, std::move(datasets));
}

/// One row per point: user_id, f0..f{d-1}, label.
inline void write_dataset_csv(const Objective& obj, std::ostream& os) {
  os << "user_id";
  for (std::size_t k = 0; k < obj.dim(); ++k) os << ",f" << k;
  os << ",label\n";
  os.precision(17);
  for (const auto& ds : obj.datasets()) {
    for (const auto& pt : ds.points) {
      os << ds.user_id;
      for (double v : pt.features) os << ',' << v;
      os << ',' << pt.label << '\n';
    }
  }
}

}  // namespace ehsgd

#endif  // EHSGD_OBJECTIVE_HPP_
